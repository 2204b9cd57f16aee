//! The episode loop: strategies, hybrid batch assembly, pseudo-labelling and
//! generator maintenance.

mod batch;
mod buffer;
mod config;
mod episode;
mod sequence;

pub use batch::{assemble_hybrid_batch, batch_plan, pseudo_label, replay_count, BatchPlan, HybridBatch};
pub use buffer::ReservoirBuffer;
pub use config::{StrategyConfig, StrategyKind};
pub use episode::{train_episode, update_replay, EpisodeOutcome, ReplayState};
pub use sequence::{run_sequence, SequenceRun};
