use super::config::{StrategyConfig, StrategyKind};
use super::episode::{train_episode, EpisodeOutcome, ReplayState};
use crate::classifier::{LossBreakdown, MlpClassifier};
use crate::error::{Error, Result};
use crate::metrics::TrainTestMatrix;
use crate::store::{EpisodeSequence, LatentDataset};

#[derive(Debug, Clone)]
pub struct SequenceRun {
    pub matrix: TrainTestMatrix,
    /// Replay source after each episode (a single entry for joint training).
    pub replay_states: Vec<ReplayState>,
    pub epoch_losses: Vec<Vec<LossBreakdown>>,
    pub final_model: MlpClassifier,
}

/// Trains through the sequence, evaluating on every test set after each
/// episode. Joint training fits one model on the union of all train sets and
/// defines only the last row.
pub fn run_sequence(seq: &EpisodeSequence, cfg: &StrategyConfig) -> Result<SequenceRun> {
    cfg.validate()?;
    if seq.is_empty() {
        return Err(Error::Empty("episode sequence"));
    }
    let t = seq.len();
    if cfg.kind == StrategyKind::LatentBuffer && cfg.buffer_capacity == 0 && t > 1 && cfg.replay_fraction > 0.0 {
        return Err(Error::Config(format!(
            "strategy {}: buffer replay with zero capacity over {t} episodes",
            cfg.label()
        )));
    }
    let tests: Vec<&LatentDataset> = seq.episodes.iter().map(|e| &e.test).collect();
    let init = MlpClassifier::with_hidden(seq.dim(), &cfg.hidden_layers, seq.class_count(), cfg.seed)?;
    let mut matrix = TrainTestMatrix::new(t);

    if cfg.kind == StrategyKind::Joint {
        let parts: Vec<&LatentDataset> = seq.episodes.iter().map(|e| &e.train).collect();
        let union = LatentDataset::concat("joint", &parts)?;
        let out = train_episode(init, None, &union, &ReplayState::None, cfg, 0, &tests)?;
        for (j, &a) in out.accuracy_row.iter().enumerate() {
            matrix.set(t - 1, j, a)?;
        }
        return Ok(SequenceRun {
            matrix,
            replay_states: vec![out.replay],
            epoch_losses: vec![out.epoch_losses],
            final_model: out.model,
        });
    }

    let mut teacher: Option<MlpClassifier> = None;
    let mut replay = ReplayState::None;
    let mut replay_states = Vec::with_capacity(t);
    let mut epoch_losses = Vec::with_capacity(t);
    for (i, ep) in seq.episodes.iter().enumerate() {
        let student = teacher.clone().unwrap_or_else(|| init.clone());
        let EpisodeOutcome {
            model,
            replay: next,
            accuracy_row,
            epoch_losses: losses,
        } = train_episode(student, teacher.as_ref(), &ep.train, &replay, cfg, i, &tests)?;
        for (j, &a) in accuracy_row.iter().enumerate() {
            matrix.set(i, j, a)?;
        }
        log::debug!("{} episode {}: {:?}", cfg.label(), i + 1, accuracy_row);
        replay = next;
        replay_states.push(replay.clone());
        epoch_losses.push(losses);
        teacher = Some(model);
    }
    Ok(SequenceRun {
        matrix,
        replay_states,
        epoch_losses,
        final_model: teacher.expect("at least one episode"),
    })
}
