//! Config-driven experiment runner: strategies × sequences × seeds, with
//! mean ± std aggregation and CSV/JSON reports.

mod config;
mod report;
mod run;

pub use config::{
    BenchmarkConfig, ExperimentConfig, ManifestBenchmark, ManifestDomain, SequenceSpec, SCHEMA_VERSION,
};
pub use report::{
    CellReport, FidelityCell, LoglikCell, MeanStd, MetricAggregate, RunReport, ALL_SEQUENCES,
};
pub use run::{prepare_domains, run_experiment, run_experiment_file, write_outputs, RunOptions};
