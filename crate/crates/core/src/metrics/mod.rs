//! Continual-learning metrics over the train-test matrix, and fidelity
//! metrics comparing real and generated latent populations.

mod cl;
mod fidelity;
mod sample_metrics;

pub use cl::{acc, bwt, ilm, TrainTestMatrix};
pub use fidelity::{
    fidelity_report, loglik_comparison, FidelityConfig, FidelityReport, FidelityRow, LoglikRow,
    MmdBandwidth,
};
pub use sample_metrics::{
    cosine_avg, euclidean_avg, fid, mmd, mmd_with_estimator, FidMode, MmdEstimator, Pairing,
};
