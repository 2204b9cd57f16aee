//! The trainable fully connected head used as student and teacher.

mod loss;
mod mlp;
mod optim;

pub use loss::{
    log_softmax_rows, loss_and_grad, softmax_rows, KlDirection, LossBreakdown,
};
pub use mlp::{Activation, Checkpoint, MlpClassifier, Params, DEFAULT_HIDDEN};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};

use ndarray::ArrayView2;

use crate::error::Result;

/// Row-wise argmax; ties go to the smallest class index.
pub fn argmax_rows(logits: ArrayView2<f64>) -> Vec<usize> {
    logits
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

pub fn predict(model: &MlpClassifier, batch: ArrayView2<f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(model.forward(batch)?.view()))
}

/// Percentage of correctly classified samples, in `[0, 100]`.
pub fn accuracy(model: &MlpClassifier, dataset: &crate::store::LatentDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(crate::Error::Empty("accuracy on an empty dataset"));
    }
    let pred = predict(model, dataset.features().view())?;
    let correct = pred.iter().zip(dataset.labels()).filter(|(p, l)| p == l).count();
    Ok(100.0 * correct as f64 / dataset.len() as f64)
}
