//! Distillation-regularised cross-entropy:
//! `total = (1 − α) · CE(student, labels) + α · KL(teacher ‖ student)`.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{MlpClassifier, Params};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(p_teacher ‖ p_student)`: pulls the student toward the teacher.
    #[default]
    TeacherStudent,
    /// `KL(p_student ‖ p_teacher)`.
    StudentTeacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub ce: f64,
    pub kld: f64,
    pub alpha: f64,
}

pub fn log_softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|z| z - lse);
    }
    out
}

pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    log_softmax_rows(logits).mapv(f64::exp)
}

/// Loss and parameter gradients for one batch.
///
/// `ce` is the mean softmax cross-entropy against `labels`; `kld` the mean
/// per-sample KL divergence at temperature 1 (0 when no teacher logits are
/// given). Teacher logits are required whenever `alpha > 0`.
pub fn loss_and_grad(
    model: &MlpClassifier,
    batch: ArrayView2<f64>,
    labels: &[usize],
    teacher_logits: Option<ArrayView2<f64>>,
    alpha: f64,
    direction: KlDirection,
) -> Result<(LossBreakdown, Params)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if alpha > 0.0 && teacher_logits.is_none() {
        return Err(Error::invalid("alpha > 0 requires teacher logits"));
    }
    let n = batch.nrows();
    if n == 0 {
        return Err(Error::Empty("training batch"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let classes = model.class_count();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} >= class count {classes}")));
    }
    if let Some(t) = &teacher_logits {
        if t.dim() != (n, classes) {
            return Err(Error::invalid(format!(
                "teacher logits {:?}, expected ({n}, {classes})",
                t.dim()
            )));
        }
    }

    let cache = model.forward_cached(batch)?;
    let log_p = log_softmax_rows(cache.logits.view());
    let p = log_p.mapv(f64::exp);
    let inv_n = 1.0 / n as f64;

    let ce = -labels
        .iter()
        .enumerate()
        .map(|(i, &l)| log_p[[i, l]])
        .sum::<f64>()
        * inv_n;
    let mut d_ce = p.clone();
    for (i, &l) in labels.iter().enumerate() {
        d_ce[[i, l]] -= 1.0;
    }

    let (kld, d_kl) = match teacher_logits {
        Some(t) => {
            let log_q = log_softmax_rows(t);
            let q = log_q.mapv(f64::exp);
            match direction {
                KlDirection::TeacherStudent => {
                    // Σ q (log q − log p); ∂/∂z = p − q.
                    let kl = (&q * &(&log_q - &log_p)).sum() * inv_n;
                    (kl, &p - &q)
                }
                KlDirection::StudentTeacher => {
                    // Σ p (log p − log q); ∂/∂z_k = p_k (r_k − Σ_j p_j r_j), r = log p − log q.
                    let r = &log_p - &log_q;
                    let per_row = (&p * &r).sum_axis(Axis(1));
                    let mut g = &r - &per_row.view().insert_axis(Axis(1));
                    g *= &p;
                    (per_row.sum() * inv_n, g)
                }
            }
        }
        None => (0.0, Array2::zeros((n, classes))),
    };

    let total = (1.0 - alpha) * ce + alpha * kld;
    let d_logits = (d_ce * (1.0 - alpha) + d_kl * alpha) * inv_n;
    let grads = model.backward(&cache, d_logits);
    Ok((
        LossBreakdown {
            total,
            ce,
            kld,
            alpha,
        },
        grads,
    ))
}
