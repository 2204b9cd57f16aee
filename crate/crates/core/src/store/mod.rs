//! Latent datasets, ingestion, synthetic benchmarks and episode sequencing.

mod io;
mod sequence;
mod split;
mod synth;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, save_dataset, DatasetManifest};
pub use sequence::{build_sequence, EpisodeSequence};
pub use split::{balance_classes, make_split};
pub use synth::{
    random_rotation, synthesize_benchmark, synthesize_domain, BenchmarkSpec, DomainSpec,
    DomainTransform,
};

/// Labeled latent vectors from a single domain.
///
/// `features` is `n × dim`, row `i` labeled `labels[i] < class_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDataset {
    pub domain_id: String,
    pub class_count: usize,
    features: Array2<f64>,
    labels: Vec<usize>,
}

impl LatentDataset {
    pub fn new(
        domain_id: impl Into<String>,
        class_count: usize,
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::invalid("class_count must be positive"));
        }
        if features.ncols() == 0 {
            return Err(Error::invalid("latent dimension must be positive"));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::invalid(format!(
                "sample {i}: label {l} >= class_count {class_count}"
            )));
        }
        if let Some((i, _)) = features
            .axis_iter(Axis(0))
            .enumerate()
            .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid(format!("sample {i}: non-finite feature")));
        }
        Ok(Self {
            domain_id: domain_id.into(),
            class_count,
            features,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Training splits must cover every declared class.
    pub fn check_class_coverage(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(class) => Err(Error::InsufficientSamples {
                class,
                available: 0,
                requested: 0,
            }),
            None => Ok(()),
        }
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            domain_id: self.domain_id.clone(),
            class_count: self.class_count,
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Row-wise concatenation; all parts must agree on dim and class_count.
    pub fn concat(domain_id: impl Into<String>, parts: &[&LatentDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("no datasets to concatenate"))?;
        for p in parts {
            if p.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: p.dim(),
                });
            }
            if p.class_count != first.class_count {
                return Err(Error::invalid("class_count differs between datasets"));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
        Ok(Self {
            domain_id: domain_id.into(),
            class_count: first.class_count,
            features,
            labels,
        })
    }
}

/// One domain's train/test pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainData {
    pub train: LatentDataset,
    pub test: LatentDataset,
}
