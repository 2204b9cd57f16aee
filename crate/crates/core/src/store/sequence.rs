use serde::{Deserialize, Serialize};

use super::DomainData;
use crate::error::{Error, Result};

/// Ordered train/test episodes sharing one label set and latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSequence {
    pub name: String,
    pub episodes: Vec<DomainData>,
}

impl EpisodeSequence {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.episodes[0].train.dim()
    }

    pub fn class_count(&self) -> usize {
        self.episodes[0].train.class_count
    }
}

/// Arranges `domains` in `order`. Indices must be distinct and in range; a
/// shorter order yields a prefix-style subsequence.
pub fn build_sequence(
    name: impl Into<String>,
    domains: &[DomainData],
    order: &[usize],
) -> Result<EpisodeSequence> {
    if order.is_empty() {
        return Err(Error::Empty("sequence order"));
    }
    let mut seen = vec![false; domains.len()];
    for &i in order {
        if i >= domains.len() || std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!(
                "order {order:?} is not a permutation of domain indices 0..{}",
                domains.len()
            )));
        }
    }
    let first = &domains[order[0]].train;
    for &i in order {
        for ds in [&domains[i].train, &domains[i].test] {
            if ds.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: ds.dim(),
                });
            }
            if ds.class_count != first.class_count {
                return Err(Error::invalid(format!(
                    "domain {} has {} classes, expected {}",
                    ds.domain_id, ds.class_count, first.class_count
                )));
            }
        }
    }
    Ok(EpisodeSequence {
        name: name.into(),
        episodes: order.iter().map(|&i| domains[i].clone()).collect(),
    })
}
