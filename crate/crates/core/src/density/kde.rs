//! The incremental KDE latent generator.
//!
//! Support points are the retained cluster centers of every domain seen so
//! far; the kernel is an isotropic Gaussian with one Silverman bandwidth.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, LatentGenerator, LN_2PI};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Silverman's rule of thumb with an isotropic kernel:
/// `B = σ̄ · (4 / ((d + 2) n))^(1 / (d + 4))`, where `σ̄` is the mean of the
/// per-dimension sample standard deviations (denominator `n − 1`).
pub fn silverman_bandwidth(points: ArrayView2<f64>) -> Result<f64> {
    let (n, d) = points.dim();
    if n < 2 {
        return Err(Error::invalid(format!(
            "silverman bandwidth needs at least 2 points, got {n}"
        )));
    }
    let mean = points.mean_axis(Axis(0)).expect("n >= 2");
    let mut sigma_sum = 0.0;
    for (j, col) in points.axis_iter(Axis(1)).enumerate() {
        let ss: f64 = col.iter().map(|x| (x - mean[j]) * (x - mean[j])).sum();
        sigma_sum += (ss / (n - 1) as f64).sqrt();
    }
    if sigma_sum == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sigma = sigma_sum / d as f64;
    let (n, d) = (n as f64, d as f64);
    Ok(sigma * (4.0 / ((d + 2.0) * n)).powf(1.0 / (d + 4.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeGenerator {
    /// `N × d` kernel centers.
    #[serde(with = "super::nested_rows")]
    support: Array2<f64>,
    bandwidth: f64,
    per_task_counts: Vec<usize>,
}

impl KdeGenerator {
    /// Builds a generator from one batch of centers.
    pub fn new(centers: Array2<f64>) -> Result<Self> {
        Self::update(None, centers.view())
    }

    /// Appends a domain's centers and recomputes the bandwidth over the union.
    ///
    /// A single support point has bandwidth 0 (a point mass); the rule needs
    /// two points.
    pub fn update(prev: Option<&KdeGenerator>, new_centers: ArrayView2<f64>) -> Result<Self> {
        if new_centers.nrows() == 0 {
            return Err(Error::Empty("new centers"));
        }
        let (support, mut counts) = match prev {
            Some(p) => {
                if p.dim() != new_centers.ncols() {
                    return Err(Error::DimensionMismatch {
                        expected: p.dim(),
                        found: new_centers.ncols(),
                    });
                }
                let s = concatenate(Axis(0), &[p.support.view(), new_centers])
                    .expect("column counts checked");
                (s, p.per_task_counts.clone())
            }
            None => (new_centers.to_owned(), Vec::new()),
        };
        counts.push(new_centers.nrows());
        let bandwidth = if support.nrows() >= 2 {
            silverman_bandwidth(support.view())?
        } else {
            0.0
        };
        Ok(Self {
            support,
            bandwidth,
            per_task_counts: counts,
        })
    }

    /// Replaces the bandwidth (e.g. to probe the degenerate kernel).
    pub fn with_bandwidth(mut self, bandwidth: f64) -> Result<Self> {
        if !(bandwidth >= 0.0) || !bandwidth.is_finite() {
            return Err(Error::invalid("bandwidth must be finite and >= 0"));
        }
        self.bandwidth = bandwidth;
        Ok(self)
    }

    pub fn support(&self) -> &Array2<f64> {
        &self.support
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn per_task_counts(&self) -> &[usize] {
        &self.per_task_counts
    }

    pub fn len(&self) -> usize {
        self.support.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.support.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.support.ncols()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        self.sample_with(n, &mut rng::stream(seed, &[rng::tag::REPLAY]))
    }

    /// Mean log-density of `points`:
    /// `log[(1/N) Σ_i N(x; support_i, B²I)]`, averaged over rows.
    pub fn log_likelihood(&self, points: ArrayView2<f64>) -> Result<f64> {
        if points.nrows() == 0 {
            return Err(Error::Empty("evaluation points"));
        }
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: points.ncols(),
            });
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("log-density needs a positive bandwidth"));
        }
        let d = self.dim() as f64;
        let b2 = self.bandwidth * self.bandwidth;
        let norm = -0.5 * d * (LN_2PI + b2.ln()) - (self.len() as f64).ln();
        let mut terms = vec![0.0; self.len()];
        let total: f64 = points
            .outer_iter()
            .map(|x| {
                for (t, s) in terms.iter_mut().zip(self.support.outer_iter()) {
                    *t = -super::kmeans::sq_dist(x, s) / (2.0 * b2);
                }
                norm + log_sum_exp(&terms)
            })
            .sum();
        Ok(total / points.nrows() as f64)
    }
}

impl LatentGenerator for KdeGenerator {
    fn dim(&self) -> usize {
        self.support.ncols()
    }

    /// Each draw: a uniformly chosen support row plus `B · ε`, `ε ~ N(0, I)`.
    fn sample_with(&self, n: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        if self.is_empty() {
            return Err(Error::Empty("generator has no support points"));
        }
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.outer_iter_mut() {
            let i = rng.random_range(0..self.len());
            for (x, c) in row.iter_mut().zip(self.support.row(i)) {
                let eps: f64 = StandardNormal.sample(rng);
                *x = c + self.bandwidth * eps;
            }
        }
        Ok(out)
    }

    fn log_likelihood(&self, points: ArrayView2<f64>) -> Result<f64> {
        KdeGenerator::log_likelihood(self, points)
    }
}
