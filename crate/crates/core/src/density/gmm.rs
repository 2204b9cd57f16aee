//! Diagonal-covariance Gaussian mixtures fitted by EM, and the per-domain
//! bank used by GMM-based replay.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_plus_plus;
use super::{log_sum_exp, nested_rows, LatentGenerator, LN_2PI};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    weights: Vec<f64>,
    #[serde(with = "nested_rows")]
    means: Array2<f64>,
    /// Per-component diagonal variances, `M × d`.
    #[serde(with = "nested_rows")]
    covariances: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood evaluated at every E-step.
    pub log_likelihood_history: Vec<f64>,
    pub converged: bool,
    pub variance_floor: f64,
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, means: Array2<f64>, covariances: Array2<f64>) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::Empty("mixture components"));
        }
        if means.nrows() != m || covariances.dim() != means.dim() {
            return Err(Error::invalid(format!(
                "{m} weights but means {:?} and covariances {:?}",
                means.dim(),
                covariances.dim()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights must be a simplex vector (sum {total})")));
        }
        if covariances.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
            || means.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("means must be finite and variances finite and >= 0"));
        }
        Ok(Self {
            weights,
            means,
            covariances,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn covariances(&self) -> &Array2<f64> {
        &self.covariances
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// EM with diagonal covariances from k-means++ seeded means.
    pub fn fit(
        points: ArrayView2<f64>,
        components: usize,
        max_iter: usize,
        tol: f64,
        seed: u64,
    ) -> Result<GmmModel> {
        Ok(Self::fit_with_history(points, components, max_iter, tol, seed)?.model)
    }

    /// Like [`GmmModel::fit`], also returning the per-iteration log-likelihoods.
    ///
    /// Variances are floored at `1e-6 ·` (mean per-dimension data variance).
    /// Stops when the mean log-likelihood changes by less than `tol` or after
    /// `max_iter` M-steps.
    pub fn fit_with_history(
        points: ArrayView2<f64>,
        components: usize,
        max_iter: usize,
        tol: f64,
        seed: u64,
    ) -> Result<GmmFit> {
        let (n, d) = points.dim();
        if components == 0 {
            return Err(Error::invalid("component count must be >= 1"));
        }
        if components > n {
            return Err(Error::invalid(format!(
                "{components} components exceed the {n} points"
            )));
        }
        let data_var = points.var_axis(Axis(0), 0.0);
        let avg_var = data_var.mean().unwrap_or(0.0);
        let floor = if avg_var > 0.0 { 1e-6 * avg_var } else { 1e-12 };

        let mut rng = rng::stream(seed, &[rng::tag::GENERATOR, 0x676d6d]);
        let means = kmeans_plus_plus(points, components, &mut rng);
        let init_var = data_var.mapv(|v| v.max(floor));
        let mut model = GmmModel {
            weights: vec![1.0 / components as f64; components],
            means,
            covariances: Array2::from_shape_fn((components, d), |(_, j)| init_var[j]),
        };

        let mut history: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut resp = Array2::<f64>::zeros((n, components));
        for _ in 0..max_iter {
            let ll = model.e_step(points, &mut resp);
            if let Some(&prev) = history.last() {
                if (ll - prev).abs() < tol {
                    history.push(ll);
                    converged = true;
                    break;
                }
            }
            history.push(ll);
            model.m_step(points, &resp, floor);
        }
        Ok(GmmFit {
            model,
            log_likelihood_history: history,
            converged,
            variance_floor: floor,
        })
    }

    fn component_log_density(&self, k: usize, x: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for ((xi, mu), var) in x.iter().zip(self.means.row(k)).zip(self.covariances.row(k)) {
            let diff = xi - mu;
            acc += LN_2PI + var.ln() + diff * diff / var;
        }
        -0.5 * acc
    }

    /// Fills posterior responsibilities; returns the mean log-likelihood.
    fn e_step(&self, points: ArrayView2<f64>, resp: &mut Array2<f64>) -> f64 {
        let mut total = 0.0;
        let mut terms = vec![0.0; self.components()];
        for (x, mut r) in points.outer_iter().zip(resp.outer_iter_mut()) {
            for (k, t) in terms.iter_mut().enumerate() {
                *t = self.weights[k].ln() + self.component_log_density(k, x);
            }
            let lse = log_sum_exp(&terms);
            for (ri, t) in r.iter_mut().zip(&terms) {
                *ri = (t - lse).exp();
            }
            total += lse;
        }
        total / points.nrows() as f64
    }

    fn m_step(&mut self, points: ArrayView2<f64>, resp: &Array2<f64>, floor: f64) {
        let n = points.nrows() as f64;
        let nk = resp.sum_axis(Axis(0));
        for k in 0..self.components() {
            // A starved component keeps its parameters; only its weight moves.
            if nk[k] > 1e-12 * n {
                let r = resp.column(k);
                let mean: Array1<f64> = points.t().dot(&r) / nk[k];
                let mut var = Array1::<f64>::zeros(mean.len());
                for (x, &w) in points.outer_iter().zip(r) {
                    for ((v, xi), mu) in var.iter_mut().zip(x).zip(&mean) {
                        *v += w * (xi - mu) * (xi - mu);
                    }
                }
                var.mapv_inplace(|v| (v / nk[k]).max(floor));
                self.means.row_mut(k).assign(&mean);
                self.covariances.row_mut(k).assign(&var);
            }
            self.weights[k] = nk[k] / n;
        }
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        self.sample_with(n, &mut rng::stream(seed, &[rng::tag::REPLAY]))
    }

    fn pick_component(&self, rng: &mut Rng) -> usize {
        let mut u = rng.random::<f64>();
        for (k, &w) in self.weights.iter().enumerate() {
            if u < w {
                return k;
            }
            u -= w;
        }
        // Rounding: fall back to the last component with positive weight.
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    pub fn log_likelihood(&self, points: ArrayView2<f64>) -> Result<f64> {
        if points.nrows() == 0 {
            return Err(Error::Empty("evaluation points"));
        }
        if points.ncols() != self.means.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.means.ncols(),
                found: points.ncols(),
            });
        }
        let mut resp = Array2::zeros((points.nrows(), self.components()));
        Ok(self.e_step(points, &mut resp))
    }
}

impl LatentGenerator for GmmModel {
    fn dim(&self) -> usize {
        self.means.ncols()
    }

    fn sample_with(&self, n: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.outer_iter_mut() {
            let k = self.pick_component(rng);
            for ((x, mu), var) in row
                .iter_mut()
                .zip(self.means.row(k))
                .zip(self.covariances.row(k))
            {
                let eps: f64 = StandardNormal.sample(rng);
                *x = mu + var.sqrt() * eps;
            }
        }
        Ok(out)
    }

    fn log_likelihood(&self, points: ArrayView2<f64>) -> Result<f64> {
        GmmModel::log_likelihood(self, points)
    }
}

/// One GMM per past domain; sampling picks a domain uniformly, then a
/// component by weight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GmmBank {
    pub models: Vec<GmmModel>,
}

impl GmmBank {
    pub fn push(&mut self, model: GmmModel) -> Result<()> {
        if let Some(first) = self.models.first() {
            if first.dim() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: model.dim(),
                });
            }
        }
        self.models.push(model);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// The equivalent single mixture with domain weights `1/t`.
    pub fn as_mixture(&self) -> Result<GmmModel> {
        if self.models.is_empty() {
            return Err(Error::Empty("GMM bank"));
        }
        let t = self.models.len() as f64;
        let weights: Vec<f64> = self
            .models
            .iter()
            .flat_map(|m| m.weights.iter().map(move |w| w / t))
            .collect();
        let means: Vec<_> = self.models.iter().map(|m| m.means.view()).collect();
        let covs: Vec<_> = self.models.iter().map(|m| m.covariances.view()).collect();
        let total: f64 = weights.iter().sum();
        Ok(GmmModel {
            weights: weights.iter().map(|w| w / total).collect(),
            means: ndarray::concatenate(Axis(0), &means).map_err(|e| Error::invalid(e.to_string()))?,
            covariances: ndarray::concatenate(Axis(0), &covs)
                .map_err(|e| Error::invalid(e.to_string()))?,
        })
    }
}

impl LatentGenerator for GmmBank {
    fn dim(&self) -> usize {
        self.models.first().map_or(0, GmmModel::dim)
    }

    fn sample_with(&self, n: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        if self.models.is_empty() {
            return Err(Error::Empty("GMM bank"));
        }
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.outer_iter_mut() {
            let m = &self.models[rng.random_range(0..self.models.len())];
            row.assign(&m.sample_with(1, rng)?.row(0));
        }
        Ok(out)
    }

    fn log_likelihood(&self, points: ArrayView2<f64>) -> Result<f64> {
        self.as_mixture()?.log_likelihood(points)
    }
}
