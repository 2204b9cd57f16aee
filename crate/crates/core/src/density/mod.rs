//! Latent generators: K-means compression with BIC model selection, the
//! incremental KDE generator and the diagonal-covariance GMM baseline.

mod gmm;
mod kde;
mod kmeans;

use ndarray::{Array2, ArrayView2};

use crate::error::Result;
use crate::rng::Rng;

pub use gmm::{GmmBank, GmmFit, GmmModel};
pub use kde::{silverman_bandwidth, KdeGenerator};
pub use kmeans::{bic_select_k, kmeans, kmeans_bic, BicSelection, KMeansResult};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A density over latent vectors that can be sampled and scored.
pub trait LatentGenerator {
    fn dim(&self) -> usize;

    fn sample_with(&self, n: usize, rng: &mut Rng) -> Result<Array2<f64>>;

    /// Mean log-density over the rows of `points`.
    fn log_likelihood(&self, points: ArrayView2<f64>) -> Result<f64>;
}

/// `ln Σ exp(x_i)`, stable for large magnitudes; `-∞` for an empty or
/// all-`-∞` input.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Serialises `Array2<f64>` as nested row arrays.
pub(crate) mod nested_rows {
    use ndarray::Array2;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = a.outer_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let nrows = rows.len();
        Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
            .map_err(D::Error::custom)
    }
}
