use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How real and generated vectors are paired for cosine and Euclidean averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    AllPairs,
    IndexMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidMode {
    #[default]
    Full,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    #[default]
    Biased,
    Unbiased,
}

const FID_RIDGE: f64 = 1e-6;

fn check_pair(a: ArrayView2<f64>, b: ArrayView2<f64>, pairing: Pairing) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Empty("sample set"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    if pairing == Pairing::IndexMatched && a.nrows() != b.nrows() {
        return Err(Error::invalid(format!(
            "index-matched pairing needs equal set sizes, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

fn unit_rows(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = x.to_owned();
    for mut row in out.outer_iter_mut() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("cosine similarity of a zero vector"));
        }
        row /= norm;
    }
    Ok(out)
}

/// Mean cosine similarity on a percent scale, in `[-100, 100]`.
pub fn cosine_avg(real: ArrayView2<f64>, gen: ArrayView2<f64>, pairing: Pairing) -> Result<f64> {
    check_pair(real, gen, pairing)?;
    let a = unit_rows(real)?;
    let b = unit_rows(gen)?;
    let mean = match pairing {
        // The mean over all pairs of dot products factorises into a dot
        // product of the two mean unit vectors.
        Pairing::AllPairs => {
            let ma = a.mean_axis(Axis(0)).expect("nonempty");
            let mb = b.mean_axis(Axis(0)).expect("nonempty");
            ma.dot(&mb)
        }
        Pairing::IndexMatched => {
            let s: f64 = a.outer_iter().zip(b.outer_iter()).map(|(x, y)| x.dot(&y)).sum();
            s / a.nrows() as f64
        }
    };
    Ok((100.0 * mean).clamp(-100.0, 100.0))
}

fn dist(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    sq_dist(x, y).sqrt()
}

fn sq_dist(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Mean Euclidean distance between real and generated vectors.
pub fn euclidean_avg(real: ArrayView2<f64>, gen: ArrayView2<f64>, pairing: Pairing) -> Result<f64> {
    check_pair(real, gen, pairing)?;
    let total: f64 = match pairing {
        Pairing::AllPairs => real
            .outer_iter()
            .map(|x| gen.outer_iter().map(|y| dist(x, y)).sum::<f64>())
            .sum(),
        Pairing::IndexMatched => real.outer_iter().zip(gen.outer_iter()).map(|(x, y)| dist(x, y)).sum(),
    };
    let count = match pairing {
        Pairing::AllPairs => real.nrows() * gen.nrows(),
        Pairing::IndexMatched => real.nrows(),
    };
    Ok(total / count as f64)
}

/// Sample mean and unbiased covariance, with `ridge` added to the diagonal.
fn moments(x: ArrayView2<f64>, ridge: f64) -> (Array1<f64>, Array2<f64>) {
    let n = x.nrows();
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &mean;
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    cov.diag_mut().mapv_inplace(|v| v + ridge);
    (mean, cov)
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn psd_sqrt(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits of the two sets.
pub fn fid(real: ArrayView2<f64>, gen: ArrayView2<f64>, mode: FidMode) -> Result<f64> {
    check_pair(real, gen, Pairing::AllPairs)?;
    if real.nrows() < 2 || gen.nrows() < 2 {
        return Err(Error::TooFewSamples {
            what: "FID",
            available: real.nrows().min(gen.nrows()),
            requested: 2,
        });
    }
    let (m1, c1) = moments(real, FID_RIDGE);
    let (m2, c2) = moments(gen, FID_RIDGE);
    let diff = &m1 - &m2;
    let mean_term = diff.dot(&diff);
    let cov_term = match mode {
        FidMode::Diagonal => c1
            .diag()
            .iter()
            .zip(c2.diag())
            .map(|(a, b)| a + b - 2.0 * (a * b).sqrt())
            .sum(),
        FidMode::Full => {
            let s1 = psd_sqrt(to_dmatrix(&c1));
            let inner = &s1 * to_dmatrix(&c2) * &s1;
            let inner = (&inner + inner.transpose()) * 0.5;
            let tr_sqrt: f64 = SymmetricEigen::new(inner)
                .eigenvalues
                .iter()
                .map(|l| l.max(0.0).sqrt())
                .sum();
            c1.diag().sum() + c2.diag().sum() - 2.0 * tr_sqrt
        }
    };
    Ok((mean_term + cov_term).max(0.0))
}

/// Squared distances between every row of `a` and every row of `b`.
fn cross_sq_dists(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| sq_dist(a.row(i), b.row(j)))
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median distance over all distinct pairs of the pooled set, from the
/// already computed squared-distance blocks.
fn pooled_median(xx: &Array2<f64>, yy: &Array2<f64>, xy: &Array2<f64>) -> Option<f64> {
    let mut d: Vec<f64> = Vec::new();
    for block in [xx, yy] {
        for i in 0..block.nrows() {
            d.extend(block.row(i).iter().skip(i + 1).map(|v| v.sqrt()));
        }
    }
    d.extend(xy.iter().map(|v| v.sqrt()));
    if d.is_empty() {
        None
    } else {
        Some(median(&mut d))
    }
}

/// Squared MMD with an RBF kernel `exp(−‖x−y‖²/(2γ²))` and the biased
/// V-statistic. `gamma = None` selects the median heuristic.
pub fn mmd(real: ArrayView2<f64>, gen: ArrayView2<f64>, gamma: Option<f64>) -> Result<f64> {
    mmd_with_estimator(real, gen, gamma, MmdEstimator::Biased)
}

pub fn mmd_with_estimator(
    real: ArrayView2<f64>,
    gen: ArrayView2<f64>,
    gamma: Option<f64>,
    estimator: MmdEstimator,
) -> Result<f64> {
    check_pair(real, gen, Pairing::AllPairs)?;
    if let Some(g) = gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("MMD bandwidth must be positive, got {g}")));
        }
    }
    let (n, m) = (real.nrows(), gen.nrows());
    if estimator == MmdEstimator::Unbiased && (n < 2 || m < 2) {
        return Err(Error::TooFewSamples {
            what: "unbiased MMD",
            available: n.min(m),
            requested: 2,
        });
    }
    let xx = cross_sq_dists(real, real);
    let yy = cross_sq_dists(gen, gen);
    let xy = cross_sq_dists(real, gen);
    let gamma = match gamma {
        Some(g) => g,
        None => match pooled_median(&xx, &yy, &xy) {
            Some(g) if g > 0.0 => g,
            _ => {
                log::warn!("all pooled pairwise distances are zero; using MMD bandwidth 1");
                1.0
            }
        },
    };
    let scale = -1.0 / (2.0 * gamma * gamma);
    let kernel_mean = |block: &Array2<f64>, skip_diagonal: bool| -> f64 {
        let mut s = 0.0;
        for ((i, j), &v) in block.indexed_iter() {
            if !(skip_diagonal && i == j) {
                s += (v * scale).exp();
            }
        }
        let count = if skip_diagonal {
            block.nrows() * (block.ncols() - 1)
        } else {
            block.len()
        };
        s / count as f64
    };
    let unbiased = estimator == MmdEstimator::Unbiased;
    let value = kernel_mean(&xx, unbiased) + kernel_mean(&yy, unbiased) - 2.0 * kernel_mean(&xy, false);
    Ok(if unbiased { value } else { value.max(0.0) })
}
