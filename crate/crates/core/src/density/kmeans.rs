//! Lloyd's K-means from k-means++ seeding, and BIC selection of K.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    /// `k × d`.
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    pub sse: f64,
    pub k: usize,
    /// SSE after every assignment step, first entry from the seeding.
    pub sse_history: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy k-means++ seeding: the first center uniformly, then for each next
/// center `2 + ⌊ln k⌋` candidates drawn with probability proportional to their
/// squared distance to the nearest chosen center, keeping the candidate that
/// lowers the total potential most.
pub(crate) fn kmeans_plus_plus(points: ArrayView2<f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let n = points.nrows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = points
        .outer_iter()
        .map(|p| sq_dist(p, points.row(first)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for _ in 0..trials {
            let pick = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if target < w {
                        pick = i;
                        break;
                    }
                    target -= w;
                }
                pick
            } else {
                // All points coincide with chosen centers.
                rng.random_range(0..n)
            };
            let cand: Vec<f64> = points
                .outer_iter()
                .zip(&d2)
                .map(|(p, &old)| old.min(sq_dist(p, points.row(pick))))
                .collect();
            let potential: f64 = cand.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, pick));
            }
        }
        let (_, cand, pick) = best.expect("at least two trials");
        centers.row_mut(c).assign(&points.row(pick));
        d2 = cand;
    }
    centers
}

/// Nearest center per point (ties to the lowest index) and the total SSE.
fn assign(points: ArrayView2<f64>, centers: &Array2<f64>, out: &mut [usize]) -> f64 {
    let mut sse = 0.0;
    for (i, p) in points.outer_iter().enumerate() {
        let (best, dist) = centers
            .outer_iter()
            .enumerate()
            .map(|(c, mu)| (c, sq_dist(p, mu)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        out[i] = best;
        sse += dist;
    }
    sse
}

pub fn kmeans(points: ArrayView2<f64>, k: usize, max_iter: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} points")));
    }
    let mut rng = rng::stream(seed, &[rng::tag::GENERATOR, 0x6b6d]);
    let mut centers = kmeans_plus_plus(points, k, &mut rng);
    let mut assignments = vec![0; n];
    let mut sse = assign(points, &centers, &mut assignments);
    let mut history = vec![sse];
    let mut converged = false;

    for _ in 0..max_iter {
        // Update step; an emptied cluster keeps its previous center.
        let mut sums = Array2::<f64>::zeros(centers.raw_dim());
        let mut counts = vec![0usize; k];
        for (p, &a) in points.outer_iter().zip(&assignments) {
            let mut s = sums.row_mut(a);
            s += &p;
            counts[a] += 1;
        }
        for (c, (mut row, &cnt)) in sums.axis_iter_mut(Axis(0)).zip(&counts).enumerate() {
            if cnt > 0 {
                row /= cnt as f64;
                centers.row_mut(c).assign(&row);
            }
        }
        let mut next = vec![0; n];
        sse = assign(points, &centers, &mut next);
        history.push(sse);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }

    Ok(KMeansResult {
        centers,
        assignments,
        sse,
        k,
        sse_history: history,
        converged,
    })
}

/// BIC of a K-means fit read as a spherical Gaussian mixture with one shared
/// ML variance `σ² = SSE / (n·d)`:
/// `BIC = n·d·ln σ² + K·(d+1)·ln n`.
///
/// A perfect fit (`SSE = 0`) scores `-∞`.
pub fn kmeans_bic(sse: f64, n: usize, d: usize, k: usize) -> f64 {
    let nd = (n * d) as f64;
    let fit = if sse > 0.0 { nd * (sse / nd).ln() } else { f64::NEG_INFINITY };
    fit + (k * (d + 1)) as f64 * (n as f64).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicSelection {
    pub k_star: usize,
    /// `(K, fit, BIC)` for every K in range.
    pub candidates: Vec<(usize, KMeansResult, f64)>,
}

impl BicSelection {
    pub fn best(&self) -> &KMeansResult {
        &self
            .candidates
            .iter()
            .find(|(k, _, _)| *k == self.k_star)
            .expect("k_star is one of the candidates")
            .1
    }
}

/// Fits K-means for every K in `k_min..=k_max` and picks the BIC minimiser,
/// ties toward smaller K.
pub fn bic_select_k(
    points: ArrayView2<f64>,
    k_min: usize,
    k_max: usize,
    max_iter: usize,
    seed: u64,
) -> Result<BicSelection> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::invalid(format!("empty K range {k_min}..={k_max}")));
    }
    if k_max > points.nrows() {
        return Err(Error::invalid(format!(
            "k_max = {k_max} exceeds the {} points",
            points.nrows()
        )));
    }
    let (n, d) = points.dim();
    let mut candidates = Vec::with_capacity(k_max - k_min + 1);
    let mut best: Option<(usize, f64)> = None;
    for k in k_min..=k_max {
        let fit = kmeans(points, k, max_iter, rng::derive_seed(seed, &[k as u64]))?;
        let bic = kmeans_bic(fit.sse, n, d, k);
        if best.is_none_or(|(_, b)| bic < b) {
            best = Some((k, bic));
        }
        candidates.push((k, fit, bic));
    }
    Ok(BicSelection {
        k_star: best.expect("non-empty range").0,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(centers: &[&[f64]], per: usize, spread: f64, seed: u64) -> Array2<f64> {
        let d = centers[0].len();
        let mut r = rng::stream(seed, &[42]);
        let mut out = Array2::zeros((centers.len() * per, d));
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            let c = centers[i % centers.len()];
            for (j, x) in row.iter_mut().enumerate() {
                let e: f64 = StandardNormal.sample(&mut r);
                *x = c[j] + spread * e;
            }
        }
        out
    }

    #[test]
    fn symmetric_two_blobs() {
        let pts = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let fit = kmeans(pts.view(), 2, 50, 1).unwrap();
        assert_eq!(fit.sse, 1.0);
        let mut cs: Vec<(f64, f64)> = fit.centers.outer_iter().map(|r| (r[0], r[1])).collect();
        cs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(cs, vec![(0.0, 0.5), (10.0, 0.5)]);
    }

    #[test]
    fn k_equals_n_is_exact() {
        let pts = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let fit = kmeans(pts.view(), 3, 10, 9).unwrap();
        assert_eq!(fit.sse, 0.0);
        let mut got: Vec<_> = fit.centers.outer_iter().map(|r| r.to_vec()).collect();
        let mut want: Vec<_> = pts.outer_iter().map(|r| r.to_vec()).collect();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]));
        want.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(got, want);
    }

    #[test]
    fn invalid_k() {
        let pts = array![[1.0], [2.0]];
        assert!(kmeans(pts.view(), 0, 10, 0).is_err());
        assert!(kmeans(pts.view(), 3, 10, 0).is_err());
    }

    /// Exhaustive optimum over all 2-partitions (independent of Lloyd).
    fn best_two_partition_sse(pts: &Array2<f64>) -> f64 {
        let n = pts.nrows();
        let cluster_sse = |mask: u32, want: bool| -> f64 {
            let idx: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == want).collect();
            let sub = pts.select(Axis(0), &idx);
            let mean = sub.mean_axis(Axis(0)).unwrap();
            sub.outer_iter().map(|p| sq_dist(p, mean.view())).sum()
        };
        // Point 0 fixed on the `false` side; the other side must be non-empty.
        (1u32..(1 << (n - 1)))
            .map(|m| m << 1)
            .map(|mask| cluster_sse(mask, true) + cluster_sse(mask, false))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_exhaustive_two_partition_optimum() {
        let pts = blobs(&[&[0.0, 0.0], &[6.0, 3.0]], 100, 1.0, 3);
        let sub = pts.select(Axis(0), &(0..12).map(|i| i * 16).collect::<Vec<_>>());
        let oracle = best_two_partition_sse(&sub);
        let fit = kmeans(sub.view(), 2, 100, 5).unwrap();
        assert!((fit.sse - oracle).abs() < 1e-9, "{} vs {oracle}", fit.sse);
    }

    #[test]
    fn sse_is_monotone_and_assignments_nearest() {
        let pts = blobs(&[&[0.0, 0.0, 0.0], &[3.0, 0.0, 1.0], &[0.0, 4.0, -2.0]], 60, 1.5, 8);
        let fit = kmeans(pts.view(), 5, 100, 2).unwrap();
        for w in fit.sse_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{w:?}");
        }
        assert!(fit.converged);
        for (p, &a) in pts.outer_iter().zip(&fit.assignments) {
            let da = sq_dist(p, fit.centers.row(a));
            for c in fit.centers.outer_iter() {
                assert!(da <= sq_dist(p, c) + 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let pts = blobs(&[&[0.0, 0.0], &[5.0, 5.0]], 50, 2.0, 1);
        assert_eq!(kmeans(pts.view(), 4, 50, 7).unwrap(), kmeans(pts.view(), 4, 50, 7).unwrap());
    }

    // Independent restatement of the criterion for the oracle checks below.
    fn bic_oracle(sse: f64, n: usize, d: usize, k: usize) -> f64 {
        let n_f = n as f64;
        let d_f = d as f64;
        n_f * d_f * (sse / (n_f * d_f)).ln() + k as f64 * (d_f + 1.0) * n_f.ln()
    }

    #[test]
    fn picks_three_planted_blobs() {
        // Splitting a Gaussian blob gains about 2n/π in `n·d·ln σ²` regardless of
        // d, so the per-cluster penalty (d+1)·ln n needs moderate d to dominate.
        let mut a = [0.0; 16];
        let mut b = [0.0; 16];
        a[0] = 20.0;
        b[1] = 20.0;
        let pts = blobs(&[&[0.0; 16], &a, &b], 40, 1.0, 4);
        let sel = bic_select_k(pts.view(), 1, 6, 100, 3).unwrap();
        let (n, d) = pts.dim();
        let oracle = sel
            .candidates
            .iter()
            .map(|(k, fit, _)| (*k, bic_oracle(fit.sse, n, d, *k)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(oracle.0, 3);
        assert_eq!(sel.k_star, 3);
        assert_eq!(sel.best().k, 3);
    }

    #[test]
    fn picks_one_for_single_blob() {
        let center = [0.0; 32];
        let pts = blobs(&[&center], 40, 0.1, 6);
        let sel = bic_select_k(pts.view(), 1, 4, 100, 1).unwrap();
        let (n, d) = pts.dim();
        for (k, fit, bic) in &sel.candidates {
            assert!((bic - bic_oracle(fit.sse, n, d, *k)).abs() < 1e-9 * bic.abs());
        }
        assert_eq!(sel.k_star, 1);
    }

    #[test]
    fn forced_range() {
        let pts = blobs(&[&[0.0, 0.0]], 30, 1.0, 2);
        assert_eq!(bic_select_k(pts.view(), 5, 5, 50, 0).unwrap().k_star, 5);
        assert!(bic_select_k(pts.view(), 3, 2, 50, 0).is_err());
        assert!(bic_select_k(pts.view(), 0, 2, 50, 0).is_err());
    }
}
