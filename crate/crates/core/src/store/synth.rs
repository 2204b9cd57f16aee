//! Synthetic domain-shift benchmarks.
//!
//! A domain is a class-conditional Gaussian mixture pushed through a
//! similarity transform `x ↦ scale · R x + shift` with `R` a seeded random
//! rotation. Similarity transforms preserve distance ratios, so the class
//! structure (and the Bayes classifier) carries over to every shifted domain.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{make_split, DomainData, LatentDataset};
use crate::error::{Error, Result};
use crate::rng;

/// Haar-distributed orthogonal matrix from the QR factorisation of a seeded
/// Gaussian matrix (column signs fixed by `diag(R) > 0`).
pub fn random_rotation(dim: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, &[rng::tag::DATA, 0x0707]);
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut r));
    let qr = g.qr();
    let (q, upper) = (qr.q(), qr.r());
    Array2::from_shape_fn((dim, dim), |(i, j)| {
        let sign = if upper[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * sign
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTransform {
    /// `None` means no rotation.
    pub rotation_seed: Option<u64>,
    pub shift: Vec<f64>,
    pub scale: f64,
}

impl DomainTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            rotation_seed: None,
            shift: vec![0.0; dim],
            scale: 1.0,
        }
    }

    /// Applies the transform to every row of `points`.
    pub fn apply(&self, points: &Array2<f64>) -> Array2<f64> {
        let rotated = match self.rotation_seed {
            Some(seed) => points.dot(&random_rotation(points.ncols(), seed).t()),
            None => points.clone(),
        };
        let shift = Array1::from_vec(self.shift.clone());
        rotated * self.scale + &shift
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: String,
    pub class_count: usize,
    pub dim: usize,
    pub components_per_class: usize,
    /// `(class_count · components_per_class) × dim`; row `c·m + k` is
    /// component `k` of class `c`, before the domain transform.
    pub component_means: Array2<f64>,
    pub spread: f64,
    pub transform: DomainTransform,
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 || self.dim == 0 || self.components_per_class == 0 {
            return Err(Error::Config(
                "class_count, dim and components_per_class must be positive".into(),
            ));
        }
        let rows = self.class_count * self.components_per_class;
        if self.component_means.dim() != (rows, self.dim) {
            return Err(Error::Config(format!(
                "component_means must be {rows} x {}, got {:?}",
                self.dim,
                self.component_means.dim()
            )));
        }
        if !(self.spread > 0.0) {
            return Err(Error::Config("spread must be > 0".into()));
        }
        if !(self.transform.scale > 0.0) {
            return Err(Error::Config("transform scale must be > 0".into()));
        }
        if self.transform.shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.transform.shift.len(),
            });
        }
        Ok(())
    }

    /// Component means after the domain transform.
    pub fn transformed_means(&self) -> Array2<f64> {
        self.transform.apply(&self.component_means)
    }
}

/// Draws `train_per_class + test_per_class` samples per class. Sample `i` of a
/// class uses component `i mod components_per_class`, so components are
/// equally represented.
pub fn synthesize_domain(spec: &DomainSpec, seed: u64) -> Result<LatentDataset> {
    spec.validate()?;
    let per_class = spec.train_per_class + spec.test_per_class;
    let n = per_class * spec.class_count;
    let m = spec.components_per_class;
    let mut r = rng::stream(seed, &[rng::tag::DATA]);

    let mut raw = Array2::<f64>::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    for i in 0..per_class {
        for c in 0..spec.class_count {
            let row_idx = labels.len();
            let mean = spec.component_means.row(c * m + i % m);
            let mut row = raw.row_mut(row_idx);
            for (x, mu) in row.iter_mut().zip(mean) {
                let eps: f64 = StandardNormal.sample(&mut r);
                *x = mu + spec.spread * eps;
            }
            labels.push(c);
        }
    }
    let features = spec.transform.apply(&raw);
    LatentDataset::new(spec.domain_id.clone(), spec.class_count, features, labels)
}

/// Parameters of a multi-domain synthetic benchmark. All domains share the same
/// base component means (identical class semantics) and differ by transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub domains: usize,
    pub class_count: usize,
    pub dim: usize,
    pub components_per_class: usize,
    /// Std of the base component-mean coordinates.
    pub mean_scale: f64,
    pub spread: f64,
    /// Std of the per-domain shift coordinates.
    pub shift_scale: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    /// The standard benchmark: 4 domains, d=64, 3 classes, 2 components per
    /// class, 600 train / 150 test per domain.
    fn default() -> Self {
        Self {
            domains: 4,
            class_count: 3,
            dim: 64,
            components_per_class: 2,
            mean_scale: 1.1,
            spread: 1.0,
            shift_scale: 0.2,
            scale_min: 0.9,
            scale_max: 1.1,
            train_per_class: 200,
            test_per_class: 50,
            seed: 2024,
        }
    }
}

impl BenchmarkSpec {
    pub fn domain_specs(&self) -> Result<Vec<DomainSpec>> {
        if self.domains == 0 {
            return Err(Error::Config("benchmark needs at least one domain".into()));
        }
        if !(self.scale_min > 0.0 && self.scale_min <= self.scale_max) {
            return Err(Error::Config("need 0 < scale_min <= scale_max".into()));
        }
        let rows = self.class_count * self.components_per_class;
        let mut r = rng::stream(self.seed, &[rng::tag::DATA, u64::MAX]);
        let base = Array2::from_shape_fn((rows, self.dim), |_| {
            self.mean_scale * Distribution::<f64>::sample(&StandardNormal, &mut r)
        });
        Ok((0..self.domains)
            .map(|k| {
                let mut r = rng::stream(self.seed, &[rng::tag::DATA, k as u64]);
                let shift = (0..self.dim)
                    .map(|_| self.shift_scale * Distribution::<f64>::sample(&StandardNormal, &mut r))
                    .collect();
                let scale = if self.scale_max > self.scale_min {
                    r.random_range(self.scale_min..self.scale_max)
                } else {
                    self.scale_min
                };
                DomainSpec {
                    domain_id: format!("domain{k}"),
                    class_count: self.class_count,
                    dim: self.dim,
                    components_per_class: self.components_per_class,
                    component_means: base.clone(),
                    spread: self.spread,
                    transform: DomainTransform {
                        rotation_seed: Some(rng::derive_seed(self.seed, &[rng::tag::DATA, k as u64, 1])),
                        shift,
                        scale,
                    },
                    train_per_class: self.train_per_class,
                    test_per_class: self.test_per_class,
                }
            })
            .collect())
    }
}

/// Builds every domain of the benchmark and splits it into train/test.
pub fn synthesize_benchmark(spec: &BenchmarkSpec) -> Result<Vec<DomainData>> {
    spec.domain_specs()?
        .iter()
        .enumerate()
        .map(|(k, ds)| {
            let full = synthesize_domain(ds, rng::derive_seed(spec.seed, &[rng::tag::DATA, k as u64, 2]))?;
            let (train, test) = make_split(
                &full,
                ds.test_per_class,
                rng::derive_seed(spec.seed, &[rng::tag::DATA, k as u64, 3]),
            )?;
            Ok(DomainData { train, test })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use ndarray::Axis;

/// Nearest-mean class assignment over all components.
    fn nearest_class(x: ndarray::ArrayView1<f64>, means: &Array2<f64>, m: usize) -> usize {
        means
            .axis_iter(Axis(0))
            .enumerate()
            .map(|(i, mu)| (i / m, (&x - &mu).mapv(|v| v * v).sum()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }
    
    fn class_means(ds: &LatentDataset) -> Array2<f64> {
        let mut sums = Array2::<f64>::zeros((ds.class_count, ds.dim()));
        let counts = ds.class_counts();
        for (row, &l) in ds.features().axis_iter(Axis(0)).zip(ds.labels()) {
            let mut s = sums.row_mut(l);
            s += &row;
        }
        for (mut s, &c) in sums.axis_iter_mut(Axis(0)).zip(&counts) {
            s /= c.max(1) as f64;
        }
        sums
    }

    fn spec(dim: usize, m: usize, spread: f64, transform: DomainTransform) -> DomainSpec {
        let rows = 3 * m;
        DomainSpec {
            domain_id: "s".into(),
            class_count: 3,
            dim,
            components_per_class: m,
            component_means: Array2::from_shape_fn((rows, dim), |(i, j)| {
                ((i * 7 + j * 3) % 11) as f64 - 5.0
            }),
            spread,
            transform,
            train_per_class: 500,
            test_per_class: 0,
        }
    }

    fn shifted(dim: usize) -> DomainTransform {
        DomainTransform {
            rotation_seed: Some(99),
            shift: (0..dim).map(|j| j as f64 * 0.5 - 1.0).collect(),
            scale: 1.5,
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = random_rotation(6, 4);
        let eye = q.t().dot(&q);
        for ((i, j), v) in eye.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_spread_collapses_onto_means() {
        let s = spec(4, 1, 1e-12, shifted(4));
        let ds = synthesize_domain(&s, 1).unwrap();
        let means = s.transformed_means();
        for (row, &l) in ds.features().axis_iter(Axis(0)).zip(ds.labels()) {
            for (a, b) in row.iter().zip(means.row(l)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = spec(5, 2, 0.7, shifted(5));
        assert_eq!(synthesize_domain(&s, 11).unwrap(), synthesize_domain(&s, 11).unwrap());
        assert_ne!(synthesize_domain(&s, 11).unwrap(), synthesize_domain(&s, 12).unwrap());
    }

    #[test]
    fn class_means_converge_to_transformed_means() {
        let s = spec(4, 1, 0.8, shifted(4));
        let ds = synthesize_domain(&s, 5).unwrap();
        let emp = class_means(&ds);
        let want = s.transformed_means();
        // Transformed noise has std scale·spread per coordinate.
        let tol = 3.0 * s.transform.scale * s.spread / (500f64).sqrt();
        for (a, b) in emp.iter().zip(want.iter()) {
            assert!((a - b).abs() < tol, "{a} vs {b}, tol {tol}");
        }
    }

    #[test]
    fn invalid_spread_rejected() {
        let s = spec(2, 1, 0.0, DomainTransform::identity(2));
        assert!(synthesize_domain(&s, 0).is_err());
        let mut s = spec(2, 1, 1.0, DomainTransform::identity(2));
        s.transform.scale = -1.0;
        assert!(synthesize_domain(&s, 0).is_err());
    }

    #[test]
    fn identity_transform_is_noop() {
        let x = array![[1.0, 2.0], [3.0, -4.0]];
        assert_eq!(DomainTransform::identity(2).apply(&x), x);
    }

    #[test]
    fn standard_benchmark_shape() {
        let domains = synthesize_benchmark(&BenchmarkSpec::default()).unwrap();
        assert_eq!(domains.len(), 4);
        for d in &domains {
            assert_eq!(d.train.len(), 600);
            assert_eq!(d.test.len(), 150);
            assert_eq!(d.train.dim(), 64);
            assert_eq!(d.test.class_counts(), vec![50, 50, 50]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn shift_preserves_bayes_assignment(
            seed in any::<u64>(),
            scale in 0.2f64..5.0,
            shift in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let transform = DomainTransform { rotation_seed: Some(seed), shift, scale };
            let s = DomainSpec { train_per_class: 20, ..spec(3, 2, 2.0, transform.clone()) };
            let base = DomainSpec { transform: DomainTransform::identity(3), ..s.clone() };
            let raw = synthesize_domain(&base, seed).unwrap();
            let moved = synthesize_domain(&s, seed).unwrap();
            let means = s.component_means.clone();
            let moved_means = s.transformed_means();
            for (x, y) in raw.features().outer_iter().zip(moved.features().outer_iter()) {
                prop_assert_eq!(nearest_class(x, &means, 2), nearest_class(y, &moved_means, 2));
            }
        }
    }
}
