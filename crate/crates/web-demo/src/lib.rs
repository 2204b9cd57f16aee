//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain numbers or JSON text and returns JSON text, so the
//! page needs no bundler. The `*_json` functions hold the logic and are what
//! the native tests call.

use latent_replay::continual::{run_sequence, StrategyConfig, StrategyKind};
use latent_replay::density::{kmeans, GmmModel, KdeGenerator, LatentGenerator};
use latent_replay::metrics::{acc, bwt, ilm, TrainTestMatrix};
use latent_replay::rng::stream;
use latent_replay::store::{build_sequence, synthesize_benchmark, BenchmarkSpec};
use ndarray::Array2;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct KdeView {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    samples: Vec<Vec<f64>>,
    bandwidth: f64,
    kde_loglik: f64,
    gmm_loglik: f64,
}

/// 2-D multimodal domain, its K-means centers, the KDE built on them and
/// samples drawn from it. Held-out log-likelihood is compared with a
/// `gmm_components` diagonal GMM fitted on the full data.
pub fn kde_explorer_json(
    centers: usize,
    samples: usize,
    gmm_components: usize,
    spread: f64,
    seed: u64,
) -> Result<String, String> {
    let spec = BenchmarkSpec {
        domains: 1,
        dim: 2,
        class_count: 3,
        components_per_class: 2,
        mean_scale: 3.0,
        spread,
        shift_scale: 0.0,
        scale_min: 1.0,
        scale_max: 1.0,
        train_per_class: 120,
        test_per_class: 60,
        seed,
    };
    let domain = synthesize_benchmark(&spec).map_err(|e| e.to_string())?.remove(0);
    let train = domain.train.features();
    let test = domain.test.features();
    let km = kmeans(train.view(), centers, 100, seed).map_err(|e| e.to_string())?;
    let kde = KdeGenerator::new(km.centers.clone()).map_err(|e| e.to_string())?;
    let drawn = kde
        .sample_with(samples, &mut stream(seed, &[1]))
        .map_err(|e| e.to_string())?;
    let gmm = GmmModel::fit(train.view(), gmm_components, 100, 1e-6, seed).map_err(|e| e.to_string())?;
    to_json(&KdeView {
        points: rows(train),
        labels: domain.train.labels().to_vec(),
        centers: rows(&km.centers),
        samples: rows(&drawn),
        bandwidth: kde.bandwidth(),
        kde_loglik: kde.log_likelihood(test.view()).map_err(|e| e.to_string())?,
        gmm_loglik: gmm.log_likelihood(test.view()).map_err(|e| e.to_string())?,
    })
}

#[derive(Serialize)]
struct StrategyView {
    strategy: &'static str,
    matrix: Vec<Vec<Option<f64>>>,
    acc: Option<f64>,
    ilm: Option<f64>,
    bwt: Option<f64>,
    /// Accuracy on the first domain after each session.
    first_domain: Vec<Option<f64>>,
}

/// Naive fine-tuning against the proposed strategy on a small 4-domain
/// benchmark.
pub fn forgetting_json(alpha: f64, epochs: usize, seed: u64) -> Result<String, String> {
    let spec = BenchmarkSpec {
        dim: 16,
        train_per_class: 60,
        test_per_class: 30,
        seed: 2024,
        ..BenchmarkSpec::default()
    };
    let domains = synthesize_benchmark(&spec).map_err(|e| e.to_string())?;
    let seq = build_sequence("demo", &domains, &[0, 1, 2, 3]).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for kind in [StrategyKind::Naive, StrategyKind::Proposed] {
        let cfg = StrategyConfig {
            alpha,
            epochs,
            hidden_layers: vec![64, 32],
            seed,
            ..StrategyConfig::new(kind)
        };
        let run = run_sequence(&seq, &cfg).map_err(|e| e.to_string())?;
        let m = &run.matrix;
        out.push(StrategyView {
            strategy: kind.as_str(),
            matrix: m.rows().to_vec(),
            acc: acc(m).ok(),
            ilm: ilm(m).ok(),
            bwt: bwt(m).ok(),
            first_domain: m.rows().iter().map(|r| r[0]).collect(),
        });
    }
    to_json(&out)
}

#[derive(Serialize)]
struct MetricsView {
    acc: Option<f64>,
    ilm: Option<f64>,
    bwt: Option<f64>,
}

/// ACC, ILM and BWT of a square accuracy matrix given as JSON rows.
pub fn cl_metrics_json(matrix: &str) -> Result<String, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(matrix).map_err(|e| e.to_string())?;
    let m = TrainTestMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    to_json(&MetricsView {
        acc: acc(&m).ok(),
        ilm: ilm(&m).ok(),
        bwt: bwt(&m).ok(),
    })
}

#[wasm_bindgen]
pub fn kde_explorer(centers: usize, samples: usize, gmm_components: usize, spread: f64, seed: u32) -> Result<String, JsError> {
    kde_explorer_json(centers, samples, gmm_components, spread, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn forgetting(alpha: f64, epochs: usize, seed: u32) -> Result<String, JsError> {
    forgetting_json(alpha, epochs, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cl_metrics(matrix: &str) -> Result<String, JsError> {
    cl_metrics_json(matrix).map_err(|e| JsError::new(&e))
}
