use ndarray::{concatenate, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::sample_metrics::{cosine_avg, euclidean_avg, fid, mmd_with_estimator, FidMode, MmdEstimator, Pairing};
use crate::density::LatentGenerator;
use crate::error::{Error, Result};
use crate::rng::{stream, tag};
use crate::store::LatentDataset;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "gamma")]
pub enum MmdBandwidth {
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityConfig {
    /// Real samples per past domain; `None` uses the smallest past train size.
    pub beta: Option<usize>,
    pub mmd_bandwidth: MmdBandwidth,
    pub mmd_estimator: MmdEstimator,
    pub fid_mode: FidMode,
    pub pairing: Pairing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    /// One-based session whose past domains are compared.
    pub session: usize,
    pub beta: usize,
    pub cosine: f64,
    pub euclidean: f64,
    pub fid: f64,
    pub mmd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub pairing: Pairing,
    pub rows: Vec<FidelityRow>,
    /// Per-metric means over sessions; `session` and `beta` are zero.
    pub mean: FidelityRow,
}

/// Compares each generator with the real domains it was built from.
///
/// `generators[k]` must model `domains[0..=k]` (the generator available at
/// session `k + 2`). For each one, `β` real latents are drawn without
/// replacement from every past domain and `(k + 1)·β` latents from the
/// generator.
pub fn fidelity_report(
    generators: &[&dyn LatentGenerator],
    domains: &[&LatentDataset],
    cfg: &FidelityConfig,
    seed: u64,
) -> Result<FidelityReport> {
    if generators.is_empty() {
        return Err(Error::NotApplicable("fidelity needs at least two sessions"));
    }
    if domains.len() < generators.len() {
        return Err(Error::invalid(format!(
            "{} generators but only {} domains",
            generators.len(),
            domains.len()
        )));
    }
    let mut rows = Vec::with_capacity(generators.len());
    for (k, gen) in generators.iter().enumerate() {
        let past = &domains[..=k];
        let smallest = past.iter().map(|d| d.len()).min().expect("nonempty");
        let beta = match cfg.beta {
            None => smallest,
            Some(0) => return Err(Error::invalid("beta must be at least 1")),
            Some(b) if b > smallest => {
                return Err(Error::TooFewSamples {
                    what: "fidelity beta",
                    available: smallest,
                    requested: b,
                })
            }
            Some(b) => b,
        };
        let mut parts = Vec::with_capacity(past.len());
        for (j, d) in past.iter().enumerate() {
            let mut r = stream(seed, &[tag::FIDELITY, k as u64, j as u64]);
            let idx = index::sample(&mut r, d.len(), beta).into_vec();
            parts.push(d.features().select(Axis(0), &idx));
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let real = concatenate(Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))?;
        let mut r = stream(seed, &[tag::FIDELITY, k as u64, u64::MAX]);
        let generated = gen.sample_with(real.nrows(), &mut r)?;
        let gamma = match cfg.mmd_bandwidth {
            MmdBandwidth::Median => None,
            MmdBandwidth::Fixed(g) => Some(g),
        };
        rows.push(FidelityRow {
            session: k + 2,
            beta,
            cosine: cosine_avg(real.view(), generated.view(), cfg.pairing)?,
            euclidean: euclidean_avg(real.view(), generated.view(), cfg.pairing)?,
            fid: fid(real.view(), generated.view(), cfg.fid_mode)?,
            mmd: mmd_with_estimator(real.view(), generated.view(), gamma, cfg.mmd_estimator)?,
        });
    }
    let n = rows.len() as f64;
    let avg = |f: fn(&FidelityRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean = FidelityRow {
        session: 0,
        beta: 0,
        cosine: avg(|r| r.cosine),
        euclidean: avg(|r| r.euclidean),
        fid: avg(|r| r.fid),
        mmd: avg(|r| r.mmd),
    };
    Ok(FidelityReport {
        pairing: cfg.pairing,
        rows,
        mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoglikRow {
    pub prefix_len: usize,
    pub eval_count: usize,
    pub kde: f64,
    pub gmm: f64,
}

/// Mean log-density of both generator families on held-out latents pooled
/// over each prefix. `kde[k]` and `gmm[k]` must be fitted on the first
/// `k + 1` domains.
pub fn loglik_comparison(
    heldout: &[&LatentDataset],
    kde: &[&dyn LatentGenerator],
    gmm: &[&dyn LatentGenerator],
) -> Result<Vec<LoglikRow>> {
    if kde.len() != gmm.len() || kde.len() > heldout.len() {
        return Err(Error::invalid(format!(
            "need one KDE and one GMM per prefix: {} KDE, {} GMM, {} domains",
            kde.len(),
            gmm.len(),
            heldout.len()
        )));
    }
    let mut rows = Vec::with_capacity(kde.len());
    for (k, (kg, gg)) in kde.iter().zip(gmm).enumerate() {
        let views: Vec<_> = heldout[..=k].iter().map(|d| d.features().view()).collect();
        let pooled = concatenate(Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))?;
        rows.push(LoglikRow {
            prefix_len: k + 1,
            eval_count: pooled.nrows(),
            kde: kg.log_likelihood(pooled.view())?,
            gmm: gg.log_likelihood(pooled.view())?,
        });
    }
    Ok(rows)
}
