use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continual::{StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::metrics::FidelityConfig;
use crate::store::BenchmarkSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkConfig {
    Synthetic(BenchmarkSpec),
    Manifests(ManifestBenchmark),
}

/// Precomputed latents. Paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestBenchmark {
    pub domains: Vec<ManifestDomain>,
    /// Per-class test count for domains without a separate test manifest.
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_test_per_class() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDomain {
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub name: String,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub benchmark: BenchmarkConfig,
    pub sequences: Vec<SequenceSpec>,
    /// Each strategy's own `seed` is replaced by the cell seed.
    pub strategies: Vec<StrategyConfig>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Generator fidelity of KDE and GMM replay, when present.
    #[serde(default)]
    pub fidelity: Option<FidelityConfig>,
    /// KDE vs GMM held-out log-likelihood per sequence prefix.
    #[serde(default)]
    pub loglik: bool,
    /// α values for a sweep of the proposed strategy.
    #[serde(default)]
    pub alpha_sweep: Option<Vec<f64>>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn domain_count(&self) -> usize {
        match &self.benchmark {
            BenchmarkConfig::Synthetic(s) => s.domains,
            BenchmarkConfig::Manifests(m) => m.domains.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let domains = self.domain_count();
        if domains == 0 {
            return fail("benchmark has no domains".into());
        }
        if let BenchmarkConfig::Synthetic(s) = &self.benchmark {
            s.domain_specs().map_err(|e| Error::Config(e.to_string()))?;
            for spec in s.domain_specs()? {
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if self.sequences.is_empty() {
            return fail("at least one sequence is required".into());
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        let mut names = HashSet::new();
        for s in &self.sequences {
            if s.name.is_empty() || !names.insert(s.name.as_str()) {
                return fail(format!("sequence names must be unique and non-empty: {:?}", s.name));
            }
            if s.order.is_empty() {
                return fail(format!("sequence {} has an empty order", s.name));
            }
            let mut seen = HashSet::new();
            for &i in &s.order {
                if i >= domains || !seen.insert(i) {
                    return fail(format!(
                        "sequence {}: order {:?} is not a permutation of domains 0..{domains}",
                        s.name, s.order
                    ));
                }
            }
        }
        let longest = self.sequences.iter().map(|s| s.order.len()).max().unwrap_or(0);
        let mut labels = HashSet::new();
        for st in &self.strategies {
            st.validate()?;
            if !labels.insert(st.label().to_string()) {
                return fail(format!("duplicate strategy name {}", st.label()));
            }
            if st.kind == StrategyKind::LatentBuffer && st.buffer_capacity == 0 && longest > 1 && st.replay_fraction > 0.0 {
                return fail(format!("strategy {}: buffer replay with zero capacity", st.label()));
            }
        }
        let mut seeds = HashSet::new();
        if !self.seeds.iter().all(|s| seeds.insert(*s)) {
            return fail("seeds must be distinct".into());
        }
        if let Some(alphas) = &self.alpha_sweep {
            if alphas.is_empty() {
                return fail("alpha_sweep must not be empty when given".into());
            }
            if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                return fail(format!("alpha_sweep value {a} outside [0, 1]"));
            }
        }
        if let Some(f) = &self.fidelity {
            if f.beta == Some(0) {
                return fail("fidelity beta must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Base configuration of the proposed strategy: the first listed one or
    /// the defaults.
    pub fn proposed_base(&self) -> StrategyConfig {
        self.first_of(StrategyKind::Proposed)
    }

    pub fn gmm_base(&self) -> StrategyConfig {
        self.first_of(StrategyKind::GlrclGmm)
    }

    fn first_of(&self, kind: StrategyKind) -> StrategyConfig {
        self.strategies
            .iter()
            .find(|s| s.kind == kind)
            .cloned()
            .unwrap_or_else(|| StrategyConfig::new(kind))
    }

    /// Resolves a config-relative path.
    pub fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "benchmark": {"synthetic": {"domains": 2, "dim": 4}},
        "sequences": [{"name": "s1", "order": [0, 1]}],
        "strategies": [{"kind": "naive", "epochs": 1}],
        "seeds": [1]
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.domain_count(), 2);
        assert_eq!(c.output_dir, PathBuf::from("results"));
        assert!(!c.loglik);
        assert_eq!(c.proposed_base().kind, StrategyKind::Proposed);
    }

    fn with(edit: impl FnOnce(&mut serde_json::Value)) -> Result<ExperimentConfig> {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        edit(&mut v);
        ExperimentConfig::from_json(&v.to_string())
    }

    #[test]
    fn schema_violations_are_config_errors() {
        let cases: Vec<Box<dyn FnOnce(&mut serde_json::Value)>> = vec![
            Box::new(|v| v["schema_version"] = 2.into()),
            Box::new(|v| v["sequences"] = serde_json::json!([])),
            Box::new(|v| v["sequences"][0]["order"] = serde_json::json!([0, 0])),
            Box::new(|v| v["sequences"][0]["order"] = serde_json::json!([0, 2])),
            Box::new(|v| v["seeds"] = serde_json::json!([])),
            Box::new(|v| v["seeds"] = serde_json::json!([3, 3])),
            Box::new(|v| v["strategies"][0]["alpha"] = 2.0.into()),
            Box::new(|v| v["strategies"] = serde_json::json!([{"kind": "naive"}, {"kind": "naive"}])),
            Box::new(|v| v["strategies"][0] = serde_json::json!({"kind": "latent_buffer", "buffer_capacity": 0})),
            Box::new(|v| v["alpha_sweep"] = serde_json::json!([0.1, 1.5])),
            Box::new(|v| v["surprise"] = true.into()),
            Box::new(|v| v["benchmark"] = serde_json::json!({"synthetic": {"spread": 0.0}})),
        ];
        for (i, edit) in cases.into_iter().enumerate() {
            match with(edit) {
                Err(e) => assert!(e.is_config(), "case {i}: {e}"),
                Ok(_) => panic!("case {i} should fail"),
            }
        }
    }
}
