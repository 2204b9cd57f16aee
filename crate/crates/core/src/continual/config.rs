use serde::{Deserialize, Serialize};

use crate::classifier::{KlDirection, OptimizerConfig, DEFAULT_HIDDEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// KDE replay with hybrid batches plus distillation.
    #[default]
    Proposed,
    /// Per-domain GMM bank replay plus distillation.
    GlrclGmm,
    /// Reservoir buffer of raw latents with true labels, CE only.
    LatentBuffer,
    Naive,
    /// One model on the union of all train sets.
    Joint,
    /// Distillation on current-task batches, no replay.
    DstOnly,
    /// KDE replay with teacher pseudo-labels, CE only.
    GlrOnly,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::GlrclGmm => "glrcl_gmm",
            Self::LatentBuffer => "latent_buffer",
            Self::Naive => "naive",
            Self::Joint => "joint",
            Self::DstOnly => "dst_only",
            Self::GlrOnly => "glr_only",
        }
    }

    pub fn uses_kde(self) -> bool {
        matches!(self, Self::Proposed | Self::GlrOnly)
    }

    pub fn uses_distillation(self) -> bool {
        matches!(self, Self::Proposed | Self::GlrclGmm | Self::DstOnly)
    }

    pub fn uses_replay(self) -> bool {
        matches!(self, Self::Proposed | Self::GlrclGmm | Self::GlrOnly | Self::LatentBuffer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Label used in reports; defaults to the kind.
    pub name: Option<String>,
    pub kind: StrategyKind,
    pub alpha: f64,
    pub replay_fraction: f64,
    pub centers_per_domain: usize,
    /// Choose each domain's center count by BIC over `1..=bic_k_max`.
    pub select_k_by_bic: bool,
    pub bic_k_max: usize,
    /// Cluster each class separately, splitting `centers_per_domain` across classes.
    pub kmeans_per_class: bool,
    pub kmeans_max_iter: usize,
    pub gmm_components: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    pub buffer_capacity: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub hidden_layers: Vec<usize>,
    pub kl_direction: KlDirection,
    pub balance_classes: bool,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            name: None,
            kind: StrategyKind::Proposed,
            alpha: 0.2,
            replay_fraction: 0.5,
            centers_per_domain: 10,
            select_k_by_bic: false,
            bic_k_max: 20,
            kmeans_per_class: false,
            kmeans_max_iter: 100,
            gmm_components: 10,
            gmm_max_iter: 100,
            gmm_tol: 1e-6,
            buffer_capacity: 40,
            epochs: 30,
            batch_size: 64,
            optimizer: OptimizerConfig::default(),
            hidden_layers: DEFAULT_HIDDEN.to_vec(),
            kl_direction: KlDirection::default(),
            balance_classes: false,
            seed: 0,
        }
    }
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("strategy {}: {msg}", self.label())));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.replay_fraction) {
            return fail(format!("replay_fraction {} outside [0, 1]", self.replay_fraction));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if !(self.optimizer.lr > 0.0) {
            return fail("learning rate must be positive".into());
        }
        if self.kind.uses_kde() {
            if self.select_k_by_bic && self.bic_k_max == 0 {
                return fail("bic_k_max must be at least 1".into());
            }
            if !self.select_k_by_bic && self.centers_per_domain == 0 {
                return fail("centers_per_domain must be at least 1".into());
            }
        }
        if self.kind == StrategyKind::GlrclGmm && self.gmm_components == 0 {
            return fail("gmm_components must be at least 1".into());
        }
        Ok(())
    }

    /// `(alpha, replay_fraction)` actually used for an episode.
    pub(crate) fn effective(&self, has_teacher: bool) -> (f64, f64) {
        if !has_teacher {
            return (0.0, 0.0);
        }
        let alpha = if self.kind.uses_distillation() { self.alpha } else { 0.0 };
        let rf = if self.kind.uses_replay() { self.replay_fraction } else { 0.0 };
        (alpha, rf)
    }
}
