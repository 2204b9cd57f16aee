use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::batch::{assemble_hybrid_batch, batch_plan};
use super::buffer::ReservoirBuffer;
use super::config::{StrategyConfig, StrategyKind};
use crate::classifier::{accuracy, loss_and_grad, LossBreakdown, MlpClassifier, OptimizerState};
use crate::density::{bic_select_k, kmeans, GmmBank, GmmModel, KdeGenerator, LatentGenerator};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, tag, Rng};
use crate::store::LatentDataset;

/// What a strategy replays from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "state")]
pub enum ReplayState {
    #[default]
    None,
    Kde(KdeGenerator),
    GmmBank(GmmBank),
    Buffer(ReservoirBuffer),
}

impl ReplayState {
    /// Draws `n` replay latents; buffer items come with their stored labels.
    pub(crate) fn draw(&self, n: usize, rng: &mut Rng) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
        match self {
            Self::None => Err(Error::invalid("replay requested but no generator exists yet")),
            Self::Kde(g) if g.is_empty() => Err(Error::Empty("KDE support")),
            Self::Kde(g) => Ok((g.sample_with(n, rng)?, None)),
            Self::GmmBank(b) if b.is_empty() => Err(Error::Empty("GMM bank")),
            Self::GmmBank(b) => Ok((b.sample_with(n, rng)?, None)),
            Self::Buffer(b) => {
                let (rows, labels) = b.sample(n, rng)?;
                let d = b.items().first().map_or(0, |(x, _)| x.len());
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                let m = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::invalid(e.to_string()))?;
                Ok((m, Some(labels)))
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Self::None => true,
            Self::Kde(g) => g.is_empty(),
            Self::GmmBank(b) => b.is_empty(),
            Self::Buffer(b) => b.is_empty(),
        }
    }

    pub fn as_generator(&self) -> Option<&dyn LatentGenerator> {
        match self {
            Self::Kde(g) => Some(g),
            Self::GmmBank(b) => Some(b),
            _ => None,
        }
    }

    /// Support points (KDE), domain models (GMM) or stored items (buffer).
    pub fn size(&self) -> usize {
        match self {
            Self::None => 0,
            Self::Kde(g) => g.len(),
            Self::GmmBank(b) => b.len(),
            Self::Buffer(b) => b.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub model: MlpClassifier,
    pub replay: ReplayState,
    /// Accuracy on each evaluation set after training, in `[0, 100]`.
    pub accuracy_row: Vec<f64>,
    /// Batch-averaged loss per epoch.
    pub epoch_losses: Vec<LossBreakdown>,
}

fn cluster_centers(train: &LatentDataset, cfg: &StrategyConfig, seed: u64) -> Result<Array2<f64>> {
    let fit = |points: ndarray::ArrayView2<f64>, k: usize, seed: u64| -> Result<Array2<f64>> {
        if cfg.select_k_by_bic {
            let k_max = cfg.bic_k_max.min(points.nrows());
            Ok(bic_select_k(points, 1, k_max, cfg.kmeans_max_iter, seed)?.best().centers.clone())
        } else {
            Ok(kmeans(points, k, cfg.kmeans_max_iter, seed)?.centers)
        }
    };
    if !cfg.kmeans_per_class {
        return fit(train.features().view(), cfg.centers_per_domain, seed);
    }
    let classes = train.class_count;
    let mut parts = Vec::new();
    for c in 0..classes {
        let idx: Vec<usize> = (0..train.len()).filter(|&i| train.labels()[i] == c).collect();
        let k = cfg.centers_per_domain / classes + usize::from(c < cfg.centers_per_domain % classes);
        if k == 0 || idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::InsufficientSamples {
                class: c,
                available: idx.len(),
                requested: k,
            });
        }
        let points = train.features().select(Axis(0), &idx);
        parts.push(fit(points.view(), k, derive_seed(seed, &[c as u64]))?);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| Error::invalid(e.to_string()))
}

/// Folds the episode's training data into the replay source.
pub fn update_replay(
    state: &ReplayState,
    train: &LatentDataset,
    cfg: &StrategyConfig,
    episode: usize,
) -> Result<ReplayState> {
    let seed = derive_seed(cfg.seed, &[tag::GENERATOR, episode as u64]);
    match cfg.kind {
        StrategyKind::Proposed | StrategyKind::GlrOnly => {
            let centers = cluster_centers(train, cfg, seed)?;
            let prev = match state {
                ReplayState::Kde(g) => Some(g),
                ReplayState::None => None,
                _ => return Err(Error::invalid("KDE strategy holds a non-KDE replay state")),
            };
            Ok(ReplayState::Kde(KdeGenerator::update(prev, centers.view())?))
        }
        StrategyKind::GlrclGmm => {
            let mut bank = match state {
                ReplayState::GmmBank(b) => b.clone(),
                ReplayState::None => GmmBank::default(),
                _ => return Err(Error::invalid("GMM strategy holds a non-GMM replay state")),
            };
            let model = GmmModel::fit(
                train.features().view(),
                cfg.gmm_components,
                cfg.gmm_max_iter,
                cfg.gmm_tol,
                seed,
            )?;
            bank.push(model)?;
            Ok(ReplayState::GmmBank(bank))
        }
        StrategyKind::LatentBuffer => {
            let mut buf = match state {
                ReplayState::Buffer(b) => b.clone(),
                ReplayState::None => ReservoirBuffer::new(cfg.buffer_capacity),
                _ => return Err(Error::invalid("buffer strategy holds a non-buffer replay state")),
            };
            buf.extend_from(train, &mut stream(cfg.seed, &[tag::BUFFER, episode as u64]));
            Ok(ReplayState::Buffer(buf))
        }
        StrategyKind::Naive | StrategyKind::Joint | StrategyKind::DstOnly => Ok(ReplayState::None),
    }
}

/// Trains `student` on one episode and updates the replay source.
///
/// With a teacher, the student is expected to start from the teacher's
/// parameters. Without one (the first episode) the loss is plain
/// cross-entropy on current data whatever the strategy.
pub fn train_episode(
    student: MlpClassifier,
    teacher: Option<&MlpClassifier>,
    train: &LatentDataset,
    replay: &ReplayState,
    cfg: &StrategyConfig,
    episode: usize,
    eval_sets: &[&LatentDataset],
) -> Result<EpisodeOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("episode train set"));
    }
    if let Some(t) = teacher {
        if t.layer_dims() != student.layer_dims() {
            return Err(Error::invalid("teacher and student architectures differ"));
        }
    }
    let (alpha, mut replay_fraction) = cfg.effective(teacher.is_some());
    if replay_fraction > 0.0 && replay.is_empty() {
        return Err(Error::invalid(format!(
            "strategy {} requests replay at episode {} but has no replay source",
            cfg.label(),
            episode + 1
        )));
    }
    if teacher.is_none() {
        replay_fraction = 0.0;
    }
    let balanced;
    let train = if cfg.balance_classes {
        balanced = crate::store::balance_classes(train, derive_seed(cfg.seed, &[tag::BALANCE, episode as u64]));
        &balanced
    } else {
        train
    };

    let mut model = student;
    let mut opt = OptimizerState::new(cfg.optimizer)?;
    let mut shuffle_rng = stream(cfg.seed, &[tag::SHUFFLE, episode as u64]);
    let mut replay_rng = stream(cfg.seed, &[tag::REPLAY, episode as u64]);
    let plan = batch_plan(train.len(), cfg.batch_size, replay_fraction);
    let with_logits = alpha > 0.0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut cursor = 0;
        let mut sum = LossBreakdown {
            total: 0.0,
            ce: 0.0,
            kld: 0.0,
            alpha,
        };
        for p in &plan {
            let idx = &order[cursor..cursor + p.real];
            cursor += p.real;
            let batch = assemble_hybrid_batch(train, idx, p.generated, replay, teacher, with_logits, &mut replay_rng)?;
            let (loss, grads) = loss_and_grad(
                &model,
                batch.latents.view(),
                &batch.labels,
                batch.teacher_logits.as_ref().map(|t| t.view()),
                alpha,
                cfg.kl_direction,
            )?;
            opt.step(&mut model, &grads)?;
            sum.total += loss.total;
            sum.ce += loss.ce;
            sum.kld += loss.kld;
        }
        let k = plan.len().max(1) as f64;
        epoch_losses.push(LossBreakdown {
            total: sum.total / k,
            ce: sum.ce / k,
            kld: sum.kld / k,
            alpha,
        });
    }

    let replay = update_replay(replay, train, cfg, episode)?;
    let accuracy_row = eval_sets
        .iter()
        .map(|d| accuracy(&model, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpisodeOutcome {
        model,
        replay,
        accuracy_row,
        epoch_losses,
    })
}
