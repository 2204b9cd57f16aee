use ndarray::{s, Array2, ArrayView2, Axis};

use super::episode::ReplayState;
use crate::classifier::{argmax_rows, MlpClassifier};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::store::LatentDataset;

/// Teacher argmax labels for `latents`, ties to the smallest class.
pub fn pseudo_label(teacher: &MlpClassifier, latents: ArrayView2<f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(teacher.forward(latents)?.view()))
}

/// Generated samples in a full batch: `⌈replay_fraction · batch_size⌉`.
pub fn replay_count(batch_size: usize, replay_fraction: f64) -> usize {
    // The small offset keeps products like 0.1 · 30 from rounding up.
    let raw = replay_fraction * batch_size as f64 - 1e-9;
    (raw.ceil().max(0.0) as usize).min(batch_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub real: usize,
    pub generated: usize,
}

/// Splits one epoch over `n_train` current samples into mini-batches.
///
/// Each full batch holds `batch_size − g` real and `g = replay_count(..)`
/// generated samples; a short final batch keeps the same ratio, rounding the
/// generated count up. With `replay_fraction = 1` every batch is generated and
/// the epoch has `⌈n_train / batch_size⌉` of them.
pub fn batch_plan(n_train: usize, batch_size: usize, replay_fraction: f64) -> Vec<BatchPlan> {
    let generated = replay_count(batch_size, replay_fraction);
    let real = batch_size - generated;
    if real == 0 {
        return vec![BatchPlan { real: 0, generated }; n_train.div_ceil(batch_size)];
    }
    (0..n_train)
        .step_by(real)
        .map(|start| {
            let r = real.min(n_train - start);
            BatchPlan {
                real: r,
                generated: (generated * r).div_ceil(real),
            }
        })
        .collect()
}

/// One training batch: real rows first, generated rows after.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBatch {
    pub latents: Array2<f64>,
    pub labels: Vec<usize>,
    pub teacher_logits: Option<Array2<f64>>,
    pub generated: usize,
}

/// Builds a batch from the rows `real_indices` of `current` plus `generated`
/// fresh replay samples.
///
/// Generated KDE/GMM samples are labelled by the teacher's argmax; buffer
/// samples keep their stored labels. With `with_teacher_logits` the teacher's
/// logits cover the whole batch.
pub fn assemble_hybrid_batch(
    current: &LatentDataset,
    real_indices: &[usize],
    generated: usize,
    source: &ReplayState,
    teacher: Option<&MlpClassifier>,
    with_teacher_logits: bool,
    rng: &mut Rng,
) -> Result<HybridBatch> {
    let d = current.dim();
    let n_real = real_indices.len();
    let mut latents = Array2::zeros((n_real + generated, d));
    let mut labels = Vec::with_capacity(n_real + generated);
    for (row, &i) in real_indices.iter().enumerate() {
        latents.row_mut(row).assign(&current.features().row(i));
        labels.push(current.labels()[i]);
    }
    let mut needs_pseudo = false;
    if generated > 0 {
        let (gen, gen_labels) = source.draw(generated, rng)?;
        if gen.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: gen.ncols(),
            });
        }
        latents.slice_mut(s![n_real.., ..]).assign(&gen);
        match gen_labels {
            Some(l) => labels.extend(l),
            None => needs_pseudo = true,
        }
    }
    let teacher_required = with_teacher_logits || needs_pseudo;
    let teacher = match (teacher, teacher_required) {
        (Some(t), true) => Some(t),
        (None, true) => return Err(Error::invalid("replay or distillation requested without a teacher")),
        _ => None,
    };
    let mut teacher_logits = None;
    if let Some(t) = teacher {
        let logits = if with_teacher_logits {
            t.forward(latents.view())?
        } else {
            t.forward(latents.slice(s![n_real.., ..]))?
        };
        if needs_pseudo {
            let gen_logits = if with_teacher_logits {
                logits.slice_axis(Axis(0), (n_real..).into())
            } else {
                logits.view()
            };
            labels.extend(argmax_rows(gen_logits));
        }
        if with_teacher_logits {
            teacher_logits = Some(logits);
        }
    }
    Ok(HybridBatch {
        latents,
        labels,
        teacher_logits,
        generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continual::ReservoirBuffer;
    use crate::density::KdeGenerator;
    use crate::rng::stream;
    use ndarray::array;
    use proptest::prelude::*;

    fn constant_model(favoured: usize) -> MlpClassifier {
        let mut m = MlpClassifier::with_hidden(2, &[3], 3, 0).unwrap();
        m.params_mut().scale(0.0);
        let last = m.params().biases.len() - 1;
        m.params_mut().biases[last][favoured] = 1.0;
        m
    }

    fn toy() -> LatentDataset {
        LatentDataset::new("toy", 3, array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]], vec![0, 1, 2, 0])
            .unwrap()
    }

    #[test]
    fn pseudo_labels_follow_teacher() {
        let x = array![[1.0, 2.0], [-3.0, 4.0]];
        assert_eq!(pseudo_label(&constant_model(1), x.view()).unwrap(), vec![1, 1]);
        let mut tied = constant_model(0);
        tied.params_mut().scale(0.0);
        assert_eq!(pseudo_label(&tied, x.view()).unwrap(), vec![0, 0]);
        assert!(pseudo_label(&tied, array![[1.0]].view()).is_err());
    }

    #[test]
    fn replay_counts() {
        assert_eq!(replay_count(64, 0.5), 32);
        assert_eq!(replay_count(64, 0.0), 0);
        assert_eq!(replay_count(64, 1.0), 64);
        assert_eq!(replay_count(30, 0.1), 3);
        assert_eq!(replay_count(10, 0.25), 3);
    }

    #[test]
    fn plan_for_the_standard_batch() {
        let plan = batch_plan(600, 64, 0.5);
        assert_eq!(plan.len(), 19);
        for p in &plan[..18] {
            assert_eq!(*p, BatchPlan { real: 32, generated: 32 });
        }
        assert_eq!(plan[18], BatchPlan { real: 24, generated: 24 });
        let pure = batch_plan(600, 64, 0.0);
        assert_eq!(pure.len(), 10);
        assert_eq!(pure[9], BatchPlan { real: 24, generated: 0 });
        let all_gen = batch_plan(100, 64, 1.0);
        assert_eq!(all_gen, vec![BatchPlan { real: 0, generated: 64 }; 2]);
    }

    proptest! {
        #[test]
        fn plan_covers_every_real_sample(n in 1usize..500, bs in 1usize..100, rf in 0.0f64..0.99) {
            prop_assume!(replay_count(bs, rf) < bs);
            let plan = batch_plan(n, bs, rf);
            prop_assert_eq!(plan.iter().map(|p| p.real).sum::<usize>(), n);
            for p in &plan {
                prop_assert!(p.real + p.generated <= bs);
                prop_assert!(p.real > 0);
            }
        }
    }

    #[test]
    fn hybrid_batch_with_kde_replay() {
        let current = toy();
        let kde = KdeGenerator::new(array![[5.0, 5.0], [6.0, 6.0]]).unwrap();
        let teacher = constant_model(2);
        let b = assemble_hybrid_batch(
            &current,
            &[3, 1],
            4,
            &ReplayState::Kde(kde),
            Some(&teacher),
            true,
            &mut stream(0, &[]),
        )
        .unwrap();
        assert_eq!(b.latents.nrows(), 6);
        assert_eq!(b.generated, 4);
        assert_eq!(b.labels, vec![0, 1, 2, 2, 2, 2]);
        assert_eq!(b.latents.row(0), current.features().row(3));
        assert_eq!(b.teacher_logits.as_ref().unwrap().nrows(), 6);
    }

    #[test]
    fn hybrid_batch_from_buffer_keeps_true_labels() {
        let current = toy();
        let mut buf = ReservoirBuffer::new(10);
        buf.extend_from(&current, &mut stream(1, &[]));
        let b = assemble_hybrid_batch(
            &current,
            &[0],
            3,
            &ReplayState::Buffer(buf),
            None,
            false,
            &mut stream(2, &[]),
        )
        .unwrap();
        assert_eq!(b.labels.len(), 4);
        assert!(b.teacher_logits.is_none());
        for (row, &l) in b.latents.outer_iter().zip(&b.labels).skip(1) {
            let i = current.features().outer_iter().position(|r| r == row).unwrap();
            assert_eq!(current.labels()[i], l);
        }
    }

    #[test]
    fn replay_without_generator_or_teacher_fails() {
        let current = toy();
        let r = &mut stream(0, &[]);
        assert!(assemble_hybrid_batch(&current, &[0], 2, &ReplayState::None, None, false, r).is_err());
        let kde = ReplayState::Kde(KdeGenerator::new(array![[0.0, 0.0], [1.0, 1.0]]).unwrap());
        assert!(assemble_hybrid_batch(&current, &[0], 2, &kde, None, false, r).is_err());
        let pure = assemble_hybrid_batch(&current, &[0, 2], 0, &ReplayState::None, None, false, r).unwrap();
        assert_eq!(pure.labels, vec![0, 2]);
    }
}
