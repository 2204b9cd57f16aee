use rand::seq::SliceRandom;

use super::LatentDataset;
use crate::error::{Error, Result};
use crate::rng;

fn indices_by_class(dataset: &LatentDataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); dataset.class_count];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Stratified split without replacement: exactly `test_per_class` samples of
/// every class go to the test split. Both splits keep the input's row order.
pub fn make_split(
    dataset: &LatentDataset,
    test_per_class: usize,
    seed: u64,
) -> Result<(LatentDataset, LatentDataset)> {
    let mut rng = rng::stream(seed, &[rng::tag::DATA]);
    let mut is_test = vec![false; dataset.len()];
    for (class, mut idx) in indices_by_class(dataset).into_iter().enumerate() {
        if idx.len() <= test_per_class {
            return Err(Error::InsufficientSamples {
                class,
                available: idx.len(),
                requested: test_per_class,
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..test_per_class] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..dataset.len()).partition(|&i| is_test[i]);
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Subsamples every class down to the smallest class count.
pub fn balance_classes(dataset: &LatentDataset, seed: u64) -> LatentDataset {
    let by_class = indices_by_class(dataset);
    let target = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut rng = rng::stream(seed, &[rng::tag::BALANCE]);
    let mut keep: Vec<usize> = by_class
        .into_iter()
        .flat_map(|mut idx| {
            idx.shuffle(&mut rng);
            idx.truncate(target);
            idx
        })
        .collect();
    keep.sort_unstable();
    dataset.subset(&keep)
}
