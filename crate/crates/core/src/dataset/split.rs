use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Row indices of a train/test partition, each in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions row indices into train and test.
///
/// The test size is `round(n * test_fraction)`; with `stratified` the
/// rounding is done per class and the remainder stays in train. Row order
/// inside each partition follows the original data.
pub fn split_indices(
    labels: &[usize],
    n_classes: usize,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitIndices> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!(
            "test fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    let n = labels.len();
    if n == 0 && test_fraction > 0.0 {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }

    let mut rng = rng::seeded(seed);
    let mut is_test = vec![false; n];
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        for members in &mut by_class {
            let take = (members.len() as f64 * test_fraction).round() as usize;
            members.shuffle(&mut rng);
            for &i in &members[..take] {
                is_test[i] = true;
            }
        }
    } else {
        let take = (n as f64 * test_fraction).round() as usize;
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        for &i in &all[..take] {
            is_test[i] = true;
        }
    }

    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_test[i]);
    Ok(SplitIndices { train, test })
}

pub fn split(
    data: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(
        data.labels(),
        data.n_classes(),
        test_fraction,
        seed,
        stratified,
    )?;
    Ok((data.select(&idx.train), data.select(&idx.test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureSchema, Matrix};
    use proptest::prelude::*;

    fn balanced(n_per_class: usize) -> Dataset {
        let n = 3 * n_per_class;
        let rows: Vec<[f64; 4]> = (0..n).map(|i| [i as f64, 0.0, 0.0, 0.0]).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        Dataset::new(
            FeatureSchema::posture(),
            Matrix::from_rows(4, &rows).unwrap(),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn stratified_80_20_on_180_rows() {
        let d = balanced(60);
        let (train, test) = split(&d, 0.2, 42, true).unwrap();
        assert_eq!(test.len(), 36);
        assert_eq!(train.len(), 144);
        assert_eq!(test.class_counts(), vec![12, 12, 12]);
        assert_eq!(train.class_counts(), vec![48, 48, 48]);
    }

    #[test]
    fn zero_fraction_keeps_everything_in_order() {
        let d = balanced(5);
        let (train, test) = split(&d, 0.0, 7, true).unwrap();
        assert!(test.is_empty());
        assert_eq!(train, d);
    }

    #[test]
    fn seeded_determinism() {
        let labels: Vec<usize> = (0..180).map(|i| i % 3).collect();
        let a = split_indices(&labels, 3, 0.2, 1, true).unwrap();
        let b = split_indices(&labels, 3, 0.2, 1, true).unwrap();
        let c = split_indices(&labels, 3, 0.2, 2, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn bad_fraction_is_config_error() {
        let labels = vec![0, 1, 2];
        for f in [1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                split_indices(&labels, 3, f, 0, true),
                Err(Error::Config(_))
            ));
        }
        assert!(matches!(
            split_indices(&[], 3, 0.2, 0, false),
            Err(Error::Config(_))
        ));
        assert!(split_indices(&[], 3, 0.0, 0, false)
            .unwrap()
            .train
            .is_empty());
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_complete(
            labels in proptest::collection::vec(0usize..3, 1..120),
            fraction in 0.0f64..0.95,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            let s = split_indices(&labels, 3, fraction, seed, stratified).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            if stratified {
                for c in 0..3 {
                    let n_c = labels.iter().filter(|&&l| l == c).count();
                    let t_c = s.test.iter().filter(|&&i| labels[i] == c).count();
                    prop_assert!((t_c as f64 - n_c as f64 * fraction).abs() < 1.0);
                }
            } else {
                prop_assert_eq!(s.test.len(), (labels.len() as f64 * fraction).round() as usize);
            }
        }
    }
}
