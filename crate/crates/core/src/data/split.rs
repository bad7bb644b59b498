use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Train/valid/test fractions plus the shuffle seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, valid: f64, test: f64, seed: u64) -> Self {
        SplitSpec {
            train,
            valid,
            test,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train, self.valid, self.test];
        if fracs.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::InvalidSplit(format!(
                "fractions must be positive, got {fracs:?}"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// Part sizes for `n` rows: valid and test are floored, train takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let valid = floor_count(self.valid, n);
        let test = floor_count(self.test, n);
        (n - valid - test, valid, test)
    }
}

fn floor_count(fraction: f64, n: usize) -> usize {
    // Tolerate representation error such as 0.1 * 30 = 3.0000000000000004
    // in the other direction (0.29 * 100 = 28.999999999999996).
    ((fraction * n as f64) + 1e-9).floor() as usize
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    rows
}

fn take_sorted(ds: &Dataset, rows: &[usize]) -> Dataset {
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    ds.take_rows(&rows)
}

/// Seeded row-level random partition. Each part keeps the source row order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = ds.n_rows();
    if n < 10 {
        return Err(Error::InvalidSplit(format!("need at least 10 rows, got {n}")));
    }
    let (n_train, n_valid, n_test) = spec.sizes(n);
    if n_train == 0 || n_valid == 0 || n_test == 0 {
        return Err(Error::InvalidSplit(format!(
            "degenerate split of {n} rows into ({n_train}, {n_valid}, {n_test})"
        )));
    }
    let rows = shuffled(n, spec.seed);
    let (train, rest) = rows.split_at(n_train);
    let (valid, test) = rest.split_at(n_valid);
    Ok((take_sorted(ds, train), take_sorted(ds, valid), take_sorted(ds, test)))
}

/// Uniform sample without replacement of `floor(fraction * n)` rows.
pub fn subsample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidSplit(format!(
            "subsample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let keep = floor_count(fraction, ds.n_rows()).min(ds.n_rows());
    if keep == 0 {
        return Err(Error::InvalidSplit("subsample would be empty".into()));
    }
    let rows = shuffled(ds.n_rows(), seed);
    Ok(take_sorted(ds, &rows[..keep]))
}

/// Two-way seeded split: `(rest, held_out)` with `floor(fraction * n)` rows held out.
pub fn holdout(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    let held = floor_count(fraction, n);
    if !(fraction > 0.0 && fraction < 1.0) || held == 0 || held == n {
        return Err(Error::InvalidSplit(format!(
            "cannot hold out fraction {fraction} of {n} rows"
        )));
    }
    let rows = shuffled(n, seed);
    let (held_rows, rest) = rows.split_at(held);
    Ok((take_sorted(ds, rest), take_sorted(ds, held_rows)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn indexed(n: usize, rate_every: usize) -> Dataset {
        Dataset::builder()
            .numerical("id", (0..n).map(|i| i as f64).collect())
            .target("y", (0..n).map(|i| u8::from(i % rate_every == 0)).collect())
            .build()
            .unwrap()
    }

    fn ids(ds: &Dataset) -> Vec<usize> {
        ds.feature("id")
            .unwrap()
            .as_numerical()
            .unwrap()
            .values()
            .iter()
            .map(|&v| v as usize)
            .collect()
    }

    #[test]
    fn sizes_follow_floor_and_remainder_rule() {
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 7);
        let (a, b, c) = split(&indexed(100, 2), &spec).unwrap();
        assert_eq!((a.n_rows(), b.n_rows(), c.n_rows()), (80, 10, 10));
        let (a, b, c) = split(&indexed(103, 2), &spec).unwrap();
        assert_eq!((a.n_rows(), b.n_rows(), c.n_rows()), (83, 10, 10));
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = indexed(200, 3);
        let s1 = split(&ds, &SplitSpec::new(0.8, 0.1, 0.1, 1)).unwrap();
        let s1b = split(&ds, &SplitSpec::new(0.8, 0.1, 0.1, 1)).unwrap();
        let s2 = split(&ds, &SplitSpec::new(0.8, 0.1, 0.1, 2)).unwrap();
        assert_eq!(s1, s1b);
        assert_ne!(ids(&s1.1), ids(&s2.1));
    }

    #[test]
    fn rejects_degenerate_specs() {
        let ds = indexed(10, 2);
        assert!(split(&ds, &SplitSpec::new(0.9, 0.05, 0.05, 0)).is_err());
        assert!(split(&ds, &SplitSpec::new(0.8, 0.3, 0.1, 0)).is_err());
        assert!(split(&ds, &SplitSpec::new(1.0, 0.0, 0.0, 0)).is_err());
        assert!(split(&indexed(9, 2), &SplitSpec::default()).is_err());
    }

    #[test]
    fn subsample_sizes() {
        let ds = indexed(1000, 2);
        assert_eq!(subsample(&ds, 0.1, 3).unwrap().n_rows(), 100);
        let full = subsample(&ds, 1.0, 3).unwrap();
        let mut got = ids(&full);
        got.sort_unstable();
        assert_eq!(got, (0..1000).collect::<Vec<_>>());
        assert!(subsample(&ds, 0.0, 3).is_err());
        assert!(subsample(&ds, 1.5, 3).is_err());
        assert!(subsample(&indexed(5, 2), 0.1, 3).is_err());
    }

    #[test]
    fn subsample_keeps_class_rate() {
        // Monte Carlo: 20 seeds, parent rate 0.2.
        let ds = indexed(10_000, 5);
        let parent = ds.positive_rate();
        for seed in 0..20 {
            let sample = subsample(&ds, 0.1, seed).unwrap();
            assert!((sample.positive_rate() - parent).abs() < 0.05, "seed {seed}");
        }
    }

    #[test]
    fn holdout_partitions() {
        let ds = indexed(50, 2);
        let (rest, held) = holdout(&ds, 0.2, 9).unwrap();
        assert_eq!((rest.n_rows(), held.n_rows()), (40, 10));
        let mut all = ids(&rest);
        all.extend(ids(&held));
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn split_is_disjoint_and_covering(n in 10usize..400, seed in any::<u64>()) {
            let ds = indexed(n, 3);
            let spec = SplitSpec::new(0.8, 0.1, 0.1, seed);
            let (n_train, n_valid, n_test) = spec.sizes(n);
            prop_assume!(n_valid > 0 && n_test > 0 && n_train > 0);
            let (a, b, c) = split(&ds, &spec).unwrap();
            let mut all = ids(&a);
            all.extend(ids(&b));
            all.extend(ids(&c));
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
