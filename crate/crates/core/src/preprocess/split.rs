use serde::{Deserialize, Serialize};

use crate::common::{partition_tasks, ValidationError};
use crate::rng::SplitMix64;

/// Train/valid/test ratios plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.7, 0.1, 0.2],
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, valid: f64, test: f64, seed: u64) -> Result<Self, ValidationError> {
        let spec = Self {
            ratios: [train, valid, test],
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let [train, valid, test] = self.ratios;
        for (name, r) in [("ratios.train", train), ("ratios.valid", valid), ("ratios.test", test)] {
            if !r.is_finite() {
                return Err(ValidationError::type_mismatch(
                    name,
                    format!("expected a finite ratio, got {r}"),
                    r,
                ));
            }
            if r < 0.0 {
                return Err(ValidationError::range(name, format!("ratio {r} is negative"), r));
            }
        }
        if train <= 0.0 {
            return Err(ValidationError::range(
                "ratios.train",
                "train ratio must be positive",
                train,
            ));
        }
        let sum = train + valid + test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ValidationError::range(
                "ratios",
                format!("ratios ({train}, {valid}, {test}) sum to {sum}, expected 1"),
                sum,
            ));
        }
        Ok(())
    }

    /// Cut points `(⌊n·r_train⌋, ⌊n·(r_train + r_valid)⌋)`.
    ///
    /// A 1e-9 slack absorbs binary rounding so products that are integers in
    /// exact arithmetic (10 × (0.7 + 0.1)) floor to that integer.
    pub fn cut_points(&self, n: usize) -> (usize, usize) {
        let floor = |x: f64| ((x + 1e-9).floor().max(0.0) as usize).min(n);
        let first = floor(n as f64 * self.ratios[0]);
        let second = floor(n as f64 * (self.ratios[0] + self.ratios[1])).max(first);
        (first, second)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

/// Index form of [`split`]: a seeded permutation of `0..n` cut into three.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split<usize>, ValidationError> {
    spec.validate()?;
    if spec.ratios.iter().all(|&r| r > 0.0) && n < 3 {
        return Err(ValidationError::range(
            "examples",
            format!("need at least 3 examples for a three-way split, got {n}"),
            n,
        ));
    }
    let perm = SplitMix64::new(spec.seed).permutation(n);
    let (a, b) = spec.cut_points(n);
    Ok(Split {
        train: perm[..a].to_vec(),
        valid: perm[a..b].to_vec(),
        test: perm[b..].to_vec(),
    })
}

/// Seeded shuffle then cut into train/valid/test at the floor cut points.
pub fn split<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<Split<T>, ValidationError> {
    let idx = split_indices(items.len(), spec)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect();
    Ok(Split {
        train: pick(&idx.train),
        valid: pick(&idx.valid),
        test: pick(&idx.test),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
}

/// k-fold index sets: seeded shuffle, test folds sized by `partition_tasks`
/// (earlier folds take the remainder), train = complement in permuted order.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold<usize>>, ValidationError> {
    if k < 2 {
        return Err(ValidationError::range("k", format!("need k >= 2, got {k}"), k));
    }
    if k > n {
        return Err(ValidationError::range(
            "k",
            format!("k = {k} exceeds the {n} available examples"),
            k,
        ));
    }
    let perm = SplitMix64::new(seed).permutation(n);
    let sizes = partition_tasks(n, k)?;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for size in sizes {
        let end = start + size;
        let test = perm[start..end].to_vec();
        let train = perm[..start].iter().chain(&perm[end..]).copied().collect();
        folds.push(Fold { train, test });
        start = end;
    }
    Ok(folds)
}

pub fn kfold<T: Clone>(items: &[T], k: usize, seed: u64) -> Result<Vec<Fold<T>>, ValidationError> {
    let folds = kfold_indices(items.len(), k, seed)?;
    Ok(folds
        .into_iter()
        .map(|f| Fold {
            train: f.train.iter().map(|&i| items[i].clone()).collect(),
            test: f.test.iter().map(|&i| items[i].clone()).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(n: usize, r: [f64; 3], seed: u64) -> (usize, usize, usize) {
        let s = split_indices(n, &SplitSpec { ratios: r, seed }).unwrap();
        (s.train.len(), s.valid.len(), s.test.len())
    }

    #[test]
    fn floor_sizes() {
        assert_eq!(sizes(10, [0.7, 0.1, 0.2], 1), (7, 1, 2));
        assert_eq!(sizes(10, [1.0, 0.0, 0.0], 1), (10, 0, 0));
        for seed in 0..20 {
            assert_eq!(sizes(5, [0.5, 0.25, 0.25], seed), (2, 1, 2));
        }
    }

    #[test]
    fn bad_ratios() {
        assert!(SplitSpec::new(0.5, 0.5, 0.5, 0).is_err());
        assert!(SplitSpec::new(0.0, 0.5, 0.5, 0).is_err());
        assert!(SplitSpec::new(1.2, -0.2, 0.0, 0).is_err());
        assert!(SplitSpec::new(f64::NAN, 0.5, 0.5, 0).is_err());
        assert!(split_indices(2, &SplitSpec::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let items: Vec<u32> = (0..50).collect();
        let spec = SplitSpec::default();
        assert_eq!(split(&items, &spec).unwrap(), split(&items, &spec).unwrap());
        let other = SplitSpec { seed: 43, ..spec };
        assert_ne!(split(&items, &spec).unwrap(), split(&items, &other).unwrap());
    }

    #[test]
    fn kfold_examples() {
        let folds = kfold_indices(10, 5, 3).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
        let mut sizes: Vec<_> = kfold_indices(10, 3, 3).unwrap().iter().map(|f| f.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [3, 3, 4]);
        let mut all: Vec<_> = kfold_indices(10, 3, 3)
            .unwrap()
            .into_iter()
            .flat_map(|f| f.test)
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(kfold_indices(3, 4, 0).is_err());
        assert!(kfold_indices(3, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions(n in 3usize..400, a in 1u32..1000, b in 0u32..1000, seed: u64) {
            let b = b.min(1000 - a);
            let c = 1000 - a - b;
            let spec = SplitSpec { ratios: [a as f64 / 1000.0, b as f64 / 1000.0, c as f64 / 1000.0], seed };
            prop_assume!(spec.validate().is_ok());
            let s = split_indices(n, &spec).unwrap();
            let mut all: Vec<_> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), n * a as usize / 1000);
            prop_assert_eq!(s.train.len() + s.valid.len(), n * (a + b) as usize / 1000);
        }
    }
}
