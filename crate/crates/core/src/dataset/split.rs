use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LabeledInstance;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of each size bucket held out for testing.
    pub test_frac: f64,
    /// Share of each size bucket of the remaining training data held out for validation.
    pub val_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_frac: 0.2,
            val_frac: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledInstance>,
    pub val: Vec<LabeledInstance>,
    pub test: Vec<LabeledInstance>,
}

/// Splits stratified by exact vertex count.
///
/// Buckets are visited in increasing `n`; each is shuffled with one shared
/// seeded generator and its first `round(len * frac)` members are held out.
/// Validation is carved from the remaining training members the same way.
/// Every part keeps the original dataset order.
pub fn split(ds: &[LabeledInstance], cfg: &SplitConfig) -> Result<DatasetSplit> {
    if ds.is_empty() {
        return Err(Error::param("cannot split an empty dataset"));
    }
    for (name, f) in [("test_frac", cfg.test_frac), ("val_frac", cfg.val_frac)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::param(format!("{name}={f} must lie in (0, 1)")));
        }
    }
    if cfg.test_frac + cfg.val_frac >= 1.0 {
        return Err(Error::param("test_frac + val_frac must be below 1"));
    }

    let mut rng = Rng::new(cfg.seed);
    let all: Vec<usize> = (0..ds.len()).collect();
    let (test, rest) = stratified(ds, &all, cfg.test_frac, &mut rng);
    let (val, train) = stratified(ds, &rest, cfg.val_frac, &mut rng);
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| ds[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(train),
        val: pick(val),
        test: pick(test),
    })
}

/// Returns `(held_out, kept)` index lists, both sorted.
fn stratified(ds: &[LabeledInstance], indices: &[usize], frac: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        buckets.entry(ds[i].n()).or_default().push(i);
    }
    let (mut held, mut kept) = (Vec::new(), Vec::new());
    for bucket in buckets.values_mut() {
        rng.shuffle(bucket);
        let take = (bucket.len() as f64 * frac).round() as usize;
        held.extend_from_slice(&bucket[..take]);
        kept.extend_from_slice(&bucket[take..]);
    }
    held.sort_unstable();
    kept.sort_unstable();
    (held, kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GenParams, Graph};

    fn fake(sizes: &[usize]) -> Vec<LabeledInstance> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| LabeledInstance {
                id: format!("x-{i}"),
                graph: Graph::empty(n),
                gamma: n,
                gen: GenParams::ErdosRenyi {
                    n,
                    p: 0.0,
                    seed: i as u64,
                },
            })
            .collect()
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(split(&[], &SplitConfig::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let ds = fake(&[5, 6]);
        for (t, v) in [(0.0, 0.1), (1.0, 0.1), (0.2, 0.0), (0.6, 0.5), (f64::NAN, 0.1)] {
            let cfg = SplitConfig {
                test_frac: t,
                val_frac: v,
                seed: 0,
            };
            assert!(split(&ds, &cfg).is_err(), "{t} {v}");
        }
    }

    #[test]
    fn uniform_buckets_hold_out_a_fifth() {
        // 60 sizes x 25 instances each
        let sizes: Vec<usize> = (0..1500).map(|i| 5 + i % 60).collect();
        let ds = fake(&sizes);
        let s = split(&ds, &SplitConfig::default()).unwrap();
        for n in 5..65 {
            let test = s.test.iter().filter(|x| x.n() == n).count();
            assert!((test as f64 - 5.0).abs() <= 1.0, "n={n}: {test}");
            let train = s.train.iter().filter(|x| x.n() == n).count();
            let val = s.val.iter().filter(|x| x.n() == n).count();
            assert_eq!(val, 2); // round(20 * 0.1)
            assert_eq!(train + val + test, 25);
        }
    }

    #[test]
    fn same_seed_same_split_other_seed_differs() {
        let sizes: Vec<usize> = (0..200).map(|i| 5 + i % 7).collect();
        let ds = fake(&sizes);
        let cfg = SplitConfig {
            seed: 3,
            ..SplitConfig::default()
        };
        assert_eq!(split(&ds, &cfg).unwrap(), split(&ds, &cfg).unwrap());
        let other = SplitConfig { seed: 4, ..cfg };
        assert_ne!(split(&ds, &cfg).unwrap().test, split(&ds, &other).unwrap().test);
    }
}
