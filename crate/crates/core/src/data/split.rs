use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, ReactionRecord};
use crate::seed;

/// Hyper-parameter holdout is one seventh of the first fold's training rows.
pub const HYPERPARAM_HOLDOUT_DENOM: usize = 7;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn is_disjoint(&self) -> bool {
        let train: BTreeSet<_> = self.train.iter().collect();
        self.test.iter().all(|i| !train.contains(i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    RandomFold,
    OutOfSample { group_role: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub ratio: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            kind: SplitKind::RandomFold,
            ratio: 0.7,
            n_folds: 10,
            seed: 0,
        }
    }
}

fn floor_fraction(ratio: f64, size: usize) -> usize {
    // absorb representation error, e.g. 0.7 * 10 = 7.000000000000001 or 6.9999...
    (ratio * size as f64 + 1e-9).floor() as usize
}

/// `n` independent seeded shuffles, each split into ⌊ratio·size⌋ train rows
/// and the rest test. Index lists are returned sorted.
pub fn random_folds(n: usize, ratio: f64, seed: u64, size: usize) -> Result<Vec<Split>, DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidRatio(ratio));
    }
    if n == 0 {
        return Err(DataError::InvalidFoldCount);
    }
    if size < 2 {
        return Err(DataError::TooSmall {
            needed: 2,
            found: size,
        });
    }
    let n_train = floor_fraction(ratio, size);
    if n_train == 0 {
        return Err(DataError::EmptySplit("train"));
    }
    if n_train == size {
        return Err(DataError::EmptySplit("test"));
    }
    Ok((0..n)
        .map(|fold| {
            let mut idx: Vec<usize> = (0..size).collect();
            idx.shuffle(&mut seed::rng(seed, "fold", fold as u64));
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect())
}

/// Carves ⌊|train|/7⌋ seeded rows out of `train` as the hyper-parameter
/// holdout. Returns `(search_train, holdout)`.
pub fn hyperparam_subset(
    train: &[usize],
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if train.len() < HYPERPARAM_HOLDOUT_DENOM {
        return Err(DataError::TooSmall {
            needed: HYPERPARAM_HOLDOUT_DENOM,
            found: train.len(),
        });
    }
    let n_holdout = train.len() / HYPERPARAM_HOLDOUT_DENOM;
    let mut idx = train.to_vec();
    idx.shuffle(&mut seed::rng(seed, "hyperparam", 0));
    let mut holdout = idx[..n_holdout].to_vec();
    let mut search = idx[n_holdout..].to_vec();
    holdout.sort_unstable();
    search.sort_unstable();
    Ok((search, holdout))
}

/// Group-disjoint splits: distinct values of `group_role` (sorted SMILES) are
/// cut into `n_partitions` contiguous blocks; split `i` tests on the records
/// whose group value falls in block `i` and trains on all the others.
///
/// When the group count is not divisible, the first blocks take one extra value.
pub fn out_of_sample_splits(
    records: &[ReactionRecord],
    group_role: &str,
    n_partitions: usize,
) -> Result<Vec<Split>, DataError> {
    if n_partitions < 2 {
        return Err(DataError::TooFewPartitions(n_partitions));
    }
    let mut values = Vec::with_capacity(records.len());
    for r in records {
        let c = r
            .component(group_role)
            .ok_or_else(|| DataError::UnknownRole(group_role.to_string()))?;
        values.push(c.smiles.as_str());
    }
    let groups: Vec<&str> = values
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if groups.len() < n_partitions {
        return Err(DataError::TooFewGroups {
            groups: groups.len(),
            partitions: n_partitions,
        });
    }
    let base = groups.len() / n_partitions;
    let extra = groups.len() % n_partitions;
    let mut block_of = std::collections::HashMap::new();
    let mut start = 0;
    for b in 0..n_partitions {
        let size = base + usize::from(b < extra);
        for g in &groups[start..start + size] {
            block_of.insert(*g, b);
        }
        start += size;
    }
    Ok((0..n_partitions)
        .map(|b| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..records.len()).partition(|&i| block_of[values[i]] == b);
            Split { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Component;

    #[test]
    fn fold_sizes() {
        let folds = random_folds(10, 0.7, 42, 3955).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            assert_eq!(f.train.len(), 2768);
            assert_eq!(f.test.len(), 1187);
            assert!(f.is_disjoint());
        }
        assert_ne!(folds[0], folds[1]);
        let small = random_folds(1, 0.7, 0, 10).unwrap();
        assert_eq!((small[0].train.len(), small[0].test.len()), (7, 3));
        assert_eq!(
            random_folds(3, 0.7, 9, 100).unwrap(),
            random_folds(3, 0.7, 9, 100).unwrap()
        );
    }

    #[test]
    fn fold_errors() {
        assert!(matches!(
            random_folds(1, 1.0, 0, 10),
            Err(DataError::InvalidRatio(_))
        ));
        assert!(matches!(
            random_folds(1, 0.0, 0, 10),
            Err(DataError::InvalidRatio(_))
        ));
        assert!(matches!(
            random_folds(1, 0.5, 0, 1),
            Err(DataError::TooSmall { .. })
        ));
        assert!(matches!(
            random_folds(0, 0.5, 0, 10),
            Err(DataError::InvalidFoldCount)
        ));
    }

    #[test]
    fn hyperparam_holdout_sizes() {
        let train: Vec<usize> = (0..2768).collect();
        let (search, hold) = hyperparam_subset(&train, 1).unwrap();
        assert_eq!(hold.len(), 395);
        assert_eq!(search.len(), 2373);
        assert!(hold.iter().all(|i| search.binary_search(i).is_err()));
        let (s, h) = hyperparam_subset(&[3, 4, 5, 6, 7, 8, 9], 1).unwrap();
        assert_eq!((s.len(), h.len()), (6, 1));
        assert!(matches!(
            hyperparam_subset(&[1, 2], 0),
            Err(DataError::TooSmall { .. })
        ));
    }

    fn grouped(groups: &[&str]) -> Vec<ReactionRecord> {
        groups
            .iter()
            .map(|g| ReactionRecord {
                components: vec![
                    Component {
                        role: "a".into(),
                        smiles: "C".into(),
                        name: None,
                    },
                    Component {
                        role: "g".into(),
                        smiles: g.to_string(),
                        name: None,
                    },
                ],
                yield_fraction: 0.0,
                raw_yield: 0.0,
            })
            .collect()
    }

    #[test]
    fn leave_one_group_out() {
        let recs = grouped(&["O", "C", "N", "S", "C", "O"]);
        let splits = out_of_sample_splits(&recs, "g", 4).unwrap();
        // sorted groups: C, N, O, S
        assert_eq!(splits[0].test, [1, 4]);
        assert_eq!(splits[1].test, [2]);
        assert_eq!(splits[2].test, [0, 5]);
        assert_eq!(splits[3].test, [3]);
        for s in &splits {
            assert_eq!(s.train.len() + s.test.len(), recs.len());
            assert!(s.is_disjoint());
        }
    }

    #[test]
    fn uneven_blocks() {
        let names: Vec<String> = (0..23).map(|i| format!("C{}", "C".repeat(i))).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let splits = out_of_sample_splits(&grouped(&refs), "g", 4).unwrap();
        let sizes: Vec<_> = splits.iter().map(|s| s.test.len()).collect();
        assert_eq!(sizes, [6, 6, 6, 5]);
    }

    #[test]
    fn oos_errors() {
        let recs = grouped(&["C", "N"]);
        assert!(matches!(
            out_of_sample_splits(&recs, "g", 3),
            Err(DataError::TooFewGroups {
                groups: 2,
                partitions: 3
            })
        ));
        assert!(matches!(
            out_of_sample_splits(&recs, "g", 1),
            Err(DataError::TooFewPartitions(1))
        ));
        assert!(matches!(
            out_of_sample_splits(&recs, "zz", 2),
            Err(DataError::UnknownRole(_))
        ));
    }
}
