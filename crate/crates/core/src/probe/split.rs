use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{Side, SplitSpec};
use crate::error::{Error, Result};

/// Group-level train/test assignment, persisted as JSON so every
/// experiment on a (corpus, task, seed) reuses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub spec: SplitSpec,
    pub groups: BTreeMap<String, Side>,
    pub train_n: usize,
    pub test_n: usize,
}

impl SplitAssignment {
    pub fn realized_test_fraction(&self) -> f64 {
        self.test_n as f64 / (self.train_n + self.test_n).max(1) as f64
    }

    /// Side of each item; items whose group is unknown are an error.
    pub fn sides_for(&self, group_keys: &[String]) -> Result<Vec<Side>> {
        group_keys
            .iter()
            .map(|g| {
                self.groups
                    .get(g)
                    .copied()
                    .ok_or_else(|| Error::Split(format!("group `{g}` not in persisted split")))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let bytes = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// Assigns whole groups to the test side, in seeded random order, until the
/// test side first holds at least `test_fraction` of the items; the rest go
/// to train. No group key can appear on both sides.
///
/// Fails when one group alone exceeds the train share, or when a class
/// ends up with no items on either side.
pub fn make_exclusive_split(
    group_keys: &[String],
    labels: &[usize],
    class_names: &[String],
    spec: SplitSpec,
) -> Result<SplitAssignment> {
    assert_eq!(group_keys.len(), labels.len());
    let n = group_keys.len();
    if n == 0 {
        return Err(Error::Split("no items".into()));
    }
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for g in group_keys {
        if g.is_empty() {
            return Err(Error::Split("empty group key".into()));
        }
        *sizes.entry(g.as_str()).or_default() += 1;
    }
    let train_cap = (1.0 - spec.test_fraction) * n as f64;
    if let Some((g, &size)) = sizes.iter().find(|(_, &s)| s as f64 > train_cap) {
        return Err(Error::Split(format!(
            "group `{g}` holds {size} of {n} items; a {:.0}:{:.0} split is impossible",
            100.0 * (1.0 - spec.test_fraction),
            100.0 * spec.test_fraction
        )));
    }

    let mut order: Vec<(&str, usize)> = sizes.into_iter().collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let target = spec.test_fraction * n as f64;
    let mut groups = BTreeMap::new();
    let mut test_n = 0usize;
    for (g, size) in order {
        let side = if (test_n as f64) < target {
            test_n += size;
            Side::Test
        } else {
            Side::Train
        };
        groups.insert(g.to_string(), side);
    }

    let split = SplitAssignment {
        spec,
        groups,
        train_n: n - test_n,
        test_n,
    };
    check_classes(&split.sides_for(group_keys)?, labels, class_names)?;
    Ok(split)
}

/// Every class must have items on both sides.
pub(crate) fn check_classes(sides: &[Side], labels: &[usize], class_names: &[String]) -> Result<()> {
    for side in [Side::Train, Side::Test] {
        let present: BTreeSet<usize> = labels
            .iter()
            .zip(sides)
            .filter(|(_, s)| **s == side)
            .map(|(l, _)| *l)
            .collect();
        for (c, name) in class_names.iter().enumerate() {
            if !present.contains(&c) {
                return Err(Error::ClassMissing {
                    class: name.clone(),
                    side: side.as_str(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::ExclusionKey;

    fn spec(seed: u64) -> SplitSpec {
        SplitSpec::new(ExclusionKey::PhonemeString, 0.2, seed).unwrap()
    }

    #[test]
    fn equal_groups_give_two_test_groups() {
        let keys: Vec<String> = (0..100).map(|i| format!("g{}", i / 10)).collect();
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let classes = vec!["a".to_string(), "b".to_string()];
        for seed in 0..50 {
            let s = make_exclusive_split(&keys, &labels, &classes, spec(seed)).unwrap();
            let test_groups = s.groups.values().filter(|&&v| v == Side::Test).count();
            assert_eq!(test_groups, 2);
            assert_eq!(s.test_n, 20);
        }
    }

    #[test]
    fn giant_group_is_rejected() {
        let mut keys: Vec<String> = vec!["big".into(); 90];
        keys.extend((0..10).map(|i| format!("s{i}")));
        let labels = vec![0; 100];
        let err = make_exclusive_split(&keys, &labels, &["a".into()], spec(1)).unwrap_err();
        assert!(matches!(err, Error::Split(_)));
    }

    #[test]
    fn missing_class_is_named() {
        // class "b" lives in a single group, so one side must lack it
        let keys: Vec<String> = (0..50).map(|i| format!("g{i}")).collect();
        let mut labels = vec![0; 50];
        labels[7] = 1;
        let classes = vec!["a".to_string(), "b".to_string()];
        let err = make_exclusive_split(&keys, &labels, &classes, spec(3)).unwrap_err();
        match err {
            Error::ClassMissing { class, .. } => assert_eq!(class, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn persisted_split_roundtrips() {
        let keys: Vec<String> = (0..40).map(|i| format!("g{}", i % 13)).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let classes = vec!["a".to_string(), "b".to_string()];
        let s = make_exclusive_split(&keys, &labels, &classes, spec(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("split.json");
        s.save(&p).unwrap();
        let back = SplitAssignment::load(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.sides_for(&keys).unwrap(), s.sides_for(&keys).unwrap());
    }
}
