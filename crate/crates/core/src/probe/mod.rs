//! Leakage-proof datasets and ridge linear probes.

mod dataset;
mod ridge;
mod split;
mod train;

use serde::{Deserialize, Serialize};

pub use dataset::{ProbeDataset, TaskRows};
pub use ridge::{fit_ridge, predict, GramStats, RidgeFit};
pub use split::{make_exclusive_split, SplitAssignment};
pub use train::{
    evaluate_consonant_group, evaluate_pair_probe, stratified_folds, train_ridge_probe, CellId,
    ProbeConfig, ProbeResult,
};

/// `{10^n | n in -4..=2}`.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_FOLDS: usize = 5;

/// Onset groups that English listeners assimilate to one category.
pub const CONSONANT_GROUPS: [(u8, &[&str]); 3] = [
    (1, &["sh", "x"]),
    (2, &["ch", "zh", "q"]),
    (3, &["s", "z", "c"]),
];

pub fn consonant_group(group: u8) -> Option<&'static [&'static str]> {
    CONSONANT_GROUPS
        .iter()
        .find(|(g, _)| *g == group)
        .map(|(_, onsets)| *onsets)
}

/// Onsets of the consonant task: the union of all groups.
pub fn consonant_task_onsets() -> Vec<&'static str> {
    let mut v: Vec<&str> = CONSONANT_GROUPS.iter().flat_map(|(_, o)| o.iter().copied()).collect();
    v.sort_unstable();
    v
}

/// The six unordered pairs of Mandarin full tones.
pub const TONE_PAIRS: [(u8, u8); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Train => "train",
            Side::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionKey {
    PhonemeString,
    Rime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub exclusion_key: ExclusionKey,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(exclusion_key: ExclusionKey, test_fraction: f64, seed: u64) -> crate::Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(crate::Error::Split(format!(
                "test fraction {test_fraction} must lie strictly between 0 and 1"
            )));
        }
        Ok(SplitSpec {
            exclusion_key,
            test_fraction,
            seed,
        })
    }
}

/// What a probe classifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    Tone,
    TonePair { a: u8, b: u8 },
    Consonant,
    ConsonantGroup { group: u8 },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Tone => "tone",
            Task::TonePair { .. } => "tone_pair",
            Task::Consonant => "consonant",
            Task::ConsonantGroup { .. } => "consonant_group",
        }
    }

    pub fn subtask(&self) -> String {
        match self {
            Task::Tone | Task::Consonant => "all".into(),
            Task::TonePair { a, b } => format!("T{a}-T{b}"),
            Task::ConsonantGroup { group } => format!("g{group}"),
        }
    }

    pub fn parse(name: &str, subtask: &str) -> Option<Task> {
        match (name, subtask) {
            ("tone", "all") => Some(Task::Tone),
            ("consonant", "all") => Some(Task::Consonant),
            ("tone_pair", s) => {
                let (a, b) = s.split_once('-')?;
                let a = a.strip_prefix('T')?.parse().ok()?;
                let b = b.strip_prefix('T')?.parse().ok()?;
                Some(Task::TonePair { a, b })
            }
            ("consonant_group", s) => Some(Task::ConsonantGroup {
                group: s.strip_prefix('g')?.parse().ok()?,
            }),
            _ => None,
        }
    }

    /// The task whose split this task reuses.
    pub fn base(&self) -> Task {
        match self {
            Task::Tone | Task::TonePair { .. } => Task::Tone,
            Task::Consonant | Task::ConsonantGroup { .. } => Task::Consonant,
        }
    }

    pub fn exclusion_key(&self) -> ExclusionKey {
        match self.base() {
            Task::Tone => ExclusionKey::PhonemeString,
            _ => ExclusionKey::Rime,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.name(), self.subtask())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_roundtrip() {
        let tasks = [
            Task::Tone,
            Task::Consonant,
            Task::TonePair { a: 2, b: 3 },
            Task::ConsonantGroup { group: 3 },
        ];
        for t in tasks {
            assert_eq!(Task::parse(t.name(), &t.subtask()), Some(t));
        }
    }

    #[test]
    fn groups() {
        assert_eq!(consonant_group(1).unwrap().len(), 2);
        assert_eq!(consonant_group(2).unwrap().len(), 3);
        assert_eq!(consonant_task_onsets().len(), 8);
        assert!(consonant_group(4).is_none());
    }

    #[test]
    fn split_spec_bounds() {
        assert!(SplitSpec::new(ExclusionKey::Rime, 0.0, 1).is_err());
        assert!(SplitSpec::new(ExclusionKey::Rime, 1.0, 1).is_err());
        assert!(SplitSpec::new(ExclusionKey::Rime, 0.2, 1).is_ok());
    }
}
