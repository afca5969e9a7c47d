use std::collections::BTreeSet;

use super::split::{check_classes, make_exclusive_split, SplitAssignment};
use super::{consonant_group, consonant_task_onsets, Side, SplitSpec, Task};
use crate::corpus::{AlignedSyllable, Language};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Which syllables a task uses, their labels and exclusion groups.
/// Independent of any feature representation.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRows {
    pub task: Task,
    pub class_names: Vec<String>,
    /// Indices into the syllable table (and so into every feature matrix).
    pub items: Vec<usize>,
    pub labels: Vec<usize>,
    pub group_keys: Vec<String>,
}

fn tone_class(t: u8) -> String {
    format!("T{t}")
}

/// Class names of a sub-task, in label order.
fn subtask_classes(task: Task) -> Result<Vec<String>> {
    match task {
        Task::TonePair { a, b } => {
            if a == b {
                return Err(Error::Probe(format!("tone pair T{a}-T{b}: classes not distinct")));
            }
            if !(1..=4).contains(&a) || !(1..=4).contains(&b) {
                return Err(Error::Probe(format!("tone pair T{a}-T{b}: tones must be 1-4")));
            }
            Ok(vec![tone_class(a.min(b)), tone_class(a.max(b))])
        }
        Task::ConsonantGroup { group } => consonant_group(group)
            .map(|o| o.iter().map(|s| s.to_string()).collect())
            .ok_or_else(|| Error::Probe(format!("unknown consonant group {group}"))),
        Task::Tone | Task::Consonant => unreachable!("base tasks have no parent"),
    }
}

/// Keeps the members of `classes`, relabelled by their position there.
fn relabel(names: &[String], labels: &[usize], classes: &[String]) -> Result<Vec<Option<usize>>> {
    let map: Vec<Option<usize>> = names
        .iter()
        .map(|n| classes.iter().position(|c| c == n))
        .collect();
    for c in classes {
        if !names.contains(c) {
            return Err(Error::Probe(format!("class `{c}` not in parent task")));
        }
    }
    Ok(labels.iter().map(|&l| map[l]).collect())
}

impl TaskRows {
    /// Neutral-tone syllables never enter any task.
    pub fn build(task: Task, syllables: &[AlignedSyllable]) -> Result<Self> {
        if task.base() != task {
            return TaskRows::build(task.base(), syllables)?.restrict(task);
        }
        let language = syllables
            .first()
            .map(|s| s.tone.language())
            .ok_or_else(|| Error::Probe("no syllables".into()))?;
        let mut rows = TaskRows {
            task,
            class_names: Vec::new(),
            items: Vec::new(),
            labels: Vec::new(),
            group_keys: Vec::new(),
        };
        match task {
            Task::Tone => {
                let n_tones = match language {
                    Language::Mandarin => 4,
                    Language::Vietnamese => 8,
                };
                rows.class_names = (1..=n_tones).map(tone_class).collect();
                for (i, s) in syllables.iter().enumerate() {
                    if s.tone.is_neutral() {
                        continue;
                    }
                    rows.items.push(i);
                    rows.labels.push(s.tone.tone_id() as usize - 1);
                    rows.group_keys.push(s.phoneme_string.clone());
                }
            }
            Task::Consonant => {
                if language != Language::Mandarin {
                    return Err(Error::Probe("the consonant task is defined for Mandarin only".into()));
                }
                let onsets = consonant_task_onsets();
                rows.class_names = onsets.iter().map(|s| s.to_string()).collect();
                for (i, s) in syllables.iter().enumerate() {
                    if s.tone.is_neutral() {
                        continue;
                    }
                    if let Some(l) = onsets.iter().position(|o| *o == s.onset) {
                        rows.items.push(i);
                        rows.labels.push(l);
                        rows.group_keys.push(s.rime.clone());
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(rows)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Narrows a base task to one of its sub-tasks (a tone pair or a
    /// consonant group). Group keys carry over, so a split of the parent
    /// stays exclusive.
    pub fn restrict(&self, sub: Task) -> Result<TaskRows> {
        if sub.base() != self.task || sub == self.task {
            return Err(Error::Probe(format!("{sub} is not a sub-task of {}", self.task)));
        }
        let classes = subtask_classes(sub)?;
        let new_labels = relabel(&self.class_names, &self.labels, &classes)?;
        let mut out = TaskRows {
            task: sub,
            class_names: classes,
            items: Vec::new(),
            labels: Vec::new(),
            group_keys: Vec::new(),
        };
        for (i, l) in new_labels.into_iter().enumerate() {
            if let Some(l) = l {
                out.items.push(self.items[i]);
                out.labels.push(l);
                out.group_keys.push(self.group_keys[i].clone());
            }
        }
        Ok(out)
    }

    pub fn split(&self, spec: SplitSpec) -> Result<SplitAssignment> {
        if spec.exclusion_key != self.task.exclusion_key() {
            return Err(Error::Split(format!(
                "{} must be split by {:?}",
                self.task,
                self.task.exclusion_key()
            )));
        }
        make_exclusive_split(&self.group_keys, &self.labels, &self.class_names, spec)
    }
}

/// Features, labels, group keys and sides of one probing task, checked
/// for leakage, class coverage and finiteness on construction.
#[derive(Debug, Clone)]
pub struct ProbeDataset<'a> {
    pub task: Task,
    pub class_names: Vec<String>,
    pub features: &'a FeatureMatrix,
    /// Feature-matrix row of each item.
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    pub group_keys: Vec<String>,
    pub sides: Vec<Side>,
}

impl<'a> ProbeDataset<'a> {
    pub fn new(features: &'a FeatureMatrix, rows: &TaskRows, split: &SplitAssignment) -> Result<Self> {
        let ds = ProbeDataset {
            task: rows.task,
            class_names: rows.class_names.clone(),
            features,
            rows: rows.items.clone(),
            labels: rows.labels.clone(),
            group_keys: rows.group_keys.clone(),
            sides: split.sides_for(&rows.group_keys)?,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rows.len();
        if self.labels.len() != n || self.group_keys.len() != n || self.sides.len() != n {
            return Err(Error::Probe("dataset columns differ in length".into()));
        }
        if let Some(&r) = self.rows.iter().find(|&&r| r >= self.features.rows()) {
            return Err(Error::Dimension {
                what: "dataset row index",
                expected: self.features.rows(),
                actual: r,
            });
        }
        let keys = |side: Side| -> BTreeSet<&str> {
            self.group_keys
                .iter()
                .zip(&self.sides)
                .filter(|(_, s)| **s == side)
                .map(|(g, _)| g.as_str())
                .collect()
        };
        if let Some(g) = keys(Side::Train).intersection(&keys(Side::Test)).next() {
            return Err(Error::Split(format!("group `{g}` on both sides")));
        }
        check_classes(&self.sides, &self.labels, &self.class_names)?;
        for &r in &self.rows {
            if !self.features.row(r).iter().all(|v| v.is_finite()) {
                return Err(Error::Probe(format!("non-finite feature in row {r}")));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// `(feature rows, labels)` of one side.
    pub fn side(&self, side: Side) -> (Vec<usize>, Vec<usize>) {
        self.rows
            .iter()
            .zip(&self.labels)
            .zip(&self.sides)
            .filter(|(_, s)| **s == side)
            .map(|((r, l), _)| (*r, *l))
            .unzip()
    }

    pub fn restrict(&self, sub: Task) -> Result<ProbeDataset<'a>> {
        if sub.base() != self.task || sub == self.task {
            return Err(Error::Probe(format!("{sub} is not a sub-task of {}", self.task)));
        }
        let classes = subtask_classes(sub)?;
        let new_labels = relabel(&self.class_names, &self.labels, &classes)?;
        let mut out = ProbeDataset {
            task: sub,
            class_names: classes,
            features: self.features,
            rows: Vec::new(),
            labels: Vec::new(),
            group_keys: Vec::new(),
            sides: Vec::new(),
        };
        for (i, l) in new_labels.into_iter().enumerate() {
            if let Some(l) = l {
                out.rows.push(self.rows[i]);
                out.labels.push(l);
                out.group_keys.push(self.group_keys[i].clone());
                out.sides.push(self.sides[i]);
            }
        }
        out.validate()?;
        Ok(out)
    }
}
