use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RuntimeError;
use crate::kernel::Value;
use crate::score::{out_signal, GroupKind, Score};

#[derive(Debug, Clone, PartialEq)]
struct GroupState {
    name: String,
    kind: GroupKind,
    patterns: Vec<String>,
    active: bool,
    consumed: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Group(usize),
    TankPattern(usize),
}

/// Which groups are open for selection and which tank patterns are gone.
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityMatrix {
    groups: Vec<GroupState>,
    targets: BTreeMap<String, Target>,
    revision: u64,
}

/// Changes made by one batch of outputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MatrixDelta {
    pub activated: Vec<String>,
    pub deactivated: Vec<String>,
    pub consumed: Vec<String>,
}

impl MatrixDelta {
    pub fn is_empty(&self) -> bool {
        self.activated.is_empty() && self.deactivated.is_empty() && self.consumed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupView {
    pub name: String,
    pub kind: GroupKind,
    /// Patterns that can still be selected.
    pub patterns: Vec<String>,
}

/// The active groups, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixSnapshot {
    pub revision: u64,
    pub groups: Vec<GroupView>,
}

impl AvailabilityMatrix {
    /// Every group inactive, nothing consumed.
    pub fn new(score: &Score) -> Self {
        let mut targets = BTreeMap::new();
        let groups = score
            .groups()
            .iter()
            .enumerate()
            .map(|(i, g)| {
                targets.insert(out_signal(&g.name), Target::Group(i));
                if g.kind == GroupKind::Tank {
                    for p in &g.patterns {
                        targets.insert(out_signal(p), Target::TankPattern(i));
                    }
                }
                GroupState {
                    name: g.name.clone(),
                    kind: g.kind,
                    patterns: g.patterns.clone(),
                    active: false,
                    consumed: BTreeSet::new(),
                }
            })
            .collect();
        AvailabilityMatrix {
            groups,
            targets,
            revision: 0,
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    fn find(&self, group: &str) -> Option<&GroupState> {
        self.groups.iter().find(|g| g.name == group)
    }

    pub fn is_active(&self, group: &str) -> bool {
        self.find(group).is_some_and(|g| g.active)
    }

    pub fn is_consumed(&self, group: &str, pattern: &str) -> bool {
        self.find(group).is_some_and(|g| g.consumed.contains(pattern))
    }

    /// Marks a tank pattern as taken. Returns false if it already was.
    pub fn claim(&mut self, group: &str, pattern: &str) -> bool {
        let Some(g) = self.groups.iter_mut().find(|g| g.name == group) else {
            return false;
        };
        let fresh = g.consumed.insert(pattern.to_owned());
        if fresh {
            self.revision += 1;
        }
        fresh
    }

    /// Folds the outputs of one reaction into the matrix. On error the
    /// matrix is left untouched.
    pub fn apply_outputs(
        &mut self,
        outputs: &BTreeMap<String, Option<Value>>,
    ) -> Result<MatrixDelta, RuntimeError> {
        let mut changes = Vec::with_capacity(outputs.len());
        for (signal, value) in outputs {
            let target = *self
                .targets
                .get(signal)
                .ok_or_else(|| RuntimeError::UnknownOutputSignal(signal.clone()))?;
            let on = value
                .as_ref()
                .and_then(Value::as_bool)
                .ok_or_else(|| RuntimeError::BadOutputValue(signal.clone()))?;
            changes.push((signal, target, on));
        }

        let mut delta = MatrixDelta::default();
        for (signal, target, on) in changes {
            match target {
                Target::Group(i) => {
                    let g = &mut self.groups[i];
                    if g.active != on {
                        g.active = on;
                        let list = if on {
                            &mut delta.activated
                        } else {
                            &mut delta.deactivated
                        };
                        list.push(g.name.clone());
                    }
                }
                Target::TankPattern(i) => {
                    let pattern = signal.strip_suffix("Out").expect("tank output name");
                    if !on && self.groups[i].consumed.insert(pattern.to_owned()) {
                        delta.consumed.push(pattern.to_owned());
                    }
                }
            }
        }
        if !delta.is_empty() {
            self.revision += 1;
        }
        Ok(delta)
    }

    pub fn snapshot(&self) -> MatrixSnapshot {
        MatrixSnapshot {
            revision: self.revision,
            groups: self
                .groups
                .iter()
                .filter(|g| g.active)
                .map(|g| GroupView {
                    name: g.name.clone(),
                    kind: g.kind,
                    patterns: g
                        .patterns
                        .iter()
                        .filter(|p| !g.consumed.contains(*p))
                        .cloned()
                        .collect(),
                })
                .collect(),
        }
    }
}
