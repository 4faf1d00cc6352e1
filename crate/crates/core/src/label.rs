//! Engine-state labels: `Normal` plus one label per fault type, and the
//! pooled `Anomalous` class used by the binary task.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::mcsa::FaultType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Normal,
    /// Every fault type pooled into one class.
    Anomalous,
    Fault(FaultType),
}

impl Label {
    pub fn is_normal(self) -> bool {
        self == Label::Normal
    }

    /// Map a ground-truth label onto the label space of `task`.
    pub fn for_task(self, task: Task) -> Label {
        match (task, self) {
            (Task::Binary, Label::Fault(_)) => Label::Anomalous,
            _ => self,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Normal => "Normal",
            Label::Anomalous => "Anomalous",
            Label::Fault(f) => f.name(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Normal" => return Ok(Label::Normal),
            "Anomalous" => return Ok(Label::Anomalous),
            _ => {}
        }
        FaultType::ALL
            .into_iter()
            .find(|f| f.name() == s || f.abbrev() == s)
            .map(Label::Fault)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Task {
    /// Normal vs. all faults pooled as `Anomalous`.
    #[default]
    Binary,
    /// Normal plus one class per fault type.
    Multiclass,
}

impl Task {
    /// Ordered class list; `Normal` is always index 0.
    pub fn classes(self, faults: &[FaultType]) -> Vec<Label> {
        match self {
            Task::Binary => vec![Label::Normal, Label::Anomalous],
            Task::Multiclass => {
                let mut classes = vec![Label::Normal];
                for &f in faults {
                    if !classes.contains(&Label::Fault(f)) {
                        classes.push(Label::Fault(f));
                    }
                }
                classes
            }
        }
    }
}
