use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassOrigin {
    /// Present in the initial training set; the class name is its label.
    Original,
    /// Created from an accepted cluster during a streaming session.
    Discovered {
        session: u32,
        cluster: usize,
        /// Majority ground-truth label of the cluster members, when labels
        /// were available and the majority was unique.
        majority_truth: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    pub origin: ClassOrigin,
}

impl ClassEntry {
    pub fn original(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            origin: ClassOrigin::Original,
        }
    }

    /// Ground-truth label this class stands for, if any.
    pub fn truth_label(&self) -> Option<&str> {
        match &self.origin {
            ClassOrigin::Original => Some(&self.name),
            ClassOrigin::Discovered { majority_truth, .. } => majority_truth.as_deref(),
        }
    }

    pub fn is_original(&self) -> bool {
        matches!(self.origin, ClassOrigin::Original)
    }
}

/// Append-only table from internal class index to class identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRegistry {
    entries: Vec<ClassEntry>,
}

impl ClassRegistry {
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let mut reg = Self::default();
        for l in labels {
            reg.push(ClassEntry::original(l.as_ref()))?;
        }
        Ok(reg)
    }

    pub fn push(&mut self, entry: ClassEntry) -> Result<usize> {
        if self.index_of(&entry.name).is_some() {
            return Err(Error::InvalidArgument(format!(
                "class id `{}` already registered",
                entry.name
            )));
        }
        self.entries.push(entry);
        Ok(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&ClassEntry> {
        self.entries.get(index)
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn original_labels(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.is_original())
            .map(|e| e.name.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_indices_stable() {
        let mut reg = ClassRegistry::from_labels(&["a", "b"]).unwrap();
        assert!(reg.push(ClassEntry::original("a")).is_err());
        let idx = reg
            .push(ClassEntry {
                name: "novel-0-1".into(),
                origin: ClassOrigin::Discovered {
                    session: 0,
                    cluster: 1,
                    majority_truth: Some("x".into()),
                },
            })
            .unwrap();
        assert_eq!(idx, 2);
        assert_eq!(reg.get(2).unwrap().truth_label(), Some("x"));
        assert_eq!(reg.original_labels(), vec!["a", "b"]);
    }
}
