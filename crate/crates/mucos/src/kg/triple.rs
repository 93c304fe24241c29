use serde::{Deserialize, Serialize};

/// Dense entity id, contiguous from 0 within a [`super::Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Dense relation id, contiguous from 0 within a [`super::Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for EntityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl std::fmt::Display for RelationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A triple as read from disk, labels verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl RawTriple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        RawTriple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

/// One (head, relation, tail) fact with ids resolved against a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

/// Train/valid/test triple lists. The splits are disjoint as triple sets;
/// indexes are built from `train` only.
#[derive(Debug, Clone, Default)]
pub struct SplitDataset {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl SplitDataset {
    pub fn total_len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    /// Checks pairwise disjointness of the three splits as triple sets.
    pub fn check_disjoint(&self) -> crate::Result<()> {
        use std::collections::HashSet;
        let train: HashSet<&Triple> = self.train.iter().collect();
        for (name, split) in [("valid", &self.valid), ("test", &self.test)] {
            if let Some(t) = split.iter().find(|t| train.contains(t)) {
                return Err(crate::Error::config(format!(
                    "{name} split shares triple ({}, {}, {}) with train",
                    t.head, t.relation, t.tail
                )));
            }
        }
        let valid: HashSet<&Triple> = self.valid.iter().collect();
        if let Some(t) = self.test.iter().find(|t| valid.contains(t)) {
            return Err(crate::Error::config(format!(
                "test split shares triple ({}, {}, {}) with valid",
                t.head, t.relation, t.tail
            )));
        }
        Ok(())
    }
}
