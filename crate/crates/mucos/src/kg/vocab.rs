use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{EntityId, RawTriple, RelationId, SplitDataset, Triple};
use crate::{Error, Result};

/// Bijective label <-> dense-id mapping for entities and relations.
///
/// Ids are assigned in first-appearance order over train, then valid, then
/// test, so the mapping is deterministic for a given set of input files and
/// entities that only occur in valid/test are still addressable.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
}

impl Vocabulary {
    /// Builds the vocabulary from the union of all splits.
    pub fn build(splits: &super::RawSplits) -> Self {
        let mut vocab = Vocabulary::default();
        for split in [&splits.train, &splits.valid, &splits.test] {
            for t in split {
                vocab.intern_entity(&t.head);
                vocab.intern_relation(&t.relation);
                vocab.intern_entity(&t.tail);
            }
        }
        vocab
    }

    /// Builds a vocabulary directly from label lists (synthetic datasets,
    /// bindings). Duplicate labels are rejected.
    pub fn from_labels<S: Into<String>>(
        entities: impl IntoIterator<Item = S>,
        relations: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for label in entities {
            let label = label.into();
            if vocab.entity_ids.contains_key(&label) {
                return Err(Error::vocab(format!("duplicate entity label '{label}'")));
            }
            vocab.intern_entity(&label);
        }
        for label in relations {
            let label = label.into();
            if vocab.relation_ids.contains_key(&label) {
                return Err(Error::vocab(format!("duplicate relation label '{label}'")));
            }
            vocab.intern_relation(&label);
        }
        Ok(vocab)
    }

    fn intern_entity(&mut self, label: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(label) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(label.to_string());
        self.entity_ids.insert(label.to_string(), id);
        id
    }

    fn intern_relation(&mut self, label: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(label) {
            return id;
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(label.to_string());
        self.relation_ids.insert(label.to_string(), id);
        id
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entity_ids.get(label).copied()
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relation_ids.get(label).copied()
    }

    pub fn entity_label(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id.idx()).map(String::as_str)
    }

    pub fn relation_label(&self, id: RelationId) -> Option<&str> {
        self.relations.get(id.idx()).map(String::as_str)
    }

    pub fn entity_labels(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_labels(&self) -> &[String] {
        &self.relations
    }

    /// Resolves a raw triple; all three labels must be known.
    pub fn resolve(&self, raw: &RawTriple) -> Result<Triple> {
        let head = self
            .entity_id(&raw.head)
            .ok_or_else(|| Error::vocab(format!("unknown entity '{}'", raw.head)))?;
        let relation = self
            .relation_id(&raw.relation)
            .ok_or_else(|| Error::vocab(format!("unknown relation '{}'", raw.relation)))?;
        let tail = self
            .entity_id(&raw.tail)
            .ok_or_else(|| Error::vocab(format!("unknown entity '{}'", raw.tail)))?;
        Ok(Triple {
            head,
            relation,
            tail,
        })
    }

    /// Resolves all splits and checks split disjointness.
    pub fn resolve_splits(&self, raw: &super::RawSplits) -> Result<SplitDataset> {
        let resolve_all = |triples: &[RawTriple]| -> Result<Vec<Triple>> {
            triples.iter().map(|t| self.resolve(t)).collect()
        };
        let splits = SplitDataset {
            train: resolve_all(&raw.train)?,
            valid: resolve_all(&raw.valid)?,
            test: resolve_all(&raw.test)?,
        };
        splits.check_disjoint()?;
        Ok(splits)
    }

    /// Content hash over the ordered label lists; checkpoints store it so a
    /// model cannot be evaluated against a mismatched vocabulary.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"entities");
        for label in &self.entities {
            hasher.update(label.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(b"relations");
        for label in &self.relations {
            hasher.update(label.as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::RawSplits;

    fn raw(h: &str, r: &str, t: &str) -> RawTriple {
        RawTriple::new(h, r, t)
    }

    #[test]
    fn ids_are_contiguous_and_bijective() {
        let splits = RawSplits {
            train: vec![raw("A", "r1", "B"), raw("A", "r2", "C")],
            valid: vec![raw("D", "r1", "A")],
            test: vec![raw("E", "r3", "B")],
        };
        let vocab = Vocabulary::build(&splits);
        assert_eq!(vocab.entity_count(), 5);
        assert_eq!(vocab.relation_count(), 3);
        for (i, label) in vocab.entity_labels().iter().enumerate() {
            assert_eq!(vocab.entity_id(label), Some(EntityId(i as u32)));
            assert_eq!(vocab.entity_label(EntityId(i as u32)), Some(label.as_str()));
        }
        // union of splits: valid/test-only symbols resolve too
        assert!(vocab.entity_id("D").is_some());
        assert!(vocab.entity_id("E").is_some());
        assert!(vocab.relation_id("r3").is_some());
    }

    #[test]
    fn first_appearance_order() {
        let splits = RawSplits {
            train: vec![raw("B", "r", "A")],
            valid: vec![],
            test: vec![],
        };
        let vocab = Vocabulary::build(&splits);
        assert_eq!(vocab.entity_id("B"), Some(EntityId(0)));
        assert_eq!(vocab.entity_id("A"), Some(EntityId(1)));
    }

    #[test]
    fn unknown_label_is_vocab_error() {
        let vocab = Vocabulary::from_labels(["A"], ["r"]).unwrap();
        let err = vocab.resolve(&raw("A", "r", "Z")).unwrap_err();
        assert!(matches!(err, Error::Vocab(_)));
    }

    #[test]
    fn content_hash_tracks_labels() {
        let a = Vocabulary::from_labels(["A", "B"], ["r"]).unwrap();
        let b = Vocabulary::from_labels(["A", "B"], ["r"]).unwrap();
        let c = Vocabulary::from_labels(["B", "A"], ["r"]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
