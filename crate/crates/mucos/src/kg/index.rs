use std::collections::HashSet;

use super::{EntityId, RelationId, Triple, Vocabulary};
use crate::{Error, Result};

/// Immutable adjacency and density indexes over a train triple list.
///
/// Built once from train triples only, never mutated afterward, and safe for
/// unrestricted concurrent reads. Adjacency lists preserve input order so
/// everything downstream is reproducible.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    n_entities: usize,
    n_relations: usize,
    n_triples: usize,
    /// head -> (relation, tail), in input order.
    by_head: Vec<Vec<(RelationId, EntityId)>>,
    /// tail -> (relation, head), in input order.
    by_tail: Vec<Vec<(RelationId, EntityId)>>,
    /// relation -> (head, tail), in input order.
    by_relation: Vec<Vec<(EntityId, EntityId)>>,
    /// Role appearances per entity: once per head slot plus once per tail
    /// slot, so a self-loop counts 2.
    entity_density: Vec<u64>,
    /// Triples per relation.
    relation_frequency: Vec<u64>,
    /// Distinct relations incident to an entity (either direction),
    /// first-appearance order.
    neighbor_relations: Vec<Vec<RelationId>>,
    /// Distinct entities adjacent to an entity (either direction),
    /// first-appearance order.
    neighbor_entities: Vec<Vec<EntityId>>,
    /// Distinct entities appearing in triples of a relation (either slot),
    /// first-appearance order.
    relation_entities: Vec<Vec<EntityId>>,
}

/// Builds the index over the train split. Context extraction must never see
/// valid/test facts, so only train triples are accepted here.
pub fn build_graph(train: &[Triple], vocab: &Vocabulary) -> Result<GraphIndex> {
    GraphIndex::build(train, vocab.entity_count(), vocab.relation_count())
}

impl GraphIndex {
    pub fn build(train: &[Triple], n_entities: usize, n_relations: usize) -> Result<Self> {
        let mut g = GraphIndex {
            n_entities,
            n_relations,
            n_triples: train.len(),
            by_head: vec![Vec::new(); n_entities],
            by_tail: vec![Vec::new(); n_entities],
            by_relation: vec![Vec::new(); n_relations],
            entity_density: vec![0; n_entities],
            relation_frequency: vec![0; n_relations],
            neighbor_relations: vec![Vec::new(); n_entities],
            neighbor_entities: vec![Vec::new(); n_entities],
            relation_entities: vec![Vec::new(); n_relations],
        };
        let mut seen_rel: Vec<HashSet<RelationId>> = vec![HashSet::new(); n_entities];
        let mut seen_ent: Vec<HashSet<EntityId>> = vec![HashSet::new(); n_entities];
        let mut seen_rel_ent: Vec<HashSet<EntityId>> = vec![HashSet::new(); n_relations];

        for t in train {
            let (h, r, tl) = (t.head, t.relation, t.tail);
            if h.idx() >= n_entities || tl.idx() >= n_entities {
                return Err(Error::vocab(format!(
                    "entity id out of range in triple ({}, {}, {})",
                    h, r, tl
                )));
            }
            if r.idx() >= n_relations {
                return Err(Error::vocab(format!("relation id {} out of range", r)));
            }
            g.by_head[h.idx()].push((r, tl));
            g.by_tail[tl.idx()].push((r, h));
            g.by_relation[r.idx()].push((h, tl));
            g.entity_density[h.idx()] += 1;
            g.entity_density[tl.idx()] += 1;
            g.relation_frequency[r.idx()] += 1;

            for e in [h, tl] {
                if seen_rel[e.idx()].insert(r) {
                    g.neighbor_relations[e.idx()].push(r);
                }
            }
            if seen_ent[h.idx()].insert(tl) {
                g.neighbor_entities[h.idx()].push(tl);
            }
            if seen_ent[tl.idx()].insert(h) {
                g.neighbor_entities[tl.idx()].push(h);
            }
            for e in [h, tl] {
                if seen_rel_ent[r.idx()].insert(e) {
                    g.relation_entities[r.idx()].push(e);
                }
            }
        }
        Ok(g)
    }

    pub fn entity_count(&self) -> usize {
        self.n_entities
    }

    pub fn relation_count(&self) -> usize {
        self.n_relations
    }

    pub fn triple_count(&self) -> usize {
        self.n_triples
    }

    fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.idx() >= self.n_entities {
            return Err(Error::vocab(format!("entity id {} out of range", e)));
        }
        Ok(())
    }

    fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.idx() >= self.n_relations {
            return Err(Error::vocab(format!("relation id {} out of range", r)));
        }
        Ok(())
    }

    pub fn by_head(&self, e: EntityId) -> Result<&[(RelationId, EntityId)]> {
        self.check_entity(e)?;
        Ok(&self.by_head[e.idx()])
    }

    pub fn by_tail(&self, e: EntityId) -> Result<&[(RelationId, EntityId)]> {
        self.check_entity(e)?;
        Ok(&self.by_tail[e.idx()])
    }

    pub fn by_relation(&self, r: RelationId) -> Result<&[(EntityId, EntityId)]> {
        self.check_relation(r)?;
        Ok(&self.by_relation[r.idx()])
    }

    /// Number of triples in which `e` appears as head plus those where it
    /// appears as tail; 0 for entities absent from train.
    pub fn density(&self, e: EntityId) -> Result<u64> {
        self.check_entity(e)?;
        Ok(self.entity_density[e.idx()])
    }

    pub fn relation_frequency(&self, r: RelationId) -> Result<u64> {
        self.check_relation(r)?;
        Ok(self.relation_frequency[r.idx()])
    }

    pub fn entity_densities(&self) -> &[u64] {
        &self.entity_density
    }

    pub fn relation_frequencies(&self) -> &[u64] {
        &self.relation_frequency
    }

    /// Distinct relations incident to `e` (both directions).
    pub fn neighbor_relations(&self, e: EntityId) -> Result<&[RelationId]> {
        self.check_entity(e)?;
        Ok(&self.neighbor_relations[e.idx()])
    }

    /// Distinct entities adjacent to `e` (both directions).
    pub fn neighbor_entities(&self, e: EntityId) -> Result<&[EntityId]> {
        self.check_entity(e)?;
        Ok(&self.neighbor_entities[e.idx()])
    }

    /// Distinct entities appearing in triples of relation `r`.
    pub fn relation_entities(&self, r: RelationId) -> Result<&[EntityId]> {
        self.check_relation(r)?;
        Ok(&self.relation_entities[r.idx()])
    }

    /// Adjacency items incident to `e` (head-side plus tail-side lists).
    pub fn degree(&self, e: EntityId) -> Result<usize> {
        self.check_entity(e)?;
        Ok(self.by_head[e.idx()].len() + self.by_tail[e.idx()].len())
    }
}

/// Free-function form of [`GraphIndex::density`].
pub fn density(g: &GraphIndex, e: EntityId) -> Result<u64> {
    g.density(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_triples() -> Vec<Triple> {
        // A=0, B=1, C=2; r1=0, r2=1
        vec![Triple::new(0, 0, 1), Triple::new(0, 1, 2), Triple::new(1, 0, 2)]
    }

    fn toy_graph() -> GraphIndex {
        GraphIndex::build(&toy_triples(), 3, 2).unwrap()
    }

    /// Brute-force oracle for the density definition: count triples where e
    /// is head plus triples where e is tail.
    fn brute_density(triples: &[Triple], e: EntityId) -> u64 {
        let heads = triples.iter().filter(|t| t.head == e).count();
        let tails = triples.iter().filter(|t| t.tail == e).count();
        (heads + tails) as u64
    }

    #[test]
    fn toy_densities_match_brute_force() {
        let triples = toy_triples();
        let g = toy_graph();
        for e in 0..3u32 {
            assert_eq!(
                g.density(EntityId(e)).unwrap(),
                brute_density(&triples, EntityId(e))
            );
        }
        assert_eq!(g.density(EntityId(0)).unwrap(), 2);
        assert_eq!(g.density(EntityId(1)).unwrap(), 2);
        assert_eq!(g.density(EntityId(2)).unwrap(), 2);
        assert_eq!(g.relation_frequency(RelationId(0)).unwrap(), 2);
        assert_eq!(g.relation_frequency(RelationId(1)).unwrap(), 1);
    }

    #[test]
    fn self_loop_counts_both_roles() {
        let g = GraphIndex::build(&[Triple::new(0, 0, 0)], 1, 1).unwrap();
        assert_eq!(g.density(EntityId(0)).unwrap(), 2);
    }

    #[test]
    fn empty_train_gives_empty_indexes() {
        let g = GraphIndex::build(&[], 4, 2).unwrap();
        for e in 0..4u32 {
            assert_eq!(g.density(EntityId(e)).unwrap(), 0);
            assert!(g.by_head(EntityId(e)).unwrap().is_empty());
            assert!(g.neighbor_entities(EntityId(e)).unwrap().is_empty());
        }
        assert_eq!(g.relation_frequency(RelationId(0)).unwrap(), 0);
    }

    #[test]
    fn density_sums_to_twice_triple_count() {
        let triples = toy_triples();
        let g = toy_graph();
        let total: u64 = g.entity_densities().iter().sum();
        assert_eq!(total, 2 * triples.len() as u64);
        let freq_total: u64 = g.relation_frequencies().iter().sum();
        assert_eq!(freq_total, triples.len() as u64);
    }

    #[test]
    fn entity_in_vocab_but_not_in_train_has_zero_density() {
        let g = GraphIndex::build(&toy_triples(), 5, 2).unwrap();
        assert_eq!(g.density(EntityId(4)).unwrap(), 0);
    }

    #[test]
    fn out_of_range_ids_are_vocab_errors() {
        let g = toy_graph();
        assert!(matches!(g.density(EntityId(9)), Err(Error::Vocab(_))));
        assert!(matches!(
            g.relation_frequency(RelationId(9)),
            Err(Error::Vocab(_))
        ));
        assert!(GraphIndex::build(&[Triple::new(0, 5, 1)], 3, 2).is_err());
    }

    #[test]
    fn build_is_deterministic_including_list_orders() {
        let a = toy_graph();
        let b = toy_graph();
        for e in 0..3u32 {
            assert_eq!(
                a.by_head(EntityId(e)).unwrap(),
                b.by_head(EntityId(e)).unwrap()
            );
            assert_eq!(
                a.neighbor_entities(EntityId(e)).unwrap(),
                b.neighbor_entities(EntityId(e)).unwrap()
            );
        }
    }

    #[test]
    fn distinct_lists_preserve_first_appearance_order() {
        let g = toy_graph();
        // A appears in (A,r1,B) then (A,r2,C)
        assert_eq!(
            g.neighbor_entities(EntityId(0)).unwrap(),
            &[EntityId(1), EntityId(2)]
        );
        assert_eq!(
            g.neighbor_relations(EntityId(0)).unwrap(),
            &[RelationId(0), RelationId(1)]
        );
        assert_eq!(
            g.relation_entities(RelationId(0)).unwrap(),
            &[EntityId(0), EntityId(1), EntityId(2)]
        );
    }
}
