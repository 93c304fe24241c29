//! Density-based context extraction.
//!
//! For an entity anchor the context is the set of distinct relations and
//! distinct entities adjacent to it (both directions); for a relation anchor
//! it is the set of distinct entities appearing in its triples. In `Sampled`
//! mode each block is pruned to the k highest-scoring items (entities by
//! density, relations by global frequency); `Full` mode keeps everything and
//! is the unsampled baseline used for comparisons. All other logic is shared
//! so speed comparisons isolate the sampling step.

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, GraphIndex, RelationId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Sampled,
    Full,
}

/// Top-k budgets for the three context kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    /// Top-k entities kept in head/tail contexts.
    pub k_entities: usize,
    /// Top-k relations kept in head/tail contexts.
    pub k_relations: usize,
    /// Top-k entities kept in relation contexts.
    pub k_relation_context: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mode: SamplerMode::Sampled,
            k_entities: 15,
            k_relations: 15,
            k_relation_context: 10,
        }
    }
}

impl SamplerConfig {
    pub fn full() -> Self {
        SamplerConfig {
            mode: SamplerMode::Full,
            ..SamplerConfig::default()
        }
    }

    /// In sampled mode every k must be at least 1; the k values are ignored
    /// in full mode.
    pub fn validate(&self) -> Result<()> {
        if self.mode == SamplerMode::Sampled
            && (self.k_entities == 0 || self.k_relations == 0 || self.k_relation_context == 0)
        {
            return Err(Error::config("sampler k values must be >= 1 in sampled mode"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKind {
    Head,
    Relation,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anchor {
    Entity(EntityId),
    Relation(RelationId),
}

/// One token of a context aggregate: either a relation or an entity symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContextToken {
    Relation(RelationId),
    Entity(EntityId),
}

/// An extracted (and possibly pruned) context: ordered relation and entity
/// blocks plus their concatenation.
///
/// `aggregate` is always the relation block followed by the entity block,
/// each in ranked order (score descending, ties by ascending id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSample {
    pub kind: ContextKind,
    pub anchor: Anchor,
    pub relations: Vec<RelationId>,
    pub entities: Vec<EntityId>,
    pub aggregate: Vec<ContextToken>,
}

impl ContextSample {
    fn assemble(
        kind: ContextKind,
        anchor: Anchor,
        relations: Vec<RelationId>,
        entities: Vec<EntityId>,
    ) -> Self {
        let mut aggregate = Vec::with_capacity(relations.len() + entities.len());
        aggregate.extend(relations.iter().copied().map(ContextToken::Relation));
        aggregate.extend(entities.iter().copied().map(ContextToken::Entity));
        ContextSample {
            kind,
            anchor,
            relations,
            entities,
            aggregate,
        }
    }

    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }
}

/// Keeps the k highest-scoring items: sorted by score descending, ties by
/// ascending id, truncated to k. `k > items.len()` returns the whole sorted
/// list. Selection runs in O(n) before sorting only the retained prefix, so
/// small k stays cheap on high-degree anchors.
pub fn top_k_by_density<T, F>(items: &[T], k: usize, score: F) -> Vec<T>
where
    T: Copy + Ord,
    F: Fn(T) -> u64,
{
    let mut buf: Vec<T> = items.to_vec();
    let better = |a: &T, b: &T| score(*b).cmp(&score(*a)).then(a.cmp(b));
    if k == 0 {
        return Vec::new();
    }
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, better);
        buf.truncate(k);
    }
    buf.sort_unstable_by(better);
    buf
}

fn ranked_entities(g: &GraphIndex, items: &[EntityId], k: usize) -> Vec<EntityId> {
    top_k_by_density(items, k, |e| g.entity_densities()[e.idx()])
}

fn ranked_relations(g: &GraphIndex, items: &[RelationId], k: usize) -> Vec<RelationId> {
    top_k_by_density(items, k, |r| g.relation_frequencies()[r.idx()])
}

fn entity_context(
    g: &GraphIndex,
    anchor: EntityId,
    cfg: &SamplerConfig,
    kind: ContextKind,
) -> Result<ContextSample> {
    cfg.validate()?;
    let rels = g.neighbor_relations(anchor)?;
    let ents = g.neighbor_entities(anchor)?;
    let (k_rel, k_ent) = match cfg.mode {
        SamplerMode::Sampled => (cfg.k_relations, cfg.k_entities),
        SamplerMode::Full => (usize::MAX, usize::MAX),
    };
    Ok(ContextSample::assemble(
        kind,
        Anchor::Entity(anchor),
        ranked_relations(g, rels, k_rel),
        ranked_entities(g, ents, k_ent),
    ))
}

/// Context of a head entity: distinct incident relations plus distinct
/// adjacent entities. An isolated entity yields an empty context.
pub fn head_context(g: &GraphIndex, h: EntityId, cfg: &SamplerConfig) -> Result<ContextSample> {
    entity_context(g, h, cfg, ContextKind::Head)
}

/// Context of a tail entity; same neighborhood rule as [`head_context`]
/// applied at the tail anchor.
pub fn tail_context(g: &GraphIndex, t: EntityId, cfg: &SamplerConfig) -> Result<ContextSample> {
    entity_context(g, t, cfg, ContextKind::Tail)
}

/// Context of a relation: the distinct entities appearing (as head or tail)
/// in its triples, pruned to the `k_relation_context` densest.
pub fn relation_context(
    g: &GraphIndex,
    r: RelationId,
    cfg: &SamplerConfig,
) -> Result<ContextSample> {
    cfg.validate()?;
    let ents = g.relation_entities(r)?;
    let k = match cfg.mode {
        SamplerMode::Sampled => cfg.k_relation_context,
        SamplerMode::Full => usize::MAX,
    };
    Ok(ContextSample::assemble(
        ContextKind::Relation,
        Anchor::Relation(r),
        Vec::new(),
        ranked_entities(g, ents, k),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;

    fn toy_graph() -> GraphIndex {
        // A=0, B=1, C=2; r1=0, r2=1
        let triples = vec![Triple::new(0, 0, 1), Triple::new(0, 1, 2), Triple::new(1, 0, 2)];
        GraphIndex::build(&triples, 3, 2).unwrap()
    }

    fn sampled(k_ent: usize, k_rel: usize, k_rc: usize) -> SamplerConfig {
        SamplerConfig {
            mode: SamplerMode::Sampled,
            k_entities: k_ent,
            k_relations: k_rel,
            k_relation_context: k_rc,
        }
    }

    #[test]
    fn head_context_top1_prunes_by_density_and_frequency() {
        let g = toy_graph();
        let ctx = head_context(&g, EntityId(0), &sampled(1, 1, 10)).unwrap();
        // E(A)={B,C} both density 2 -> tie-break by id -> B
        // R(A)={r1,r2}, frequencies 2 vs 1 -> r1
        assert_eq!(ctx.relations, vec![RelationId(0)]);
        assert_eq!(ctx.entities, vec![EntityId(1)]);
        assert_eq!(
            ctx.aggregate,
            vec![
                ContextToken::Relation(RelationId(0)),
                ContextToken::Entity(EntityId(1))
            ]
        );
    }

    #[test]
    fn isolated_entity_has_empty_context() {
        let triples = vec![Triple::new(0, 0, 1)];
        let g = GraphIndex::build(&triples, 3, 1).unwrap();
        let ctx = head_context(&g, EntityId(2), &SamplerConfig::default()).unwrap();
        assert!(ctx.is_empty());
        let ctx = tail_context(&g, EntityId(2), &SamplerConfig::default()).unwrap();
        assert!(ctx.is_empty());
    }

    #[test]
    fn low_degree_sampled_equals_full() {
        let g = toy_graph();
        for e in 0..3u32 {
            let s = head_context(&g, EntityId(e), &SamplerConfig::default()).unwrap();
            let f = head_context(&g, EntityId(e), &SamplerConfig::full()).unwrap();
            assert_eq!(s.aggregate, f.aggregate);
        }
    }

    #[test]
    fn relation_context_lists_entities_in_rank_order() {
        let g = toy_graph();
        let ctx = relation_context(&g, RelationId(0), &sampled(15, 15, 10)).unwrap();
        // E(r1)={A,B,C}, all density 2, fewer than k -> ascending id order
        assert_eq!(ctx.entities, vec![EntityId(0), EntityId(1), EntityId(2)]);
        assert!(ctx.relations.is_empty());
        assert_eq!(
            ctx.aggregate,
            vec![
                ContextToken::Entity(EntityId(0)),
                ContextToken::Entity(EntityId(1)),
                ContextToken::Entity(EntityId(2))
            ]
        );
    }

    #[test]
    fn relation_without_train_triples_is_empty() {
        let g = GraphIndex::build(&[Triple::new(0, 0, 1)], 2, 2).unwrap();
        let ctx = relation_context(&g, RelationId(1), &SamplerConfig::default()).unwrap();
        assert!(ctx.is_empty());
    }

    #[test]
    fn relation_context_keeps_densest_pair() {
        // Fig. 3-like scenario: r0 connects several pairs; k=2 keeps the two
        // densest entities.
        let triples = vec![
            Triple::new(0, 0, 1),
            Triple::new(2, 0, 3),
            Triple::new(1, 1, 3), // boosts density of 1 and 3
            Triple::new(1, 1, 3),
        ];
        let g = GraphIndex::build(&triples, 4, 2).unwrap();
        let ctx = relation_context(&g, RelationId(0), &sampled(15, 15, 2)).unwrap();
        assert_eq!(ctx.entities, vec![EntityId(1), EntityId(3)]);
    }

    #[test]
    fn tail_context_merges_both_directions() {
        let g = toy_graph();
        let ctx = tail_context(&g, EntityId(2), &sampled(10, 10, 10)).unwrap();
        // R(C)={r1,r2} ranked r1 first (freq 2 vs 1); E(C)={A,B} tie by id
        assert_eq!(ctx.relations, vec![RelationId(0), RelationId(1)]);
        assert_eq!(ctx.entities, vec![EntityId(0), EntityId(1)]);
        assert_eq!(
            ctx.aggregate,
            vec![
                ContextToken::Relation(RelationId(0)),
                ContextToken::Relation(RelationId(1)),
                ContextToken::Entity(EntityId(0)),
                ContextToken::Entity(EntityId(1))
            ]
        );
    }

    #[test]
    fn head_and_tail_context_agree_on_the_same_anchor() {
        let g = toy_graph();
        for e in 0..3u32 {
            let h = head_context(&g, EntityId(e), &SamplerConfig::default()).unwrap();
            let t = tail_context(&g, EntityId(e), &SamplerConfig::default()).unwrap();
            assert_eq!(h.aggregate, t.aggregate);
            assert_eq!(h.kind, ContextKind::Head);
            assert_eq!(t.kind, ContextKind::Tail);
        }
    }

    #[test]
    fn unknown_ids_are_vocab_errors() {
        let g = toy_graph();
        assert!(head_context(&g, EntityId(7), &SamplerConfig::default()).is_err());
        assert!(relation_context(&g, RelationId(7), &SamplerConfig::default()).is_err());
    }

    #[test]
    fn zero_k_in_sampled_mode_is_config_error() {
        let g = toy_graph();
        let cfg = sampled(0, 1, 1);
        assert!(matches!(
            head_context(&g, EntityId(0), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn top_k_examples() {
        // items {B:2, C:2, D:5} with ids B=1, C=2, D=3, k=2 -> [D, B]
        let score = |e: EntityId| match e.0 {
            1 => 2,
            2 => 2,
            3 => 5,
            _ => 0,
        };
        let items = [EntityId(1), EntityId(2), EntityId(3)];
        assert_eq!(
            top_k_by_density(&items, 2, score),
            vec![EntityId(3), EntityId(1)]
        );
        // k >= |items| -> full sorted list
        assert_eq!(
            top_k_by_density(&items, 10, score),
            vec![EntityId(3), EntityId(1), EntityId(2)]
        );
        // empty items -> []
        assert_eq!(top_k_by_density(&[], 3, score), Vec::<EntityId>::new());
    }

    #[test]
    fn repeated_calls_are_identical() {
        let g = toy_graph();
        let cfg = SamplerConfig::default();
        let a = head_context(&g, EntityId(0), &cfg).unwrap();
        let b = head_context(&g, EntityId(0), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
