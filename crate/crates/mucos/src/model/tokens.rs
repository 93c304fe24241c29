use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, RelationId, Vocabulary};
use crate::sampler::ContextToken;
use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const SEP: u32 = 2;
const SPECIALS: u32 = 3;

/// Fixed sequence overhead: BOS, first anchor, SEP, SEP, second anchor, SEP.
pub const SKELETON_LEN: usize = 6;

/// Token space over atomic symbol ids: the three specials occupy the lowest
/// ids, then all entities, then all relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocab {
    n_entities: usize,
    n_relations: usize,
}

impl TokenVocab {
    pub fn new(vocab: &Vocabulary) -> Self {
        TokenVocab {
            n_entities: vocab.entity_count(),
            n_relations: vocab.relation_count(),
        }
    }

    pub fn from_sizes(n_entities: usize, n_relations: usize) -> Self {
        TokenVocab {
            n_entities,
            n_relations,
        }
    }

    pub fn size(&self) -> usize {
        SPECIALS as usize + self.n_entities + self.n_relations
    }

    pub fn entity_count(&self) -> usize {
        self.n_entities
    }

    pub fn relation_count(&self) -> usize {
        self.n_relations
    }

    pub fn entity_token(&self, e: EntityId) -> u32 {
        debug_assert!(e.idx() < self.n_entities);
        SPECIALS + e.0
    }

    pub fn relation_token(&self, r: RelationId) -> u32 {
        debug_assert!(r.idx() < self.n_relations);
        SPECIALS + self.n_entities as u32 + r.0
    }

    pub fn context_token(&self, t: ContextToken) -> u32 {
        match t {
            ContextToken::Relation(r) => self.relation_token(r),
            ContextToken::Entity(e) => self.entity_token(e),
        }
    }
}

/// One supervised example: a token sequence and its class label (a relation
/// id for relation prediction, an entity id for tail prediction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub input_tokens: Vec<u32>,
    pub label: usize,
}

/// Kept lengths for the two context blocks under a shared budget. Trailing
/// (lowest-ranked) tokens of the currently longest block are dropped first;
/// ties drop from the second block, so the first block keeps the extra slot
/// when the budget is odd.
fn kept_lengths(a: usize, b: usize, budget: usize) -> (usize, usize) {
    if a + b <= budget {
        return (a, b);
    }
    let a_keep = a.min(budget.saturating_sub(b).max(budget.div_ceil(2)));
    (a_keep, budget - a_keep)
}

fn assemble(
    first_anchor: u32,
    block_a: &[ContextToken],
    second_anchor: u32,
    block_b: &[ContextToken],
    tv: &TokenVocab,
    max_len: usize,
) -> Result<Vec<u32>> {
    if max_len < SKELETON_LEN + 1 {
        return Err(Error::config(format!(
            "max_len {max_len} cannot fit the {SKELETON_LEN}-token skeleton plus context"
        )));
    }
    let budget = max_len - SKELETON_LEN;
    let (a_keep, b_keep) = kept_lengths(block_a.len(), block_b.len(), budget);
    let mut seq = Vec::with_capacity(SKELETON_LEN + a_keep + b_keep);
    seq.push(BOS);
    seq.push(first_anchor);
    seq.push(SEP);
    seq.extend(block_a[..a_keep].iter().map(|&t| tv.context_token(t)));
    seq.push(SEP);
    seq.push(second_anchor);
    seq.push(SEP);
    seq.extend(block_b[..b_keep].iter().map(|&t| tv.context_token(t)));
    Ok(seq)
}

/// Input for relation prediction: `[BOS, h, SEP, H_agg…, SEP, t, SEP,
/// T_agg…]`, truncated to `max_len`. The anchor tokens are part of the
/// skeleton and are never truncated away.
pub fn build_relation_input(
    h: EntityId,
    h_agg: &[ContextToken],
    t: EntityId,
    t_agg: &[ContextToken],
    tv: &TokenVocab,
    max_len: usize,
) -> Result<Vec<u32>> {
    assemble(
        tv.entity_token(h),
        h_agg,
        tv.entity_token(t),
        t_agg,
        tv,
        max_len,
    )
}

/// Input for tail prediction: `[BOS, h, SEP, H_agg…, SEP, r, SEP, R_agg…]`.
pub fn build_tail_input(
    h: EntityId,
    h_agg: &[ContextToken],
    r: RelationId,
    r_agg: &[ContextToken],
    tv: &TokenVocab,
    max_len: usize,
) -> Result<Vec<u32>> {
    assemble(
        tv.entity_token(h),
        h_agg,
        tv.relation_token(r),
        r_agg,
        tv,
        max_len,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv() -> TokenVocab {
        // entities A=0,B=1,C=2 ; relations r1=0,r2=1
        TokenVocab::from_sizes(3, 2)
    }

    fn ent(i: u32) -> ContextToken {
        ContextToken::Entity(EntityId(i))
    }

    fn rel(i: u32) -> ContextToken {
        ContextToken::Relation(RelationId(i))
    }

    #[test]
    fn token_ids_partition_the_space() {
        let tv = tv();
        assert_eq!(tv.size(), 3 + 3 + 2);
        assert_eq!(tv.entity_token(EntityId(0)), 3);
        assert_eq!(tv.entity_token(EntityId(2)), 5);
        assert_eq!(tv.relation_token(RelationId(0)), 6);
        assert_eq!(tv.relation_token(RelationId(1)), 7);
    }

    #[test]
    fn relation_input_layout_matches_toy_contexts() {
        let tv = tv();
        // h=A, H_agg=[r1,B], t=C, T_agg=[r1,r2,A,B]
        let seq = build_relation_input(
            EntityId(0),
            &[rel(0), ent(1)],
            EntityId(2),
            &[rel(0), rel(1), ent(0), ent(1)],
            &tv,
            128,
        )
        .unwrap();
        // [BOS,A,SEP,r1,B,SEP,C,SEP,r1,r2,A,B]
        assert_eq!(seq, vec![BOS, 3, SEP, 6, 4, SEP, 5, SEP, 6, 7, 3, 4]);
    }

    #[test]
    fn tail_input_layout() {
        let tv = tv();
        // h=A, H_agg=[r1,B], r=r1, R_agg=[A,B,C]
        let seq = build_tail_input(
            EntityId(0),
            &[rel(0), ent(1)],
            RelationId(0),
            &[ent(0), ent(1), ent(2)],
            &tv,
            128,
        )
        .unwrap();
        // [BOS,A,SEP,r1,B,SEP,r1,SEP,A,B,C]
        assert_eq!(seq, vec![BOS, 3, SEP, 6, 4, SEP, 6, SEP, 3, 4, 5]);
    }

    #[test]
    fn empty_contexts_reduce_to_skeleton() {
        let tv = tv();
        let seq = build_relation_input(EntityId(0), &[], EntityId(2), &[], &tv, 128).unwrap();
        assert_eq!(seq, vec![BOS, 3, SEP, SEP, 5, SEP]);
        let seq = build_tail_input(EntityId(0), &[rel(0)], RelationId(1), &[], &tv, 128).unwrap();
        assert_eq!(seq, vec![BOS, 3, SEP, 6, SEP, 7, SEP]);
    }

    #[test]
    fn oversize_contexts_truncate_to_exactly_max_len() {
        let tv = TokenVocab::from_sizes(300, 2);
        let big_a: Vec<ContextToken> = (0..200).map(|i| ent(i)).collect();
        let big_b: Vec<ContextToken> = (0..200).map(|i| ent(i + 100)).collect();
        let seq = build_relation_input(EntityId(0), &big_a, EntityId(1), &big_b, &tv, 128).unwrap();
        assert_eq!(seq.len(), 128);
        // skeleton anchors survive
        assert_eq!(seq[0], BOS);
        assert_eq!(seq[1], tv.entity_token(EntityId(0)));
    }

    #[test]
    fn truncation_drops_from_longest_block_first() {
        let tv = TokenVocab::from_sizes(300, 2);
        let long: Vec<ContextToken> = (0..20).map(|i| ent(i)).collect();
        let short: Vec<ContextToken> = (0..2).map(|i| ent(i + 50)).collect();
        // budget = 16 - 6 = 10: long block trimmed to 8, short kept whole
        let seq = build_relation_input(EntityId(0), &long, EntityId(1), &short, &tv, 16).unwrap();
        assert_eq!(seq.len(), 16);
        let first_sep = 2;
        let second_sep = seq[first_sep + 1..].iter().position(|&t| t == SEP).unwrap() + 3;
        assert_eq!(second_sep - first_sep - 1, 8, "kept head-block length");
        // trailing tokens are the ones dropped: kept prefix is ranked order
        assert_eq!(seq[3], tv.context_token(ent(0)));
    }

    #[test]
    fn balanced_truncation_alternates_blocks() {
        assert_eq!(kept_lengths(3, 3, 4), (2, 2));
        assert_eq!(kept_lengths(3, 3, 5), (3, 2));
        assert_eq!(kept_lengths(10, 1, 5), (4, 1));
        assert_eq!(kept_lengths(2, 10, 5), (2, 3));
        assert_eq!(kept_lengths(10, 10, 5), (3, 2));
        assert_eq!(kept_lengths(1, 1, 10), (1, 1));
    }

    #[test]
    fn max_len_below_skeleton_is_config_error() {
        let tv = tv();
        for max_len in 0..7 {
            assert!(build_relation_input(EntityId(0), &[], EntityId(1), &[], &tv, max_len).is_err());
        }
        assert!(build_relation_input(EntityId(0), &[], EntityId(1), &[], &tv, 7).is_ok());
    }
}
