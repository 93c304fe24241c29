use super::encoder::{head_logits, softmax, Encoder};
use super::params::ModelState;
use super::tokens::{build_relation_input, build_tail_input};
use crate::eval::Scorer;
use crate::kg::{EntityId, GraphIndex, RelationId};
use crate::sampler::{head_context, relation_context, ContextToken, SamplerConfig};
use crate::{Error, Result, Task};

/// Precomputed context aggregates for every entity and relation of a graph.
/// Contexts are deterministic over an immutable index, so computing them
/// once up front makes repeated scoring cheap and keeps lookups `&self`.
pub struct ContextProvider {
    entity_aggregates: Vec<Vec<ContextToken>>,
    relation_aggregates: Vec<Vec<ContextToken>>,
}

impl ContextProvider {
    pub fn build(graph: &GraphIndex, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let entity_aggregates = (0..graph.entity_count())
            .map(|e| head_context(graph, EntityId(e as u32), cfg).map(|c| c.aggregate))
            .collect::<Result<_>>()?;
        let relation_aggregates = (0..graph.relation_count())
            .map(|r| relation_context(graph, RelationId(r as u32), cfg).map(|c| c.aggregate))
            .collect::<Result<_>>()?;
        Ok(ContextProvider {
            entity_aggregates,
            relation_aggregates,
        })
    }

    /// Aggregate of an entity's neighborhood context (identical for the
    /// entity in head or tail position).
    pub fn entity_aggregate(&self, e: EntityId) -> Result<&[ContextToken]> {
        self.entity_aggregates
            .get(e.idx())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::vocab(format!("entity id {e} out of range")))
    }

    pub fn relation_aggregate(&self, r: RelationId) -> Result<&[ContextToken]> {
        self.relation_aggregates
            .get(r.idx())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::vocab(format!("relation id {r} out of range")))
    }
}

impl ModelState {
    /// Softmax distribution over the task's class space for a prebuilt
    /// input sequence.
    pub fn predict_probs(&self, tokens: &[u32], task: Task) -> Result<Vec<f64>> {
        let pooled = self.encode(tokens)?;
        Ok(softmax(&head_logits(self, pooled.view(), task)))
    }
}

/// Read-only scoring front end: model plus graph contexts.
pub struct Predictor<'a> {
    state: &'a ModelState,
    contexts: ContextProvider,
}

impl<'a> Predictor<'a> {
    pub fn new(
        state: &'a ModelState,
        graph: &GraphIndex,
        sampler_cfg: &SamplerConfig,
    ) -> Result<Self> {
        if graph.entity_count() != state.n_entities || graph.relation_count() != state.n_relations
        {
            return Err(Error::config(format!(
                "graph vocabulary ({} entities, {} relations) does not match model ({}, {})",
                graph.entity_count(),
                graph.relation_count(),
                state.n_entities,
                state.n_relations
            )));
        }
        Ok(Predictor {
            state,
            contexts: ContextProvider::build(graph, sampler_cfg)?,
        })
    }

    pub fn state(&self) -> &ModelState {
        self.state
    }

    pub fn relation_input(&self, h: EntityId, t: EntityId) -> Result<Vec<u32>> {
        build_relation_input(
            h,
            self.contexts.entity_aggregate(h)?,
            t,
            self.contexts.entity_aggregate(t)?,
            &self.state.token_vocab,
            self.state.encoder.max_seq_len,
        )
    }

    pub fn tail_input(&self, h: EntityId, r: RelationId) -> Result<Vec<u32>> {
        build_tail_input(
            h,
            self.contexts.entity_aggregate(h)?,
            r,
            self.contexts.relation_aggregate(r)?,
            &self.state.token_vocab,
            self.state.encoder.max_seq_len,
        )
    }

    /// P(r | h, t) over the full relation vocabulary.
    pub fn predict_relation(&self, h: EntityId, t: EntityId) -> Result<Vec<f64>> {
        let tokens = self.relation_input(h, t)?;
        self.state.predict_probs(&tokens, Task::Relation)
    }

    /// P(t | h, r) over the full entity vocabulary; no candidate
    /// pre-filtering.
    pub fn predict_tail(&self, h: EntityId, r: RelationId) -> Result<Vec<f64>> {
        let tokens = self.tail_input(h, r)?;
        self.state.predict_probs(&tokens, Task::Tail)
    }
}

impl Scorer for Predictor<'_> {
    fn n_entities(&self) -> usize {
        self.state.n_entities
    }

    fn n_relations(&self) -> usize {
        self.state.n_relations
    }

    fn score_relation(&self, h: EntityId, t: EntityId) -> Result<Vec<f64>> {
        self.predict_relation(h, t)
    }

    fn score_tail(&self, h: EntityId, r: RelationId) -> Result<Vec<f64>> {
        self.predict_tail(h, r)
    }
}
