//! Training loop: shuffled positive triples only, cross-entropy loss,
//! AdamW updates, per-epoch validation MRR and best-checkpoint retention.
//! No corrupted/negative triples are ever constructed; the optional audit
//! trail records exactly which train triple produced every consumed example.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::example_loss_and_grads;
use super::params::{ModelState, TrainConfig};
use super::predict::ContextProvider;
use super::tokens::{build_relation_input, build_tail_input, TrainingExample};
use crate::eval::{compute_metrics, rank_of_truth};
use crate::kg::{GraphIndex, SplitDataset, Triple};
use crate::sampler::SamplerConfig;
use crate::{Error, Result, Task};

/// One structured training-log record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_mrr: f64,
    pub val_hits1: f64,
    pub val_hits3: f64,
    pub val_hits10: f64,
    pub wall_time_s: f64,
}

/// Everything a training run produced besides the updated state.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub task: Task,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mrr: f64,
    /// When auditing: for each epoch, the train-triple index behind every
    /// consumed example, in consumption order.
    pub consumed: Option<Vec<Vec<usize>>>,
}

/// Options orthogonal to the optimizer hyperparameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Record the provenance of every consumed example.
    pub audit: bool,
    /// Build skeleton-only inputs (empty context blocks). Ablation switch
    /// for measuring what the sampled contexts contribute.
    pub skeleton_only: bool,
}

/// AdamW: adaptive moments with decoupled weight decay. Decay applies only
/// to tensors flagged in the layout (weight matrices).
pub struct AdamW {
    cfg: TrainConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(cfg: TrainConfig, n_params: usize) -> Self {
        AdamW {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, state: &mut ModelState, grads: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let bias1 = 1.0 - c.beta1.powi(self.t as i32);
        let bias2 = 1.0 - c.beta2.powi(self.t as i32);
        for spec in state.layout.tensors().to_vec() {
            let decay = if spec.decay { c.weight_decay } else { 0.0 };
            for i in spec.offset..spec.offset + spec.len() {
                let g = grads[i];
                self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
                self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
                let m_hat = self.m[i] / bias1;
                let v_hat = self.v[i] / bias2;
                let p = &mut state.params[i];
                *p -= c.learning_rate * (m_hat / (v_hat.sqrt() + c.adam_eps) + decay * *p);
            }
        }
        state.step = self.t;
    }
}

/// Builds the supervised example for one triple under the given task.
pub fn example_for_triple(
    triple: &Triple,
    task: Task,
    ctx: &ContextProvider,
    state: &ModelState,
    skeleton_only: bool,
) -> Result<TrainingExample> {
    let tv = &state.token_vocab;
    let max_len = state.encoder.max_seq_len;
    let empty: &[crate::sampler::ContextToken] = &[];
    let (input_tokens, label) = match task {
        Task::Relation => {
            let (h_agg, t_agg) = if skeleton_only {
                (empty, empty)
            } else {
                (ctx.entity_aggregate(triple.head)?, ctx.entity_aggregate(triple.tail)?)
            };
            (
                build_relation_input(triple.head, h_agg, triple.tail, t_agg, tv, max_len)?,
                triple.relation.idx(),
            )
        }
        Task::Tail => {
            let (h_agg, r_agg) = if skeleton_only {
                (empty, empty)
            } else {
                (
                    ctx.entity_aggregate(triple.head)?,
                    ctx.relation_aggregate(triple.relation)?,
                )
            };
            (
                build_tail_input(triple.head, h_agg, triple.relation, r_agg, tv, max_len)?,
                triple.tail.idx(),
            )
        }
    };
    Ok(TrainingExample {
        input_tokens,
        label,
    })
}

fn validation_mrr(
    state: &ModelState,
    examples: &[TrainingExample],
    task: Task,
) -> Result<(f64, f64, f64, f64)> {
    if examples.is_empty() {
        return Ok((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
    }
    let mut ranks = Vec::with_capacity(examples.len());
    for ex in examples {
        let probs = state.predict_probs(&ex.input_tokens, task)?;
        ranks.push(rank_of_truth(&probs, ex.label, &Default::default())?);
    }
    let m = compute_metrics(&ranks)?;
    Ok((m.mrr, m.hits(1), m.hits(3), m.hits(10)))
}

/// Trains the task head (and the shared encoder) on the train split.
/// Contexts come from `graph`, which must have been built from the train
/// split only. Returns the per-epoch log; `state` is left at the
/// best-validation checkpoint (or the final epoch when there is no
/// validation split).
pub fn train(
    state: &mut ModelState,
    graph: &GraphIndex,
    splits: &SplitDataset,
    task: Task,
    sampler_cfg: &SamplerConfig,
    train_cfg: &TrainConfig,
    options: &TrainOptions,
) -> Result<TrainReport> {
    train_cfg.validate()?;
    sampler_cfg.validate()?;
    if splits.train.is_empty() {
        return Err(Error::config("train split is empty"));
    }

    let ctx = ContextProvider::build(graph, sampler_cfg)?;
    let examples: Vec<TrainingExample> = splits
        .train
        .iter()
        .map(|t| example_for_triple(t, task, &ctx, state, options.skeleton_only))
        .collect::<Result<_>>()?;
    let val_examples: Vec<TrainingExample> = splits
        .valid
        .iter()
        .map(|t| example_for_triple(t, task, &ctx, state, options.skeleton_only))
        .collect::<Result<_>>()?;

    let mut optimizer = AdamW::new(*train_cfg, state.param_count());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(train_cfg.seed.wrapping_add(1));
    let dropout_p = state.encoder.dropout;

    let mut grads = vec![0.0; state.param_count()];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epochs = Vec::with_capacity(train_cfg.epochs);
    let mut consumed = options.audit.then(Vec::new);
    let mut best: Option<(usize, f64, Vec<f64>, u64)> = None;

    for epoch in 1..=train_cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        if let Some(log) = consumed.as_mut() {
            log.push(order.clone());
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(train_cfg.batch_size) {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let ex = &examples[idx];
                let dropout = (dropout_p > 0.0).then_some((dropout_p, &mut dropout_rng));
                loss_sum += example_loss_and_grads(
                    state,
                    &ex.input_tokens,
                    ex.label,
                    task,
                    scale,
                    dropout,
                    &mut grads,
                )?;
            }
            optimizer.step(state, &grads);
        }
        let mean_loss = loss_sum / examples.len() as f64;
        let (val_mrr, h1, h3, h10) = validation_mrr(state, &val_examples, task)?;
        epochs.push(EpochRecord {
            epoch,
            mean_loss,
            val_mrr,
            val_hits1: h1,
            val_hits3: h3,
            val_hits10: h10,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        let is_better = match &best {
            _ if val_examples.is_empty() => false,
            None => true,
            Some((_, best_mrr, _, _)) => val_mrr > *best_mrr,
        };
        if is_better {
            best = Some((epoch, val_mrr, state.params.clone(), state.step));
        }
    }

    let (best_epoch, best_val_mrr) = match best {
        Some((epoch, mrr, params, step)) => {
            state.params = params;
            state.step = step;
            (epoch, mrr)
        }
        // no validation split: keep the final state
        None => (train_cfg.epochs, f64::NAN),
    };

    Ok(TrainReport {
        task,
        epochs,
        best_epoch,
        best_val_mrr,
        consumed: consumed.map(|per_epoch| per_epoch),
    })
}
