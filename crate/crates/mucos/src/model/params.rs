use std::collections::HashMap;

use ndarray::{ArrayView2, ArrayViewMut2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokens::TokenVocab;
use crate::kg::Vocabulary;
use crate::{Error, Result};

/// Encoder hyperparameters. Desk-scale by default; the encoder behind these
/// knobs is pluggable (see [`super::Encoder`]) so a pretrained model can be
/// substituted without touching the rest of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            ff_dim: 256,
            max_seq_len: 128,
            dropout: 0.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_layers == 0 || self.n_heads == 0 || self.ff_dim == 0 {
            return Err(Error::config("encoder dimensions must be positive"));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::config(format!(
                "d_model {} must be divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.max_seq_len < 4 {
            return Err(Error::config("max_seq_len must be at least 4"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Training hyperparameters: adaptive-moment optimizer with decoupled weight
/// decay over shuffled positive triples only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 16,
            epochs: 50,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch_size and epochs must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("adam betas must be in [0, 1)"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::config("weight_decay must be non-negative"));
        }
        Ok(())
    }
}

/// Shape and position of one named tensor inside the flat parameter buffer.
/// Vectors (biases, layer-norm scales) are stored as 1 x n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    /// Whether decoupled weight decay applies (weight matrices yes; biases,
    /// layer norms and embeddings no).
    pub decay: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Deterministic layout of every parameter tensor in one flat buffer. The
/// same layout describes parameter values, gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    tensors: Vec<TensorSpec>,
    by_name: HashMap<String, usize>,
    len: usize,
}

impl ParamLayout {
    pub fn build(cfg: &EncoderConfig, vocab_size: usize, n_relations: usize, n_entities: usize) -> Self {
        let d = cfg.d_model;
        let ff = cfg.ff_dim;
        let mut tensors = Vec::new();
        let mut offset = 0usize;
        let mut push = |name: String, rows: usize, cols: usize, decay: bool| {
            tensors.push(TensorSpec {
                name,
                rows,
                cols,
                offset,
                decay,
            });
            offset += rows * cols;
        };
        push("embed.token".into(), vocab_size, d, false);
        push("embed.pos".into(), cfg.max_seq_len, d, false);
        for i in 0..cfg.n_layers {
            for w in ["wq", "wk", "wv", "wo"] {
                push(format!("layer{i}.attn.{w}"), d, d, true);
            }
            for b in ["bq", "bk", "bv", "bo"] {
                push(format!("layer{i}.attn.{b}"), 1, d, false);
            }
            push(format!("layer{i}.ln1.gamma"), 1, d, false);
            push(format!("layer{i}.ln1.beta"), 1, d, false);
            push(format!("layer{i}.ff.w1"), d, ff, true);
            push(format!("layer{i}.ff.b1"), 1, ff, false);
            push(format!("layer{i}.ff.w2"), ff, d, true);
            push(format!("layer{i}.ff.b2"), 1, d, false);
            push(format!("layer{i}.ln2.gamma"), 1, d, false);
            push(format!("layer{i}.ln2.beta"), 1, d, false);
        }
        push("head.relation.w".into(), d, n_relations, true);
        push("head.relation.b".into(), 1, n_relations, false);
        push("head.tail.w".into(), d, n_entities, true);
        push("head.tail.b".into(), 1, n_entities, false);

        let by_name = tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), i))
            .collect();
        ParamLayout {
            tensors,
            by_name,
            len: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn spec(&self, name: &str) -> &TensorSpec {
        &self.tensors[self.by_name[name]]
    }

    pub fn view<'a>(&self, buf: &'a [f64], name: &str) -> ArrayView2<'a, f64> {
        let s = self.spec(name);
        ArrayView2::from_shape((s.rows, s.cols), &buf[s.offset..s.offset + s.len()]).unwrap()
    }

    pub fn view_mut<'a>(&self, buf: &'a mut [f64], name: &str) -> ArrayViewMut2<'a, f64> {
        let s = self.spec(name);
        ArrayViewMut2::from_shape((s.rows, s.cols), &mut buf[s.offset..s.offset + s.len()])
            .unwrap()
    }
}

/// All trainable state: embeddings, encoder layers and the two classifier
/// heads, in one flat f64 buffer described by `layout`.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub encoder: EncoderConfig,
    pub token_vocab: TokenVocab,
    pub n_entities: usize,
    pub n_relations: usize,
    pub vocab_hash: [u8; 32],
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub step: u64,
}

impl ModelState {
    pub fn new(encoder: EncoderConfig, vocab: &Vocabulary, seed: u64) -> Result<Self> {
        Self::with_sizes(
            encoder,
            vocab.entity_count(),
            vocab.relation_count(),
            vocab.content_hash(),
            seed,
        )
    }

    pub fn with_sizes(
        encoder: EncoderConfig,
        n_entities: usize,
        n_relations: usize,
        vocab_hash: [u8; 32],
        seed: u64,
    ) -> Result<Self> {
        encoder.validate()?;
        if n_entities == 0 || n_relations == 0 {
            return Err(Error::config("model needs at least one entity and one relation"));
        }
        let token_vocab = TokenVocab::from_sizes(n_entities, n_relations);
        let layout = ParamLayout::build(&encoder, token_vocab.size(), n_relations, n_entities);
        let mut params = vec![0.0; layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // scaled normal for embeddings and weight matrices, ones for LN
        // scales, zeros for every bias
        for spec in layout.tensors() {
            let slice = &mut params[spec.offset..spec.offset + spec.len()];
            if spec.name.ends_with("gamma") {
                slice.fill(1.0);
            } else if spec.rows > 1 {
                for v in slice.iter_mut() {
                    *v = 0.02 * normal_sample(&mut rng);
                }
            }
        }
        Ok(ModelState {
            encoder,
            token_vocab,
            n_entities,
            n_relations,
            vocab_hash,
            layout,
            params,
            step: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn tensor(&self, name: &str) -> ArrayView2<'_, f64> {
        self.layout.view(&self.params, name)
    }

    pub fn tensor_mut(&mut self, name: &str) -> ArrayViewMut2<'_, f64> {
        self.layout.view_mut(&mut self.params, name)
    }

    /// Zeroes one tensor in place (test and ablation hook).
    pub fn zero_tensor(&mut self, name: &str) {
        let s = self.layout.spec(name).clone();
        self.params[s.offset..s.offset + s.len()].fill(0.0);
    }
}

/// Standard normal via Box-Muller; keeps initialization free of any
/// distribution-crate version drift.
fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
