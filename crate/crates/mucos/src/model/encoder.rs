//! Desk-scale transformer encoder in f64 with a hand-written backward pass.
//!
//! Architecture per layer: multi-head self-attention and a GELU feed-forward
//! block, each followed by residual add + layer normalization (post-norm).
//! The pooled representation is the final hidden state at the BOS position.
//! Inference is deterministic (dropout off); training applies inverted
//! dropout after the embedding sum, the attention projection and the
//! feed-forward output.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray::linalg::general_mat_mul;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::ModelState;
use crate::{Error, Result, Task};

const LN_EPS: f64 = 1e-5;
/// Floor applied inside the log of the cross-entropy loss.
pub const LOG_CLAMP_EPS: f64 = 1e-12;

/// Minimal encoder seam: anything that can turn a token sequence into a
/// pooled vector can back the classifier heads.
pub trait Encoder {
    fn d_model(&self) -> usize;
    fn encode(&self, tokens: &[u32]) -> Result<Array1<f64>>;
}

impl Encoder for ModelState {
    fn d_model(&self) -> usize {
        self.encoder.d_model
    }

    /// Inference-mode encoding: deterministic, dropout off.
    fn encode(&self, tokens: &[u32]) -> Result<Array1<f64>> {
        let trace = forward(self, tokens, None)?;
        Ok(trace.out.row(0).to_owned())
    }
}

struct LnTrace {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

struct LayerTrace {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Per-head attention probabilities, each (S, S).
    attn: Vec<Array2<f64>>,
    /// Concatenated head outputs before the output projection.
    ctx: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    ln1: LnTrace,
    h1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    ln2: LnTrace,
}

pub(crate) struct Trace {
    pub ids: Vec<u32>,
    emb_mask: Option<Array2<f64>>,
    layers: Vec<LayerTrace>,
    pub out: Array2<f64>,
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    const A: f64 = 0.044715;
    0.5 * x * (1.0 + (C * (x + A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    const A: f64 = 0.044715;
    let t = (C * (x + A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * A * x * x)
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn layer_norm(x: &Array2<f64>, gamma: ArrayView2<f64>, beta: ArrayView2<f64>) -> (Array2<f64>, LnTrace) {
    let (rows, cols) = x.dim();
    let mut xhat = Array2::zeros((rows, cols));
    let mut inv_std = Array1::zeros(rows);
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        let row = x.row(i);
        let mean = row.sum() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let istd = 1.0 / (var + LN_EPS).sqrt();
        inv_std[i] = istd;
        for j in 0..cols {
            let xh = (x[[i, j]] - mean) * istd;
            xhat[[i, j]] = xh;
            out[[i, j]] = gamma[[0, j]] * xh + beta[[0, j]];
        }
    }
    (out, LnTrace { xhat, inv_std })
}

/// dL/dx for layer norm with biased variance; accumulates dgamma/dbeta.
fn layer_norm_backward(
    dy: &Array2<f64>,
    ln: &LnTrace,
    gamma: ArrayView2<f64>,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Array2<f64> {
    let (rows, cols) = dy.dim();
    let mut dx = Array2::zeros((rows, cols));
    for i in 0..rows {
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..cols {
            let d = dy[[i, j]];
            let xh = ln.xhat[[i, j]];
            dgamma[j] += d * xh;
            dbeta[j] += d;
            let dxhat = d * gamma[[0, j]];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xh;
        }
        mean_dxhat /= cols as f64;
        mean_dxhat_xhat /= cols as f64;
        let istd = ln.inv_std[i];
        for j in 0..cols {
            let dxhat = dy[[i, j]] * gamma[[0, j]];
            dx[[i, j]] = istd * (dxhat - mean_dxhat - ln.xhat[[i, j]] * mean_dxhat_xhat);
        }
    }
    dx
}

fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - p;
    Array2::from_shape_fn(shape, |_| {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

fn add_bias(m: &mut Array2<f64>, b: ArrayView2<f64>) {
    for mut row in m.rows_mut() {
        row += &b.row(0);
    }
}

/// Full forward pass keeping every intermediate needed by the backward pass.
/// `dropout` carries the probability and RNG in training mode.
pub(crate) fn forward(
    state: &ModelState,
    tokens: &[u32],
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<Trace> {
    let cfg = &state.encoder;
    let seq_len = tokens.len();
    if seq_len == 0 {
        return Err(Error::config("cannot encode an empty token sequence"));
    }
    if seq_len > cfg.max_seq_len {
        return Err(Error::config(format!(
            "sequence length {seq_len} exceeds max_seq_len {}",
            cfg.max_seq_len
        )));
    }
    let vocab_size = state.token_vocab.size();
    let d = cfg.d_model;
    let n_heads = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let tok_emb = state.tensor("embed.token");
    let pos_emb = state.tensor("embed.pos");
    let mut x = Array2::zeros((seq_len, d));
    for (i, &tok) in tokens.iter().enumerate() {
        let tok = tok as usize;
        if tok >= vocab_size {
            return Err(Error::vocab(format!("token id {tok} out of range")));
        }
        for j in 0..d {
            x[[i, j]] = tok_emb[[tok, j]] + pos_emb[[i, j]];
        }
    }
    let emb_mask = match dropout {
        Some((p, ref mut rng)) if p > 0.0 => {
            let mask = dropout_mask((seq_len, d), p, rng);
            x *= &mask;
            Some(mask)
        }
        _ => None,
    };

    let mut layers = Vec::with_capacity(cfg.n_layers);
    for layer in 0..cfg.n_layers {
        let name = |part: &str| format!("layer{layer}.{part}");
        let x_in = x.clone();

        let mut q = x.dot(&state.tensor(&name("attn.wq")));
        add_bias(&mut q, state.tensor(&name("attn.bq")));
        let mut k = x.dot(&state.tensor(&name("attn.wk")));
        add_bias(&mut k, state.tensor(&name("attn.bk")));
        let mut v = x.dot(&state.tensor(&name("attn.wv")));
        add_bias(&mut v, state.tensor(&name("attn.bv")));

        let mut attn = Vec::with_capacity(n_heads);
        let mut ctx = Array2::zeros((seq_len, d));
        for h in 0..n_heads {
            let span = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(span);
            let kh = k.slice(span);
            let vh = v.slice(span);
            let mut scores = qh.dot(&kh.t());
            scores *= scale;
            softmax_rows(&mut scores);
            let ctx_h = scores.dot(&vh);
            ctx.slice_mut(span).assign(&ctx_h);
            attn.push(scores);
        }

        let mut attn_out = ctx.dot(&state.tensor(&name("attn.wo")));
        add_bias(&mut attn_out, state.tensor(&name("attn.bo")));
        let attn_mask = match dropout {
            Some((p, ref mut rng)) if p > 0.0 => {
                let mask = dropout_mask((seq_len, d), p, rng);
                attn_out *= &mask;
                Some(mask)
            }
            _ => None,
        };

        let r1 = &x_in + &attn_out;
        let (h1, ln1) = layer_norm(
            &r1,
            state.tensor(&name("ln1.gamma")),
            state.tensor(&name("ln1.beta")),
        );

        let mut ff_pre = h1.dot(&state.tensor(&name("ff.w1")));
        add_bias(&mut ff_pre, state.tensor(&name("ff.b1")));
        let ff_act = ff_pre.mapv(gelu);
        let mut ff_out = ff_act.dot(&state.tensor(&name("ff.w2")));
        add_bias(&mut ff_out, state.tensor(&name("ff.b2")));
        let ff_mask = match dropout {
            Some((p, ref mut rng)) if p > 0.0 => {
                let mask = dropout_mask((seq_len, d), p, rng);
                ff_out *= &mask;
                Some(mask)
            }
            _ => None,
        };

        let r2 = &h1 + &ff_out;
        let (out, ln2) = layer_norm(
            &r2,
            state.tensor(&name("ln2.gamma")),
            state.tensor(&name("ln2.beta")),
        );

        layers.push(LayerTrace {
            x_in,
            q,
            k,
            v,
            attn,
            ctx,
            attn_mask,
            ln1,
            h1,
            ff_pre,
            ff_act,
            ff_mask,
            ln2,
        });
        x = out;
    }

    Ok(Trace {
        ids: tokens.to_vec(),
        emb_mask,
        layers,
        out: x,
    })
}

/// Accumulates parameter gradients into `grads` (same layout as the
/// parameter buffer) given the gradient of the loss w.r.t. the final hidden
/// states.
pub(crate) fn backward(state: &ModelState, trace: &Trace, d_out: Array2<f64>, grads: &mut [f64]) {
    let cfg = &state.encoder;
    let d = cfg.d_model;
    let n_heads = cfg.n_heads;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let seq_len = trace.ids.len();

    let mut dx = d_out;
    for (layer, lt) in trace.layers.iter().enumerate().rev() {
        let name = |part: &str| format!("layer{layer}.{part}");
        // LN2
        let dr2 = {
            let spec_g = state.layout.spec(&name("ln2.gamma")).clone();
            let spec_b = state.layout.spec(&name("ln2.beta")).clone();
            let (gslice, bslice) = two_slices(grads, spec_g.offset, spec_g.len(), spec_b.offset);
            layer_norm_backward(&dx, &lt.ln2, state.tensor(&name("ln2.gamma")), gslice, bslice)
        };

        // feed-forward branch
        let mut dff_out = dr2.clone();
        if let Some(mask) = &lt.ff_mask {
            dff_out *= mask;
        }
        accumulate_bias(grads, state, &name("ff.b2"), &dff_out);
        accumulate_matmul(grads, state, &name("ff.w2"), &lt.ff_act.t().to_owned(), &dff_out);
        let mut dff_act = dff_out.dot(&state.tensor(&name("ff.w2")).t());
        // through GELU
        for i in 0..seq_len {
            for j in 0..cfg.ff_dim {
                dff_act[[i, j]] *= gelu_grad(lt.ff_pre[[i, j]]);
            }
        }
        accumulate_bias(grads, state, &name("ff.b1"), &dff_act);
        accumulate_matmul(grads, state, &name("ff.w1"), &lt.h1.t().to_owned(), &dff_act);
        let mut dh1 = dff_act.dot(&state.tensor(&name("ff.w1")).t());
        dh1 += &dr2; // residual path around the feed-forward block

        // LN1
        let dr1 = {
            let spec_g = state.layout.spec(&name("ln1.gamma")).clone();
            let spec_b = state.layout.spec(&name("ln1.beta")).clone();
            let (gslice, bslice) = two_slices(grads, spec_g.offset, spec_g.len(), spec_b.offset);
            layer_norm_backward(&dh1, &lt.ln1, state.tensor(&name("ln1.gamma")), gslice, bslice)
        };

        // attention branch
        let mut dattn_out = dr1.clone();
        if let Some(mask) = &lt.attn_mask {
            dattn_out *= mask;
        }
        accumulate_bias(grads, state, &name("attn.bo"), &dattn_out);
        accumulate_matmul(grads, state, &name("attn.wo"), &lt.ctx.t().to_owned(), &dattn_out);
        let dctx = dattn_out.dot(&state.tensor(&name("attn.wo")).t());

        let mut dq = Array2::zeros((seq_len, d));
        let mut dk = Array2::zeros((seq_len, d));
        let mut dv = Array2::zeros((seq_len, d));
        for h in 0..n_heads {
            let span = s![.., h * dh..(h + 1) * dh];
            let a = &lt.attn[h];
            let dctx_h = dctx.slice(span);
            let vh = lt.v.slice(span);
            let da = dctx_h.dot(&vh.t());
            dv.slice_mut(span).assign(&a.t().dot(&dctx_h));
            // softmax backward, rows independent
            let mut dscores = Array2::zeros((seq_len, seq_len));
            for i in 0..seq_len {
                let mut dot = 0.0;
                for j in 0..seq_len {
                    dot += da[[i, j]] * a[[i, j]];
                }
                for j in 0..seq_len {
                    dscores[[i, j]] = a[[i, j]] * (da[[i, j]] - dot);
                }
            }
            dscores *= scale;
            let qh = lt.q.slice(span);
            let kh = lt.k.slice(span);
            dq.slice_mut(span).assign(&dscores.dot(&kh));
            dk.slice_mut(span).assign(&dscores.t().dot(&qh));
        }

        let x_t = lt.x_in.t().to_owned();
        accumulate_bias(grads, state, &name("attn.bq"), &dq);
        accumulate_matmul(grads, state, &name("attn.wq"), &x_t, &dq);
        accumulate_bias(grads, state, &name("attn.bk"), &dk);
        accumulate_matmul(grads, state, &name("attn.wk"), &x_t, &dk);
        accumulate_bias(grads, state, &name("attn.bv"), &dv);
        accumulate_matmul(grads, state, &name("attn.wv"), &x_t, &dv);

        let mut dx_next = dq.dot(&state.tensor(&name("attn.wq")).t());
        dx_next += &dk.dot(&state.tensor(&name("attn.wk")).t());
        dx_next += &dv.dot(&state.tensor(&name("attn.wv")).t());
        dx_next += &dr1; // residual path around attention
        dx = dx_next;
    }

    if let Some(mask) = &trace.emb_mask {
        dx *= mask;
    }
    let tok_spec = state.layout.spec("embed.token").clone();
    let pos_spec = state.layout.spec("embed.pos").clone();
    for (i, &tok) in trace.ids.iter().enumerate() {
        let tok = tok as usize;
        for j in 0..d {
            grads[tok_spec.offset + tok * d + j] += dx[[i, j]];
            grads[pos_spec.offset + i * d + j] += dx[[i, j]];
        }
    }
}

/// grads[name] += a · b, shapes (m,k)·(k,n) against the stored (m,n) tensor.
fn accumulate_matmul(
    grads: &mut [f64],
    state: &ModelState,
    name: &str,
    a: &Array2<f64>,
    b: &Array2<f64>,
) {
    let mut view = state.layout.view_mut(grads, name);
    general_mat_mul(1.0, a, b, 1.0, &mut view);
}

fn accumulate_bias(grads: &mut [f64], state: &ModelState, name: &str, d: &Array2<f64>) {
    let spec = state.layout.spec(name).clone();
    let sums = d.sum_axis(Axis(0));
    for (j, v) in sums.iter().enumerate() {
        grads[spec.offset + j] += v;
    }
}

/// Two disjoint mutable gradient slices (gamma then beta of one layer norm).
fn two_slices(buf: &mut [f64], off_a: usize, len_a: usize, off_b: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(off_a + len_a, off_b);
    let (_, rest) = buf.split_at_mut(off_a);
    let (a, rest) = rest.split_at_mut(len_a);
    let (b, _) = rest.split_at_mut(len_a);
    (a, b)
}

/// Classifier logits for a pooled vector under the task head.
pub(crate) fn head_logits(state: &ModelState, pooled: ArrayView1<f64>, task: Task) -> Vec<f64> {
    let (w, b) = match task {
        Task::Relation => (state.tensor("head.relation.w"), state.tensor("head.relation.b")),
        Task::Tail => (state.tensor("head.tail.w"), state.tensor("head.tail.b")),
    };
    let mut logits: Vec<f64> = pooled.dot(&w).to_vec();
    for (l, bias) in logits.iter_mut().zip(b.row(0).iter()) {
        *l += bias;
    }
    logits
}

/// Numerically stable softmax over a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Negative log-likelihood of the labelled class, with the probability
/// clamped below at [`LOG_CLAMP_EPS`] so a zero never produces infinity.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(LOG_CLAMP_EPS).ln()
}

/// Forward + backward for one example. Gradients are scaled by `scale`
/// (1/batch for mean-reduced batches) and accumulated into `grads`; returns
/// the unscaled loss.
pub(crate) fn example_loss_and_grads(
    state: &ModelState,
    tokens: &[u32],
    label: usize,
    task: Task,
    scale: f64,
    dropout: Option<(f64, &mut ChaCha8Rng)>,
    grads: &mut [f64],
) -> Result<f64> {
    let n_classes = match task {
        Task::Relation => state.n_relations,
        Task::Tail => state.n_entities,
    };
    if label >= n_classes {
        return Err(Error::vocab(format!(
            "label {label} out of range for {n_classes} classes"
        )));
    }
    let trace = forward(state, tokens, dropout)?;
    let pooled = trace.out.row(0);
    let logits = head_logits(state, pooled, task);
    let probs = softmax(&logits);
    let loss = cross_entropy(&probs, label);

    // softmax + cross-entropy collapse to probs - onehot at the logits
    let mut dlogits = probs;
    dlogits[label] -= 1.0;
    for v in dlogits.iter_mut() {
        *v *= scale;
    }

    let (w_name, b_name) = match task {
        Task::Relation => ("head.relation.w", "head.relation.b"),
        Task::Tail => ("head.tail.w", "head.tail.b"),
    };
    let d = state.encoder.d_model;
    let w_spec = state.layout.spec(w_name).clone();
    let b_spec = state.layout.spec(b_name).clone();
    for (c, &dl) in dlogits.iter().enumerate() {
        grads[b_spec.offset + c] += dl;
        if dl != 0.0 {
            for j in 0..d {
                grads[w_spec.offset + j * n_classes + c] += pooled[j] * dl;
            }
        }
    }
    let w = state.tensor(w_name);
    let dlogits_arr = Array1::from_vec(dlogits);
    let dpooled = w.dot(&dlogits_arr);

    let mut d_out = Array2::zeros(trace.out.dim());
    d_out.row_mut(0).assign(&dpooled);
    backward(state, &trace, d_out, grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Vocabulary;
    use crate::model::EncoderConfig;

    fn tiny_state() -> ModelState {
        let vocab = Vocabulary::from_labels(["A", "B", "C"], ["r1", "r2"]).unwrap();
        let cfg = EncoderConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            ff_dim: 16,
            max_seq_len: 16,
            dropout: 0.0,
        };
        ModelState::new(cfg, &vocab, 3).unwrap()
    }

    #[test]
    fn encode_is_deterministic_and_d_model_sized() {
        let state = tiny_state();
        for len in [1usize, 3, 7] {
            let tokens: Vec<u32> = (0..len as u32).map(|i| i % 5).collect();
            let a = state.encode(&tokens).unwrap();
            let b = state.encode(&tokens).unwrap();
            assert_eq!(a.len(), 8);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn out_of_range_token_is_vocab_error() {
        let state = tiny_state();
        assert!(matches!(state.encode(&[99]), Err(Error::Vocab(_))));
    }

    #[test]
    fn sequence_length_limits_enforced() {
        let state = tiny_state();
        assert!(state.encode(&[]).is_err());
        let long: Vec<u32> = vec![1; 17];
        assert!(state.encode(&long).is_err());
    }

    #[test]
    fn zero_positional_embeddings_make_context_order_irrelevant() {
        let mut state = tiny_state();
        state.zero_tensor("embed.pos");
        // BOS stays at position 0; swap two later tokens
        let a = state.encode(&[1, 3, 4, 5, 6]).unwrap();
        let b = state.encode(&[1, 3, 6, 5, 4]).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12, "pooled output changed: {x} vs {y}");
        }
    }

    #[test]
    fn positional_embeddings_break_permutation_invariance() {
        let state = tiny_state();
        let a = state.encode(&[1, 3, 4, 5, 6]).unwrap();
        let b = state.encode(&[1, 3, 6, 5, 4]).unwrap();
        let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-9);
    }

    #[test]
    fn softmax_sums_to_one() {
        let probs = softmax(&[0.3, -2.0, 5.0, 0.0]);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        let uniform = vec![1.0 / 9.0; 9];
        assert!((cross_entropy(&uniform, 4) - 9f64.ln()).abs() < 1e-12);
        // zero probability is clamped, not infinite
        let clamped = cross_entropy(&[1.0, 0.0], 1);
        assert!(clamped.is_finite());
        assert!((clamped - (-LOG_CLAMP_EPS.ln())).abs() < 1e-9);
    }

    #[test]
    fn dropout_masks_are_seed_deterministic_and_change_training_path() {
        use rand_chacha::rand_core::SeedableRng;
        let vocab = Vocabulary::from_labels(["A", "B"], ["r"]).unwrap();
        let cfg = EncoderConfig {
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            ff_dim: 16,
            max_seq_len: 8,
            dropout: 0.5,
        };
        let state = ModelState::new(cfg, &vocab, 1).unwrap();
        let tokens = [1u32, 3, 4];
        let mut rng1 = ChaCha8Rng::seed_from_u64(9);
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        let a = forward(&state, &tokens, Some((0.5, &mut rng1))).unwrap();
        let b = forward(&state, &tokens, Some((0.5, &mut rng2))).unwrap();
        assert_eq!(a.out, b.out);
        let inference = forward(&state, &tokens, None).unwrap();
        assert_ne!(a.out, inference.out);
    }
}
