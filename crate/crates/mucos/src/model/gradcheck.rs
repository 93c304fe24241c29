//! Central-finite-difference validation of the analytic backward pass.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encoder::{cross_entropy, example_loss_and_grads, forward, head_logits, softmax};
use super::params::ModelState;
use super::tokens::TrainingExample;
use crate::{Result, Task};

fn loss_only(state: &ModelState, tokens: &[u32], label: usize, task: Task) -> Result<f64> {
    let trace = forward(state, tokens, None)?;
    let logits = head_logits(state, trace.out.row(0), task);
    Ok(cross_entropy(&softmax(&logits), label))
}

/// Compares analytic gradients against central finite differences on
/// `samples_per_tensor` randomly chosen parameters of every tensor and
/// returns the maximum relative error. Intended for tiny double-precision
/// configs where truncation error is far below the 1e-4 acceptance line.
pub fn gradient_check(
    state: &mut ModelState,
    example: &TrainingExample,
    task: Task,
    samples_per_tensor: usize,
    seed: u64,
) -> Result<f64> {
    let mut grads = vec![0.0; state.param_count()];
    example_loss_and_grads(
        state,
        &example.input_tokens,
        example.label,
        task,
        1.0,
        None,
        &mut grads,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err: f64 = 0.0;
    let specs: Vec<_> = state.layout.tensors().to_vec();
    for spec in &specs {
        for _ in 0..samples_per_tensor {
            let idx = spec.offset + rng.random_range(0..spec.len());
            let orig = state.params[idx];
            let h = 1e-6 * orig.abs().max(1.0);

            state.params[idx] = orig + h;
            let loss_plus = loss_only(state, &example.input_tokens, example.label, task)?;
            state.params[idx] = orig - h;
            let loss_minus = loss_only(state, &example.input_tokens, example.label, task)?;
            state.params[idx] = orig;

            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let analytic = grads[idx];
            let denom = analytic.abs().max(numeric.abs());
            if denom < 1e-8 {
                // both effectively zero (e.g. embedding of a token absent
                // from the input)
                continue;
            }
            let rel_err = (analytic - numeric).abs() / denom;
            max_rel_err = max_rel_err.max(rel_err);
        }
    }
    Ok(max_rel_err)
}
