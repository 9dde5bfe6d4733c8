use rand::Rng;

use super::{init_model, DropoutCtx, Example, FusionModel, ModelConfig, ModelError};
use crate::seed;
use crate::smiles::{EncodedSequence, CLS_ID, PAD_ID};
use crate::tensor::{grad_check, sample_coordinates, GradCheckReport};

pub const GRAD_CHECK_STEP: f64 = 1e-5;
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

// Fixture points whose ReLU margin is below this are skipped: a probe of
// size h could cross a kink there.
const MIN_RELU_MARGIN: f64 = 5.0 * GRAD_CHECK_STEP;
const MAX_FIXTURE_ATTEMPTS: u64 = 256;

/// Small model plus a synthetic batch on which the full loss is smooth.
#[derive(Clone, Debug)]
pub struct GradFixture {
    pub model: FusionModel,
    pub batch: Vec<Example>,
    /// Seed actually used (the first at or after the requested one whose
    /// batch stays clear of ReLU kinks).
    pub seed: u64,
}

pub fn grad_fixture_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        ff_dim: 16,
        max_len: 12,
        vocab_size: 10,
        mlp_hidden: vec![16, 8],
        descriptor_dim: 8,
        dropout_rate: 0.0,
    }
}

fn fixture_batch(model: &FusionModel, s: u64) -> Result<Vec<Example>, ModelError> {
    let c = model.config();
    let mut rng = seed::rng(s, "gradcheck-batch", 0);
    let mut batch = Vec::new();
    for i in 0..4 {
        let len = rng.random_range(2..=c.max_len);
        let mut ids = vec![CLS_ID];
        ids.extend((1..len).map(|_| rng.random_range(3..c.vocab_size)));
        ids.resize(c.max_len, PAD_ID);
        let mut attention_mask = vec![1u8; len];
        attention_mask.resize(c.max_len, 0);
        let enc = EncodedSequence {
            ids,
            attention_mask,
        };
        let descriptors: Vec<f64> = (0..c.descriptor_dim)
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        // Residuals of about 0.1 that do not cancel: large enough that
        // rounding noise is negligible, small enough to keep truncation low.
        let offset = if i % 3 == 0 { 0.1 } else { -0.05 };
        let target = model.predict(&enc, &descriptors)? + offset;
        batch.push(Example {
            enc,
            descriptors,
            target,
        });
    }
    Ok(batch)
}

pub fn grad_fixture(seed: u64) -> Result<GradFixture, ModelError> {
    let config = grad_fixture_config();
    for s in seed..seed + MAX_FIXTURE_ATTEMPTS {
        let model = init_model(&config, s)?;
        let batch = fixture_batch(&model, s)?;
        let mut margin = f64::INFINITY;
        for ex in &batch {
            margin = margin.min(model.relu_margin(&ex.descriptors)?);
        }
        if margin >= MIN_RELU_MARGIN {
            return Ok(GradFixture {
                model,
                batch,
                seed: s,
            });
        }
    }
    Err(ModelError::InvalidConfig(format!(
        "no kink-free fixture within {MAX_FIXTURE_ATTEMPTS} seeds of {seed}"
    )))
}

/// Central-difference check of the full fusion-model loss with dropout off.
/// `corrupt` perturbs the analytic backward pass as a negative control.
pub fn check_model_gradients(
    fixture: &GradFixture,
    per_param: usize,
    corrupt: bool,
) -> Result<GradCheckReport, ModelError> {
    let model = &fixture.model;
    let batch: Vec<&Example> = fixture.batch.iter().collect();
    let (_, grads) = if corrupt {
        model.loss_and_grads_corrupted(&batch, &mut DropoutCtx::eval())?
    } else {
        model.loss_and_grads(&batch, &mut DropoutCtx::eval())?
    };
    let coords = sample_coordinates(model.params(), per_param, fixture.seed);
    grad_check(model.params(), &grads, &coords, GRAD_CHECK_STEP, |store| {
        model.batch_loss_with(store, &batch, &mut DropoutCtx::eval())
    })
}
