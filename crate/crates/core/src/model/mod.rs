//! Two-channel yield regressor.
//!
//! The SMILES channel is a post-LN transformer encoder (token + learned
//! position embeddings followed by layer-norm, multi-head self-attention, GELU feed-forward) pooled
//! at the CLS position. The descriptor channel is a ReLU MLP. The two
//! outputs are concatenated and fed to a linear regression head.

mod adam;
mod checkpoint;
mod gradcheck;
mod search;
mod train;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::smiles::EncodedSequence;
use crate::tensor::{Gradients, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{
    check_model_gradients, grad_fixture, grad_fixture_config, GradFixture, GRAD_CHECK_STEP,
    GRAD_CHECK_TOLERANCE,
};
pub use search::{hyperparameter_search, Candidate, SearchResult};
pub use train::{evaluate_mse, train, EpochRecord, TrainConfig, TrainOutcome};

const INIT_STD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged at step {step}: loss {loss}")]
    NonFinite { step: usize, loss: f64 },
    #[error("empty hyper-parameter grid")]
    EmptyGrid,
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: {0}")]
    BadMagic(String),
    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u32),
    #[error("checkpoint shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub mlp_hidden: Vec<usize>,
    pub descriptor_dim: usize,
    /// Stored as the per-model default; training uses [`TrainConfig::dropout_rate`].
    pub dropout_rate: f64,
}

impl ModelConfig {
    /// Desk-scale defaults: d_model 64, 4 heads, 2 layers, ff 128, max_len 256, MLP [128, 64], dropout 0.1.
    pub fn with_defaults(vocab_size: usize, descriptor_dim: usize) -> Self {
        ModelConfig {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            ff_dim: 128,
            max_len: 256,
            vocab_size,
            mlp_hidden: vec![128, 64],
            descriptor_dim,
            dropout_rate: 0.1,
        }
    }

    pub fn fusion_dim(&self) -> usize {
        self.d_model + self.mlp_hidden.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        let positive = [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("ff_dim", self.ff_dim),
            ("descriptor_dim", self.descriptor_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.vocab_size < 3 {
            return bad(format!("vocab_size {} < 3", self.vocab_size));
        }
        if self.max_len < 2 {
            return bad(format!("max_len {} < 2", self.max_len));
        }
        if self.mlp_hidden.is_empty() || self.mlp_hidden.contains(&0) {
            return bad("mlp_hidden needs at least one positive width".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }
}

/// One training or evaluation input: encoded SMILES, normalized descriptors, target yield fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub enc: EncodedSequence,
    pub descriptors: Vec<f64>,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct LayerIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    ff1_w: ParamId,
    ff1_b: ParamId,
    ff2_w: ParamId,
    ff2_b: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionModel {
    config: ModelConfig,
    params: ParamStore,
    tok_emb: ParamId,
    pos_emb: ParamId,
    emb_ln_g: ParamId,
    emb_ln_b: ParamId,
    layers: Vec<LayerIds>,
    mlp: Vec<(ParamId, ParamId)>,
    head_w: ParamId,
    head_b: ParamId,
}

enum Init {
    Normal,
    Zeros,
    Ones,
}

/// Parameter names and shapes in registration order.
fn param_layout(c: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    use Init::*;
    let d = c.d_model;
    let mut out = vec![
        ("tok_emb".to_string(), vec![c.vocab_size, d], Normal),
        ("pos_emb".to_string(), vec![c.max_len, d], Normal),
        ("emb_ln_g".to_string(), vec![d], Ones),
        ("emb_ln_b".to_string(), vec![d], Zeros),
    ];
    for l in 0..c.n_layers {
        let p = |s: &str| format!("enc.{l}.{s}");
        out.extend([
            (p("wq"), vec![d, d], Normal),
            (p("bq"), vec![d], Zeros),
            (p("wk"), vec![d, d], Normal),
            (p("bk"), vec![d], Zeros),
            (p("wv"), vec![d, d], Normal),
            (p("bv"), vec![d], Zeros),
            (p("wo"), vec![d, d], Normal),
            (p("bo"), vec![d], Zeros),
            (p("ln1_g"), vec![d], Ones),
            (p("ln1_b"), vec![d], Zeros),
            (p("ff1_w"), vec![d, c.ff_dim], Normal),
            (p("ff1_b"), vec![c.ff_dim], Zeros),
            (p("ff2_w"), vec![c.ff_dim, d], Normal),
            (p("ff2_b"), vec![d], Zeros),
            (p("ln2_g"), vec![d], Ones),
            (p("ln2_b"), vec![d], Zeros),
        ]);
    }
    let mut width = c.descriptor_dim;
    for (i, &h) in c.mlp_hidden.iter().enumerate() {
        out.push((format!("mlp.{i}.w"), vec![width, h], Normal));
        out.push((format!("mlp.{i}.b"), vec![h], Zeros));
        width = h;
    }
    out.push(("head.w".into(), vec![c.fusion_dim(), 1], Normal));
    out.push(("head.b".into(), vec![1], Zeros));
    out
}

/// Builds a model with weights drawn from N(0, 0.02²) truncated at ±2σ,
/// zero biases and unit layer-norm gains. Deterministic per seed.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<FusionModel, ModelError> {
    config.validate()?;
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut store = ParamStore::new();
    for (i, (name, shape, init)) in param_layout(config).into_iter().enumerate() {
        let n: usize = shape.iter().product();
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Normal => {
                let mut rng = seed::rng(seed, "init", i as u64);
                (0..n)
                    .map(|_| loop {
                        let x: f64 = normal.sample(&mut rng);
                        if x.abs() <= 2.0 * INIT_STD {
                            break x;
                        }
                    })
                    .collect()
            }
        };
        store.add(name, Tensor::new(shape, data)?);
    }
    FusionModel::from_params(config.clone(), store)
}

/// Dropout stream for one optimizer step: each dropout site draws from its
/// own generator keyed by `(seed, step, site)`.
#[derive(Clone, Debug)]
pub struct DropoutCtx {
    pub rate: f64,
    pub seed: u64,
    pub step: u64,
    site: u64,
}

impl DropoutCtx {
    pub fn train(rate: f64, seed: u64, step: u64) -> Self {
        DropoutCtx {
            rate,
            seed,
            step,
            site: 0,
        }
    }

    pub fn eval() -> Self {
        DropoutCtx::train(0.0, 0, 0)
    }

    fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        if self.rate == 0.0 {
            return Ok(x);
        }
        let mut rng = seed::rng(self.seed, "dropout", (self.step << 24) ^ self.site);
        self.site += 1;
        tape.dropout(x, self.rate, true, &mut rng)
    }
}

/// Which key positions the encoder attends over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AttentionSpan {
    /// Only unmasked positions are materialized. Equivalent to the full
    /// masked computation because masked keys get probability exactly 0.
    #[default]
    ActiveOnly,
    /// All `max_len` positions are materialized; masked keys receive −∞ logits.
    FullMasked,
}

struct Bound {
    tok_emb: Var,
    pos_emb: Var,
    emb_ln_g: Var,
    emb_ln_b: Var,
    layers: Vec<[Var; 16]>,
    mlp: Vec<(Var, Var)>,
    head_w: Var,
    head_b: Var,
}

impl FusionModel {
    /// Rebuilds a model around an existing parameter store, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = param_layout(&config);
        if layout.len() != params.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "config needs {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape, _), (_, pname, t)) in layout.iter().zip(params.iter()) {
            if name != pname || shape.as_slice() != t.shape() {
                return Err(ModelError::ShapeMismatch(format!(
                    "expected {name} {shape:?}, found {pname} {:?}",
                    t.shape()
                )));
            }
        }
        let id = |n: &str| params.find(n).expect("layout checked");
        let layers = (0..config.n_layers)
            .map(|l| {
                let p = |s: &str| id(&format!("enc.{l}.{s}"));
                LayerIds {
                    wq: p("wq"),
                    bq: p("bq"),
                    wk: p("wk"),
                    bk: p("bk"),
                    wv: p("wv"),
                    bv: p("bv"),
                    wo: p("wo"),
                    bo: p("bo"),
                    ln1_g: p("ln1_g"),
                    ln1_b: p("ln1_b"),
                    ff1_w: p("ff1_w"),
                    ff1_b: p("ff1_b"),
                    ff2_w: p("ff2_w"),
                    ff2_b: p("ff2_b"),
                    ln2_g: p("ln2_g"),
                    ln2_b: p("ln2_b"),
                }
            })
            .collect();
        let mlp = (0..config.mlp_hidden.len())
            .map(|i| (id(&format!("mlp.{i}.w")), id(&format!("mlp.{i}.b"))))
            .collect();
        Ok(FusionModel {
            tok_emb: id("tok_emb"),
            pos_emb: id("pos_emb"),
            emb_ln_g: id("emb_ln_g"),
            emb_ln_b: id("emb_ln_b"),
            head_w: id("head.w"),
            head_b: id("head.b"),
            layers,
            mlp,
            config,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Parameter group name of a tensor, e.g. `enc.0.wq` → `enc.wq`.
    pub fn param_group(name: &str) -> String {
        let parts: Vec<&str> = name.split('.').collect();
        match parts.as_slice() {
            [prefix, idx, rest @ ..] if idx.parse::<usize>().is_ok() => {
                format!("{prefix}.{}", rest.join("."))
            }
            _ => name.to_string(),
        }
    }

    fn bind<'a>(&self, store: &'a ParamStore, tape: &mut Tape<'a>) -> Bound {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                [
                    l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo, l.ln1_g, l.ln1_b, l.ff1_w,
                    l.ff1_b, l.ff2_w, l.ff2_b, l.ln2_g, l.ln2_b,
                ]
                .map(|id| tape.param(store, id))
            })
            .collect();
        Bound {
            tok_emb: tape.param(store, self.tok_emb),
            pos_emb: tape.param(store, self.pos_emb),
            emb_ln_g: tape.param(store, self.emb_ln_g),
            emb_ln_b: tape.param(store, self.emb_ln_b),
            layers,
            mlp: self
                .mlp
                .iter()
                .map(|(w, b)| (tape.param(store, *w), tape.param(store, *b)))
                .collect(),
            head_w: tape.param(store, self.head_w),
            head_b: tape.param(store, self.head_b),
        }
    }

    fn check_sequence(&self, enc: &EncodedSequence) -> Result<(), ModelError> {
        let max_len = self.config.max_len;
        for (what, found) in [
            ("encoded ids", enc.ids.len()),
            ("attention mask", enc.attention_mask.len()),
        ] {
            if found != max_len {
                return Err(ModelError::LengthMismatch {
                    what,
                    expected: max_len,
                    found,
                });
            }
        }
        if enc.attention_mask[0] != 1 {
            return Err(ModelError::InvalidConfig(
                "CLS position must be unmasked".into(),
            ));
        }
        if let Some(&bad) = enc.ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(ModelError::InvalidConfig(format!(
                "token id {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Encoder output at the CLS position, `[1, d_model]`.
    fn encode_tape(
        &self,
        tape: &mut Tape,
        p: &Bound,
        enc: &EncodedSequence,
        span: AttentionSpan,
        drop: &mut DropoutCtx,
    ) -> Result<Var, ModelError> {
        self.check_sequence(enc)?;
        let (positions, key_mask): (Vec<usize>, Option<&[u8]>) = match span {
            AttentionSpan::ActiveOnly => (
                (0..enc.ids.len())
                    .filter(|&i| enc.attention_mask[i] == 1)
                    .collect(),
                None,
            ),
            AttentionSpan::FullMasked => ((0..enc.ids.len()).collect(), Some(&enc.attention_mask)),
        };
        let ids: Vec<usize> = positions.iter().map(|&i| enc.ids[i]).collect();
        let tok = tape.embedding_lookup(p.tok_emb, &ids)?;
        let pos = tape.embedding_lookup(p.pos_emb, &positions)?;
        let x = tape.add(tok, pos)?;
        let x = tape.layer_norm(x, p.emb_ln_g, p.emb_ln_b)?;
        let mut x = drop.apply(tape, x)?;

        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let n_layers = p.layers.len();
        for (l, w) in p.layers.iter().enumerate() {
            let [wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, ff1_w, ff1_b, ff2_w, ff2_b, ln2_g, ln2_b] =
                *w;
            // Only the CLS row feeds the pooled output, so the last layer
            // computes queries and the feed-forward for row 0 alone.
            let xq = if l + 1 == n_layers {
                tape.embedding_lookup(x, &[0])?
            } else {
                x
            };
            let q = tape.matmul(xq, wq)?;
            let q = tape.add(q, bq)?;
            let k = tape.matmul(x, wk)?;
            let k = tape.add(k, bk)?;
            let v = tape.matmul(x, wv)?;
            let v = tape.add(v, bv)?;
            let mut head_out = Vec::with_capacity(heads);
            for h in 0..heads {
                let (s, e) = (h * dh, (h + 1) * dh);
                let qh = tape.slice_cols(q, s, e)?;
                let kh = tape.slice_cols(k, s, e)?;
                let vh = tape.slice_cols(v, s, e)?;
                let scores = tape.matmul_nt(qh, kh)?;
                let scores = tape.scale(scores, inv_sqrt)?;
                let probs = tape.masked_softmax(scores, key_mask)?;
                head_out.push(tape.matmul(probs, vh)?);
            }
            let attn = tape.concat_cols(&head_out)?;
            let attn = tape.matmul(attn, wo)?;
            let attn = tape.add(attn, bo)?;
            let attn = drop.apply(tape, attn)?;
            let res = tape.add(xq, attn)?;
            let x1 = tape.layer_norm(res, ln1_g, ln1_b)?;

            let ff = tape.matmul(x1, ff1_w)?;
            let ff = tape.add(ff, ff1_b)?;
            let ff = tape.gelu(ff)?;
            let ff = tape.matmul(ff, ff2_w)?;
            let ff = tape.add(ff, ff2_b)?;
            let ff = drop.apply(tape, ff)?;
            let res = tape.add(x1, ff)?;
            x = tape.layer_norm(res, ln2_g, ln2_b)?;
        }
        Ok(x)
    }

    fn mlp_tape(
        &self,
        tape: &mut Tape,
        p: &Bound,
        descriptors: &[f64],
        drop: &mut DropoutCtx,
    ) -> Result<Var, ModelError> {
        if descriptors.len() != self.config.descriptor_dim {
            return Err(ModelError::LengthMismatch {
                what: "descriptor vector",
                expected: self.config.descriptor_dim,
                found: descriptors.len(),
            });
        }
        let mut h = tape.constant(Tensor::row(descriptors.to_vec()));
        for &(w, b) in &p.mlp {
            h = tape.matmul(h, w)?;
            h = tape.add(h, b)?;
            h = tape.relu(h)?;
            h = drop.apply(tape, h)?;
        }
        Ok(h)
    }

    fn predict_tape(
        &self,
        tape: &mut Tape,
        p: &Bound,
        ex_enc: &EncodedSequence,
        descriptors: &[f64],
        span: AttentionSpan,
        drop: &mut DropoutCtx,
    ) -> Result<Var, ModelError> {
        let pooled = self.encode_tape(tape, p, ex_enc, span, drop)?;
        let hidden = self.mlp_tape(tape, p, descriptors, drop)?;
        let fused = tape.concat_cols(&[pooled, hidden])?;
        let y = tape.matmul(fused, p.head_w)?;
        Ok(tape.add(y, p.head_b)?)
    }

    /// Pooled encoder output (length `d_model`).
    pub fn encode_sequence(&self, enc: &EncodedSequence) -> Result<Vec<f64>, ModelError> {
        self.encode_sequence_with(enc, AttentionSpan::ActiveOnly)
    }

    pub fn encode_sequence_with(
        &self,
        enc: &EncodedSequence,
        span: AttentionSpan,
    ) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let p = self.bind(&self.params, &mut tape);
        let out = self.encode_tape(&mut tape, &p, enc, span, &mut DropoutCtx::eval())?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Descriptor-channel hidden vector (length `mlp_hidden.last()`).
    pub fn mlp_forward(&self, descriptors: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let p = self.bind(&self.params, &mut tape);
        let out = self.mlp_tape(&mut tape, &p, descriptors, &mut DropoutCtx::eval())?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Smallest |pre-activation| over the descriptor MLP's ReLUs. Central
    /// differences are only meaningful when this exceeds the probe step.
    pub fn relu_margin(&self, descriptors: &[f64]) -> Result<f64, ModelError> {
        if descriptors.len() != self.config.descriptor_dim {
            return Err(ModelError::LengthMismatch {
                what: "descriptor vector",
                expected: self.config.descriptor_dim,
                found: descriptors.len(),
            });
        }
        let mut h = descriptors.to_vec();
        let mut margin = f64::INFINITY;
        for &(w, b) in &self.mlp {
            let (w, b) = (self.params.get(w), self.params.get(b));
            let out = b.len();
            let pre: Vec<f64> = (0..out)
                .map(|j| {
                    b.data()[j]
                        + h.iter()
                            .enumerate()
                            .map(|(i, x)| x * w.data()[i * out + j])
                            .sum::<f64>()
                })
                .collect();
            margin = pre.iter().fold(margin, |m, v| m.min(v.abs()));
            h = pre.into_iter().map(|v| v.max(0.0)).collect();
        }
        Ok(margin)
    }

    /// Raw (unclamped) yield prediction with dropout off.
    pub fn predict(&self, enc: &EncodedSequence, descriptors: &[f64]) -> Result<f64, ModelError> {
        self.predict_with(enc, descriptors, AttentionSpan::ActiveOnly)
    }

    pub fn predict_with(
        &self,
        enc: &EncodedSequence,
        descriptors: &[f64],
        span: AttentionSpan,
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let p = self.bind(&self.params, &mut tape);
        let y = self.predict_tape(
            &mut tape,
            &p,
            enc,
            descriptors,
            span,
            &mut DropoutCtx::eval(),
        )?;
        Ok(tape.value(y).data()[0])
    }

    fn batch_loss_tape<'a>(
        &self,
        store: &'a ParamStore,
        tape: &mut Tape<'a>,
        batch: &[&Example],
        drop: &mut DropoutCtx,
    ) -> Result<Var, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let p = self.bind(store, tape);
        let mut preds = Vec::with_capacity(batch.len());
        for ex in batch {
            preds.push(self.predict_tape(
                tape,
                &p,
                &ex.enc,
                &ex.descriptors,
                AttentionSpan::ActiveOnly,
                drop,
            )?);
        }
        let pred = tape.concat_rows(&preds)?;
        let target = tape.constant(Tensor::matrix(
            batch.len(),
            1,
            batch.iter().map(|e| e.target).collect(),
        )?);
        Ok(tape.mse_loss(pred, target)?)
    }

    /// Mean squared error of a batch evaluated with an arbitrary parameter
    /// store of this model's layout (used by gradient checking).
    pub fn batch_loss_with(
        &self,
        store: &ParamStore,
        batch: &[&Example],
        drop: &mut DropoutCtx,
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let l = self.batch_loss_tape(store, &mut tape, batch, drop)?;
        Ok(tape.value(l).data()[0])
    }

    /// Batch MSE and its gradient with respect to every parameter.
    pub fn loss_and_grads(
        &self,
        batch: &[&Example],
        drop: &mut DropoutCtx,
    ) -> Result<(f64, Gradients), ModelError> {
        self.loss_and_grads_inner(batch, drop, false)
    }

    #[doc(hidden)]
    pub fn loss_and_grads_corrupted(
        &self,
        batch: &[&Example],
        drop: &mut DropoutCtx,
    ) -> Result<(f64, Gradients), ModelError> {
        self.loss_and_grads_inner(batch, drop, true)
    }

    fn loss_and_grads_inner(
        &self,
        batch: &[&Example],
        drop: &mut DropoutCtx,
        corrupt: bool,
    ) -> Result<(f64, Gradients), ModelError> {
        let mut tape = Tape::new();
        if corrupt {
            tape.corrupt_backward_for_testing();
        }
        let l = self.batch_loss_tape(&self.params, &mut tape, batch, drop)?;
        let loss = tape.value(l).data()[0];
        let grads = tape.backward(l, &self.params)?;
        Ok((loss, grads))
    }
}

/// Reporting view of a raw prediction: clamped to [0, 1].
pub fn clamp_yield(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}
