//! End-to-end glue: records to model inputs, per-split fit and evaluation,
//! and a saved predictor usable for condition ranking.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condopt::{CondOptError, YieldPredictor};
use crate::data::{hyperparam_subset, DataError, Dataset, ReactionRecord, Split};
use crate::descriptors::{
    fit_normalizer, normalize, reaction_descriptor, DescriptorError, DescriptorTable,
    DescriptorVector, Normalizer,
};
use crate::eval::{EvalError, Metrics};
use crate::model::{
    clamp_yield, init_model, load_checkpoint, save_checkpoint, train, EpochRecord, Example,
    FusionModel, ModelConfig, ModelError, TrainConfig,
};
use crate::smiles::{build_vocab, encode, reaction_tokens, EncodedSequence, SmilesError, Vocab};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("sidecar {path}: {message}")]
    Sidecar { path: String, message: String },
    #[error("roles {found:?} do not match the featurizer roles {expected:?}")]
    RoleMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
}

/// Turns records into model inputs. The vocabulary comes from a label-free
/// corpus; the descriptor normalizer is fitted on training records only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub roles: Vec<String>,
    pub vocab: Vocab,
    pub normalizer: Normalizer,
    pub table: Option<DescriptorTable>,
    pub max_len: usize,
}

fn roles_of(r: &ReactionRecord) -> Vec<String> {
    r.components.iter().map(|c| c.role.clone()).collect()
}

impl Featurizer {
    /// `max_len` defaults to the longest corpus sequence plus CLS.
    pub fn fit(
        corpus: &[&ReactionRecord],
        train: &[&ReactionRecord],
        table: Option<DescriptorTable>,
        max_len: Option<usize>,
    ) -> Result<Self, PipelineError> {
        let tokens = corpus
            .iter()
            .map(|r| reaction_tokens(&r.smiles_list()))
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = build_vocab(&tokens)?;
        let longest = tokens.iter().map(|t| t.len() + 1).max().unwrap_or(2);
        let raw = train
            .iter()
            .map(|r| reaction_descriptor(r, table.as_ref()))
            .collect::<Result<Vec<DescriptorVector>, _>>()?;
        let normalizer = fit_normalizer(&raw)?;
        let roles = corpus.first().map(|r| roles_of(r)).unwrap_or_default();
        Ok(Featurizer {
            roles,
            vocab,
            normalizer,
            table,
            max_len: max_len.unwrap_or(longest.max(2)),
        })
    }

    pub fn descriptor_dim(&self) -> usize {
        self.normalizer.len()
    }

    fn check_roles(&self, r: &ReactionRecord) -> Result<(), PipelineError> {
        let found = roles_of(r);
        if found != self.roles {
            return Err(PipelineError::RoleMismatch {
                expected: self.roles.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn encode(&self, r: &ReactionRecord) -> Result<EncodedSequence, PipelineError> {
        self.check_roles(r)?;
        let tokens = reaction_tokens(&r.smiles_list())?;
        Ok(encode(&tokens, &self.vocab, self.max_len)?)
    }

    pub fn descriptors(&self, r: &ReactionRecord) -> Result<Vec<f64>, PipelineError> {
        self.check_roles(r)?;
        let raw = reaction_descriptor(r, self.table.as_ref())?;
        Ok(normalize(&raw, &self.normalizer)?.values)
    }

    pub fn example(&self, r: &ReactionRecord) -> Result<Example, PipelineError> {
        Ok(Example {
            enc: self.encode(r)?,
            descriptors: self.descriptors(r)?,
            target: r.yield_fraction,
        })
    }

    pub fn examples(&self, records: &[&ReactionRecord]) -> Result<Vec<Example>, PipelineError> {
        records.iter().map(|r| self.example(r)).collect()
    }

    /// Model config sized for this featurizer; architecture fields come from `template`.
    pub fn model_config(&self, template: &ModelConfig) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab.len(),
            descriptor_dim: self.descriptor_dim(),
            max_len: self.max_len,
            ..template.clone()
        }
    }
}

/// A trained model together with the featurizer it was trained with.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub model: FusionModel,
    pub featurizer: Featurizer,
}

/// Paths of the two files a saved pipeline consists of.
pub fn pipeline_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let name = stem
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    (
        stem.with_file_name(format!("{name}.ckpt")),
        stem.with_file_name(format!("{name}.pipeline.json")),
    )
}

impl Pipeline {
    /// Raw (unclamped) prediction.
    pub fn predict_raw(&self, r: &ReactionRecord) -> Result<f64, PipelineError> {
        let ex = self.featurizer.example(r)?;
        Ok(self.model.predict(&ex.enc, &ex.descriptors)?)
    }

    /// Clamped reporting view.
    pub fn predict(&self, r: &ReactionRecord) -> Result<f64, PipelineError> {
        Ok(clamp_yield(self.predict_raw(r)?))
    }

    pub fn predict_all(&self, records: &[&ReactionRecord]) -> Result<Vec<f64>, PipelineError> {
        records.iter().map(|r| self.predict(r)).collect()
    }

    /// Writes `<stem>.ckpt` and `<stem>.pipeline.json`.
    pub fn save(&self, stem: &Path) -> Result<(), PipelineError> {
        let (ckpt, side) = pipeline_paths(stem);
        save_checkpoint(&self.model, &ckpt)?;
        let json = serde_json::to_string_pretty(&self.featurizer).expect("featurizer serializes");
        fs::write(&side, json).map_err(|e| PipelineError::Sidecar {
            path: side.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(stem: &Path) -> Result<Self, PipelineError> {
        let (ckpt, side) = pipeline_paths(stem);
        let sidecar_err = |message: String| PipelineError::Sidecar {
            path: side.display().to_string(),
            message,
        };
        let text = fs::read_to_string(&side).map_err(|e| sidecar_err(e.to_string()))?;
        let featurizer: Featurizer =
            serde_json::from_str(&text).map_err(|e| sidecar_err(e.to_string()))?;
        let model = load_checkpoint(&ckpt)?;
        let c = model.config();
        if c.vocab_size != featurizer.vocab.len()
            || c.descriptor_dim != featurizer.descriptor_dim()
            || c.max_len != featurizer.max_len
        {
            return Err(sidecar_err(
                "featurizer dimensions do not match the checkpoint config".into(),
            ));
        }
        Ok(Pipeline { model, featurizer })
    }
}

impl YieldPredictor for Pipeline {
    fn predict_yield(&self, record: &ReactionRecord) -> Result<f64, CondOptError> {
        self.predict_raw(record)
            .map_err(|e| CondOptError::Prediction(e.to_string()))
    }
}

/// Everything needed to fit one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Architecture; vocab, descriptor width and max_len are filled in from the data.
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Fixed sequence length; `None` uses the longest sequence in the dataset.
    pub max_len: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SplitRun {
    pub pipeline: Pipeline,
    /// Clamped predictions on the split's test rows, in `split.test` order.
    pub predictions: Vec<f64>,
    pub metrics: Metrics,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Fits on `split.train` and scores `split.test`.
///
/// Model selection uses a seeded one-seventh holdout carved out of the
/// training rows; the test rows are never seen during fitting.
pub fn fit_split(
    dataset: &Dataset,
    table: Option<&DescriptorTable>,
    split: &Split,
    settings: &FitSettings,
) -> Result<SplitRun, PipelineError> {
    let seed = settings.train.seed;
    let (fit_idx, val_idx) = hyperparam_subset(&split.train, seed)?;
    let corpus: Vec<&ReactionRecord> = dataset.records.iter().collect();
    let fit_records = dataset.subset(&fit_idx);
    let featurizer = Featurizer::fit(&corpus, &fit_records, table.cloned(), settings.max_len)?;
    let config = featurizer.model_config(&settings.model);
    let fit_set = featurizer.examples(&fit_records)?;
    let val_set = featurizer.examples(&dataset.subset(&val_idx))?;
    let model = init_model(&config, seed)?;
    let outcome = train(model, &fit_set, &val_set, &settings.train)?;
    let pipeline = Pipeline {
        model: outcome.model,
        featurizer,
    };
    let test = dataset.subset(&split.test);
    let predictions = pipeline.predict_all(&test)?;
    let actual: Vec<f64> = test.iter().map(|r| r.yield_fraction).collect();
    let metrics = Metrics::compute(&predictions, &actual)?;
    Ok(SplitRun {
        pipeline,
        predictions,
        metrics,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
    })
}
