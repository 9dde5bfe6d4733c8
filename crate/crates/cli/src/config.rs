//! Run configuration: a flat `key = value` file overlaid with command-line
//! flags. Precedence is flag > file > built-in default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use yieldfuse::data::SchemaName;
use yieldfuse::model::{ModelConfig, TrainConfig};

use crate::error::CliError;

/// Every accepted key. Flags use the same names with `-` for `_`.
pub const KEYS: &[&str] = &[
    "dataset",
    "train_file",
    "test_file",
    "schema",
    "descriptors",
    "out",
    "seed",
    "ratio",
    "folds",
    "group_role",
    "partitions",
    "d_model",
    "n_heads",
    "n_layers",
    "ff_dim",
    "max_len",
    "mlp_hidden",
    "dropout",
    "lr",
    "batch_size",
    "epochs",
    "clip_norm",
    "max_steps",
    "search_lr",
    "search_dropout",
    "checkpoint",
    "pair",
    "top_n",
    "trials",
    "ks",
    "scope",
    "per_param",
    "noise",
    "corrupt_backward",
];

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

/// Parses `key = value` lines. `#` starts a comment line; blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::InputFormat(format!("config line {}: expected key = value", i + 1))
        })?;
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::InputFormat(format!(
                "config line {}: unknown key `{key}`",
                i + 1
            )));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingData(format!("config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Test,
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub train_files: Vec<PathBuf>,
    pub test_files: Vec<PathBuf>,
    pub schema: SchemaName,
    pub descriptors: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub ratio: f64,
    pub folds: usize,
    pub group_role: Option<String>,
    pub partitions: usize,
    /// Architecture template; vocabulary and descriptor widths come from the data.
    pub model: ModelConfig,
    /// `None` sizes sequences to the longest reaction in the dataset.
    pub max_len: Option<usize>,
    pub train: TrainConfig,
    pub search_lr: Vec<f64>,
    pub search_dropout: Vec<f64>,
    pub checkpoint: Option<PathBuf>,
    pub pair: Option<String>,
    pub top_n: Option<usize>,
    pub trials: usize,
    pub ks: Vec<f64>,
    pub scope: Scope,
    pub per_param: usize,
    pub noise: f64,
    pub corrupt_backward: bool,
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::InputFormat(format!("`{key}`: cannot parse {v:?}"))),
        }
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::InputFormat(format!("`{key}`: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::InputFormat(format!("`{key}`: cannot parse {s:?}")))
                })
                .collect(),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::InputFormat(format!("unknown key `{k}`")));
        }
        let r = Reader { map };
        let seed = r.opt::<u64>("seed")?.ok_or_else(|| {
            CliError::InputFormat("`seed` is required (no clock-based default)".into())
        })?;
        let schema: SchemaName = r
            .raw("schema")
            .unwrap_or("buchwald_hartwig")
            .parse()
            .map_err(|_| {
                CliError::UnknownEntity(format!("unknown schema {:?}", r.raw("schema")))
            })?;

        let defaults = ModelConfig::with_defaults(3, 1);
        let dropout = r.get("dropout", defaults.dropout_rate)?;
        let mlp_hidden = match r.raw("mlp_hidden") {
            None => defaults.mlp_hidden.clone(),
            Some(_) => r.list("mlp_hidden")?,
        };
        let model = ModelConfig {
            d_model: r.get("d_model", defaults.d_model)?,
            n_heads: r.get("n_heads", defaults.n_heads)?,
            n_layers: r.get("n_layers", defaults.n_layers)?,
            ff_dim: r.get("ff_dim", defaults.ff_dim)?,
            mlp_hidden,
            dropout_rate: dropout,
            ..defaults.clone()
        };
        let max_len = match r.raw("max_len") {
            Some("auto") => None,
            _ => Some(r.get("max_len", defaults.max_len)?),
        };
        let td = TrainConfig::default();
        let train = TrainConfig {
            lr: r.get("lr", td.lr)?,
            batch_size: r.get("batch_size", td.batch_size)?,
            epochs: r.get("epochs", td.epochs)?,
            seed,
            clip_norm: r.get("clip_norm", td.clip_norm)?,
            dropout_rate: dropout,
            max_steps: r.opt("max_steps")?,
            target_mse: None,
        };
        let scope = match r.raw("scope").unwrap_or("test") {
            "test" => Scope::Test,
            "all" => Scope::All,
            other => {
                return Err(CliError::InputFormat(format!(
                    "`scope` must be test or all, got {other:?}"
                )))
            }
        };
        let ks = match r.raw("ks") {
            None => yieldfuse::condopt::DEFAULT_KS.to_vec(),
            Some(_) => r.list("ks")?,
        };
        let files = |key: &str| -> Vec<PathBuf> {
            r.raw(key)
                .map(|v| v.split(',').map(|s| PathBuf::from(s.trim())).collect())
                .unwrap_or_default()
        };
        let cfg = RunConfig {
            dataset: r.path("dataset"),
            train_files: files("train_file"),
            test_files: files("test_file"),
            schema,
            descriptors: r.path("descriptors"),
            out: r.path("out").unwrap_or_else(|| PathBuf::from("out")),
            seed,
            ratio: r.get("ratio", 0.7)?,
            folds: r.get("folds", 10)?,
            group_role: r.raw("group_role").map(str::to_string),
            partitions: r.get("partitions", 4)?,
            model,
            max_len,
            train,
            search_lr: r.list("search_lr")?,
            search_dropout: r.list("search_dropout")?,
            checkpoint: r.path("checkpoint"),
            pair: r.raw("pair").map(str::to_string),
            top_n: r.opt("top_n")?,
            trials: r.get("trials", 1000)?,
            ks,
            scope,
            per_param: r.get("per_param", 6)?,
            noise: r.get("noise", yieldfuse::synth::DEFAULT_NOISE)?,
            corrupt_backward: r.get("corrupt_backward", false)?,
        };
        if cfg.train_files.len() != cfg.test_files.len() {
            return Err(CliError::InputFormat(format!(
                "{} train files but {} test files",
                cfg.train_files.len(),
                cfg.test_files.len()
            )));
        }
        Ok(cfg)
    }

    /// Every referenced input file must exist.
    pub fn check_files(&self) -> Result<(), CliError> {
        let mut paths: Vec<&Path> = Vec::new();
        paths.extend(self.dataset.as_deref());
        paths.extend(self.descriptors.as_deref());
        paths.extend(self.train_files.iter().map(PathBuf::as_path));
        paths.extend(self.test_files.iter().map(PathBuf::as_path));
        let missing: Vec<String> = paths
            .iter()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::MissingData(format!(
                "missing input files: {}",
                missing.join(", ")
            )))
        }
    }
}
