//! HTE dataset schemas, CSV ingestion and split construction.

mod load;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smiles::SmilesError;

pub use load::{load_dataset, load_predefined_splits, write_dataset, PredefinedSplit};
pub use split::{
    hyperparam_subset, out_of_sample_splits, random_folds, Split, SplitKind, SplitSpec,
    HYPERPARAM_HOLDOUT_DENOM,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse yield {value:?}")]
    UnparseableYield { row: usize, value: String },
    #[error("row {row}: reactant role `{role}` is empty")]
    EmptyReactant { row: usize, role: String },
    #[error("row {row}, role `{role}`: invalid SMILES {smiles}: {source}")]
    InvalidSmiles {
        row: usize,
        role: String,
        smiles: String,
        source: SmilesError,
    },
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
    #[error("role `{0}` is not part of the schema")]
    UnknownRole(String),
    #[error("ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("fold count must be at least 1")]
    InvalidFoldCount,
    #[error("need at least {needed} rows, found {found}")]
    TooSmall { needed: usize, found: usize },
    #[error("{groups} distinct groups cannot fill {partitions} partitions")]
    TooFewGroups { groups: usize, partitions: usize },
    #[error("at least 2 partitions are required, got {0}")]
    TooFewPartitions(usize),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaName {
    BuchwaldHartwig,
    SuzukiMiyaura,
}

impl fmt::Display for SchemaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaName::BuchwaldHartwig => "buchwald_hartwig",
            SchemaName::SuzukiMiyaura => "suzuki_miyaura",
        })
    }
}

impl FromStr for SchemaName {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buchwald_hartwig" | "bh" => Ok(SchemaName::BuchwaldHartwig),
            "suzuki_miyaura" | "sm" => Ok(SchemaName::SuzukiMiyaura),
            other => Err(DataError::UnknownSchema(other.to_string())),
        }
    }
}

/// Column layout of one HTE dataset. Role order is the order used for the
/// reaction string and for descriptor concatenation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSchema {
    pub name: SchemaName,
    pub roles: &'static [&'static str],
    pub condition_roles: &'static [&'static str],
    pub reactant_roles: &'static [&'static str],
}

impl DatasetSchema {
    pub fn buchwald_hartwig() -> Self {
        DatasetSchema {
            name: SchemaName::BuchwaldHartwig,
            roles: &["aryl_halide", "ligand", "base", "additive"],
            condition_roles: &["ligand", "base", "additive"],
            reactant_roles: &["aryl_halide"],
        }
    }

    pub fn suzuki_miyaura() -> Self {
        DatasetSchema {
            name: SchemaName::SuzukiMiyaura,
            roles: &[
                "electrophile",
                "nucleophile",
                "ligand",
                "reagent",
                "solvent",
            ],
            condition_roles: &["ligand", "reagent", "solvent"],
            reactant_roles: &["electrophile", "nucleophile"],
        }
    }

    pub fn for_name(name: SchemaName) -> Self {
        match name {
            SchemaName::BuchwaldHartwig => Self::buchwald_hartwig(),
            SchemaName::SuzukiMiyaura => Self::suzuki_miyaura(),
        }
    }

    pub fn role_index(&self, role: &str) -> Result<usize, DataError> {
        self.roles
            .iter()
            .position(|r| *r == role)
            .ok_or_else(|| DataError::UnknownRole(role.to_string()))
    }

    pub fn is_condition(&self, role: &str) -> bool {
        self.condition_roles.contains(&role)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Component {
    pub role: String,
    /// Empty for an absent condition (e.g. no additive).
    pub smiles: String,
    pub name: Option<String>,
}

impl Component {
    pub fn display(&self) -> &str {
        match &self.name {
            Some(n) if !n.is_empty() => n,
            _ if self.smiles.is_empty() => "none",
            _ => &self.smiles,
        }
    }
}

/// One HTE data point: components in schema order plus the measured yield.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub components: Vec<Component>,
    /// Yield as a fraction, clamped to [0, 1].
    pub yield_fraction: f64,
    /// Yield as read from the file (0-100 scale).
    pub raw_yield: f64,
}

impl ReactionRecord {
    pub fn component(&self, role: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.role == role)
    }

    pub fn smiles_list(&self) -> Vec<&str> {
        self.components.iter().map(|c| c.smiles.as_str()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub records: Vec<ReactionRecord>,
    /// Rows whose raw yield fell outside 0-100 and was clamped.
    pub clamped_rows: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&ReactionRecord> {
        indices.iter().map(|&i| &self.records[i]).collect()
    }
}
