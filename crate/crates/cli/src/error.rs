use std::io;
use std::process::ExitCode;

use yieldfuse::condopt::CondOptError;
use yieldfuse::data::DataError;
use yieldfuse::descriptors::DescriptorError;
use yieldfuse::eval::EvalError;
use yieldfuse::model::ModelError;
use yieldfuse::pipeline::PipelineError;

/// Failure classes, one per exit code.
#[derive(Debug, PartialEq, Eq)]
pub enum CliError {
    /// Exit 1.
    Failed(String),
    /// Exit 2: malformed config, CSV, SMILES or checkpoint.
    InputFormat(String),
    /// Exit 3: files or descriptor rows that are not there.
    MissingData(String),
    /// Exit 4: a named pair, role or schema that does not exist.
    UnknownEntity(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::InputFormat(_) => 2,
            CliError::MissingData(_) => 3,
            CliError::UnknownEntity(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Failed(m)
            | CliError::InputFormat(m)
            | CliError::MissingData(m)
            | CliError::UnknownEntity(m) => m,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

fn io_class(e: &io::Error, msg: String) -> CliError {
    if e.kind() == io::ErrorKind::NotFound {
        CliError::MissingData(msg)
    } else {
        CliError::Failed(msg)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        let msg = e.to_string();
        io_class(&e, msg)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let msg = e.to_string();
        match &e {
            DataError::Io { source, .. } => io_class(source, msg),
            DataError::MalformedCsv(_)
            | DataError::MissingColumn(_)
            | DataError::UnparseableYield { .. }
            | DataError::EmptyReactant { .. }
            | DataError::InvalidSmiles { .. }
            | DataError::InvalidRatio(_)
            | DataError::InvalidFoldCount
            | DataError::TooSmall { .. }
            | DataError::TooFewGroups { .. }
            | DataError::TooFewPartitions(_)
            | DataError::EmptySplit(_) => CliError::InputFormat(msg),
            DataError::UnknownSchema(_) | DataError::UnknownRole(_) => CliError::UnknownEntity(msg),
        }
    }
}

impl From<DescriptorError> for CliError {
    fn from(e: DescriptorError) -> Self {
        let msg = e.to_string();
        match &e {
            DescriptorError::Io { source, .. } => io_class(source, msg),
            DescriptorError::MissingCompound(_) => CliError::MissingData(msg),
            DescriptorError::EmptyInput => CliError::Failed(msg),
            _ => CliError::InputFormat(msg),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let msg = e.to_string();
        match &e {
            ModelError::Io(source) => io_class(source, msg),
            ModelError::BadMagic(_)
            | ModelError::VersionMismatch(_)
            | ModelError::ShapeMismatch(_)
            | ModelError::InvalidConfig(_) => CliError::InputFormat(msg),
            _ => CliError::Failed(msg),
        }
    }
}

impl From<CondOptError> for CliError {
    fn from(e: CondOptError) -> Self {
        let msg = e.to_string();
        match &e {
            CondOptError::UnknownPair(_) => CliError::UnknownEntity(msg),
            CondOptError::DuplicateCondition { .. }
            | CondOptError::BadK(_)
            | CondOptError::BadTopN
            | CondOptError::BadTrials => CliError::InputFormat(msg),
            _ => CliError::Failed(msg),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Data(e) => e.into(),
            PipelineError::Descriptor(e) => e.into(),
            PipelineError::Model(e) => e.into(),
            PipelineError::Eval(e) => e.into(),
            PipelineError::Smiles(e) => CliError::InputFormat(e.to_string()),
            e @ (PipelineError::Sidecar { .. } | PipelineError::RoleMismatch { .. }) => {
                CliError::InputFormat(e.to_string())
            }
        }
    }
}
