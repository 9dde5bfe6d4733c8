//! `yieldfuse` command-line runner.

mod commands;
mod config;
mod error;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_config_file, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "yieldfuse",
    version,
    about = "Reaction yield prediction runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the dataset and descriptor table and report what was found.
    Validate(Opts),
    /// Train on every random fold (or predefined split); write per-fold checkpoints and metrics.
    Train(Opts),
    /// Re-score saved per-fold checkpoints on the same splits.
    Eval(Opts),
    /// Out-of-sample evaluation on group-disjoint splits.
    Oos(Opts),
    /// Rank condition combinations for one reactant pair with a saved model.
    Suggest(Opts),
    /// Finite-difference check of the full model gradient on a tiny fixture.
    Gradcheck(Opts),
    /// Condition-optimization benchmark (fraction of optimal, top-k accuracy).
    BenchmarkConditions(Opts),
    /// Write the synthetic stand-in datasets.
    Synth(Opts),
}

macro_rules! overrides {
    ($($(#[$m:meta])* $field:ident),* $(,)?) => {
        /// Flag overrides; each mirrors the config key of the same name.
        #[derive(Args, Default)]
        struct Overrides {
            $($(#[$m])* #[arg(long)] $field: Option<String>,)*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(if let Some(x) = &self.$field { v.push((stringify!($field), x.as_str())); })*
                v
            }
        }
    };
}

overrides! {
    /// HTE CSV with `<role>_smiles` columns and `yield`
    dataset,
    /// Comma-separated train files of predefined splits
    train_file,
    /// Comma-separated test files, paired with `train-file`
    test_file,
    /// buchwald_hartwig (bh) or suzuki_miyaura (sm)
    schema,
    /// Per-compound descriptor CSV (first column SMILES)
    descriptors,
    /// Output directory
    out,
    /// Seed for splits, initialization, shuffling and dropout (required)
    seed,
    ratio,
    folds,
    /// Role whose values define out-of-sample groups
    group_role,
    partitions,
    d_model,
    n_heads,
    n_layers,
    ff_dim,
    /// Sequence length, or `auto` for the longest reaction
    max_len,
    /// Comma-separated hidden widths of the descriptor MLP
    mlp_hidden,
    dropout,
    lr,
    batch_size,
    epochs,
    clip_norm,
    max_steps,
    /// Comma-separated learning rates to search on the first split
    search_lr,
    /// Comma-separated dropout rates to search on the first split
    search_dropout,
    /// Saved pipeline stem (suggest, benchmark) or directory (eval)
    checkpoint,
    /// Reactant pair as `a|b` (SMILES or names, reactant-role order)
    pair,
    top_n,
    trials,
    /// Comma-separated top-k percentages
    ks,
    /// `test` (default) or `all`
    scope,
    per_param,
    /// Label noise std for `synth`
    noise,
    #[arg(hide = true)]
    corrupt_backward,
}

#[derive(Args)]
struct Opts {
    /// key = value config file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    set: Overrides,
}

impl Opts {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut map: BTreeMap<String, String> = match &self.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        for (k, v) in self.set.pairs() {
            map.insert(k.to_string(), v.to_string());
        }
        RunConfig::from_map(&map)
    }
}

type Handler = fn(&RunConfig) -> Result<String, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (opts, f): (&Opts, Handler) = match &cli.command {
        Command::Validate(o) => (o, commands::validate),
        Command::Train(o) => (o, commands::train),
        Command::Eval(o) => (o, commands::eval),
        Command::Oos(o) => (o, commands::oos),
        Command::Suggest(o) => (o, commands::suggest),
        Command::Gradcheck(o) => (o, commands::gradcheck),
        Command::BenchmarkConditions(o) => (o, commands::benchmark_conditions),
        Command::Synth(o) => (o, commands::synth),
    };
    match opts.resolve().and_then(|cfg| f(&cfg)) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
