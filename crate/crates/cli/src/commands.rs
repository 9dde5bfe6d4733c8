use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use yieldfuse::condopt::{
    combo_of, pair_of, rank_conditions, run_benchmark, BenchmarkOptions, CondOptError,
    ConditionCombo, ReactantPair,
};
use yieldfuse::data::{
    hyperparam_subset, load_dataset, load_predefined_splits, out_of_sample_splits, random_folds,
    write_dataset, Dataset, DatasetSchema, ReactionRecord, SchemaName, Split,
};
use yieldfuse::descriptors::{load_descriptor_table, DescriptorTable};
use yieldfuse::eval::{MeanStd, Metrics, MetricsReport, R2_DECIMALS, RMSE_DECIMALS};
use yieldfuse::model::{
    check_model_gradients, grad_fixture, hyperparameter_search, Candidate, GRAD_CHECK_STEP,
    GRAD_CHECK_TOLERANCE,
};
use yieldfuse::pipeline::{fit_split, pipeline_paths, Featurizer, FitSettings, Pipeline};
use yieldfuse::seed;
use yieldfuse::smiles::{build_vocab, reaction_tokens};
use yieldfuse::synth::{synth_buchwald_hartwig, synth_suzuki_miyaura};

use crate::config::{RunConfig, Scope};
use crate::error::CliError;
use crate::output::Staging;

fn schema(cfg: &RunConfig) -> DatasetSchema {
    DatasetSchema::for_name(cfg.schema)
}

fn load_table(cfg: &RunConfig) -> Result<Option<DescriptorTable>, CliError> {
    cfg.descriptors
        .as_deref()
        .map(load_descriptor_table)
        .transpose()
        .map_err(CliError::from)
}

fn load_main(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| CliError::InputFormat("`dataset` is required".into()))?;
    Ok(load_dataset(path, &schema(cfg))?)
}

/// Descriptor-table keys the dataset needs but the table lacks, sorted.
fn missing_compounds(ds: &Dataset, table: &DescriptorTable) -> Vec<String> {
    let set: BTreeSet<&str> = ds
        .records
        .iter()
        .flat_map(|r| r.components.iter())
        .map(|c| c.smiles.as_str())
        .filter(|s| !s.is_empty() && !table.contains(s))
        .collect();
    set.into_iter().map(str::to_string).collect()
}

fn require_complete_table(ds: &Dataset, table: Option<&DescriptorTable>) -> Result<(), CliError> {
    if let Some(t) = table {
        let missing = missing_compounds(ds, t);
        if !missing.is_empty() {
            return Err(CliError::MissingData(format!(
                "{} compounds missing from the descriptor table: {}",
                missing.len(),
                missing.join(", ")
            )));
        }
    }
    Ok(())
}

pub fn validate(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.check_files()?;
    let mut datasets = Vec::new();
    if cfg.dataset.is_some() {
        datasets.push(("dataset".to_string(), load_main(cfg)?));
    }
    for (tr, te) in cfg.train_files.iter().zip(&cfg.test_files) {
        let p = load_predefined_splits(tr, te, &schema(cfg))?;
        datasets.push((format!("{} + {}", tr.display(), te.display()), p.dataset));
    }
    if datasets.is_empty() {
        return Err(CliError::InputFormat(
            "nothing to validate: set `dataset` or `train_file`/`test_file`".into(),
        ));
    }
    let table = load_table(cfg)?;
    let mut out = String::new();
    let mut missing_all = BTreeSet::new();
    for (label, ds) in &datasets {
        let tokens = ds
            .records
            .iter()
            .map(|r| reaction_tokens(&r.smiles_list()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::InputFormat(e.to_string()))?;
        let vocab = build_vocab(&tokens).map_err(|e| CliError::InputFormat(e.to_string()))?;
        let longest = tokens.iter().map(|t| t.len()).max().unwrap_or(0);
        out.push_str(&format!(
            "{label}: {} records ({} schema)\nclamped yields: {}\nvocabulary size: {}\nlongest reaction: {longest} tokens\n",
            ds.len(),
            ds.schema.name,
            ds.clamped_rows,
            vocab.len()
        ));
        if let Some(t) = &table {
            let missing = missing_compounds(ds, t);
            out.push_str(&format!(
                "descriptor table: {} compounds x {} columns, {} missing\n",
                t.len(),
                t.width(),
                missing.len()
            ));
            missing_all.extend(missing);
        }
    }
    if !missing_all.is_empty() {
        print!("{out}");
        let list: Vec<String> = missing_all.into_iter().collect();
        return Err(CliError::MissingData(format!(
            "{} compounds missing from the descriptor table: {}",
            list.len(),
            list.join(", ")
        )));
    }
    Ok(out)
}

fn settings(cfg: &RunConfig) -> FitSettings {
    FitSettings {
        model: cfg.model.clone(),
        train: cfg.train.clone(),
        max_len: cfg.max_len,
    }
}

fn fold_seed(cfg: &RunConfig, fold: usize) -> u64 {
    seed::derive(cfg.seed, "fold-train", fold as u64)
}

/// The evaluation splits: predefined files when given, else random folds.
fn protocol_splits(cfg: &RunConfig) -> Result<Vec<(Dataset, Split)>, CliError> {
    if !cfg.train_files.is_empty() {
        return cfg
            .train_files
            .iter()
            .zip(&cfg.test_files)
            .map(|(tr, te)| {
                let p = load_predefined_splits(tr, te, &schema(cfg))?;
                Ok((p.dataset, p.split))
            })
            .collect();
    }
    let ds = load_main(cfg)?;
    let folds = random_folds(cfg.folds, cfg.ratio, cfg.seed, ds.len())?;
    Ok(folds.into_iter().map(|f| (ds.clone(), f)).collect())
}

#[derive(Serialize)]
struct SearchReport {
    lr: Vec<f64>,
    dropout: Vec<f64>,
    holdout_rmse: Vec<f64>,
    chosen_lr: f64,
    chosen_dropout: f64,
}

/// Grid over learning rate and dropout, scored on the first split's
/// one-seventh holdout. Returns the updated settings.
fn search(
    cfg: &RunConfig,
    ds: &Dataset,
    split: &Split,
    table: Option<&DescriptorTable>,
    base: FitSettings,
) -> Result<(FitSettings, Option<SearchReport>), CliError> {
    if cfg.search_lr.is_empty() && cfg.search_dropout.is_empty() {
        return Ok((base, None));
    }
    let lrs = if cfg.search_lr.is_empty() {
        vec![base.train.lr]
    } else {
        cfg.search_lr.clone()
    };
    let drops = if cfg.search_dropout.is_empty() {
        vec![base.train.dropout_rate]
    } else {
        cfg.search_dropout.clone()
    };
    let (fit_idx, holdout_idx) = hyperparam_subset(&split.train, cfg.seed)?;
    let corpus: Vec<&ReactionRecord> = ds.records.iter().collect();
    let fit_records = ds.subset(&fit_idx);
    let f = Featurizer::fit(&corpus, &fit_records, table.cloned(), base.max_len)?;
    let fit_set = f.examples(&fit_records)?;
    let holdout = f.examples(&ds.subset(&holdout_idx))?;
    let mut grid = Vec::new();
    let mut labels = Vec::new();
    for &lr in &lrs {
        for &d in &drops {
            let mut c = Candidate {
                model: f.model_config(&base.model),
                train: base.train.clone(),
            };
            c.train.lr = lr;
            c.train.dropout_rate = d;
            c.model.dropout_rate = d;
            grid.push(c);
            labels.push((lr, d));
        }
    }
    let res = hyperparameter_search(&grid, &fit_set, &holdout)?;
    let (lr, d) = labels[res.best_index];
    let mut chosen = base;
    chosen.train.lr = lr;
    chosen.train.dropout_rate = d;
    chosen.model.dropout_rate = d;
    Ok((
        chosen,
        Some(SearchReport {
            lr: labels.iter().map(|l| l.0).collect(),
            dropout: labels.iter().map(|l| l.1).collect(),
            holdout_rmse: res.rmses,
            chosen_lr: lr,
            chosen_dropout: d,
        }),
    ))
}

fn report_text(report: &MetricsReport) -> String {
    let mut md = MetricsReport::markdown_table(std::slice::from_ref(report));
    md.push_str("\n| Fold | RMSE | R² |\n|---|---|---|\n");
    for (i, m) in report.folds.iter().enumerate() {
        md.push_str(&format!(
            "| {i} | {:.*} | {:.*} |\n",
            RMSE_DECIMALS, m.rmse, R2_DECIMALS, m.r2
        ));
    }
    md
}

pub fn train(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.check_files()?;
    let table = load_table(cfg)?;
    let splits = protocol_splits(cfg)?;
    for (ds, _) in &splits {
        require_complete_table(ds, table.as_ref())?;
    }
    let mut stage = Staging::new(&cfg.out)?;
    let (base, searched) = search(
        cfg,
        &splits[0].0,
        &splits[0].1,
        table.as_ref(),
        settings(cfg),
    )?;
    if let Some(s) = &searched {
        stage.write("search.json", &to_json(s))?;
    }
    let mut folds = Vec::new();
    for (i, (ds, split)) in splits.iter().enumerate() {
        let mut s = base.clone();
        s.train.seed = fold_seed(cfg, i);
        let run = fit_split(ds, table.as_ref(), split, &s)?;
        // writes fold-{i}.ckpt and fold-{i}.pipeline.json
        run.pipeline.save(&stage.path(&format!("fold-{i}")))?;
        folds.push(run.metrics);
    }
    let report = MetricsReport::new("multimodal", folds)?;
    stage.write("metrics.json", &report.to_json())?;
    let md = report_text(&report);
    stage.write("metrics.md", &md)?;
    stage.commit()?;
    Ok(md)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Re-scores saved per-fold pipelines on the same splits without retraining.
pub fn eval(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.check_files()?;
    let dir = cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.clone());
    let splits = protocol_splits(cfg)?;
    let mut folds = Vec::new();
    for (i, (ds, split)) in splits.iter().enumerate() {
        let p = load_pipeline(&dir.join(format!("fold-{i}")))?;
        let test = ds.subset(&split.test);
        let pred = p.predict_all(&test)?;
        let actual: Vec<f64> = test.iter().map(|r| r.yield_fraction).collect();
        folds.push(Metrics::compute(&pred, &actual)?);
    }
    let report = MetricsReport::new("multimodal", folds)?;
    let md = report_text(&report);
    let mut stage = Staging::new(&cfg.out)?;
    stage.write("eval_metrics.json", &report.to_json())?;
    stage.write("eval_metrics.md", &md)?;
    stage.commit()?;
    Ok(md)
}

fn load_pipeline(stem: &Path) -> Result<Pipeline, CliError> {
    let (ckpt, side) = pipeline_paths(stem);
    for p in [&ckpt, &side] {
        if !p.exists() {
            return Err(CliError::MissingData(format!(
                "{} does not exist",
                p.display()
            )));
        }
    }
    Ok(Pipeline::load(stem)?)
}

#[derive(Serialize)]
struct OosSplit {
    label: String,
    test_groups: Vec<String>,
    n_train: usize,
    n_test: usize,
    rmse: f64,
    r2: f64,
}

#[derive(Serialize)]
struct OosReport {
    group_role: Option<String>,
    splits: Vec<OosSplit>,
    average_rmse: MeanStd,
    average_r2: MeanStd,
}

fn default_group_role(name: SchemaName) -> &'static str {
    match name {
        SchemaName::BuchwaldHartwig => "additive",
        SchemaName::SuzukiMiyaura => "ligand",
    }
}

pub fn oos(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.check_files()?;
    let table = load_table(cfg)?;
    let mut jobs: Vec<(String, Vec<String>, Dataset, Split)> = Vec::new();
    let role = if cfg.train_files.is_empty() {
        let role = cfg
            .group_role
            .clone()
            .unwrap_or_else(|| default_group_role(cfg.schema).to_string());
        let ds = load_main(cfg)?;
        let splits = out_of_sample_splits(&ds.records, &role, cfg.partitions)?;
        for (i, sp) in splits.into_iter().enumerate() {
            let groups: BTreeSet<String> = sp
                .test
                .iter()
                .filter_map(|&j| ds.records[j].component(&role))
                .map(|c| c.display().to_string())
                .collect();
            jobs.push((
                format!("Test {}", i + 1),
                groups.into_iter().collect(),
                ds.clone(),
                sp,
            ));
        }
        Some(role)
    } else {
        for (i, (tr, te)) in cfg.train_files.iter().zip(&cfg.test_files).enumerate() {
            let p = load_predefined_splits(tr, te, &schema(cfg))?;
            jobs.push((
                format!("Test {}", i + 1),
                vec![file_name(te)],
                p.dataset,
                p.split,
            ));
        }
        None
    };
    for (_, _, ds, _) in &jobs {
        require_complete_table(ds, table.as_ref())?;
    }
    let mut rows = Vec::new();
    for (i, (label, groups, ds, split)) in jobs.into_iter().enumerate() {
        let mut s = settings(cfg);
        s.train.seed = fold_seed(cfg, i);
        let run = fit_split(&ds, table.as_ref(), &split, &s)?;
        rows.push(OosSplit {
            label,
            test_groups: groups,
            n_train: split.train.len(),
            n_test: split.test.len(),
            rmse: run.metrics.rmse,
            r2: run.metrics.r2,
        });
    }
    let metrics: Vec<Metrics> = rows
        .iter()
        .map(|r| Metrics {
            rmse: r.rmse,
            r2: r.r2,
        })
        .collect();
    let agg = yieldfuse::eval::aggregate(&metrics)?;
    let report = OosReport {
        group_role: role,
        splits: rows,
        average_rmse: agg.rmse,
        average_r2: agg.r2,
    };
    let mut md = String::from("| Split | Test groups | R² | RMSE |\n|---|---|---|---|\n");
    for r in &report.splits {
        md.push_str(&format!(
            "| {} | {} | {:.*} | {:.*} |\n",
            r.label,
            r.test_groups.join(", "),
            R2_DECIMALS,
            r.r2,
            RMSE_DECIMALS,
            r.rmse
        ));
    }
    md.push_str(&format!(
        "\nAverage R²: {}\nAverage RMSE: {}\n",
        agg.r2_text(),
        agg.rmse_text()
    ));
    let mut stage = Staging::new(&cfg.out)?;
    stage.write("oos.json", &to_json(&report))?;
    stage.write("oos.md", &md)?;
    stage.commit()?;
    Ok(md)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

/// Resolves `a|b` against the reactant roles; each part may be a SMILES or a name.
fn resolve_pair(
    schema: &DatasetSchema,
    records: &[ReactionRecord],
    pair_text: &str,
) -> Result<ReactantPair, CliError> {
    let parts: Vec<&str> = pair_text.split('|').map(str::trim).collect();
    if parts.len() != schema.reactant_roles.len() {
        return Err(CliError::InputFormat(format!(
            "pair needs {} parts separated by `|` ({})",
            schema.reactant_roles.len(),
            schema.reactant_roles.join(", ")
        )));
    }
    let wanted = |c: &yieldfuse::data::Component, part: &str| {
        c.smiles == part
            || c.name
                .as_deref()
                .is_some_and(|n| n.eq_ignore_ascii_case(part))
    };
    records
        .iter()
        .map(|r| pair_of(schema, r))
        .find(|p| {
            p.components
                .iter()
                .zip(&parts)
                .all(|(c, part)| wanted(c, part))
        })
        .ok_or_else(|| CondOptError::UnknownPair(pair_text.to_string()).into())
}

#[derive(Serialize)]
struct SuggestionRow {
    conditions: BTreeMap<String, String>,
    estimated_yield: f64,
    actual_yield: Option<f64>,
}

#[derive(Serialize)]
struct SuggestReport {
    pair: String,
    candidates: usize,
    suggestions: Vec<SuggestionRow>,
}

fn cell(y: Option<f64>) -> String {
    y.map_or("-".into(), |v| {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    })
}

/// Ranks every condition combination seen in the dataset for one reactant pair.
pub fn suggest(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.check_files()?;
    let stem = cfg
        .checkpoint
        .clone()
        .ok_or_else(|| CliError::InputFormat("`checkpoint` is required".into()))?;
    let pair_text = cfg
        .pair
        .clone()
        .ok_or_else(|| CliError::InputFormat("`pair` is required".into()))?;
    let ds = load_main(cfg)?;
    let schema = schema(cfg);
    let pair = resolve_pair(&schema, &ds.records, &pair_text)?;
    let pipeline = load_pipeline(&stem)?;

    let mut actual: BTreeMap<ConditionCombo, f64> = BTreeMap::new();
    let mut space: BTreeSet<ConditionCombo> = BTreeSet::new();
    for r in &ds.records {
        let c = combo_of(&schema, r);
        if pair_of(&schema, r) == pair && actual.insert(c.clone(), r.yield_fraction).is_some() {
            return Err(CondOptError::DuplicateCondition {
                pair: pair.display(),
                combo: c.display(),
            }
            .into());
        }
        space.insert(c);
    }
    let candidates: Vec<(ConditionCombo, Option<f64>)> = space
        .into_iter()
        .map(|c| {
            let a = actual.get(&c).copied();
            (c, a)
        })
        .collect();
    let ranked = rank_conditions(&pipeline, &schema, &pair, &candidates)?;
    let top_n = cfg.top_n.unwrap_or(5).max(1);
    let rows: Vec<SuggestionRow> = ranked
        .iter()
        .take(top_n)
        .map(|s| SuggestionRow {
            conditions: s
                .combo
                .components
                .iter()
                .map(|c| (c.role.clone(), c.display().to_string()))
                .collect(),
            estimated_yield: s.estimated_yield,
            actual_yield: s.actual_yield,
        })
        .collect();

    let header: Vec<String> = schema.condition_roles.iter().map(|r| title(r)).collect();
    let mut md = format!(
        "Suggested conditions for {}\n\n| {} | Estimated Yield | Actual Yield |\n{}|---|---|\n",
        pair.display(),
        header.join(" | "),
        "|---".repeat(header.len())
    );
    for s in ranked.iter().take(top_n) {
        let cells: Vec<&str> = s.combo.components.iter().map(|c| c.display()).collect();
        md.push_str(&format!(
            "| {} | {} | {} |\n",
            cells.join(" | "),
            cell(Some(s.estimated_yield)),
            cell(s.actual_yield)
        ));
    }
    let report = SuggestReport {
        pair: pair.display(),
        candidates: ranked.len(),
        suggestions: rows,
    };
    let mut stage = Staging::new(&cfg.out)?;
    stage.write("suggestions.json", &to_json(&report))?;
    stage.write("suggestions.md", &md)?;
    stage.commit()?;
    Ok(md)
}

fn title(role: &str) -> String {
    let mut c = role.chars();
    match c.next() {
        Some(f) => f
            .to_uppercase()
            .chain(c)
            .collect::<String>()
            .replace('_', " "),
        None => String::new(),
    }
}

/// Condition-ranking benchmark. With `scope = test` the model is trained
/// (or loaded) for the first random split and scored on its test rows.
pub fn benchmark_conditions(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.check_files()?;
    let ds = load_main(cfg)?;
    let table = load_table(cfg)?;
    require_complete_table(&ds, table.as_ref())?;
    let split = random_folds(1, cfg.ratio, cfg.seed, ds.len())?.remove(0);
    let pipeline = match &cfg.checkpoint {
        Some(stem) => load_pipeline(stem)?,
        None => {
            let mut s = settings(cfg);
            s.train.seed = fold_seed(cfg, 0);
            fit_split(&ds, table.as_ref(), &split, &s)?.pipeline
        }
    };
    let (records, scope): (Vec<&ReactionRecord>, &str) = match cfg.scope {
        Scope::Test => (ds.subset(&split.test), "test split (first random fold)"),
        Scope::All => (
            ds.records.iter().collect(),
            "all records (exploratory; includes training rows)",
        ),
    };
    let opts = BenchmarkOptions {
        ks: cfg.ks.clone(),
        top_n: cfg.top_n.unwrap_or(1),
        trials: cfg.trials,
        seed: cfg.seed,
        scope: scope.to_string(),
    };
    let schema = schema(cfg);
    let report = run_benchmark(&pipeline, &schema, &records, &opts)?;
    let md = report.to_markdown(&schema, 0, 5);
    let mut stage = Staging::new(&cfg.out)?;
    stage.write("conditions.json", &report.to_json())?;
    stage.write("conditions.md", &md)?;
    stage.commit()?;
    Ok(md)
}

#[derive(Serialize)]
struct GradReport {
    seed: u64,
    step: f64,
    tolerance: f64,
    coordinates: usize,
    max_rel_err: f64,
    worst: Option<String>,
}

pub fn gradcheck(cfg: &RunConfig) -> Result<String, CliError> {
    let fx = grad_fixture(cfg.seed)?;
    let rep = check_model_gradients(&fx, cfg.per_param, cfg.corrupt_backward)?;
    let worst = rep.worst().map(|w| format!("{}[{}]", w.param, w.index));
    let text = format!(
        "fixture seed {}: max relative error {:.3e} over {} coordinates (h = {:e}, tolerance {:e}); worst {}\n",
        fx.seed,
        rep.max_rel_err,
        rep.coords.len(),
        GRAD_CHECK_STEP,
        GRAD_CHECK_TOLERANCE,
        worst.as_deref().unwrap_or("-")
    );
    if rep.max_rel_err >= GRAD_CHECK_TOLERANCE || !rep.max_rel_err.is_finite() {
        print!("{text}");
        return Err(CliError::Failed(format!(
            "gradient check failed at {}",
            worst.unwrap_or_default()
        )));
    }
    let report = GradReport {
        seed: fx.seed,
        step: GRAD_CHECK_STEP,
        tolerance: GRAD_CHECK_TOLERANCE,
        coordinates: rep.coords.len(),
        max_rel_err: rep.max_rel_err,
        worst,
    };
    let mut stage = Staging::new(&cfg.out)?;
    stage.write("gradcheck.json", &to_json(&report))?;
    stage.commit()?;
    Ok(text)
}

/// Writes the synthetic stand-in datasets, descriptor table and planted yields.
pub fn synth(cfg: &RunConfig) -> Result<String, CliError> {
    let mut stage = Staging::new(&cfg.out)?;
    let bh = synth_buchwald_hartwig(cfg.seed, cfg.noise);
    write_dataset(
        &stage.path("buchwald_hartwig.csv"),
        &bh.dataset.schema,
        &bh.dataset.records,
    )?;
    if let Some(t) = &bh.descriptors {
        t.write_csv(&stage.path("bh_descriptors.csv"))?;
    }
    let sm = synth_suzuki_miyaura(cfg.seed, cfg.noise);
    write_dataset(
        &stage.path("suzuki_miyaura.csv"),
        &sm.dataset.schema,
        &sm.dataset.records,
    )?;
    let planted = |ys: &[f64]| {
        let mut s = String::from("row,planted_yield\n");
        for (i, y) in ys.iter().enumerate() {
            s.push_str(&format!("{i},{}\n", 100.0 * y));
        }
        s
    };
    stage.write("buchwald_hartwig_planted.csv", &planted(&bh.planted))?;
    stage.write("suzuki_miyaura_planted.csv", &planted(&sm.planted))?;
    let files = stage.commit()?;
    Ok(format!(
        "{} Buchwald–Hartwig and {} Suzuki–Miyaura records\n{}\n",
        bh.dataset.len(),
        sm.dataset.len(),
        files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join("\n")
    ))
}
