//! Condition-optimization benchmark.
//!
//! For every reactant pair, all observed condition combinations are ranked
//! by predicted yield. The report compares the actual yield of the top
//! suggestion with the best reported yield, against a random-choice
//! baseline, and measures how often the best reported combination lands in
//! the top k percent of the ranking.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Component, DatasetSchema, ReactionRecord};
use crate::seed;

#[derive(Debug, Error)]
pub enum CondOptError {
    #[error("reactant pair {0} does not occur in the dataset")]
    UnknownPair(String),
    #[error("condition combination {combo} appears more than once for pair {pair}")]
    DuplicateCondition { pair: String, combo: String },
    #[error("nothing to evaluate")]
    Empty,
    #[error("mean best reported yield is zero")]
    ZeroOptimal,
    #[error("k = {0} is outside (0, 100]")]
    BadK(f64),
    #[error("top-n must be at least 1")]
    BadTopN,
    #[error("trials must be at least 1")]
    BadTrials,
    #[error("{0} and {1} per-pair lists differ in length")]
    LengthMismatch(usize, usize),
    #[error("prediction failed: {0}")]
    Prediction(String),
}

/// Assignment of every condition role, in schema order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConditionCombo {
    pub components: Vec<Component>,
}

/// Assignment of every reactant role, in schema order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReactantPair {
    pub components: Vec<Component>,
}

fn join_display(cs: &[Component]) -> String {
    cs.iter()
        .map(Component::display)
        .collect::<Vec<_>>()
        .join(" + ")
}

impl ConditionCombo {
    pub fn display(&self) -> String {
        join_display(&self.components)
    }
}

impl ReactantPair {
    pub fn display(&self) -> String {
        join_display(&self.components)
    }
}

fn project(record: &ReactionRecord, roles: &[&str]) -> Vec<Component> {
    record
        .components
        .iter()
        .filter(|c| roles.contains(&c.role.as_str()))
        .cloned()
        .collect()
}

pub fn pair_of(schema: &DatasetSchema, record: &ReactionRecord) -> ReactantPair {
    ReactantPair {
        components: project(record, schema.reactant_roles),
    }
}

pub fn combo_of(schema: &DatasetSchema, record: &ReactionRecord) -> ConditionCombo {
    ConditionCombo {
        components: project(record, schema.condition_roles),
    }
}

/// Rebuilds a full record (schema role order) from a pair and a combo.
pub fn assemble_record(
    schema: &DatasetSchema,
    pair: &ReactantPair,
    combo: &ConditionCombo,
    yield_fraction: f64,
) -> ReactionRecord {
    let components = schema
        .roles
        .iter()
        .filter_map(|role| {
            pair.components
                .iter()
                .chain(&combo.components)
                .find(|c| c.role == *role)
                .cloned()
        })
        .collect();
    ReactionRecord {
        components,
        yield_fraction,
        raw_yield: 100.0 * yield_fraction,
    }
}

/// Distinct reactant pairs in sorted order.
pub fn reactant_pairs(schema: &DatasetSchema, records: &[&ReactionRecord]) -> Vec<ReactantPair> {
    let mut pairs: Vec<ReactantPair> = records.iter().map(|r| pair_of(schema, r)).collect();
    pairs.sort();
    pairs.dedup();
    pairs
}

/// Every row matching `pair`, projected onto the condition roles and sorted by combo.
pub fn enumerate_conditions(
    schema: &DatasetSchema,
    records: &[&ReactionRecord],
    pair: &ReactantPair,
) -> Result<Vec<(ConditionCombo, f64)>, CondOptError> {
    let mut out: BTreeMap<ConditionCombo, f64> = BTreeMap::new();
    for r in records {
        if pair_of(schema, r) != *pair {
            continue;
        }
        let combo = combo_of(schema, r);
        if out.contains_key(&combo) {
            return Err(CondOptError::DuplicateCondition {
                pair: pair.display(),
                combo: combo.display(),
            });
        }
        out.insert(combo, r.yield_fraction);
    }
    if out.is_empty() {
        return Err(CondOptError::UnknownPair(pair.display()));
    }
    Ok(out.into_iter().collect())
}

/// Anything that maps a full reaction to a raw yield-fraction estimate.
pub trait YieldPredictor {
    fn predict_yield(&self, record: &ReactionRecord) -> Result<f64, CondOptError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub combo: ConditionCombo,
    /// Clamped to [0, 1].
    pub estimated_yield: f64,
    pub actual_yield: Option<f64>,
}

/// Ranks `combos` by clamped predicted yield, highest first. The sort is
/// stable over the sorted combo list, so equal estimates keep combo order.
pub fn rank_conditions<P: YieldPredictor + ?Sized>(
    predictor: &P,
    schema: &DatasetSchema,
    pair: &ReactantPair,
    combos: &[(ConditionCombo, Option<f64>)],
) -> Result<Vec<Suggestion>, CondOptError> {
    let mut sorted: Vec<&(ConditionCombo, Option<f64>)> = combos.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CondOptError::DuplicateCondition {
            pair: pair.display(),
            combo: w[0].0.display(),
        });
    }
    let mut out = Vec::with_capacity(sorted.len());
    for (combo, actual) in sorted {
        let record = assemble_record(schema, pair, combo, actual.unwrap_or(0.0));
        let raw = predictor.predict_yield(&record)?;
        out.push(Suggestion {
            combo: combo.clone(),
            estimated_yield: raw.clamp(0.0, 1.0),
            actual_yield: *actual,
        });
    }
    out.sort_by(|a, b| b.estimated_yield.total_cmp(&a.estimated_yield));
    Ok(out)
}

/// `mean(suggested) / mean(best)` over reactant pairs.
pub fn fraction_of_optimal(best: &[f64], suggested: &[f64]) -> Result<f64, CondOptError> {
    if best.len() != suggested.len() {
        return Err(CondOptError::LengthMismatch(best.len(), suggested.len()));
    }
    if best.is_empty() {
        return Err(CondOptError::Empty);
    }
    let mean_best = best.iter().sum::<f64>() / best.len() as f64;
    if mean_best == 0.0 {
        return Err(CondOptError::ZeroOptimal);
    }
    let mean_suggested = suggested.iter().sum::<f64>() / suggested.len() as f64;
    Ok(mean_suggested / mean_best)
}

/// Mean actual yield when one condition per pair is drawn uniformly at
/// random, averaged over `trials` seeded repetitions.
pub fn random_baseline(
    per_pair_yields: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<f64, CondOptError> {
    if trials == 0 {
        return Err(CondOptError::BadTrials);
    }
    if per_pair_yields.is_empty() || per_pair_yields.iter().any(Vec::is_empty) {
        return Err(CondOptError::Empty);
    }
    let mut total = 0.0;
    for t in 0..trials {
        let mut rng = seed::rng(seed, "random-baseline", t as u64);
        let trial_sum: f64 = per_pair_yields
            .iter()
            .map(|ys| ys[rng.random_range(0..ys.len())])
            .sum();
        total += trial_sum / per_pair_yields.len() as f64;
    }
    Ok(total / trials as f64)
}

/// Closed-form expectation of [`random_baseline`]: the mean over pairs of each pair's mean yield.
pub fn random_baseline_expectation(per_pair_yields: &[Vec<f64>]) -> Result<f64, CondOptError> {
    if per_pair_yields.is_empty() || per_pair_yields.iter().any(Vec::is_empty) {
        return Err(CondOptError::Empty);
    }
    Ok(per_pair_yields
        .iter()
        .map(|ys| ys.iter().sum::<f64>() / ys.len() as f64)
        .sum::<f64>()
        / per_pair_yields.len() as f64)
}

/// Number of ranked slots covered by the top `k` percent of `n` combos.
pub fn topk_cutoff(k: f64, n: usize) -> usize {
    let slots = (k * n as f64 / 100.0 - 1e-9).ceil() as usize;
    slots.clamp(1, n.max(1))
}

/// Best reported combination: highest actual yield, earliest combo on ties.
pub fn best_reported(combos: &[(ConditionCombo, f64)]) -> Option<&(ConditionCombo, f64)> {
    let mut sorted: Vec<&(ConditionCombo, f64)> = combos.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    sorted
        .into_iter()
        .fold(None, |best: Option<&(ConditionCombo, f64)>, c| match best {
            Some(b) if c.1 <= b.1 => Some(b),
            _ => Some(c),
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: f64,
    pub accuracy: f64,
}

/// Percentage of pairs whose best combo lies within the top ⌈k%·n⌉ suggestions.
pub fn topk_accuracy(
    ranked: &[Vec<Suggestion>],
    best: &[ConditionCombo],
    ks: &[f64],
) -> Result<Vec<TopK>, CondOptError> {
    if ranked.len() != best.len() {
        return Err(CondOptError::LengthMismatch(ranked.len(), best.len()));
    }
    if ranked.is_empty() || ks.is_empty() {
        return Err(CondOptError::Empty);
    }
    if let Some(&k) = ks.iter().find(|k| !(**k > 0.0 && **k <= 100.0)) {
        return Err(CondOptError::BadK(k));
    }
    let positions: Vec<Option<usize>> = ranked
        .iter()
        .zip(best)
        .map(|(list, b)| list.iter().position(|s| s.combo == *b))
        .collect();
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = ranked
                .iter()
                .zip(&positions)
                .filter(|(list, pos)| pos.is_some_and(|p| p < topk_cutoff(k, list.len())))
                .count();
            TopK {
                k,
                accuracy: 100.0 * hits as f64 / ranked.len() as f64,
            }
        })
        .collect())
}

pub const DEFAULT_KS: [f64; 5] = [5.0, 10.0, 15.0, 20.0, 30.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub ks: Vec<f64>,
    /// Number of top suggestions whose actual yields are averaged per pair.
    pub top_n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Label stating which records were benchmarked (e.g. a test split).
    pub scope: String,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            ks: DEFAULT_KS.to_vec(),
            top_n: 1,
            trials: 1000,
            seed: 0,
            scope: "test split".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub pair: ReactantPair,
    pub n_combos: usize,
    pub best_combo: ConditionCombo,
    pub best_yield: f64,
    /// Mean actual yield of the top-n suggestions.
    pub suggested_yield: f64,
    /// Rank (0-based) of the best combo in the model's ordering.
    pub best_rank: usize,
    pub ranking: Vec<Suggestion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub scope: String,
    pub top_n: usize,
    pub pairs: Vec<PairResult>,
    pub mean_best: f64,
    pub mean_suggested: f64,
    pub fraction_of_optimal: f64,
    pub random_baseline: f64,
    pub random_trials: usize,
    pub topk: Vec<TopK>,
}

pub fn run_benchmark<P: YieldPredictor + ?Sized>(
    predictor: &P,
    schema: &DatasetSchema,
    records: &[&ReactionRecord],
    opts: &BenchmarkOptions,
) -> Result<OptimizationReport, CondOptError> {
    if opts.top_n == 0 {
        return Err(CondOptError::BadTopN);
    }
    let pairs = reactant_pairs(schema, records);
    if pairs.is_empty() {
        return Err(CondOptError::Empty);
    }
    let mut by_pair: HashMap<ReactantPair, Vec<&ReactionRecord>> = HashMap::new();
    for r in records {
        by_pair.entry(pair_of(schema, r)).or_default().push(r);
    }
    let mut results = Vec::with_capacity(pairs.len());
    let mut yields = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let combos = enumerate_conditions(schema, &by_pair[&pair], &pair)?;
        let (best_combo, best_yield) = best_reported(&combos).expect("non-empty").clone();
        let with_actual: Vec<(ConditionCombo, Option<f64>)> =
            combos.iter().map(|(c, y)| (c.clone(), Some(*y))).collect();
        let ranking = rank_conditions(predictor, schema, &pair, &with_actual)?;
        let top: Vec<f64> = ranking
            .iter()
            .take(opts.top_n)
            .map(|s| s.actual_yield.expect("enumerated combos carry yields"))
            .collect();
        let best_rank = ranking
            .iter()
            .position(|s| s.combo == best_combo)
            .expect("best combo is ranked");
        yields.push(combos.iter().map(|(_, y)| *y).collect::<Vec<_>>());
        results.push(PairResult {
            pair,
            n_combos: combos.len(),
            best_combo,
            best_yield,
            suggested_yield: top.iter().sum::<f64>() / top.len() as f64,
            best_rank,
            ranking,
        });
    }
    let best: Vec<f64> = results.iter().map(|r| r.best_yield).collect();
    let suggested: Vec<f64> = results.iter().map(|r| r.suggested_yield).collect();
    let rankings: Vec<Vec<Suggestion>> = results.iter().map(|r| r.ranking.clone()).collect();
    let best_combos: Vec<ConditionCombo> = results.iter().map(|r| r.best_combo.clone()).collect();
    Ok(OptimizationReport {
        scope: opts.scope.clone(),
        top_n: opts.top_n,
        mean_best: best.iter().sum::<f64>() / best.len() as f64,
        mean_suggested: suggested.iter().sum::<f64>() / suggested.len() as f64,
        fraction_of_optimal: fraction_of_optimal(&best, &suggested)?,
        random_baseline: random_baseline(&yields, opts.trials, opts.seed)?,
        random_trials: opts.trials,
        topk: topk_accuracy(&rankings, &best_combos, &opts.ks)?,
        pairs: results,
    })
}

fn role_header(schema: &DatasetSchema) -> String {
    schema
        .condition_roles
        .iter()
        .map(|r| {
            let mut c = r.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn combo_cells(combo: &ConditionCombo) -> String {
    combo
        .components
        .iter()
        .map(Component::display)
        .collect::<Vec<_>>()
        .join(" | ")
}

fn fmt_yield(y: f64) -> String {
    let s = format!("{y:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

impl OptimizationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Summary lines plus, for pair `pair_index`, the model's top suggestions
    /// next to the best reported conditions, and the top-k accuracy table.
    pub fn to_markdown(&self, schema: &DatasetSchema, pair_index: usize, rows: usize) -> String {
        let mut out = format!(
            "Scope: {}\n\nMean best reported yield: {:.3}\nMean suggested yield (top-{}): {:.3}\nFraction of optimal: {:.3}\nRandom baseline ({} trials): {:.3}\n\n",
            self.scope,
            self.mean_best,
            self.top_n,
            self.mean_suggested,
            self.fraction_of_optimal,
            self.random_trials,
            self.random_baseline
        );
        if let Some(p) = self.pairs.get(pair_index) {
            let header = role_header(schema);
            let sep = "|---".repeat(schema.condition_roles.len());
            out.push_str(&format!(
                "Suggested conditions for {}\n\n",
                p.pair.display()
            ));
            out.push_str(&format!(
                "| {header} | Estimated Yield | Actual Yield |\n{sep}|---|---|\n"
            ));
            for s in p.ranking.iter().take(rows) {
                out.push_str(&format!(
                    "| {} | {} | {} |\n",
                    combo_cells(&s.combo),
                    fmt_yield(s.estimated_yield),
                    s.actual_yield.map_or("-".into(), fmt_yield)
                ));
            }
            let mut reported: Vec<&Suggestion> = p.ranking.iter().collect();
            reported.sort_by(|a, b| {
                b.actual_yield
                    .unwrap_or(f64::NEG_INFINITY)
                    .total_cmp(&a.actual_yield.unwrap_or(f64::NEG_INFINITY))
                    .then_with(|| a.combo.cmp(&b.combo))
            });
            out.push_str(&format!(
                "\nBest reported conditions for {}\n\n| {header} | Actual Yield |\n{sep}|---|\n",
                p.pair.display()
            ));
            for s in reported.iter().take(rows) {
                out.push_str(&format!(
                    "| {} | {} |\n",
                    combo_cells(&s.combo),
                    s.actual_yield.map_or("-".into(), fmt_yield)
                ));
            }
            out.push('\n');
        }
        out.push_str("| Top-k% | Accuracy |\n|---|---|\n");
        for t in &self.topk {
            out.push_str(&format!("| {}% | {:.1} |\n", t.k, t.accuracy));
        }
        out
    }
}

/// Predicts the recorded yield of each known (pair, combo); used as an upper bound.
pub struct OraclePredictor {
    known: HashMap<(ReactantPair, ConditionCombo), f64>,
    schema: DatasetSchema,
}

impl OraclePredictor {
    pub fn new(schema: &DatasetSchema, records: &[&ReactionRecord]) -> Self {
        OraclePredictor {
            known: records
                .iter()
                .map(|r| ((pair_of(schema, r), combo_of(schema, r)), r.yield_fraction))
                .collect(),
            schema: schema.clone(),
        }
    }
}

impl YieldPredictor for OraclePredictor {
    fn predict_yield(&self, record: &ReactionRecord) -> Result<f64, CondOptError> {
        let key = (
            pair_of(&self.schema, record),
            combo_of(&self.schema, record),
        );
        self.known.get(&key).copied().ok_or_else(|| {
            CondOptError::Prediction(format!("unknown reaction {}", key.1.display()))
        })
    }
}

/// Same estimate for every input.
pub struct ConstantPredictor(pub f64);

impl YieldPredictor for ConstantPredictor {
    fn predict_yield(&self, _: &ReactionRecord) -> Result<f64, CondOptError> {
        Ok(self.0)
    }
}
