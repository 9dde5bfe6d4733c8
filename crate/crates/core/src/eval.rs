//! Regression metrics and fold aggregation.
//!
//! RMSE is computed on yield fractions and reported on the 0–100 scale.
//! Fold spreads use the population standard deviation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions vs {actual} actual values")]
    LengthMismatch { pred: usize, actual: usize },
    #[error("no values to evaluate")]
    Empty,
    #[error("actual values have zero variance")]
    DegenerateActual,
    #[error("r-squared needs at least 2 values, got {0}")]
    TooFew(usize),
}

fn check(pred: &[f64], actual: &[f64]) -> Result<(), EvalError> {
    if pred.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mse(pred: &[f64], actual: &[f64]) -> f64 {
    pred.iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / pred.len() as f64
}

/// Root mean squared error in fraction units.
pub fn rmse_fraction(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    check(pred, actual)?;
    Ok(mse(pred, actual).sqrt())
}

/// Root mean squared error on the 0–100 yield scale.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    Ok(100.0 * rmse_fraction(pred, actual)?)
}

/// Coefficient of determination, `1 − SS_res / SS_tot`.
pub fn r_squared(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    check(pred, actual)?;
    if actual.len() < 2 {
        return Err(EvalError::TooFew(actual.len()));
    }
    let m = mean(actual);
    let ss_tot: f64 = actual.iter().map(|a| (a - m) * (a - m)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::DegenerateActual);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// 0–100 scale.
    pub rmse: f64,
    pub r2: f64,
}

impl Metrics {
    pub fn compute(pred: &[f64], actual: &[f64]) -> Result<Self, EvalError> {
        Ok(Metrics {
            rmse: rmse(pred, actual)?,
            r2: r_squared(pred, actual)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(xs: &[f64]) -> Self {
        let m = mean(xs);
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
        MeanStd {
            mean: m,
            std: var.sqrt(),
        }
    }

    pub fn format(&self, decimals: usize) -> String {
        format!("{:.*} ± {:.*}", decimals, self.mean, decimals, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub rmse: MeanStd,
    pub r2: MeanStd,
    pub n_folds: usize,
}

pub const RMSE_DECIMALS: usize = 1;
pub const R2_DECIMALS: usize = 3;

impl AggregateMetrics {
    pub fn rmse_text(&self) -> String {
        self.rmse.format(RMSE_DECIMALS)
    }

    pub fn r2_text(&self) -> String {
        self.r2.format(R2_DECIMALS)
    }
}

/// Mean and population std of each metric over folds. Folds are sorted
/// before summation so the result is independent of their order.
pub fn aggregate(folds: &[Metrics]) -> Result<AggregateMetrics, EvalError> {
    if folds.is_empty() {
        return Err(EvalError::Empty);
    }
    let sorted = |f: fn(&Metrics) -> f64| {
        let mut v: Vec<f64> = folds.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    Ok(AggregateMetrics {
        rmse: MeanStd::of(&sorted(|m| m.rmse)),
        r2: MeanStd::of(&sorted(|m| m.r2)),
        n_folds: folds.len(),
    })
}

/// Per-fold metrics plus their aggregate, ready for JSON or markdown output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub folds: Vec<Metrics>,
    pub aggregate: AggregateMetrics,
}

impl MetricsReport {
    pub fn new(label: impl Into<String>, folds: Vec<Metrics>) -> Result<Self, EvalError> {
        let aggregate = aggregate(&folds)?;
        Ok(MetricsReport {
            label: label.into(),
            folds,
            aggregate,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Table with a Model / RMSE / R² header, one row per report.
    pub fn markdown_table(reports: &[MetricsReport]) -> String {
        let mut out = String::from("| Model | RMSE | R² |\n|---|---|---|\n");
        for r in reports {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                r.label,
                r.aggregate.rmse_text(),
                r.aggregate.r2_text()
            ));
        }
        out
    }
}
