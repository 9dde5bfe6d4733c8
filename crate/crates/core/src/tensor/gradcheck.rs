use rand::Rng;
use serde::Serialize;

use super::{Gradients, ParamId, ParamStore, TensorError};
use crate::seed;

/// `|a − n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordReport {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords: Vec<CoordReport>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&CoordReport> {
        self.coords
            .iter()
            .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
    }
}

/// Compares `analytic` against central differences `(f(p+h) − f(p−h)) / 2h`
/// at each sampled coordinate. `f` must be deterministic: it is evaluated
/// twice at the unperturbed point and any difference is an error.
pub fn grad_check<F, E>(
    store: &ParamStore,
    analytic: &Gradients,
    coords: &[(ParamId, usize)],
    h: f64,
    mut f: F,
) -> Result<GradCheckReport, E>
where
    F: FnMut(&ParamStore) -> Result<f64, E>,
    E: From<TensorError>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(TensorError::InvalidArgument {
            op: "grad_check",
            detail: format!("step {h} must be positive"),
        }
        .into());
    }
    let first = f(store)?;
    let second = f(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(TensorError::NondeterministicFunction { first, second }.into());
    }

    let mut work = store.clone();
    let mut reports = Vec::with_capacity(coords.len());
    for &(id, index) in coords {
        let original = work.get(id).data()[index];
        work.get_mut(id).data_mut()[index] = original + h;
        let plus = f(&work)?;
        work.get_mut(id).data_mut()[index] = original - h;
        let minus = f(&work)?;
        work.get_mut(id).data_mut()[index] = original;

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.get(id).data()[index];
        reports.push(CoordReport {
            param: store.name(id).to_string(),
            index,
            analytic: a,
            numeric,
            rel_err: relative_error(a, numeric),
        });
    }
    let max_rel_err = reports.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_err,
        coords: reports,
    })
}

/// Picks up to `per_param` distinct coordinates from every parameter tensor.
pub fn sample_coordinates(
    store: &ParamStore,
    per_param: usize,
    seed: u64,
) -> Vec<(ParamId, usize)> {
    let mut out = Vec::new();
    for (id, _, t) in store.iter() {
        let mut rng = seed::rng(seed, "gradcheck", id.0 as u64);
        if t.len() <= per_param {
            out.extend((0..t.len()).map(|i| (id, i)));
        } else {
            let mut picked = std::collections::BTreeSet::new();
            while picked.len() < per_param {
                picked.insert(rng.random_range(0..t.len()));
            }
            out.extend(picked.into_iter().map(|i| (id, i)));
        }
    }
    out
}
