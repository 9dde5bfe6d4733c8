use serde::{Deserialize, Serialize};

use super::{evaluate_mse, init_model, train, Example, ModelConfig, ModelError, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_index: usize,
    /// Holdout RMSE per candidate, in grid order.
    pub rmses: Vec<f64>,
}

/// Trains every candidate on `train_set`, scores it by RMSE on `holdout`
/// and returns the lowest. Ties go to the earliest candidate.
pub fn hyperparameter_search(
    grid: &[Candidate],
    train_set: &[Example],
    holdout: &[Example],
) -> Result<SearchResult, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    if holdout.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut rmses = Vec::with_capacity(grid.len());
    for c in grid {
        let model = init_model(&c.model, c.train.seed)?;
        let out = train(model, train_set, holdout, &c.train)?;
        rmses.push(evaluate_mse(&out.model, holdout)?.sqrt());
    }
    let mut best_index = 0;
    for (i, r) in rmses.iter().enumerate() {
        if *r < rmses[best_index] {
            best_index = i;
        }
    }
    Ok(SearchResult { best_index, rmses })
}
