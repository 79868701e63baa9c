//! Hyperparameter cells, fitted regressors and k-fold grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boosting::{BoostingParams, GradientBoosting};
use super::forest::{ForestParams, RandomForest};
use super::metrics::r2;
use super::mlp::{MlpModel, MlpParams};
use super::svr::{KernelKind, SvrModel, SvrParams};
use super::tree::{DecisionTree, MaxFeatures, TreeParams};
use crate::dataio::FeatureMatrix;
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    RandomForest,
    GradientBoosting,
    Svr,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::GradientBoosting, Family::RandomForest, Family::DecisionTree, Family::Svr, Family::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::GradientBoosting => "gradient_boosting",
            Family::Svr => "svr",
            Family::Mlp => "mlp",
        }
    }

    /// Short label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::DecisionTree => "DT",
            Family::RandomForest => "RF",
            Family::GradientBoosting => "GB",
            Family::Svr => "SVM",
            Family::Mlp => "ANN",
        }
    }

    pub fn is_tree_based(self) -> bool {
        matches!(self, Family::DecisionTree | Family::RandomForest | Family::GradientBoosting)
    }

    /// The full tuning grid for the family.
    pub fn default_grid(self) -> Vec<Hyperparams> {
        let mut g = Vec::new();
        match self {
            Family::GradientBoosting => {
                for lr in [0.1, 1.0, 10.0] {
                    for n in [50, 200, 350, 500] {
                        g.push(Hyperparams::GradientBoosting(BoostingParams {
                            learning_rate: lr,
                            n_estimators: n,
                            ..Default::default()
                        }));
                    }
                }
            }
            Family::DecisionTree => {
                for mf in [MaxFeatures::All, MaxFeatures::Log2, MaxFeatures::Sqrt] {
                    for mss in [2, 5, 10] {
                        g.push(Hyperparams::DecisionTree(TreeParams {
                            max_features: mf,
                            min_samples_split: mss,
                            ..Default::default()
                        }));
                    }
                }
            }
            Family::RandomForest => {
                for n in [10, 50, 100] {
                    for mf in [MaxFeatures::Sqrt, MaxFeatures::All, MaxFeatures::Log2] {
                        g.push(Hyperparams::RandomForest(ForestParams {
                            n_estimators: n,
                            max_features: mf,
                            ..Default::default()
                        }));
                    }
                }
            }
            Family::Svr => {
                for c in [0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0] {
                    for k in [KernelKind::Rbf, KernelKind::Linear] {
                        g.push(Hyperparams::Svr(SvrParams { c, kernel: k, epsilon: 0.01, ..Default::default() }));
                    }
                }
            }
            Family::Mlp => {
                for units in [5, 10, 20] {
                    for alpha in [0.01, 1.0, 10.0] {
                        g.push(Hyperparams::Mlp(MlpParams { hidden: vec![units], alpha, ..Default::default() }));
                    }
                }
            }
        }
        g
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decision_tree" | "dt" => Ok(Family::DecisionTree),
            "random_forest" | "rf" => Ok(Family::RandomForest),
            "gradient_boosting" | "gb" => Ok(Family::GradientBoosting),
            "svr" | "svm" => Ok(Family::Svr),
            "mlp" | "ann" => Ok(Family::Mlp),
            _ => Err(Error::InvalidParameter(format!("unknown model family `{s}`"))),
        }
    }
}

/// One cell of a tuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Hyperparams {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostingParams),
    Svr(SvrParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn family(&self) -> Family {
        match self {
            Hyperparams::DecisionTree(_) => Family::DecisionTree,
            Hyperparams::RandomForest(_) => Family::RandomForest,
            Hyperparams::GradientBoosting(_) => Family::GradientBoosting,
            Hyperparams::Svr(_) => Family::Svr,
            Hyperparams::Mlp(_) => Family::Mlp,
        }
    }

    pub fn fit(&self, x: &FeatureMatrix, y: &[f64], seed: u64) -> Result<Regressor> {
        Ok(match self {
            Hyperparams::DecisionTree(p) => Regressor::DecisionTree(DecisionTree::fit(x, y, p, &mut rng_from_seed(seed))?),
            Hyperparams::RandomForest(p) => Regressor::RandomForest(RandomForest::fit(x, y, p, seed)?),
            Hyperparams::GradientBoosting(p) => Regressor::GradientBoosting(GradientBoosting::fit(x, y, p, seed)?),
            Hyperparams::Svr(p) => Regressor::Svr(SvrModel::fit(x, y, p)?),
            Hyperparams::Mlp(p) => Regressor::Mlp(MlpModel::fit(x, y, p, seed)?),
        })
    }

    /// Compact `key=value` rendering for logs and reports.
    pub fn describe(&self) -> String {
        let depth = |d: Option<usize>| d.map_or("none".to_string(), |d| d.to_string());
        match self {
            Hyperparams::DecisionTree(p) => format!(
                "max_features={:?} min_samples_split={} max_depth={}",
                p.max_features, p.min_samples_split, depth(p.max_depth)
            ),
            Hyperparams::RandomForest(p) => format!(
                "n_estimators={} max_features={:?} bootstrap={}",
                p.n_estimators, p.max_features, p.bootstrap
            ),
            Hyperparams::GradientBoosting(p) => format!(
                "learning_rate={} n_estimators={} max_depth={}",
                p.learning_rate, p.n_estimators, depth(p.max_depth)
            ),
            Hyperparams::Svr(p) => format!("C={} kernel={:?} epsilon={} gamma={:?}", p.c, p.kernel, p.epsilon, p.gamma),
            Hyperparams::Mlp(p) => format!("hidden={:?} alpha={} solver={:?}", p.hidden, p.alpha, p.solver),
        }
    }
}

/// A fitted regressor of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum Regressor {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
    Svr(SvrModel),
    Mlp(MlpModel),
}

impl Regressor {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::DecisionTree(m) => m.predict_row(row),
            Regressor::RandomForest(m) => m.predict_row(row),
            Regressor::GradientBoosting(m) => m.predict_row(row),
            Regressor::Svr(m) => m.predict_row(row),
            Regressor::Mlp(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub grid: Vec<Hyperparams>,
    /// Per-cell validation R² of each fold.
    pub fold_scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
    pub best_index: usize,
    pub best: Regressor,
}

impl GridSearchResult {
    pub fn best_params(&self) -> &Hyperparams {
        &self.grid[self.best_index]
    }
    pub fn best_score(&self) -> f64 {
        self.mean_scores[self.best_index]
    }
}

/// Contiguous, unshuffled fold boundaries; the first `n % k` folds get one
/// extra row.
pub fn kfold_bounds(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Scores every cell by mean k-fold validation R², then refits the best
/// cell (first in grid order among equals) on all rows. Every fit in cell
/// `c` uses the seed derived from `(seed, c)`. Non-finite scores never win.
pub fn grid_search(grid: &[Hyperparams], x: &FeatureMatrix, y: &[f64], k: usize, seed: u64) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::InvalidParameter(format!("{n} rows but {} targets", y.len())));
    }
    if n < 2 * k {
        return Err(Error::InsufficientData(format!("{n} rows cannot form {k} folds of at least 2")));
    }
    let folds = kfold_bounds(n, k);
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let scores = jobs
        .par_iter()
        .map(|&(c, f)| {
            let val = folds[f].clone();
            let train_idx: Vec<usize> = (0..n).filter(|i| !val.contains(i)).collect();
            let xt = x.select_rows(&train_idx);
            let yt: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
            let model = grid[c].fit(&xt, &yt, derive_seed(seed, &[c as u64]))?;
            let xv = x.slice_rows(val.clone());
            r2(&y[val], &model.predict(&xv))
        })
        .collect::<Result<Vec<f64>>>()?;
    let fold_scores: Vec<Vec<f64>> = scores.chunks(k).map(<[f64]>::to_vec).collect();
    let mean_scores: Vec<f64> = fold_scores.iter().map(|s| s.iter().sum::<f64>() / k as f64).collect();
    let mut best_index = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, &s) in mean_scores.iter().enumerate() {
        if s.is_finite() && s > best_score {
            best_score = s;
            best_index = c;
        }
    }
    let best = grid[best_index].fit(x, y, derive_seed(seed, &[best_index as u64]))?;
    Ok(GridSearchResult { grid: grid.to_vec(), fold_scores, mean_scores, best_index, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes() {
        let b = kfold_bounds(11, 5);
        assert_eq!(b, vec![0..3, 3..5, 5..7, 7..9, 9..11]);
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(Family::GradientBoosting.default_grid().len(), 12);
        assert_eq!(Family::DecisionTree.default_grid().len(), 9);
        assert_eq!(Family::RandomForest.default_grid().len(), 9);
        assert_eq!(Family::Svr.default_grid().len(), 12);
        assert_eq!(Family::Mlp.default_grid().len(), 9);
    }

    #[test]
    fn family_aliases() {
        assert_eq!("ann".parse::<Family>().unwrap(), Family::Mlp);
        assert_eq!("RF".parse::<Family>().unwrap(), Family::RandomForest);
        assert!("knn".parse::<Family>().is_err());
    }
}
