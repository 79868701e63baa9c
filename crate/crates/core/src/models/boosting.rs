//! Least-squares gradient boosting with shrinkage.

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, MaxFeatures, Presorted, TreeParams};
use crate::dataio::FeatureMatrix;
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    /// Depth of each stage tree; `None` grows them unbounded.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self { learning_rate: 0.1, n_estimators: 100, max_depth: Some(3), min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<DecisionTree>,
    /// Training mean squared error after each stage; entry 0 is the constant model.
    pub train_loss: Vec<f64>,
}

impl GradientBoosting {
    pub fn fit(x: &FeatureMatrix, y: &[f64], params: &BoostingParams, seed: u64) -> Result<Self> {
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning_rate {} must be positive", params.learning_rate)));
        }
        if params.n_estimators < 1 {
            return Err(Error::InvalidParameter("n_estimators must be at least 1".into()));
        }
        if x.n_rows() == 0 || y.len() != x.n_rows() {
            return Err(Error::InsufficientData("boosting needs matching non-empty X and y".into()));
        }
        let n = y.len();
        let init = y.iter().sum::<f64>() / n as f64;
        let mut f = vec![init; n];
        let mut residual: Vec<f64> = y.iter().map(|v| v - init).collect();
        let mse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let mut train_loss = vec![mse(&residual)];
        let pre = Presorted::new(x);
        let tp = TreeParams {
            max_features: MaxFeatures::All,
            min_samples_split: params.min_samples_split,
            min_samples_leaf: 1,
            max_depth: params.max_depth,
        };
        let mut rng = rng_from_seed(seed);
        let mut trees = Vec::with_capacity(params.n_estimators);
        for _ in 0..params.n_estimators {
            let tree = DecisionTree::fit_presorted(x, &residual, &pre, None, &tp, &mut rng)?;
            for (i, row) in x.rows().enumerate() {
                f[i] += params.learning_rate * tree.predict_row(row);
                residual[i] = y[i] - f[i];
            }
            train_loss.push(mse(&residual));
            trees.push(tree);
        }
        Ok(Self { init, learning_rate: params.learning_rate, trees, train_loss })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 * 0.1, ((i * 13) % 7) as f64]).collect();
        let y = rows.iter().map(|r| (r[0]).sin() + 0.3 * r[1]).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn one_unit_stage_equals_tree_on_centred_target() {
        let (x, y) = data();
        let p = BoostingParams { learning_rate: 1.0, n_estimators: 1, max_depth: None, min_samples_split: 2 };
        let gb = GradientBoosting::fit(&x, &y, &p, 0).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let t = DecisionTree::fit(&x, &centred, &TreeParams::default(), &mut rng_from_seed(0)).unwrap();
        for ((row, yi), ci) in x.rows().zip(&y).zip(&centred) {
            let r_gb = yi - gb.predict_row(row);
            let r_t = ci - t.predict_row(row);
            assert!((r_gb - r_t).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_rate_rejected() {
        let (x, y) = data();
        for lr in [0.0, -1.0] {
            let p = BoostingParams { learning_rate: lr, ..Default::default() };
            assert!(GradientBoosting::fit(&x, &y, &p, 0).is_err());
        }
    }
}
