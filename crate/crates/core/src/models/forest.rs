//! Bagged regression trees with per-split feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, MaxFeatures, Presorted, TreeParams};
use crate::dataio::FeatureMatrix;
use crate::rng::derived_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_estimators: 100, max_features: MaxFeatures::All, min_samples_split: 2, max_depth: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap sample and feature subsets from a stream
    /// derived from `(seed, t)`, so the result does not depend on thread count.
    pub fn fit(x: &FeatureMatrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<Self> {
        if params.n_estimators < 1 {
            return Err(Error::InvalidParameter("n_estimators must be at least 1".into()));
        }
        if x.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot fit a forest on zero rows".into()));
        }
        let pre = Presorted::new(x);
        let tp = TreeParams {
            max_features: params.max_features,
            min_samples_split: params.min_samples_split,
            min_samples_leaf: 1,
            max_depth: params.max_depth,
        };
        let n = x.n_rows();
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = derived_rng(seed, &[t as u64]);
                if params.bootstrap {
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rng.random_range(0..n)] += 1;
                    }
                    DecisionTree::fit_presorted(x, y, &pre, Some(&counts), &tp, &mut rng)
                } else {
                    DecisionTree::fit_presorted(x, y, &pre, None, &tp, &mut rng)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    /// Mean prediction and the spread (population standard deviation) of the
    /// individual tree predictions.
    pub fn predict_with_spread(&self, x: &FeatureMatrix) -> Vec<(f64, f64)> {
        let m = self.trees.len() as f64;
        x.rows()
            .map(|r| {
                let preds: Vec<f64> = self.trees.iter().map(|t| t.predict_row(r)).collect();
                let mean = preds.iter().sum::<f64>() / m;
                let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / m;
                (mean, var.sqrt())
            })
            .collect()
    }
}
