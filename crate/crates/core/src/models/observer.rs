//! Trained flow observers: a regressor bundled with the preprocessing it was
//! fitted on, its training metadata, and a versioned JSON container.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{grid_search, Family, Hyperparams, Regressor};
use super::metrics::{mae, r2, rmse};
use crate::dataio::{split, FeatureMatrix, FlowChannel, PolyExpansion, Scaler, TelemetryRecord, FEATURE_COLUMNS};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Which preprocessing steps a family needs: polynomial expansion first,
/// then min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub poly_degree: Option<usize>,
    pub scale: bool,
}

impl Recipe {
    pub fn for_family(family: Family) -> Self {
        match family {
            Family::DecisionTree | Family::RandomForest | Family::GradientBoosting => {
                Recipe { poly_degree: Some(2), scale: false }
            }
            Family::Svr => Recipe { poly_degree: Some(2), scale: true },
            Family::Mlp => Recipe { poly_degree: None, scale: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRecipe {
    pub recipe: Recipe,
    pub input_columns: Vec<String>,
    pub poly: Option<PolyExpansion>,
    pub scaler: Option<Scaler>,
}

impl FittedRecipe {
    /// Configures the steps on training rows only.
    pub fn fit(recipe: Recipe, train: &FeatureMatrix) -> Result<Self> {
        let poly = recipe.poly_degree.map(|d| PolyExpansion::new(train.columns.clone(), d)).transpose()?;
        let expanded = match &poly {
            Some(p) => p.transform(train)?,
            None => train.clone(),
        };
        let scaler = if recipe.scale { Some(Scaler::fit(&expanded)?) } else { None };
        Ok(Self { recipe, input_columns: train.columns.clone(), poly, scaler })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.n_cols() != self.input_columns.len() {
            return Err(Error::WidthMismatch { expected: self.input_columns.len(), found: m.n_cols() });
        }
        let mut out = match &self.poly {
            Some(p) => p.transform(m)?,
            None => m.clone(),
        };
        if let Some(s) = &self.scaler {
            out = s.transform(&out)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2_train: f64,
    pub r2_test: f64,
    pub r2_cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub grid: Vec<Hyperparams>,
    pub cv_scores: Vec<f64>,
    pub best_cell: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub format_version: u32,
    pub family: Family,
    pub channel: FlowChannel,
    pub hyperparams: Hyperparams,
    pub recipe: FittedRecipe,
    pub regressor: Regressor,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub family: Family,
    pub channel: FlowChannel,
    pub grid: Vec<Hyperparams>,
    pub recipe: Recipe,
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
}

impl TrainConfig {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            channel: FlowChannel::Outlet,
            grid: family.default_grid(),
            recipe: Recipe::for_family(family),
            seed: 12,
            test_fraction: 0.3,
            folds: 5,
        }
    }
}

/// Split, preprocess, tune, refit and score one observer.
pub fn train_observer(records: &[TelemetryRecord], cfg: &TrainConfig) -> Result<RegressorModel> {
    if cfg.grid.iter().any(|h| h.family() != cfg.family) {
        return Err(Error::InvalidParameter(format!("grid contains cells outside family {}", cfg.family)));
    }
    if matches!(cfg.family, Family::Svr | Family::Mlp) && !cfg.recipe.scale {
        return Err(Error::InvalidParameter(format!("{} requires min-max scaled inputs", cfg.family)));
    }
    let usable: Vec<TelemetryRecord> =
        records.iter().filter(|r| cfg.channel.target(r).is_some()).cloned().collect();
    if usable.len() < records.len() || usable.is_empty() {
        return Err(Error::InsufficientData(format!("records lack the {:?} flow channel", cfg.channel)));
    }
    let (train, test) = split(&usable, cfg.test_fraction, cfg.seed)?;
    let target = |rs: &[TelemetryRecord]| -> Vec<f64> { rs.iter().filter_map(|r| cfg.channel.target(r)).collect() };
    let x_train_raw = FeatureMatrix::from_records(&train);
    let recipe = FittedRecipe::fit(cfg.recipe, &x_train_raw)?;
    let x_train = recipe.apply(&x_train_raw)?;
    let y_train = target(&train);
    let x_test = recipe.apply(&FeatureMatrix::from_records(&test))?;
    let y_test = target(&test);

    let gs = grid_search(&cfg.grid, &x_train, &y_train, cfg.folds, cfg.seed)?;
    let pred_train = gs.best.predict(&x_train);
    let pred_test = gs.best.predict(&x_test);
    let metrics = Metrics {
        rmse: rmse(&y_test, &pred_test)?,
        mae: mae(&y_test, &pred_test)?,
        r2_train: r2(&y_train, &pred_train)?,
        r2_test: r2(&y_test, &pred_test)?,
        r2_cv: gs.best_score(),
    };
    Ok(RegressorModel {
        format_version: FORMAT_VERSION,
        family: cfg.family,
        channel: cfg.channel,
        hyperparams: gs.best_params().clone(),
        recipe,
        metadata: TrainingMetadata {
            seed: cfg.seed,
            test_fraction: cfg.test_fraction,
            folds: cfg.folds,
            n_train: train.len(),
            n_test: test.len(),
            grid: gs.grid.clone(),
            cv_scores: gs.mean_scores.clone(),
            best_cell: gs.best_index,
            metrics,
        },
        regressor: gs.best,
    })
}

impl RegressorModel {
    /// Predicts from raw observer features (see [`FEATURE_COLUMNS`]).
    pub fn predict(&self, raw: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.regressor.predict(&self.recipe.apply(raw)?))
    }

    pub fn predict_records(&self, records: &[TelemetryRecord]) -> Result<Vec<f64>> {
        self.predict(&FeatureMatrix::from_records(records))
    }

    pub fn mae(&self) -> f64 {
        self.metadata.metrics.mae
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        match probe.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(Error::Format(format!("unsupported format version {v}"))),
            None => return Err(Error::Format("missing format_version".into())),
        }
        let m: Self = serde_json::from_value(probe)?;
        if m.recipe.input_columns.len() != FEATURE_COLUMNS.len() {
            return Err(Error::Format("model input columns do not match observer features".into()));
        }
        Ok(m)
    }

    /// Writes atomically: nothing appears at `path` unless the write succeeds.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let tmp = path.with_extension("partial");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
