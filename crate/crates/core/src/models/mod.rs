//! Regression observers: decision tree, random forest, gradient boosting,
//! support vector regression and multilayer perceptron, plus the metrics and
//! grid search used to tune them.

pub mod boosting;
pub mod forest;
pub mod grid;
pub mod metrics;
pub mod mlp;
pub mod observer;
pub mod svr;
pub mod tree;

pub use boosting::{BoostingParams, GradientBoosting};
pub use forest::{ForestParams, RandomForest};
pub use grid::{grid_search, kfold_bounds, Family, GridSearchResult, Hyperparams, Regressor};
pub use metrics::{mae, r2, rmse};
pub use mlp::{MlpModel, MlpParams, Solver};
pub use observer::{train_observer, FittedRecipe, Metrics, Recipe, RegressorModel, TrainConfig, TrainingMetadata};
pub use svr::{Gamma, Kernel, KernelKind, SvrModel, SvrParams};
pub use tree::{DecisionTree, MaxFeatures, Node, TreeParams};
