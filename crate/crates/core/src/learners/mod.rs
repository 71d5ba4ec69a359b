//! Tree-based validity classifiers.
//!
//! Every family produces the same [`TrainedModel`] shape: a list of trees
//! whose leaf values are summed, scaled by `tree_weight`, offset by `bias`
//! and passed through the family's link function.

pub mod cart;
pub mod cv;
pub mod extra_trees;
pub mod gbdt;
pub mod io;
pub mod leaderboard;
pub mod predict;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::Provenance;
use crate::encoder::FeatureMatrix;

pub use cv::{cross_validate, fold_assignment, CVReport, CvError};
pub use io::{load_model, save_model, ModelIoError, MODEL_VERSION};
pub use leaderboard::{fit_leaderboard, fit_leaderboard_matrix, Leaderboard, LeaderboardEntry, LeaderboardError};
pub use predict::{predict_batch, FlatModel, PredictError, Predictions};
pub use tree::Node;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cart,
    ExtraTrees,
    HistGbdt,
    MajorityBaseline,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Cart,
        Family::ExtraTrees,
        Family::HistGbdt,
        Family::MajorityBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cart => "cart",
            Family::ExtraTrees => "extra_trees",
            Family::HistGbdt => "hist_gbdt",
            Family::MajorityBaseline => "majority_baseline",
        }
    }

    fn link(self) -> Link {
        match self {
            Family::HistGbdt => Link::Logistic,
            _ => Link::Identity,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown model family `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Link {
    Identity,
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub family: Family,
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub n_bins: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered per split (forests) or per tree
    /// (boosting). `None` means the family default.
    pub feature_subsample: Option<f64>,
    pub l2: f64,
    /// Weight positives by negatives/positives in the boosting loss.
    pub balance_classes: bool,
    pub threshold: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_family(family: Family) -> TrainConfig {
        let base = TrainConfig {
            family,
            n_trees: 1,
            max_depth: None,
            learning_rate: 0.1,
            n_bins: 32,
            min_samples_leaf: 1,
            feature_subsample: None,
            l2: 1.0,
            balance_classes: true,
            threshold: 0.5,
            seed: 0,
        };
        match family {
            Family::Cart => TrainConfig {
                max_depth: Some(12),
                ..base
            },
            Family::ExtraTrees => TrainConfig {
                n_trees: 100,
                min_samples_leaf: 2,
                ..base
            },
            Family::HistGbdt => TrainConfig {
                n_trees: 200,
                max_depth: Some(6),
                min_samples_leaf: 5,
                ..base
            },
            Family::MajorityBaseline => base,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1".into());
        }
        if !(2..=1024).contains(&self.n_bins) {
            return bad(format!("n_bins must lie in [2, 1024], got {}", self.n_bins));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if let Some(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("feature_subsample must lie in (0, 1], got {f}"));
            }
        }
        if self.family == Family::HistGbdt && self.max_depth.is_none() {
            return bad("hist_gbdt needs a max_depth".into());
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return bad(format!("l2 must be >= 0, got {}", self.l2));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training matrix is empty")]
    Empty,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub family: Family,
    pub schema_hash: String,
    pub n_features: usize,
    pub bias: f64,
    pub tree_weight: f64,
    pub threshold: f64,
    pub train_samples: u64,
    pub train_positives: u64,
    pub trees: Vec<Node>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl TrainedModel {
    /// Always predicts one class.
    pub fn constant(valid: bool, n_features: usize) -> TrainedModel {
        TrainedModel {
            version: MODEL_VERSION,
            family: Family::MajorityBaseline,
            schema_hash: String::new(),
            n_features,
            bias: 0.0,
            tree_weight: 1.0,
            threshold: 0.5,
            train_samples: 0,
            train_positives: 0,
            trees: vec![Node::leaf(if valid { 1.0 } else { 0.0 })],
            provenance: None,
        }
    }

    pub fn with_schema_hash(mut self, hash: impl Into<String>) -> Self {
        self.schema_hash = hash.into();
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// Leaf sum in tree order.
    pub fn raw(&self, row: &[f64]) -> f64 {
        let mut raw = 0.0;
        for t in &self.trees {
            raw += t.eval(row);
        }
        raw
    }

    /// Margin after bias and tree weight, before the link.
    pub fn margin_from_raw(&self, raw: f64) -> f64 {
        self.bias + self.tree_weight * raw
    }

    pub fn score_from_raw(&self, raw: f64) -> f64 {
        let m = self.margin_from_raw(raw);
        match self.family.link() {
            Link::Identity => m.clamp(0.0, 1.0),
            Link::Logistic => gbdt::sigmoid(m),
        }
    }

    /// Validity score of one row by direct tree traversal.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.score_from_raw(self.raw(row))
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        self.score_row(row) >= self.threshold
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(Node::node_count).sum()
    }
}

fn check_inputs(x: &FeatureMatrix, y: &[bool]) -> Result<(), TrainError> {
    if x.is_empty() {
        return Err(TrainError::Empty);
    }
    if x.rows() != y.len() {
        return Err(TrainError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    for (row, r) in x.iter_rows().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Fits `cfg.family`; single-class data always yields the majority baseline.
pub fn train(x: &FeatureMatrix, y: &[bool], cfg: &TrainConfig) -> Result<TrainedModel, TrainError> {
    cfg.validate()?;
    check_inputs(x, y)?;
    let pos = y.iter().filter(|&&v| v).count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let single_class = pos == 0 || pos == y.len();
    let family = if single_class {
        Family::MajorityBaseline
    } else {
        cfg.family
    };
    let mut model = TrainedModel {
        family,
        threshold: cfg.threshold,
        train_samples: y.len() as u64,
        train_positives: pos as u64,
        ..TrainedModel::constant(2 * pos > y.len(), x.cols())
    };
    match family {
        Family::MajorityBaseline => {}
        Family::Cart => {
            model.trees = vec![cart::fit(x, y, cfg.max_depth.unwrap_or(usize::MAX), cfg.min_samples_leaf)];
        }
        Family::ExtraTrees => {
            let params = extra_trees::Params {
                max_depth: cfg.max_depth,
                min_leaf: cfg.min_samples_leaf.max(1),
                max_features: match cfg.feature_subsample {
                    Some(f) => ((f * x.cols() as f64).ceil() as usize).clamp(1, x.cols().max(1)),
                    None => extra_trees::sqrt_features(x.cols()),
                },
            };
            model.trees = (0..cfg.n_trees)
                .map(|_| extra_trees::fit_tree(x, y, &params, &mut rng))
                .collect();
            model.tree_weight = 1.0 / cfg.n_trees as f64;
        }
        Family::HistGbdt => {
            let params = gbdt::Params {
                n_trees: cfg.n_trees,
                max_depth: cfg.max_depth.expect("validated"),
                learning_rate: cfg.learning_rate,
                n_bins: cfg.n_bins,
                min_leaf: cfg.min_samples_leaf.max(1),
                l2: cfg.l2,
                feature_fraction: cfg.feature_subsample.unwrap_or(1.0),
                balance_classes: cfg.balance_classes,
            };
            let (bias, trees) = gbdt::fit(x, y, &params, &mut rng);
            model.bias = bias;
            model.trees = trees;
            model.tree_weight = cfg.learning_rate;
        }
    }
    Ok(model)
}
