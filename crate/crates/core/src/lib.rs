//! Learned input-validity pre-filters for API fuzzing.
//!
//! Operators are described by a parameter space and a validity oracle
//! ([`registry`]). Labeled samples ([`datagen`]) are reduced to shape features
//! ([`encoder`]) and used to fit tree classifiers ([`learners`]). The best
//! classifier then screens fuzzing candidates in batches before execution
//! ([`pipeline`]).

pub mod artifact;
pub mod bridge;
pub mod datagen;
pub mod encoder;
pub mod experiment;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod registry;
pub mod stats;
pub mod value;

pub use artifact::{child_seed, config_hash, Provenance, FORMAT_VERSION};
pub use datagen::{
    class_stats, generate_dataset, label, split_dataset, Dataset, GenerationConfig, Generator, LabeledSample,
    Relaxation, Strategy,
};
pub use encoder::{build_schema, encode, encode_batch, FeatureMatrix, FeatureSchema};
pub use experiment::{learnability, train_repetition, OperatorSummary, RepetitionResult, TrainPlan};
pub use learners::{
    fit_leaderboard, load_model, predict_batch, save_model, train, Family, Leaderboard, TrainConfig, TrainedModel,
};
pub use metrics::{confusion, evaluate, precision_recall, ConfusionMatrix, EvalReport};
pub use pipeline::{
    bug_campaign, compare, generalize, run_filtered, run_unfiltered, FuzzOptions, FuzzReport, ModelFilter, Prefilter,
};
pub use registry::{OperatorSpec, Registry, ValidationOutcome};
pub use value::{InputTuple, ParamKind, ParamSpace, ParamSpec, Shape, Value, ValueBounds};
