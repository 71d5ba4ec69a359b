//! Pre-filters consulted before execution.

use thiserror::Error;

use crate::encoder::{encode_batch, EncodingError, FeatureMatrix, FeatureSchema};
use crate::learners::{predict_batch, PredictError, TrainedModel};
use crate::registry::{OperatorSpec, SpecError};
use crate::value::InputTuple;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("model schema {model} does not match operator schema {operator}")]
    SchemaMismatch { model: String, operator: String },
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Two-stage batch classifier: `process` turns candidates into features,
/// `infer` makes one decision per candidate in a single query.
pub trait Prefilter: Sync {
    fn name(&self) -> String;

    fn process(&self, batch: &[InputTuple]) -> Result<FeatureMatrix, FilterError>;

    fn infer(&self, batch: &[InputTuple], features: &FeatureMatrix) -> Result<Vec<bool>, FilterError>;

    /// Both stages at once.
    fn decide(&self, batch: &[InputTuple]) -> Result<Vec<bool>, FilterError> {
        let x = self.process(batch)?;
        self.infer(batch, &x)
    }
}

/// A trained classifier over the operator's feature schema.
pub struct ModelFilter {
    pub model: TrainedModel,
    pub schema: FeatureSchema,
}

impl ModelFilter {
    /// Fails if the model was trained on a different layout. A model with no
    /// recorded schema hash only has its width checked.
    pub fn new(model: TrainedModel, schema: FeatureSchema) -> Result<Self, FilterError> {
        let hash = schema.hash();
        let width_ok = model.n_features == schema.width();
        if !width_ok || (!model.schema_hash.is_empty() && model.schema_hash != hash) {
            return Err(FilterError::SchemaMismatch {
                model: model.schema_hash.clone(),
                operator: hash,
            });
        }
        Ok(ModelFilter { model, schema })
    }
}

impl Prefilter for ModelFilter {
    fn name(&self) -> String {
        format!("model:{}", self.model.family)
    }

    fn process(&self, batch: &[InputTuple]) -> Result<FeatureMatrix, FilterError> {
        Ok(encode_batch(batch, &self.schema)?)
    }

    fn infer(&self, _batch: &[InputTuple], features: &FeatureMatrix) -> Result<Vec<bool>, FilterError> {
        Ok(predict_batch(&self.model, features)?.labels)
    }
}

/// The operator's own oracle: a perfect classifier.
pub struct OracleFilter<'a> {
    pub op: &'a OperatorSpec,
}

impl Prefilter for OracleFilter<'_> {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn process(&self, batch: &[InputTuple]) -> Result<FeatureMatrix, FilterError> {
        Ok(FeatureMatrix::new(batch.len(), 0, Vec::new()))
    }

    fn infer(&self, batch: &[InputTuple], _features: &FeatureMatrix) -> Result<Vec<bool>, FilterError> {
        batch
            .iter()
            .map(|t| Ok(self.op.validate(t)?.is_valid()))
            .collect()
    }
}

/// Accepts everything or nothing.
pub struct ConstantFilter(pub bool);

impl Prefilter for ConstantFilter {
    fn name(&self) -> String {
        if self.0 { "always_valid" } else { "always_invalid" }.into()
    }

    fn process(&self, batch: &[InputTuple]) -> Result<FeatureMatrix, FilterError> {
        Ok(FeatureMatrix::new(batch.len(), 0, Vec::new()))
    }

    fn infer(&self, batch: &[InputTuple], _features: &FeatureMatrix) -> Result<Vec<bool>, FilterError> {
        Ok(vec![self.0; batch.len()])
    }
}
