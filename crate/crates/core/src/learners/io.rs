use std::fs;
use std::path::Path;

use thiserror::Error;

use super::TrainedModel;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported model version {found} (expected {MODEL_VERSION})")]
    Version { found: u32 },
    #[error("invalid model: {0}")]
    Invalid(String),
}

fn check(model: &TrainedModel) -> Result<(), ModelIoError> {
    let invalid = |m: &str| Err(ModelIoError::Invalid(m.to_string()));
    if model.version != MODEL_VERSION {
        return Err(ModelIoError::Version { found: model.version });
    }
    if model.trees.is_empty() {
        return invalid("model has no trees");
    }
    if !(model.bias.is_finite() && model.tree_weight.is_finite() && model.threshold.is_finite()) {
        return invalid("non-finite model parameter");
    }
    for t in &model.trees {
        if !t.all_finite() {
            return invalid("non-finite threshold or leaf");
        }
        if t.max_feature().is_some_and(|f| f >= model.n_features) {
            return invalid("split feature outside the schema width");
        }
    }
    Ok(())
}

/// Compact JSON, one trailing newline. Floats are written in their shortest
/// round-trip form, so a reloaded model scores bit-identically.
pub fn to_json(model: &TrainedModel) -> Result<String, ModelIoError> {
    check(model)?;
    let mut s = serde_json::to_string(model)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(s: &str) -> Result<TrainedModel, ModelIoError> {
    let version = serde_json::from_str::<serde_json::Value>(s)?
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelIoError::Invalid("missing version".into()))?;
    if version != MODEL_VERSION as u64 {
        return Err(ModelIoError::Version {
            found: version as u32,
        });
    }
    let model: TrainedModel = serde_json::from_str(s)?;
    check(&model)?;
    Ok(model)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelIoError> {
    fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelIoError> {
    from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Node;

    #[test]
    fn rejects_empty_trees_and_bad_versions() {
        let mut m = TrainedModel::constant(true, 2);
        m.trees.clear();
        assert!(matches!(to_json(&m), Err(ModelIoError::Invalid(_))));

        let m = TrainedModel::constant(true, 2);
        let text = to_json(&m).unwrap().replace("\"version\":1", "\"version\":9");
        assert!(matches!(from_json(&text), Err(ModelIoError::Version { found: 9 })));
        let text = to_json(&m).unwrap();
        assert!(matches!(from_json(&text[..text.len() / 2]), Err(ModelIoError::Malformed(_))));
    }

    #[test]
    fn rejects_out_of_range_features() {
        let mut m = TrainedModel::constant(true, 2);
        m.trees = vec![Node::split(5, 0.0, Node::leaf(0.0), Node::leaf(1.0))];
        assert!(matches!(to_json(&m), Err(ModelIoError::Invalid(_))));
    }
}
