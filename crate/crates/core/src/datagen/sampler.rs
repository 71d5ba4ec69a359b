use rand::seq::SliceRandom;
use rand::Rng;

use crate::value::{
    InputTuple, ParamKind, ParamSpace, ParamSpec, Shape, Value, ValueBounds, MAX_ARITY,
};

/// Uniform rank in [0, max_rank], each dimension uniform in [0, max_dim].
pub fn sample_shape<R: Rng + ?Sized>(bounds: &ValueBounds, rng: &mut R) -> Shape {
    let rank = rng.gen_range(0..=bounds.max_rank);
    Shape::new(
        (0..rank)
            .map(|_| rng.gen_range(0..=bounds.max_dim))
            .collect::<Vec<_>>(),
    )
}

fn sample_float<R: Rng + ?Sized>(bounds: &ValueBounds, rng: &mut R) -> f64 {
    if rng.gen_bool(bounds.float_special_prob) {
        let finite = [0.0, -1.0, 1.0];
        let non_finite = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY];
        if bounds.allow_non_finite {
            let idx = rng.gen_range(0..finite.len() + non_finite.len());
            return finite.get(idx).copied().unwrap_or(non_finite[idx - finite.len()]);
        }
        return *finite.choose(rng).expect("non-empty");
    }
    rng.gen_range(bounds.float_lo..=bounds.float_hi)
}

pub fn sample_value<R: Rng + ?Sized>(spec: &ParamSpec, bounds: &ValueBounds, rng: &mut R) -> Value {
    match spec.kind {
        ParamKind::Tensor => Value::Tensor {
            shape: sample_shape(bounds, rng),
        },
        ParamKind::TensorList => {
            let arity = rng.gen_range(1..=MAX_ARITY);
            Value::TensorList {
                items: (0..arity).map(|_| sample_shape(bounds, rng)).collect(),
            }
        }
        ParamKind::Int => {
            let range = spec.int_range(bounds);
            Value::Int {
                value: rng.gen_range(range.lo..=range.hi),
            }
        }
        ParamKind::Float => Value::Float {
            value: sample_float(bounds, rng),
        },
        ParamKind::Bool => Value::Bool { value: rng.gen() },
        ParamKind::Str => Value::Str {
            value: spec
                .str_choices
                .choose(rng)
                .expect("string parameters have choices")
                .clone(),
        },
    }
}

/// Every argument drawn independently.
pub fn sample_tuple<R: Rng + ?Sized>(space: &ParamSpace, bounds: &ValueBounds, rng: &mut R) -> InputTuple {
    InputTuple::new(
        space
            .params()
            .iter()
            .map(|p| sample_value(p, bounds, rng))
            .collect(),
    )
}
