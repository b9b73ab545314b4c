//! Helpers over canonical output values.
//!
//! Canonical values are JSON documents produced by the subject runner: tuples
//! arrive as arrays, sets as sorted arrays, mappings as key-sorted objects and
//! anything without a JSON form as `{"__repr__": "..."}`.

use alloc::vec::Vec;
use serde_json::{Number, Value};

/// Key used by the runner for values that have no JSON representation.
pub const REPR_KEY: &str = "__repr__";

/// Returns the value as `f64` when it is a JSON number. Booleans are not numbers.
pub fn as_numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

/// Returns the elements as `f64` when `v` is an array made only of numbers.
pub fn as_numeric_seq(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Array(items) => items.iter().map(as_numeric).collect(),
        _ => None,
    }
}

fn as_exact_int(n: &Number) -> Option<i128> {
    if let Some(i) = n.as_i64() {
        Some(i as i128)
    } else {
        n.as_u64().map(|u| u as i128)
    }
}

/// Mathematical equality of two JSON numbers: `6` equals `6.0`.
pub fn numbers_equal(a: &Number, b: &Number) -> bool {
    match (as_exact_int(a), as_exact_int(b)) {
        (Some(x), Some(y)) => x == y,
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    }
}

/// Exact structural equality of canonical values.
///
/// Numbers compare by value, so an integer and a float holding the same
/// number are equal; everything else is compared shape for shape.
pub fn structural_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Number(x), Value::Number(y)) => numbers_equal(x, y),
        (Value::String(x), Value::String(y)) => x == y,
        (Value::Array(xs), Value::Array(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| structural_eq(x, y))
        }
        (Value::Object(xs), Value::Object(ys)) => {
            xs.len() == ys.len()
                && xs
                    .iter()
                    .all(|(k, x)| ys.get(k).is_some_and(|y| structural_eq(x, y)))
        }
        _ => false,
    }
}
