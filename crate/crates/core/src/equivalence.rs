//! Output matching and cross-execution similarity scores.
//!
//! A pair of fragments `(A, B)` is cross-executed on two input sets: `I_a`,
//! generated for `A`, and `I_b`, generated for `B`. The score for a direction
//! is the fraction of its inputs on which both fragments produce matching
//! outputs:
//!
//! ```text
//! s_a = |{ i in I_a : A(i) ~ B(i) }| / n
//! s_b = |{ i in I_b : B(i) ~ A(i) }| / n
//! ```
//!
//! and the pair is a clone when both scores reach the threshold.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CoreError;
use crate::outcome::{ExecutionOutcome, TestInput};
use crate::value::{as_numeric, as_numeric_seq, structural_eq};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Relative tolerance for numeric scalars and vector norms.
    pub scalar_rel_tol: f64,
    /// Minimum cosine similarity for numeric vectors.
    pub cosine_threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            scalar_rel_tol: 1e-6,
            cosine_threshold: 0.999,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.scalar_rel_tol.is_finite() || self.scalar_rel_tol < 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "scalar_rel_tol",
                reason: alloc::format!("must be finite and >= 0, got {}", self.scalar_rel_tol),
            });
        }
        if !(self.cosine_threshold > 0.0 && self.cosine_threshold <= 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "cosine_threshold",
                reason: alloc::format!("must lie in (0, 1], got {}", self.cosine_threshold),
            });
        }
        Ok(())
    }
}

fn scalar_close(x: f64, y: f64, rel_tol: f64) -> bool {
    let scale = 1.0f64.max(libm::fabs(x)).max(libm::fabs(y));
    libm::fabs(x - y) <= rel_tol * scale
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

fn norm(xs: &[f64]) -> f64 {
    libm::sqrt(xs.iter().map(|x| x * x).sum())
}

fn vectors_close(xs: &[f64], ys: &[f64], cfg: &MatchConfig) -> bool {
    let (mx, my) = (max_abs(xs), max_abs(ys));
    if mx == 0.0 || my == 0.0 {
        // cosine is undefined against a zero vector
        return xs
            .iter()
            .zip(ys)
            .all(|(x, y)| scalar_close(*x, *y, cfg.scalar_rel_tol));
    }
    // work on copies scaled into [-1, 1] so squares neither overflow nor
    // underflow; cosine is scale-free and the norm check is rescaled below
    let m = mx.max(my);
    let xs: alloc::vec::Vec<f64> = xs.iter().map(|x| x / m).collect();
    let ys: alloc::vec::Vec<f64> = ys.iter().map(|y| y / m).collect();
    let (nx, ny) = (norm(&xs), norm(&ys));
    let dot: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let cosine = dot / (nx * ny);
    // |m*nx - m*ny| <= tol * max(1, m*nx, m*ny), divided through by m
    let norms_close = libm::fabs(nx - ny) <= cfg.scalar_rel_tol * (1.0 / m).max(nx).max(ny);
    cosine >= cfg.cosine_threshold && norms_close
}

/// Decides whether two canonical ok-values count as the same output.
///
/// Rules, first applicable wins:
/// 1. two numbers: relative tolerance `|x - y| <= tol * max(1, |x|, |y|)`;
/// 2. two non-empty numeric arrays of equal length: cosine similarity at or
///    above the threshold and norms equal within the same relative tolerance;
/// 3. otherwise exact structural equality.
///
/// Booleans are never treated as numbers.
pub fn outputs_match(v1: &Value, v2: &Value, cfg: &MatchConfig) -> bool {
    if let (Some(x), Some(y)) = (as_numeric(v1), as_numeric(v2)) {
        return scalar_close(x, y, cfg.scalar_rel_tol);
    }
    if let (Some(xs), Some(ys)) = (as_numeric_seq(v1), as_numeric_seq(v2)) {
        if !xs.is_empty() && xs.len() == ys.len() {
            return vectors_close(&xs, &ys, cfg);
        }
    }
    structural_eq(v1, v2)
}

/// The input set a piece of evidence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Input from `I_a`, contributes to `s_a`.
    A,
    /// Input from `I_b`, contributes to `s_b`.
    B,
}

/// One input of either set with both fragments' outcomes on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvidence {
    pub direction: Direction,
    pub input: TestInput,
    pub matched: bool,
    pub outcome_a: ExecutionOutcome,
    pub outcome_b: ExecutionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub s_a: f64,
    pub s_b: f64,
    pub n: usize,
    pub per_input_matches: Vec<MatchEvidence>,
}

impl SimilarityScores {
    pub fn matches_a(&self) -> usize {
        self.count(Direction::A)
    }

    pub fn matches_b(&self) -> usize {
        self.count(Direction::B)
    }

    fn count(&self, d: Direction) -> usize {
        self.per_input_matches
            .iter()
            .filter(|e| e.direction == d && e.matched)
            .count()
    }
}

/// The four aligned outcome lists of a cross-execution.
///
/// `a_on_b[i]` is fragment A run on `inputs_b[i]`, and so on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossExecution {
    pub inputs_a: Vec<TestInput>,
    pub inputs_b: Vec<TestInput>,
    pub a_on_a: Vec<ExecutionOutcome>,
    pub a_on_b: Vec<ExecutionOutcome>,
    pub b_on_a: Vec<ExecutionOutcome>,
    pub b_on_b: Vec<ExecutionOutcome>,
}

impl CrossExecution {
    /// Restricts every list to its first `n` entries.
    pub fn prefix(&self, n: usize) -> Self {
        fn head<T: Clone>(v: &[T], n: usize) -> Vec<T> {
            v[..n.min(v.len())].to_vec()
        }
        Self {
            inputs_a: head(&self.inputs_a, n),
            inputs_b: head(&self.inputs_b, n),
            a_on_a: head(&self.a_on_a, n),
            a_on_b: head(&self.a_on_b, n),
            b_on_a: head(&self.b_on_a, n),
            b_on_b: head(&self.b_on_b, n),
        }
    }

    /// Swaps the roles of the two fragments.
    pub fn swapped(&self) -> Self {
        Self {
            inputs_a: self.inputs_b.clone(),
            inputs_b: self.inputs_a.clone(),
            a_on_a: self.b_on_b.clone(),
            a_on_b: self.b_on_a.clone(),
            b_on_a: self.a_on_b.clone(),
            b_on_b: self.a_on_a.clone(),
        }
    }
}

fn outcomes_match(x: &ExecutionOutcome, y: &ExecutionOutcome, cfg: &MatchConfig) -> bool {
    match (x.ok_value(), y.ok_value()) {
        (Some(v1), Some(v2)) => outputs_match(v1, v2, cfg),
        // any failed execution on either side is a mismatch
        _ => false,
    }
}

/// Computes `s_a` and `s_b` from a cross-execution.
pub fn score_pair(cross: &CrossExecution, cfg: &MatchConfig) -> Result<SimilarityScores, CoreError> {
    let n = cross.inputs_a.len();
    if n == 0 {
        return Err(CoreError::EmptyInputSet);
    }
    for len in [
        cross.inputs_b.len(),
        cross.a_on_a.len(),
        cross.a_on_b.len(),
        cross.b_on_a.len(),
        cross.b_on_b.len(),
    ] {
        if len != n {
            return Err(CoreError::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }

    let mut evidence = Vec::with_capacity(2 * n);
    let mut hits_a = 0usize;
    for i in 0..n {
        let matched = outcomes_match(&cross.a_on_a[i], &cross.b_on_a[i], cfg);
        hits_a += matched as usize;
        evidence.push(MatchEvidence {
            direction: Direction::A,
            input: cross.inputs_a[i].clone(),
            matched,
            outcome_a: cross.a_on_a[i].clone(),
            outcome_b: cross.b_on_a[i].clone(),
        });
    }
    let mut hits_b = 0usize;
    for i in 0..n {
        let matched = outcomes_match(&cross.b_on_b[i], &cross.a_on_b[i], cfg);
        hits_b += matched as usize;
        evidence.push(MatchEvidence {
            direction: Direction::B,
            input: cross.inputs_b[i].clone(),
            matched,
            outcome_a: cross.a_on_b[i].clone(),
            outcome_b: cross.b_on_b[i].clone(),
        });
    }

    Ok(SimilarityScores {
        s_a: hits_a as f64 / n as f64,
        s_b: hits_b as f64 / n as f64,
        n,
        per_input_matches: evidence,
    })
}

/// Clone iff both directions reach `theta` (inclusive).
pub fn classify(scores: &SimilarityScores, theta: f64) -> bool {
    debug_assert!(theta > 0.0 && theta <= 1.0);
    scores.s_a >= theta && scores.s_b >= theta
}
