//! The regeneration loop that assembles exactly `n` valid inputs for one
//! fragment.
//!
//! Each round asks the candidate source for as many inputs as are still
//! missing, drops exact repeats of anything seen before, runs the rest on the
//! fragment itself and keeps the ones that finish with an ok outcome. Failed
//! runs of any kind (runtime error, timeout, resource limit, protocol error)
//! discard the input. The loop ends once `n` inputs are held or after
//! `max_rounds` rounds.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::outcome::{ExecutionOutcome, Origin, TestInput};

/// Produces candidate argument tuples, e.g. by asking a model.
pub trait CandidateSource {
    type Error;

    /// Up to `want` new candidates. `seen` lists every input already tried.
    fn candidates(
        &mut self,
        round: u32,
        want: usize,
        seen: &[Vec<Value>],
    ) -> Result<Vec<Vec<Value>>, Self::Error>;
}

/// Runs the fragment under test on a batch of argument tuples.
pub trait InputRunner {
    /// One outcome per input, in order.
    fn run_batch(&mut self, batch: &[Vec<Value>]) -> Vec<ExecutionOutcome>;
}

/// An input together with the fragment's own outcome on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedInput {
    pub input: TestInput,
    pub outcome: ExecutionOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Collected {
    /// Valid inputs in generation order.
    pub valid: Vec<CheckedInput>,
    pub discarded: Vec<CheckedInput>,
    pub rounds: u32,
    pub duplicates_dropped: usize,
}

impl Collected {
    /// Own-fragment executions performed.
    pub fn executions(&self) -> usize {
        self.valid.len() + self.discarded.len()
    }

    pub fn inputs(&self) -> Vec<TestInput> {
        self.valid.iter().map(|c| c.input.clone()).collect()
    }

    pub fn outcomes(&self) -> Vec<ExecutionOutcome> {
        self.valid.iter().map(|c| c.outcome.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CollectError<E> {
    #[error("only {valid_count} valid inputs after {} rounds", partial.rounds)]
    InsufficientValidInputs { valid_count: usize, partial: Collected },
    #[error("candidate source failed")]
    Source(E),
    #[error("n and max_rounds must both be at least 1")]
    InvalidParameter,
}

pub fn collect_valid_inputs<S, R>(
    n: usize,
    max_rounds: u32,
    origin: Origin,
    source: &mut S,
    runner: &mut R,
) -> Result<Collected, CollectError<S::Error>>
where
    S: CandidateSource,
    R: InputRunner,
{
    if n == 0 || max_rounds == 0 {
        return Err(CollectError::InvalidParameter);
    }
    let mut out = Collected::default();
    let mut seen: Vec<Vec<Value>> = Vec::new();

    for round in 1..=max_rounds {
        out.rounds = round;
        let want = n - out.valid.len();
        let raw = source
            .candidates(round, want, &seen)
            .map_err(CollectError::Source)?;

        let mut batch: Vec<Vec<Value>> = Vec::with_capacity(want);
        for args in raw {
            if batch.len() == want {
                break;
            }
            if seen.contains(&args) || batch.contains(&args) {
                out.duplicates_dropped += 1;
                continue;
            }
            batch.push(args);
        }
        if batch.is_empty() {
            continue;
        }

        let outcomes = runner.run_batch(&batch);
        debug_assert_eq!(outcomes.len(), batch.len());
        for (args, outcome) in batch.into_iter().zip(outcomes) {
            seen.push(args.clone());
            let checked = CheckedInput {
                input: TestInput::new(args, origin, round),
                outcome,
            };
            if checked.outcome.is_ok() && out.valid.len() < n {
                out.valid.push(checked);
            } else {
                out.discarded.push(checked);
            }
        }
        if out.valid.len() == n {
            return Ok(out);
        }
    }

    Err(CollectError::InsufficientValidInputs {
        valid_count: out.valid.len(),
        partial: out,
    })
}
