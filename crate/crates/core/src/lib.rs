//! Pure decision logic for two-stage semantic clone detection.
//!
//! This crate carries everything that does not touch a process, a socket or
//! a file: canonical output matching, the per-direction similarity scores and
//! threshold classification, evaluation metrics, parsing of model answers,
//! prompt construction, stage routing and the valid-input collection loop.
//! It is `no_std` and only needs an allocator; the `hyclone` crate supplies
//! the IO around it.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod collect;
pub mod equivalence;
pub mod error;
pub mod metrics;
pub mod outcome;
pub mod pair;
pub mod prompt;
pub mod screen;
pub mod value;

pub use collect::{collect_valid_inputs, CandidateSource, CollectError, Collected, InputRunner};
pub use equivalence::{
    classify, outputs_match, score_pair, CrossExecution, Direction, MatchConfig, MatchEvidence,
    SimilarityScores,
};
pub use error::CoreError;
pub use metrics::{
    compute_metrics, flip_rate, ConfusionMatrix, Metrics, ReportedRates, UndecidablePolicy,
};
pub use outcome::{ExecutionOutcome, OutcomeKind, Origin, TestInput};
pub use pair::{CodePair, Decision, Routing, Stage};
pub use prompt::{Message, Role};
pub use screen::{
    parse_screen_response, ChallengeCondition, Intervention, ParseConfidence, ScreenVerdict,
    Session,
};

/// Similarity threshold applied to both directions.
pub const DEFAULT_THETA: f64 = 0.8;

/// Number of valid test inputs retained per fragment.
pub const DEFAULT_N_TESTS: usize = 16;
