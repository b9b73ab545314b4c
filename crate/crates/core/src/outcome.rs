use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Which fragment's generator produced an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    FromA,
    FromB,
}

/// One positional argument tuple for a fragment's entrypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInput {
    pub args: Vec<Value>,
    pub origin: Origin,
    pub generation_round: u32,
}

impl TestInput {
    pub fn new(args: Vec<Value>, origin: Origin, generation_round: u32) -> Self {
        Self {
            args,
            origin,
            generation_round,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Ok,
    RuntimeError,
    Timeout,
    ResourceLimit,
    ProtocolError,
}

/// Result of running one fragment on one input.
///
/// `value` is present exactly when `kind` is [`OutcomeKind::Ok`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    /// Wall-clock seconds.
    pub duration: f64,
}

impl ExecutionOutcome {
    pub fn ok(value: Value, duration: f64) -> Self {
        Self {
            kind: OutcomeKind::Ok,
            value: Some(value),
            error_kind: None,
            error_message: None,
            duration,
        }
    }

    /// A non-ok outcome. Passing [`OutcomeKind::Ok`] here is a logic error.
    pub fn failure(
        kind: OutcomeKind,
        error_kind: impl Into<String>,
        error_message: impl Into<String>,
        duration: f64,
    ) -> Self {
        debug_assert!(kind != OutcomeKind::Ok);
        Self {
            kind,
            value: None,
            error_kind: Some(error_kind.into()),
            error_message: Some(error_message.into()),
            duration,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.kind == OutcomeKind::Ok
    }

    /// The canonical value for ok outcomes.
    pub fn ok_value(&self) -> Option<&Value> {
        if self.is_ok() {
            self.value.as_ref()
        } else {
            None
        }
    }
}
