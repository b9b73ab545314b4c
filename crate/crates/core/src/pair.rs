use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Two source fragments and, optionally, whether they are a semantic clone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePair {
    pub id: String,
    #[serde(rename = "code_a")]
    pub fragment_a: String,
    #[serde(rename = "code_b")]
    pub fragment_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

impl CodePair {
    pub fn new(
        id: impl Into<String>,
        fragment_a: impl Into<String>,
        fragment_b: impl Into<String>,
        label: Option<bool>,
    ) -> Self {
        Self {
            id: id.into(),
            fragment_a: fragment_a.into(),
            fragment_b: fragment_b.into(),
            label,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let blank = |s: &str| s.trim().is_empty();
        if blank(&self.id) {
            return Err(CoreError::InvalidParameter {
                name: "id",
                reason: "must be nonempty".into(),
            });
        }
        if blank(&self.fragment_a) || blank(&self.fragment_b) {
            return Err(CoreError::InvalidParameter {
                name: "code",
                reason: alloc::format!("pair {} has an empty fragment", self.id),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Clone,
    NonClone,
    Undecidable,
}

impl From<bool> for Decision {
    fn from(is_clone: bool) -> Self {
        if is_clone {
            Decision::Clone
        } else {
            Decision::NonClone
        }
    }
}

/// The stage that produced a final decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LlmScreen,
    ExecValidated,
}

/// Which screen answer sends a pair to execution-based validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    /// Screen-positive pairs are accepted as clones; screen-negative pairs
    /// are validated by execution.
    #[default]
    ValidateNegatives,
    /// Screen-negative pairs are rejected; screen-positive pairs are
    /// confirmed or rejected by execution.
    ValidatePositives,
}

impl Routing {
    /// Whether a pair with this screen answer goes to execution.
    pub fn needs_execution(self, screen_is_clone: bool) -> bool {
        match self {
            Routing::ValidateNegatives => !screen_is_clone,
            Routing::ValidatePositives => screen_is_clone,
        }
    }

    /// Decision taken at the screen for pairs that skip execution.
    pub fn screen_decision(self) -> Decision {
        match self {
            Routing::ValidateNegatives => Decision::Clone,
            Routing::ValidatePositives => Decision::NonClone,
        }
    }
}
