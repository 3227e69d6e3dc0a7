//! The reasoning interface every layer calls. A deterministic rule engine
//! backs tests; an HTTP adapter speaks the same request/response documents
//! to an external service.

mod ensemble;
mod external;
mod rule;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docs::{DeferredObjective, Judgment, Objective, TaskSpec};

pub use ensemble::ensemble_judge;
pub use external::{ExternalEngine, WithFallback, ADDR_ENV};
pub use rule::{slug, RuleEngine};
pub(crate) use rule::match_pattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestKind {
    Judge,
    Strategize,
    ShapeMission,
    Plan,
    Deliberate,
}

impl RequestKind {
    pub const ALL: [RequestKind; 5] = [
        RequestKind::Judge,
        RequestKind::Strategize,
        RequestKind::ShapeMission,
        RequestKind::Plan,
        RequestKind::Deliberate,
    ];

    pub fn required_sections(self) -> &'static [&'static str] {
        match self {
            RequestKind::Judge => &["constitution", "subject"],
            RequestKind::Strategize => &["mission", "world", "rules"],
            RequestKind::ShapeMission => &["objectives", "agent_state"],
            RequestKind::Plan => &["objectives", "layout", "facts"],
            RequestKind::Deliberate => &["options"],
        }
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSection {
    pub name: String,
    pub content: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitionRequest {
    pub kind: RequestKind,
    pub context: Vec<ContextSection>,
    pub seed: u64,
}

impl CognitionRequest {
    pub fn new(kind: RequestKind, seed: u64) -> Self {
        CognitionRequest {
            kind,
            context: Vec::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, content: impl Serialize) -> Self {
        let content = serde_json::to_value(content).expect("context sections serialize");
        self.context.push(ContextSection {
            name: name.to_string(),
            content,
        });
        self
    }

    pub fn section(&self, name: &str) -> Option<&serde_json::Value> {
        self.context
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.content)
    }

    pub fn validate(&self) -> Result<(), CognitionError> {
        for &name in self.kind.required_sections() {
            if self.section(name).is_none() {
                return Err(CognitionError::MissingSection {
                    kind: self.kind,
                    section: name,
                });
            }
        }
        Ok(())
    }

    /// Decodes a section into a typed value.
    pub fn decode<T: serde::de::DeserializeOwned>(&self, name: &'static str) -> Result<T, CognitionError> {
        let value = self.section(name).ok_or(CognitionError::MissingSection {
            kind: self.kind,
            section: name,
        })?;
        serde_json::from_value(value.clone()).map_err(|e| CognitionError::Malformed {
            section: name,
            detail: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProposal {
    /// In priority order.
    pub objectives: Vec<Objective>,
    pub strategies: Vec<String>,
    pub principles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingNotes {
    /// Objective id to annotations.
    pub annotations: std::collections::BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanProposal {
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustments {
    /// Option id to a score adjustment in [-0.5, 0.5].
    pub adjustments: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body")]
pub enum CognitionResponse {
    Judge(Judgment),
    Strategize(StrategyProposal),
    ShapeMission(ShapingNotes),
    Plan(PlanProposal),
    Deliberate(Adjustments),
}

impl CognitionResponse {
    pub fn kind(&self) -> RequestKind {
        match self {
            CognitionResponse::Judge(_) => RequestKind::Judge,
            CognitionResponse::Strategize(_) => RequestKind::Strategize,
            CognitionResponse::ShapeMission(_) => RequestKind::ShapeMission,
            CognitionResponse::Plan(_) => RequestKind::Plan,
            CognitionResponse::Deliberate(_) => RequestKind::Deliberate,
        }
    }

    /// Checks the response against the schema invariants of its kind.
    pub fn validate(&self, imperatives: usize) -> Result<(), String> {
        match self {
            CognitionResponse::Judge(j) => {
                if j.verdict != crate::docs::Verdict::Approve && j.rationale.trim().is_empty() {
                    return Err("deny and amend need a rationale".into());
                }
                if let Some(bad) = j
                    .cited_principles
                    .iter()
                    .find(|&&i| i == 0 || i > imperatives)
                {
                    return Err(format!("cited principle {bad} out of range"));
                }
                Ok(())
            }
            CognitionResponse::Deliberate(a) => a
                .adjustments
                .values()
                .all(|v| (-0.5..=0.5).contains(v))
                .then_some(())
                .ok_or_else(|| "adjustment outside [-0.5, 0.5]".into()),
            CognitionResponse::Strategize(p) => {
                let mut ids = std::collections::BTreeSet::new();
                p.objectives
                    .iter()
                    .all(|o| ids.insert(o.id.as_str()))
                    .then_some(())
                    .ok_or_else(|| "duplicate objective id".into())
            }
            CognitionResponse::ShapeMission(_) => Ok(()),
            CognitionResponse::Plan(p) => {
                let mut ids = std::collections::BTreeSet::new();
                p.tasks
                    .iter()
                    .all(|t| ids.insert(t.id.as_str()) && !t.approach.is_empty())
                    .then_some(())
                    .ok_or_else(|| "duplicate task id or empty approach".into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CognitionError {
    #[error("{kind} request is missing the `{section}` section")]
    MissingSection {
        kind: RequestKind,
        section: &'static str,
    },
    #[error("section `{section}` is malformed: {detail}")]
    Malformed {
        section: &'static str,
        detail: String,
    },
    #[error("cognition engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("engine answered a {got} request with a {expected} response")]
    WrongKind {
        expected: RequestKind,
        got: RequestKind,
    },
    #[error("engine configuration: {0}")]
    Configuration(String),
}

/// Deferred objectives passed to shaping so the engine can annotate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingItem {
    pub objective: Objective,
    pub deferred: Option<DeferredObjective>,
}

pub trait CognitionEngine: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError>;
}

impl<T: CognitionEngine + ?Sized> CognitionEngine for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        (**self).evaluate(request)
    }
}

impl<T: CognitionEngine + ?Sized> CognitionEngine for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        (**self).evaluate(request)
    }
}
