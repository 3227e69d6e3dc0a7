//! JSON-lines trace records. Every line carries a `record` tag.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::docs::OutcomeStatus;
use crate::layers::agent_model::DeclarativeStore;
use crate::messaging::{AuditVerdict, Envelope, LayerId, MessageKind};
use crate::predicate::Facts;
use crate::sim::{Command, Scenario};

pub const TRACE_VERSION: u32 = 1;

/// Everything needed to re-execute a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub seed: u64,
    pub max_ticks: u64,
    pub cognition: String,
    pub concurrent: bool,
    pub settings: Settings,
    pub scenario: Scenario,
    pub constitution: String,
    pub memory: DeclarativeStore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Boot,
    Control,
    Review,
    Handle,
    Pending,
    Env,
    Fault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndStatus {
    Quiescent,
    MaxTicks,
    Failure,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(Box<Header>),
    Process {
        tick: u64,
        layer: LayerId,
        activity: Activity,
        seq: Option<u64>,
        kind: Option<MessageKind>,
    },
    Audit {
        tick: u64,
        seq: u64,
        verdict: AuditVerdict,
        reason: String,
        envelope: Envelope,
        subject: Option<Envelope>,
    },
    Release {
        tick: u64,
        seq: u64,
    },
    Inject {
        tick: u64,
        event: String,
        targets: Vec<LayerId>,
    },
    Owner {
        tick: u64,
        event: String,
    },
    Env {
        tick: u64,
        task: Option<String>,
        command: Option<Command>,
        accepted: Option<bool>,
        reason: Option<String>,
        energy: u32,
        battery: u32,
        waited: bool,
        finished: Option<OutcomeStatus>,
    },
    Snapshot {
        tick: u64,
        layers: BTreeMap<LayerId, serde_json::Value>,
        world: Facts,
    },
    End {
        tick: u64,
        status: EndStatus,
        layer: Option<LayerId>,
        detail: Option<String>,
    },
}

impl TraceRecord {
    pub fn tick(&self) -> Option<u64> {
        match self {
            TraceRecord::Header(_) => None,
            TraceRecord::Process { tick, .. }
            | TraceRecord::Audit { tick, .. }
            | TraceRecord::Release { tick, .. }
            | TraceRecord::Inject { tick, .. }
            | TraceRecord::Owner { tick, .. }
            | TraceRecord::Env { tick, .. }
            | TraceRecord::Snapshot { tick, .. }
            | TraceRecord::End { tick, .. } => Some(*tick),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace records serialize")
    }

    pub fn parse(line: &str) -> Result<TraceRecord, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// Non-empty lines of a trace file.
pub fn lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.trim().is_empty()).collect()
}

/// Parses every line; the error names the 1-based line that failed.
pub fn parse_all(text: &str) -> Result<Vec<TraceRecord>, (usize, String)> {
    lines(text)
        .into_iter()
        .enumerate()
        .map(|(i, l)| TraceRecord::parse(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}
