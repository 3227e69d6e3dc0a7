//! Payload documents carried by envelopes. Each message kind has exactly one
//! payload schema, and all of them serialize with a stable field order so
//! traces are byte-comparable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::messaging::{LayerId, MessageKind};
use crate::predicate::{Facts, Predicate};
use crate::sim::{Cell, Command, CostTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionDoc {
    pub statement: Option<String>,
    pub imperatives: Vec<String>,
    pub frameworks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub id: String,
    pub text: String,
    pub tags: Vec<String>,
    pub priority: u32,
    /// Fact keys the objective is grounded in.
    pub grounds: Vec<String>,
    pub requires: Vec<String>,
    /// Derived from the mission itself rather than from world facts.
    pub intrinsic: bool,
    pub urgent: bool,
    pub harm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategicDocument {
    pub mission_ref: String,
    pub version: u64,
    pub objectives: Vec<Objective>,
    pub strategies: Vec<String>,
    pub principles: Vec<String>,
    /// Objective ids, most important first.
    pub priorities: Vec<String>,
    pub world_version: u64,
}

impl StrategicDocument {
    /// Equality ignoring the two version counters.
    pub fn same_content(&self, other: &StrategicDocument) -> bool {
        self.mission_ref == other.mission_ref
            && self.objectives == other.objectives
            && self.strategies == other.strategies
            && self.principles == other.principles
            && self.priorities == other.priorities
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleObjective {
    pub objective: Objective,
    pub required_capabilities: Vec<String>,
    pub min_confidence_met: bool,
    pub annotations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferredObjective {
    pub objective: Objective,
    pub reasons: Vec<String>,
    pub annotations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionParams {
    pub strategic_ref: String,
    pub strategic_version: u64,
    pub feasible_objectives: Vec<FeasibleObjective>,
    pub deferred_objectives: Vec<DeferredObjective>,
    /// Episodic sequence number of the agent state the shaping used.
    pub state_snapshot_ref: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceState {
    pub energy: u32,
    pub time: u32,
    pub money: u32,
}

impl ResourceState {
    pub fn new(energy: u32, time: u32, money: u32) -> Self {
        ResourceState {
            energy,
            time,
            money,
        }
    }

    /// The first resource in which `cost` exceeds `self`, if any.
    pub fn shortfall(&self, cost: &ResourceState) -> Option<&'static str> {
        if cost.energy > self.energy {
            Some("energy")
        } else if cost.time > self.time {
            Some("time")
        } else if cost.money > self.money {
            Some("money")
        } else {
            None
        }
    }

    pub fn saturating_sub(&self, cost: &ResourceState) -> ResourceState {
        ResourceState {
            energy: self.energy.saturating_sub(cost.energy),
            time: self.time.saturating_sub(cost.time),
            money: self.money.saturating_sub(cost.money),
        }
    }

    pub fn add(&self, other: &ResourceState) -> ResourceState {
        ResourceState {
            energy: self.energy + other.energy,
            time: self.time + other.time,
            money: self.money + other.money,
        }
    }

    pub fn get(&self, resource: &str) -> u32 {
        match resource {
            "energy" => self.energy,
            "time" => self.time,
            "money" => self.money,
            _ => 0,
        }
    }
}

/// One approach step; expanded into concrete commands when execution starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum StepTemplate {
    Goto { cell: Cell },
    Grasp { object: String },
    Release { object: String },
    CleanZone { zone: String },
    AskOwner { object: String },
    Speak { text: String },
    Recharge { ticks: u32 },
    ApiCall { endpoint: String },
    Raw { command: Command },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproachStep {
    #[serde(flatten)]
    pub template: StepTemplate,
    /// A rejected required command ends the task with the rejection reason.
    #[serde(default)]
    pub required: bool,
}

impl ApproachStep {
    pub fn new(template: StepTemplate) -> Self {
        ApproachStep {
            template,
            required: false,
        }
    }

    pub fn required(template: StepTemplate) -> Self {
        ApproachStep {
            template,
            required: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub objective_ref: String,
    pub title: String,
    pub methodology: String,
    pub approach: Vec<ApproachStep>,
    pub success_def: Predicate,
    pub failure_def: Predicate,
    /// Reason reported when `failure_def` is what ended the task.
    pub failure_reason: String,
    pub cost: ResourceState,
    pub prerequisites: Vec<String>,
    pub essential: bool,
    pub urgency: f64,
    pub importance: f64,
    pub tags: Vec<String>,
    pub capabilities: Vec<String>,
    /// Idle ticks to keep watching for success once the approach is spent.
    pub settle_ticks: u32,
    pub contingency_for: Option<String>,
}

impl TaskSpec {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub id: String,
    pub after: Vec<String>,
    pub test: Predicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThenAction {
    Retry,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Risk {
    pub id: String,
    pub task_id: String,
    pub hazard: String,
    pub condition: Predicate,
    /// Failure reason that triggers the contingency.
    pub failure_reason: String,
    pub contingency: Vec<String>,
    pub then: ThenAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deferral {
    pub task_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roadmap {
    pub mission_ref: String,
    pub version: u64,
    pub tasks: Vec<TaskSpec>,
    pub allocation: BTreeMap<String, ResourceState>,
    pub deferred: Vec<Deferral>,
    pub checkpoints: Vec<Checkpoint>,
    pub risks: Vec<Risk>,
    pub budget: ResourceState,
    pub completed: Vec<String>,
    pub abandoned: Vec<Deferral>,
}

impl Roadmap {
    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Equality ignoring the version counter.
    pub fn same_content(&self, other: &Roadmap) -> bool {
        self.tasks == other.tasks
            && self.allocation == other.allocation
            && self.deferred == other.deferred
            && self.checkpoints == other.checkpoints
            && self.risks == other.risks
            && self.completed == other.completed
            && self.abandoned == other.abandoned
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstruction {
    pub task: TaskSpec,
    pub roadmap_version: u64,
    pub attempt: u32,
    /// Task id whose execution this instruction supersedes.
    pub preempts: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSignal {
    pub task_id: String,
    pub status: OutcomeStatus,
    pub reason: Option<String>,
    pub observed: Facts,
    pub resources_spent: ResourceState,
    pub commands: u32,
}

impl OutcomeSignal {
    pub fn is_success(&self) -> bool {
        self.status == OutcomeStatus::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EscalationReason {
    Frustration,
    MoralDeny,
    Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationOption {
    pub id: String,
    pub pros: Vec<String>,
    pub cons: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deliberation {
    pub options: Vec<DeliberationOption>,
    pub chosen: String,
    pub record: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum TelemetryDoc {
    Power {
        battery: u32,
        capacity: u32,
    },
    Geospatial {
        cell: Cell,
    },
    TaskResult {
        task_id: String,
        success: bool,
        capabilities: Vec<String>,
        observed: Facts,
        energy_spent: u32,
    },
    Escalation {
        reason: EscalationReason,
        task_id: Option<String>,
        detail: String,
    },
    Status {
        message: String,
    },
    Decision {
        decision: String,
        task_id: Option<String>,
        detail: String,
    },
    Deliberation {
        deliberation: Deliberation,
    },
    Checkpoint {
        id: String,
        passed: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilemmaOption {
    pub id: String,
    pub summary: String,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilemmaDoc {
    pub dilemma_id: String,
    pub origin: LayerId,
    pub current: Option<String>,
    pub options: Vec<DilemmaOption>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Approve,
    Deny,
    Amend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub verdict: Verdict,
    pub rationale: String,
    /// 1-based imperative numbers.
    pub cited_principles: Vec<usize>,
    pub preferred_option: Option<String>,
    /// Ids of the items responsible for a deny or amend.
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoralJudgmentDoc {
    pub for_layer: LayerId,
    pub dilemma_id: Option<String>,
    pub judgment: Judgment,
    pub replan: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectiveDoc {
    pub rationale: String,
    pub exclude: Vec<String>,
    pub subject: Option<u64>,
    pub cited_principles: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensorDoc {
    pub subject: u64,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaltDoc {
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebootDoc {
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneInfo {
    pub id: String,
    pub room: String,
    pub task: String,
    pub essential: bool,
    pub urgency: f64,
    pub importance: f64,
    pub tags: Vec<String>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub id: String,
    pub cell: Cell,
    pub blocks: bool,
    pub hazards: Vec<String>,
}

/// Static house description the environment reports on its first survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub width: i32,
    pub height: i32,
    pub walls: Vec<Cell>,
    pub zones: Vec<ZoneInfo>,
    pub objects: Vec<ObjectInfo>,
    pub station: Cell,
    pub robot: Cell,
    pub capacity: u32,
    pub costs: CostTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEventDoc {
    pub event: String,
    pub facts: BTreeMap<String, serde_json::Value>,
    pub layout: Option<Layout>,
}

/// Payload of an envelope; the variant determines the message kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Mission(MissionDoc),
    MoralJudgment(MoralJudgmentDoc),
    StrategicDocument(StrategicDocument),
    MissionParams(MissionParams),
    Roadmap(Roadmap),
    TaskInstruction(TaskInstruction),
    Telemetry(TelemetryDoc),
    OutcomeSignal(OutcomeSignal),
    DilemmaEscalation(DilemmaDoc),
    Directive(DirectiveDoc),
    Censor(CensorDoc),
    Halt(HaltDoc),
    Reboot(RebootDoc),
    WorldEvent(WorldEventDoc),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Mission(_) => MessageKind::Mission,
            Payload::MoralJudgment(_) => MessageKind::MoralJudgment,
            Payload::StrategicDocument(_) => MessageKind::StrategicDocument,
            Payload::MissionParams(_) => MessageKind::MissionParams,
            Payload::Roadmap(_) => MessageKind::Roadmap,
            Payload::TaskInstruction(_) => MessageKind::TaskInstruction,
            Payload::Telemetry(_) => MessageKind::Telemetry,
            Payload::OutcomeSignal(_) => MessageKind::OutcomeSignal,
            Payload::DilemmaEscalation(_) => MessageKind::DilemmaEscalation,
            Payload::Directive(_) => MessageKind::Directive,
            Payload::Censor(_) => MessageKind::Censor,
            Payload::Halt(_) => MessageKind::Halt,
            Payload::Reboot(_) => MessageKind::Reboot,
            Payload::WorldEvent(_) => MessageKind::WorldEvent,
        }
    }

    /// Decode a payload using the schema selected by `kind`.
    pub fn from_value(kind: MessageKind, value: serde_json::Value) -> serde_json::Result<Payload> {
        use serde_json::from_value as de;
        Ok(match kind {
            MessageKind::Mission => Payload::Mission(de(value)?),
            MessageKind::MoralJudgment => Payload::MoralJudgment(de(value)?),
            MessageKind::StrategicDocument => Payload::StrategicDocument(de(value)?),
            MessageKind::MissionParams => Payload::MissionParams(de(value)?),
            MessageKind::Roadmap => Payload::Roadmap(de(value)?),
            MessageKind::TaskInstruction => Payload::TaskInstruction(de(value)?),
            MessageKind::Telemetry => Payload::Telemetry(de(value)?),
            MessageKind::OutcomeSignal => Payload::OutcomeSignal(de(value)?),
            MessageKind::DilemmaEscalation => Payload::DilemmaEscalation(de(value)?),
            MessageKind::Directive => Payload::Directive(de(value)?),
            MessageKind::Censor => Payload::Censor(de(value)?),
            MessageKind::Halt => Payload::Halt(de(value)?),
            MessageKind::Reboot => Payload::Reboot(de(value)?),
            MessageKind::WorldEvent => Payload::WorldEvent(de(value)?),
        })
    }
}
