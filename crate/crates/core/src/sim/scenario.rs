use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::command::{Cell, Verb};
use crate::docs::ResourceState;
use crate::messaging::LayerId;

/// Energy cost per verb plus the recharge rate. Rejected commands cost
/// nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostTable {
    #[serde(rename = "move")]
    pub move_: u32,
    pub clean_cell: u32,
    pub grasp: u32,
    pub release: u32,
    pub ask_owner: u32,
    pub speak: u32,
    pub api_call: u32,
    pub recharge: u32,
    pub recharge_rate: u32,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            move_: 1,
            clean_cell: 2,
            grasp: 1,
            release: 1,
            ask_owner: 1,
            speak: 1,
            api_call: 1,
            recharge: 0,
            recharge_rate: 10,
        }
    }
}

impl CostTable {
    pub fn cost(&self, verb: Verb) -> u32 {
        match verb {
            Verb::Move => self.move_,
            Verb::CleanCell => self.clean_cell,
            Verb::Grasp => self.grasp,
            Verb::Release => self.release,
            Verb::AskOwner => self.ask_owner,
            Verb::Speak => self.speak,
            Verb::Recharge => self.recharge,
            Verb::ApiCall => self.api_call,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub cell: Cell,
    pub battery: u32,
    #[serde(default = "default_capacity")]
    pub capacity: u32,
}

fn default_capacity() -> u32 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirtCell {
    pub cell: Cell,
    pub dirt: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub id: String,
    pub room: String,
    pub task: String,
    #[serde(default)]
    pub essential: bool,
    pub urgency: f64,
    pub importance: f64,
    #[serde(default)]
    pub tags: Vec<String>,
    pub cells: Vec<DirtCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub cell: Cell,
    #[serde(default = "yes")]
    pub graspable: bool,
    #[serde(default)]
    pub blocks: bool,
    #[serde(default)]
    pub hazards: Vec<String>,
    #[serde(default)]
    pub in_danger: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnerSpec {
    pub cell: Cell,
    #[serde(default = "default_responds_after")]
    pub responds_after: u64,
}

fn default_responds_after() -> u64 {
    3
}

impl Default for OwnerSpec {
    fn default() -> Self {
        OwnerSpec {
            cell: Cell(0, 0),
            responds_after: default_responds_after(),
        }
    }
}

/// A command that always fails with `reason` when issued inside `zone`
/// (or anywhere, when no zone is given).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub verb: Verb,
    #[serde(default)]
    pub zone: Option<String>,
    #[serde(default = "default_fault_reason")]
    pub reason: String,
}

fn default_fault_reason() -> String {
    "effector-fault".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEndpointSpec {
    pub name: String,
    #[serde(default)]
    pub fails: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirtDelta {
    pub cell: Cell,
    pub amount: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectUpdate {
    pub id: String,
    #[serde(default)]
    pub in_danger: Option<bool>,
    #[serde(default)]
    pub cell: Option<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub tick: u64,
    pub event: String,
    #[serde(default)]
    pub facts: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub dirt: Vec<DirtDelta>,
    #[serde(default)]
    pub objects: Vec<ObjectUpdate>,
    #[serde(default = "default_event_targets")]
    pub targets: Vec<LayerId>,
}

fn default_event_targets() -> Vec<LayerId> {
    vec![LayerId::GlobalStrategy, LayerId::ExecutiveFunction]
}

/// Extra knowledge-table entry for Global Strategy. `pattern` uses `*` for a
/// single path segment; `{1}` in `text` is replaced with the first wildcard
/// capture and `{value}` with the fact's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRuleSpec {
    pub pattern: String,
    pub test: RuleTest,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub requires: Vec<String>,
    #[serde(default)]
    pub urgent: bool,
    #[serde(default)]
    pub harm: bool,
    #[serde(default = "default_weight")]
    pub weight: u32,
}

fn default_weight() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTest {
    Positive,
    IsTrue,
    Present,
}

/// Layer-level fault injection for crash-durability tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanicFault {
    pub layer: LayerId,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub width: i32,
    pub height: i32,
    #[serde(default)]
    pub walls: Vec<Cell>,
    pub station: Cell,
    pub robot: RobotSpec,
    pub zones: Vec<ZoneSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub owner: OwnerSpec,
    #[serde(default)]
    pub costs: CostTable,
    pub budget: ResourceState,
    #[serde(default)]
    pub faults: Vec<Fault>,
    #[serde(default)]
    pub api_endpoints: Vec<ApiEndpointSpec>,
    #[serde(default)]
    pub schedule: Vec<ScheduledEvent>,
    #[serde(default)]
    pub capabilities: BTreeMap<String, f64>,
    #[serde(default)]
    pub limitations: Vec<String>,
    #[serde(default)]
    pub strategy_rules: Vec<StrategyRuleSpec>,
    /// Registered effector verbs; all verbs when absent.
    #[serde(default)]
    pub effectors: Option<Vec<Verb>>,
    #[serde(default)]
    pub panic: Option<PanicFault>,
    /// Runtime overrides in `key = value` form, applied before CLI overrides.
    #[serde(default)]
    pub config: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(e.to_string()))?;
        Scenario::from_json(&text)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.0 >= 0 && c.1 >= 0 && c.0 < self.width && c.1 < self.height
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.width <= 0 || self.height <= 0 {
            return bad("grid must be non-empty".into());
        }
        if self.robot.battery > self.robot.capacity {
            return bad("battery exceeds capacity".into());
        }
        for (what, c) in [("station", self.station), ("robot", self.robot.cell)] {
            if !self.in_bounds(c) || self.walls.contains(&c) {
                return bad(format!("{what} cell {c} is not a floor cell"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for z in &self.zones {
            if !seen.insert(z.id.clone()) {
                return bad(format!("duplicate zone `{}`", z.id));
            }
            if !(0.0..=1.0).contains(&z.urgency) || !(0.0..=1.0).contains(&z.importance) {
                return bad(format!("zone `{}` urgency/importance outside [0,1]", z.id));
            }
            for dc in &z.cells {
                if !self.in_bounds(dc.cell) || self.walls.contains(&dc.cell) {
                    return bad(format!("zone `{}` cell {} is not a floor cell", z.id, dc.cell));
                }
                if dc.dirt > 9 {
                    return bad(format!("dirt {} at {} exceeds 9", dc.dirt, dc.cell));
                }
            }
        }
        for o in &self.objects {
            if !self.in_bounds(o.cell) {
                return bad(format!("object `{}` out of bounds", o.id));
            }
        }
        if self.schedule.windows(2).any(|w| w[0].tick > w[1].tick) {
            return bad("schedule must be sorted by tick".into());
        }
        for (name, c) in &self.capabilities {
            if !(0.0..=1.0).contains(c) {
                return bad(format!("capability `{name}` confidence outside [0,1]"));
            }
        }
        Ok(())
    }
}
