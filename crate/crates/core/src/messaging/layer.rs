use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six layers, listed from highest to lowest privilege.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerId {
    Aspirational,
    GlobalStrategy,
    AgentModel,
    ExecutiveFunction,
    CognitiveControl,
    TaskProsecution,
}

impl LayerId {
    pub const ALL: [LayerId; 6] = [
        LayerId::Aspirational,
        LayerId::GlobalStrategy,
        LayerId::AgentModel,
        LayerId::ExecutiveFunction,
        LayerId::CognitiveControl,
        LayerId::TaskProsecution,
    ];

    /// 1 is the highest privilege, 6 the lowest.
    pub fn rank(self) -> u8 {
        match self {
            LayerId::Aspirational => 1,
            LayerId::GlobalStrategy => 2,
            LayerId::AgentModel => 3,
            LayerId::ExecutiveFunction => 4,
            LayerId::CognitiveControl => 5,
            LayerId::TaskProsecution => 6,
        }
    }

    pub fn from_rank(rank: u8) -> Option<LayerId> {
        LayerId::ALL.get(usize::from(rank).checked_sub(1)?).copied()
    }

    pub fn index(self) -> usize {
        usize::from(self.rank() - 1)
    }

    /// The adjacent layer one rank up, if any.
    pub fn above(self) -> Option<LayerId> {
        LayerId::from_rank(self.rank() - 1)
    }

    /// The adjacent layer one rank down, if any.
    pub fn below(self) -> Option<LayerId> {
        LayerId::from_rank(self.rank() + 1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LayerId::Aspirational => "Aspirational",
            LayerId::GlobalStrategy => "GlobalStrategy",
            LayerId::AgentModel => "AgentModel",
            LayerId::ExecutiveFunction => "ExecutiveFunction",
            LayerId::CognitiveControl => "CognitiveControl",
            LayerId::TaskProsecution => "TaskProsecution",
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerId::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown layer `{s}`"))
    }
}

/// Who sent an envelope: a layer, or the environment pseudo-source.
/// Serializes as the bare layer name or `"Environment"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Layer(LayerId),
    Environment,
}

impl Endpoint {
    /// Environment sits below the stack, so anything it sends travels north.
    pub fn rank(self) -> u8 {
        match self {
            Endpoint::Layer(l) => l.rank(),
            Endpoint::Environment => 7,
        }
    }

    pub fn layer(self) -> Option<LayerId> {
        match self {
            Endpoint::Layer(l) => Some(l),
            Endpoint::Environment => None,
        }
    }

    pub const ALL: [Endpoint; 7] = [
        Endpoint::Layer(LayerId::Aspirational),
        Endpoint::Layer(LayerId::GlobalStrategy),
        Endpoint::Layer(LayerId::AgentModel),
        Endpoint::Layer(LayerId::ExecutiveFunction),
        Endpoint::Layer(LayerId::CognitiveControl),
        Endpoint::Layer(LayerId::TaskProsecution),
        Endpoint::Environment,
    ];
}

impl From<LayerId> for Endpoint {
    fn from(l: LayerId) -> Self {
        Endpoint::Layer(l)
    }
}

impl Serialize for Endpoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("Environment") {
            Ok(Endpoint::Environment)
        } else {
            s.parse().map(Endpoint::Layer)
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Layer(l) => l.fmt(f),
            Endpoint::Environment => f.write_str("Environment"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Southbound,
    Northbound,
}

impl Direction {
    pub fn between(source: Endpoint, target: LayerId) -> Direction {
        if source.rank() < target.rank() {
            Direction::Southbound
        } else {
            Direction::Northbound
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Mission,
    MoralJudgment,
    StrategicDocument,
    MissionParams,
    Roadmap,
    TaskInstruction,
    Telemetry,
    OutcomeSignal,
    DilemmaEscalation,
    Directive,
    Censor,
    Halt,
    Reboot,
    WorldEvent,
}

impl MessageKind {
    pub const ALL: [MessageKind; 14] = [
        MessageKind::Mission,
        MessageKind::MoralJudgment,
        MessageKind::StrategicDocument,
        MessageKind::MissionParams,
        MessageKind::Roadmap,
        MessageKind::TaskInstruction,
        MessageKind::Telemetry,
        MessageKind::OutcomeSignal,
        MessageKind::DilemmaEscalation,
        MessageKind::Directive,
        MessageKind::Censor,
        MessageKind::Halt,
        MessageKind::Reboot,
        MessageKind::WorldEvent,
    ];

    /// Directive, Censor, Halt and Reboot: may only travel south.
    pub fn is_control(self) -> bool {
        matches!(
            self,
            MessageKind::Directive | MessageKind::Censor | MessageKind::Halt | MessageKind::Reboot
        )
    }

    pub fn is_northbound(self) -> bool {
        matches!(
            self,
            MessageKind::Telemetry | MessageKind::OutcomeSignal | MessageKind::DilemmaEscalation
        )
    }

    /// Everything except the northbound kinds and WorldEvent, which only the
    /// environment may originate.
    pub fn is_southbound(self) -> bool {
        !self.is_northbound() && self != MessageKind::WorldEvent
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Mission => "Mission",
            MessageKind::MoralJudgment => "MoralJudgment",
            MessageKind::StrategicDocument => "StrategicDocument",
            MessageKind::MissionParams => "MissionParams",
            MessageKind::Roadmap => "Roadmap",
            MessageKind::TaskInstruction => "TaskInstruction",
            MessageKind::Telemetry => "Telemetry",
            MessageKind::OutcomeSignal => "OutcomeSignal",
            MessageKind::DilemmaEscalation => "DilemmaEscalation",
            MessageKind::Directive => "Directive",
            MessageKind::Censor => "Censor",
            MessageKind::Halt => "Halt",
            MessageKind::Reboot => "Reboot",
            MessageKind::WorldEvent => "WorldEvent",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown message kind `{s}`"))
    }
}
