//! Routing privilege rules.
//!
//! Ordinary traffic is adjacency-only: a layer may talk south to the layer
//! directly beneath it and north to the layer directly above it. The
//! Aspirational layer is the single wildcard and may reach any lower layer
//! with missions, judgments and interventions. The environment enters the
//! stack only at Global Strategy, Executive Function and Cognitive Control.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::layer::{Endpoint, LayerId, MessageKind};

/// Machine-readable reason attached to a denied route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenyReason {
    SelfAddressed,
    ControlNorthbound,
    KindWrongDirection,
    NotAdjacent,
    EnvironmentTarget,
    EnvironmentKind,
    WorldEventFromLayer,
}

impl DenyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenyReason::SelfAddressed => "self-addressed",
            DenyReason::ControlNorthbound => "control-northbound",
            DenyReason::KindWrongDirection => "kind-wrong-direction",
            DenyReason::NotAdjacent => "not-adjacent",
            DenyReason::EnvironmentTarget => "environment-target",
            DenyReason::EnvironmentKind => "environment-kind",
            DenyReason::WorldEventFromLayer => "world-event-from-layer",
        }
    }
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allow,
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allow(self) -> bool {
        matches!(self, Decision::Allow)
    }
}

const ASPIRATIONAL_WILDCARD: [MessageKind; 6] = [
    MessageKind::Directive,
    MessageKind::Censor,
    MessageKind::Halt,
    MessageKind::Reboot,
    MessageKind::Mission,
    MessageKind::MoralJudgment,
];

const ENVIRONMENT_TARGETS: [LayerId; 3] = [
    LayerId::GlobalStrategy,
    LayerId::ExecutiveFunction,
    LayerId::CognitiveControl,
];

/// Total routing decision for a (source, target, kind) triple.
pub fn authorize(source: Endpoint, target: LayerId, kind: MessageKind) -> Decision {
    let layer = match source {
        Endpoint::Environment => {
            if !matches!(kind, MessageKind::WorldEvent | MessageKind::Telemetry) {
                return Decision::Deny(DenyReason::EnvironmentKind);
            }
            if !ENVIRONMENT_TARGETS.contains(&target) {
                return Decision::Deny(DenyReason::EnvironmentTarget);
            }
            return Decision::Allow;
        }
        Endpoint::Layer(l) => l,
    };

    if layer == target {
        return Decision::Deny(DenyReason::SelfAddressed);
    }
    if kind == MessageKind::WorldEvent {
        return Decision::Deny(DenyReason::WorldEventFromLayer);
    }

    let (src, dst) = (layer.rank(), target.rank());
    if src > dst {
        // Travelling north.
        if kind.is_control() {
            return Decision::Deny(DenyReason::ControlNorthbound);
        }
        if !kind.is_northbound() {
            return Decision::Deny(DenyReason::KindWrongDirection);
        }
        if src != dst + 1 {
            return Decision::Deny(DenyReason::NotAdjacent);
        }
        return Decision::Allow;
    }

    // Travelling south.
    if layer == LayerId::Aspirational && ASPIRATIONAL_WILDCARD.contains(&kind) {
        return Decision::Allow;
    }
    if !kind.is_southbound() {
        return Decision::Deny(DenyReason::KindWrongDirection);
    }
    if dst != src + 1 {
        return Decision::Deny(DenyReason::NotAdjacent);
    }
    Decision::Allow
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(
            authorize(
                LayerId::GlobalStrategy.into(),
                LayerId::AgentModel,
                MessageKind::StrategicDocument
            ),
            Decision::Allow
        );
        assert_eq!(
            authorize(
                LayerId::TaskProsecution.into(),
                LayerId::CognitiveControl,
                MessageKind::Directive
            ),
            Decision::Deny(DenyReason::ControlNorthbound)
        );
        assert_eq!(
            authorize(
                LayerId::Aspirational.into(),
                LayerId::TaskProsecution,
                MessageKind::Halt
            ),
            Decision::Allow
        );
    }

    #[test]
    fn environment_entry_points() {
        for target in LayerId::ALL {
            let d = authorize(Endpoint::Environment, target, MessageKind::WorldEvent);
            assert_eq!(d.is_allow(), ENVIRONMENT_TARGETS.contains(&target), "{target}");
        }
        assert_eq!(
            authorize(Endpoint::Environment, LayerId::GlobalStrategy, MessageKind::Mission),
            Decision::Deny(DenyReason::EnvironmentKind)
        );
    }

    #[test]
    fn skipping_a_layer_is_denied() {
        assert_eq!(
            authorize(
                LayerId::GlobalStrategy.into(),
                LayerId::ExecutiveFunction,
                MessageKind::StrategicDocument
            ),
            Decision::Deny(DenyReason::NotAdjacent)
        );
        assert_eq!(
            authorize(
                LayerId::TaskProsecution.into(),
                LayerId::ExecutiveFunction,
                MessageKind::OutcomeSignal
            ),
            Decision::Deny(DenyReason::NotAdjacent)
        );
    }
}
