use serde::{Deserialize, Serialize};

use super::layer::{Direction, Endpoint, LayerId, MessageKind};
use crate::docs::Payload;

/// The universal inter-layer message.
///
/// Serialized field order is fixed: seq, tick, source, target, direction,
/// kind, salience, correlation, payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub seq: u64,
    pub tick: u64,
    pub source: Endpoint,
    pub target: LayerId,
    pub direction: Direction,
    pub kind: MessageKind,
    pub salience: f64,
    pub correlation: Option<String>,
    pub payload: Payload,
}

pub const DEFAULT_SALIENCE: f64 = 0.5;

impl Envelope {
    /// Unsequenced envelope; the bus assigns `seq` on publish. Direction and
    /// kind are derived from the endpoints and the payload.
    pub fn new(source: impl Into<Endpoint>, target: LayerId, payload: Payload) -> Self {
        let source = source.into();
        Envelope {
            seq: 0,
            tick: 0,
            source,
            target,
            direction: Direction::between(source, target),
            kind: payload.kind(),
            salience: DEFAULT_SALIENCE,
            correlation: None,
            payload,
        }
    }

    pub fn with_salience(mut self, salience: f64) -> Self {
        self.salience = salience;
        self
    }

    pub fn with_correlation(mut self, correlation: impl Into<String>) -> Self {
        self.correlation = Some(correlation.into());
        self
    }

    pub fn at_tick(mut self, tick: u64) -> Self {
        self.tick = tick;
        self
    }

    /// Re-wrap the payload for the next hop, keeping kind, salience and
    /// correlation.
    pub fn forwarded(&self, via: LayerId, to: LayerId) -> Envelope {
        Envelope {
            seq: 0,
            tick: self.tick,
            source: Endpoint::Layer(via),
            target: to,
            direction: Direction::between(Endpoint::Layer(via), to),
            kind: self.kind,
            salience: self.salience,
            correlation: self.correlation.clone(),
            payload: self.payload.clone(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("envelope serialization is infallible")
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    seq: u64,
    tick: u64,
    source: Endpoint,
    target: LayerId,
    direction: Direction,
    kind: MessageKind,
    salience: f64,
    correlation: &'a Option<String>,
    payload: &'a Payload,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeIn {
    seq: u64,
    tick: u64,
    source: Endpoint,
    target: LayerId,
    direction: Direction,
    kind: MessageKind,
    salience: f64,
    correlation: Option<String>,
    payload: serde_json::Value,
}

impl Serialize for Envelope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        EnvelopeOut {
            seq: self.seq,
            tick: self.tick,
            source: self.source,
            target: self.target,
            direction: self.direction,
            kind: self.kind,
            salience: self.salience,
            correlation: &self.correlation,
            payload: &self.payload,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = EnvelopeIn::deserialize(d)?;
        let payload =
            Payload::from_value(raw.kind, raw.payload).map_err(serde::de::Error::custom)?;
        Ok(Envelope {
            seq: raw.seq,
            tick: raw.tick,
            source: raw.source,
            target: raw.target,
            direction: raw.direction,
            kind: raw.kind,
            salience: raw.salience,
            correlation: raw.correlation,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docs::{HaltDoc, TelemetryDoc};

    #[test]
    fn field_order_is_fixed() {
        let env = Envelope::new(
            LayerId::Aspirational,
            LayerId::TaskProsecution,
            Payload::Halt(HaltDoc {
                rationale: "stop".into(),
            }),
        );
        let line = env.to_json_line();
        assert_eq!(
            line,
            r#"{"seq":0,"tick":0,"source":"Aspirational","target":"TaskProsecution","direction":"southbound","kind":"Halt","salience":0.5,"correlation":null,"payload":{"rationale":"stop"}}"#
        );
        let back: Envelope = serde_json::from_str(&line).unwrap();
        assert_eq!(back, env);
    }

    #[test]
    fn forwarding_preserves_correlation() {
        let env = Envelope::new(
            LayerId::TaskProsecution,
            LayerId::CognitiveControl,
            Payload::Telemetry(TelemetryDoc::Status {
                message: "x".into(),
            }),
        )
        .with_salience(0.8)
        .with_correlation("task-1");
        let fwd = env.forwarded(LayerId::CognitiveControl, LayerId::ExecutiveFunction);
        assert_eq!(fwd.source, Endpoint::Layer(LayerId::CognitiveControl));
        assert_eq!(fwd.correlation.as_deref(), Some("task-1"));
        assert_eq!(fwd.salience, 0.8);
        assert_eq!(fwd.direction, Direction::Northbound);
    }

    #[test]
    fn payload_decoded_by_kind() {
        let line = r#"{"seq":3,"tick":1,"source":"Environment","target":"ExecutiveFunction","direction":"northbound","kind":"Telemetry","salience":0.6,"correlation":null,"payload":{"channel":"power","battery":30,"capacity":100}}"#;
        let env: Envelope = serde_json::from_str(line).unwrap();
        assert_eq!(
            env.payload,
            Payload::Telemetry(TelemetryDoc::Power {
                battery: 30,
                capacity: 100
            })
        );
        assert_eq!(env.to_json_line(), line);
    }
}
