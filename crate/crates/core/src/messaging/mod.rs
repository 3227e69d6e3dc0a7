//! Envelopes, layer identities, privilege rules and the bus. This is the
//! only channel between layers.

mod bus;
mod envelope;
mod layer;
mod rules;

pub use bus::{
    AuditRecord, AuditVerdict, Bus, Caller, CensorOutcome, PrivilegeError, PublishError,
    Receipt, Tap,
};
pub use envelope::{Envelope, DEFAULT_SALIENCE};
pub use layer::{Direction, Endpoint, LayerId, MessageKind};
pub use rules::{authorize, Decision, DenyReason};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("percolation only applies to northbound envelopes (seq {seq})")]
pub struct NotNorthbound {
    pub seq: u64,
}

/// Whether a northbound envelope is salient enough to be forwarded past a
/// layer with the given threshold.
pub fn should_percolate(envelope: &Envelope, threshold: f64) -> Result<bool, NotNorthbound> {
    if envelope.direction != Direction::Northbound {
        return Err(NotNorthbound { seq: envelope.seq });
    }
    Ok(envelope.salience >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docs::{Payload, TelemetryDoc};
    use crate::sim::Cell;

    fn north(salience: f64) -> Envelope {
        Envelope::new(
            LayerId::TaskProsecution,
            LayerId::CognitiveControl,
            Payload::Telemetry(TelemetryDoc::Geospatial { cell: Cell(1, 1) }),
        )
        .with_salience(salience)
    }

    #[test]
    fn threshold_comparison() {
        assert!(should_percolate(&north(0.9), 0.5).unwrap());
        assert!(!should_percolate(&north(0.0), 0.1).unwrap());
        assert!(!should_percolate(&north(0.0), 1e-9).unwrap());
        assert!(should_percolate(&north(0.5), 0.5).unwrap());
    }

    #[test]
    fn southbound_is_a_contract_violation() {
        let env = Envelope::new(
            LayerId::CognitiveControl,
            LayerId::TaskProsecution,
            Payload::Telemetry(TelemetryDoc::Status {
                message: "x".into(),
            }),
        );
        assert!(should_percolate(&env, 0.5).is_err());
    }

    #[test]
    fn raising_threshold_never_forwards_more() {
        let saliences = [0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.8, 1.0];
        let thresholds = [0.0, 0.2, 0.5, 0.7, 1.0];
        for pair in thresholds.windows(2) {
            let low: Vec<bool> = saliences
                .iter()
                .map(|&s| should_percolate(&north(s), pair[0]).unwrap())
                .collect();
            let high: Vec<bool> = saliences
                .iter()
                .map(|&s| should_percolate(&north(s), pair[1]).unwrap())
                .collect();
            for (l, h) in low.iter().zip(&high) {
                assert!(!h || *l);
            }
        }
    }
}
