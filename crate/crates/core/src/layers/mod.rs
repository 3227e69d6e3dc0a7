//! The six layers. Each one consumes envelopes from its inbox and produces
//! envelopes through a [`Ctx`] outbox; the scheduler publishes the outbox on
//! the bus after the handler returns.

pub mod agent_model;
pub mod aspirational;
pub mod cognitive_control;
pub mod executive;
pub mod global_strategy;
pub mod task_prosecution;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cognition::{CognitionEngine, CognitionError, CognitionRequest, CognitionResponse, RequestKind};
use crate::config::Settings;
use crate::docs::Payload;
use crate::messaging::{should_percolate, Direction, Envelope, LayerId};

pub use agent_model::AgentModel;
pub use aspirational::Aspirational;
pub use cognitive_control::CognitiveControl;
pub use executive::ExecutiveFunction;
pub use global_strategy::GlobalStrategy;
pub use task_prosecution::TaskProsecution;

/// Salience assigned to each northbound signal.
pub mod salience {
    pub const GEOSPATIAL: f64 = 0.1;
    pub const DECISION: f64 = 0.2;
    pub const STATUS: f64 = 0.3;
    pub const SUCCESS: f64 = 0.4;
    pub const TASK_RESULT: f64 = 0.5;
    pub const POWER: f64 = 0.6;
    pub const DELIBERATION: f64 = 0.6;
    pub const ESCALATION: f64 = 0.7;
    pub const FAILURE: f64 = 0.8;
    pub const DILEMMA: f64 = 0.9;
}

/// Everything a handler may touch besides its own state.
pub struct Ctx<'a> {
    pub layer: LayerId,
    pub tick: u64,
    pub settings: &'a Settings,
    engine: &'a dyn CognitionEngine,
    seed: u64,
    outbox: Vec<Envelope>,
    calls: u64,
}

impl<'a> Ctx<'a> {
    pub fn new(
        layer: LayerId,
        tick: u64,
        settings: &'a Settings,
        engine: &'a dyn CognitionEngine,
        seed: u64,
    ) -> Self {
        Ctx {
            layer,
            tick,
            settings,
            engine,
            seed,
            outbox: Vec::new(),
            calls: 0,
        }
    }

    /// Queues an envelope from this layer to `target`.
    pub fn publish(&mut self, target: LayerId, payload: Payload) -> &mut Envelope {
        let env = Envelope::new(self.layer, target, payload).at_tick(self.tick);
        self.outbox.push(env);
        self.outbox.last_mut().expect("just pushed")
    }

    pub fn outbox(&self) -> &[Envelope] {
        &self.outbox
    }

    pub fn into_outbox(self) -> Vec<Envelope> {
        self.outbox
    }

    /// Forwards a northbound envelope one hop if it clears this layer's
    /// threshold. Returns whether it was forwarded.
    pub fn percolate(&mut self, env: &Envelope) -> bool {
        if env.direction != Direction::Northbound {
            return false;
        }
        let Some(up) = self.layer.above() else {
            return false;
        };
        let threshold = self.settings.threshold(self.layer);
        if should_percolate(env, threshold).unwrap_or(false) {
            self.outbox.push(env.forwarded(self.layer, up).at_tick(self.tick));
            return true;
        }
        false
    }

    /// Builds a request seeded from the run seed, the tick, the layer and
    /// the number of calls made so far in this activity.
    pub fn request(&mut self, kind: RequestKind) -> CognitionRequest {
        self.calls += 1;
        let seed = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.tick << 8)
            .wrapping_add(u64::from(self.layer.rank()) << 4)
            .wrapping_add(self.calls);
        CognitionRequest::new(kind, seed)
    }

    pub fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        let response = self.engine.evaluate(request)?;
        if response.kind() != request.kind {
            return Err(CognitionError::WrongKind {
                expected: request.kind,
                got: response.kind(),
            });
        }
        Ok(response)
    }
}

pub trait Layer: Send {
    fn id(&self) -> LayerId;

    fn handle(&mut self, envelope: &Envelope, ctx: &mut Ctx<'_>);

    /// Work the layer wants to retry without a new envelope, such as a
    /// request that failed because the engine was unavailable.
    fn has_pending_work(&self) -> bool {
        false
    }

    fn on_pending(&mut self, _ctx: &mut Ctx<'_>) {}

    fn snapshot(&self) -> serde_json::Value;

    fn restore(&mut self, snapshot: &serde_json::Value) -> Result<(), String>;
}

pub(crate) fn to_snapshot<T: Serialize>(state: &T) -> serde_json::Value {
    serde_json::to_value(state).expect("layer state serializes")
}

pub(crate) fn from_snapshot<T: DeserializeOwned>(v: &serde_json::Value) -> Result<T, String> {
    serde_json::from_value(v.clone()).map_err(|e| e.to_string())
}
