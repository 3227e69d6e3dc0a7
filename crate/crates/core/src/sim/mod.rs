//! Deterministic grid-world household: rooms, dirt, objects, battery and a
//! fixed-delay owner. It is both the environment the robot acts on and the
//! oracle task outcomes are checked against.

mod command;
mod house;
mod scenario;

pub use command::{Cell, Command, EffectorCommand, Verb};
pub use house::{
    vocabulary, ApiEndpoint, CellState, EffectorToken, HouseState, ObjectState, Owner, Robot,
    StepResult, MAX_DIRT,
};
pub use scenario::{
    ApiEndpointSpec, CostTable, DirtCell, DirtDelta, Fault, ObjectSpec, ObjectUpdate, OwnerSpec,
    PanicFault, RobotSpec, RuleTest, Scenario, ScenarioError, ScheduledEvent, StrategyRuleSpec,
    ZoneSpec,
};

/// Scheduled events due at `tick`, in schedule order.
pub fn due_events(schedule: &[ScheduledEvent], tick: u64) -> impl Iterator<Item = &ScheduledEvent> {
    schedule.iter().filter(move |e| e.tick == tick)
}
