//! Layered cognitive agent runtime: message bus, constitution, cognition
//! engines, the six layers, a household simulator and the scheduler.

pub mod cognition;
pub mod config;
pub mod constitution;
pub mod docs;
pub mod layers;
pub mod messaging;
pub mod predicate;
pub mod runtime;
pub mod sim;
