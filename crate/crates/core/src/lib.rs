//! Deterministic delay-tolerant network simulator.
//!
//! Nodes move along a path graph, meet when within radio range, and relay
//! messages using Epidemic, MaxProp or PRoPHET routing. A run is a pure
//! function of its [`config::ScenarioConfig`]; see [`engine::run`].

pub mod config;
pub mod engine;
pub mod events;
pub mod link;
pub mod map;
pub mod metrics;
pub mod mobility;
pub mod routing;
pub mod sweep;
pub mod trace;
pub mod traffic;

pub use config::ScenarioConfig;
pub use engine::{replay, run, RunOutput, SimError, Simulation};
pub use events::{EventKind, EventLog};
pub use metrics::RunReport;
pub use routing::RouterKind;
