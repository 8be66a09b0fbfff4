//! Discrete-event simulation of nomadic 5G core nodes.

#![allow(clippy::collapsible_match, clippy::large_enum_variant)]

pub mod auth;
pub mod codec;
pub mod ids;
pub mod kernel;
pub mod metrics;
pub mod n2;
pub mod n3;
pub mod peer;
pub mod scenario;
pub mod sim;
pub mod spectrum;
pub mod time;
pub mod topology;
pub mod transport;

pub use metrics::{emit_metrics, MetricsReport};
pub use scenario::{parse_scenario, validate_scenario};
pub use sim::{run, run_with, RunOptions, RunOutput};
