//! Simulation side of the exploration engine: box worlds with a synthetic
//! depth camera, scenario files, the time-stepped run loop and exports.

pub mod driver;
pub mod export;
pub mod scenario;
pub mod world;

pub use driver::{run_exploration, RunOptions, RunResult, RunStatus};
pub use export::{export_map, export_metrics, MetricsLog, MetricsSample};
pub use scenario::{ExplorationConfig, Preset, Scenario, ScenarioError};
pub use world::{step_mav, MavConfig, WorldModel};
