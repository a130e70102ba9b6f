//! Scenario files, batch runs and report rendering.

pub mod emit;
pub mod run;
pub mod scenario;

pub use emit::{emit, emit_json, emit_json_without_timestamps, fingerprint, Format};
pub use run::{run, run_with, Check, CheckStatus, RunOptions, RunReport, Summary};
pub use scenario::{load_scenarios, parse_scenarios, LoadError, Scenario, ScenarioKind};
