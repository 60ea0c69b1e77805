//! Virtual-time simulation of the asynchronous evaluation pipeline and the
//! benchmark adapter registry.

mod adapter;
mod engine;
mod evaluate;
mod scenario;
mod sim;

pub use adapter::{AdapterRegistry, BenchItem, BenchmarkAdapter, SyntheticAdapter};
pub use engine::{MockConfig, MockEngine, MockMode};
pub use evaluate::{evaluate, EvalOptions, EvalReport, EvalSummary, LineError, ResultRecord};
pub use scenario::{
    load_scenario, resolve_scenario_path, Arrival, AsyncConfig, RequestGen, Scenario, SyncConfig,
};
pub use sim::{
    ms_to_ns, ns_to_ms, run_async, run_sync_baseline, speedup_report, Completion, EngineConfig,
    EvalRequest, Event, EventKind, Responder, SimOutput, SimTrace, SpeedupReport, StepRecord,
};

use crate::config::ConfigError;
use crate::reward::RewardError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown benchmark {0:?}")]
    UnknownBenchmark(String),
    #[error("adapter {0:?} is already registered")]
    DuplicateAdapter(String),
    #[error(transparent)]
    Scenario(#[from] ConfigError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}
