//! Scenario files, the simulation engine and the experiment drivers built on it.

pub mod engine;
pub mod montecarlo;
pub mod robustness;
pub mod scenario;
pub mod sweep;

pub use engine::{
    detect_limit, run_scenario, simulate, summarize, AnyTrajectory, LimitClass, Population,
    RunSummary, ScenarioOutcome, Simulation, SimulationOptions,
};
pub use montecarlo::{
    monte_carlo_consensus, ConsensusRun, ConsensusStats, MonteCarloConfig, Quantiles,
};
pub use robustness::{
    robustness_addition, robustness_removal, AdditionReport, AdditionScenario, AdditionSpec,
    ModelRun, RemovalReport, RemovalScenario, RobustnessError, RobustnessSpec,
};
pub use scenario::{
    ClusterBlock, Event, EventAction, EventKind, EventSpec, InitialSpec, ModelSpec, OpinionSpec,
    Overrides, RecordSpec, ScenarioError, ScenarioSpec, ScheduleSpec, DEFAULT_MAX_STEPS,
    DEFAULT_TOLERANCE,
};
pub use sweep::{batch_sweep, LimitCounts, ScenarioFailure, SweepGrid, SweepStats};
