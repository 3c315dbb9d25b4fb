//! k-nearest-neighbor opinion dynamics on the real line.
//!
//! Agents hold scalar opinions. At each step one agent is selected and moves
//! to the average opinion of its `k` nearest agents (itself possibly
//! included, ties broken towards lower ids). The crate provides exact and
//! floating-point backends, equilibrium classification, checks of the
//! convergence argument for `n < 2k`, and a seeded simulation harness.

pub mod convergence;
pub mod dynamics;
pub mod equilibria;
pub mod export;
pub mod figures;
pub mod harness;
pub mod numeric;
pub mod rng;
pub mod suite;
pub mod trajectory;

pub use dynamics::{
    abc_neighbors, abc_update, diameter, interaction_graph, knn_neighbors, knn_update, AbcRule,
    AgentId, AnyConfiguration, Configuration, InteractionGraph, KnnRule, Model, ModelError,
    NeighborSet, UpdateRule,
};
pub use numeric::{Backend, Float, NumberLiteral, NumericError, Rational, Scalar};
pub use suite::{verify_lemmas, LemmaCheck, SuiteReport};
pub use trajectory::{EventRecord, Snapshot, StopReason, TrajectoryRecord};
