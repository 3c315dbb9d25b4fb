//! Time-indexed simulation output and its CSV form.
//!
//! CSV contract: header `step,agent_id,opinion`; one row per present agent
//! per recorded snapshot; 1-based agent ids; floats with 17 significant
//! digits, rationals as `p/q`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::AgentId;
use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Clustered (or consensus) limit reached within tolerance.
    Converged,
    MaxSteps,
    /// Every single-agent update is a no-op (within tolerance on floats) but
    /// some cluster is smaller than `k`.
    EquilibriumDetected,
    /// A finite explicit schedule ran out.
    ScheduleExhausted,
}

/// Opinions of the agents present at `step`, after that step's events and
/// before its update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot<S> {
    pub step: u64,
    pub agents: Vec<AgentId>,
    pub opinions: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventRecord {
    Added {
        step: u64,
        agent: AgentId,
        opinion: String,
    },
    Removed {
        step: u64,
        agent: AgentId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrajectoryRecord<S> {
    pub snapshots: Vec<Snapshot<S>>,
    /// `updaters[t]` is the agent that moved at step `t`.
    pub updaters: Vec<AgentId>,
    /// `diameters[t]` is the diameter of the state at step `t` (after its
    /// events); one more entry than `updaters`.
    pub diameters: Vec<S>,
    pub events: Vec<EventRecord>,
    pub steps: u64,
    pub stop_reason: StopReason,
    /// First step whose diameter is below the convergence tolerance.
    pub hitting_time: Option<u64>,
}

impl<S: Scalar> TrajectoryRecord<S> {
    pub fn initial(&self) -> &Snapshot<S> {
        self.snapshots
            .first()
            .expect("initial snapshot always recorded")
    }

    pub fn last(&self) -> &Snapshot<S> {
        self.snapshots
            .last()
            .expect("final snapshot always recorded")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,agent_id,opinion")?;
        for snap in &self.snapshots {
            for (agent, x) in snap.agents.iter().zip(&snap.opinions) {
                writeln!(out, "{},{},{}", snap.step, agent, x.to_text())?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
