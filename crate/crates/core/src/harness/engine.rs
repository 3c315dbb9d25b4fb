//! The sequential simulation loop.
//!
//! Step `t` proceeds as: fire the events scheduled for `t` (an added agent can
//! be selected from `t` on), record the state, test for a limit, then let one
//! agent update. Agents are identified by persistent ids; added agents get
//! `n+1, n+2, ...` and ids are never reused after removal.

use serde::Serialize;

use crate::convergence::ShrinkSchedule;
use crate::dynamics::{diameter, AgentId, Configuration, Model, ModelError, UpdateRule};
use crate::equilibria::{
    is_equilibrium, linkage_groups, partition_by_equality, refine_equilibrium, ClusterPartition,
};
use crate::harness::scenario::{Event, EventKind, ScenarioError, ScenarioSpec, ScheduleSpec};
use crate::numeric::{abs_diff, Backend, Float, Rational, Scalar};
use crate::rng::SimRng;
use crate::trajectory::{EventRecord, Snapshot, StopReason, TrajectoryRecord};

/// Agents currently present, with their persistent ids in ascending order.
/// Positions in `config` follow id order, so the lower-index tie rule on
/// positions is the lower-id rule on persistent ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population<S> {
    ids: Vec<AgentId>,
    config: Configuration<S>,
    next_id: usize,
}

impl<S: Scalar> Population<S> {
    pub fn new(config: Configuration<S>) -> Self {
        let n = config.len();
        Population {
            ids: (1..=n).map(AgentId).collect(),
            config,
            next_id: n + 1,
        }
    }

    pub fn ids(&self) -> &[AgentId] {
        &self.ids
    }

    pub fn config(&self) -> &Configuration<S> {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: AgentId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn opinion_of(&self, id: AgentId) -> Option<&S> {
        self.position(id).map(|p| &self.config.opinions()[p])
    }

    fn add(&mut self, value: S) -> AgentId {
        let id = AgentId(self.next_id);
        self.next_id += 1;
        self.ids.push(id);
        self.config.push(value);
        id
    }

    fn remove(&mut self, id: AgentId) -> Option<S> {
        let pos = self.position(id)?;
        self.ids.remove(pos);
        Some(self.config.remove_index(pos))
    }

    fn snapshot(&self, step: u64) -> Snapshot<S> {
        Snapshot {
            step,
            agents: self.ids.clone(),
            opinions: self.config.opinions().to_vec(),
        }
    }
}

enum Sampler {
    Uniform(Box<SimRng>),
    Explicit { ids: Vec<AgentId>, next: usize },
    Shrink(ShrinkSchedule),
}

impl Sampler {
    fn from_spec(spec: &ScheduleSpec) -> Self {
        match spec {
            ScheduleSpec::UniformRandom { seed } => Sampler::Uniform(Box::new(SimRng::new(*seed))),
            ScheduleSpec::Explicit(ids) => Sampler::Explicit {
                ids: ids.clone(),
                next: 0,
            },
            ScheduleSpec::Shrink { k } => Sampler::Shrink(ShrinkSchedule::new(*k)),
        }
    }

    /// Position of the next updater, or `None` once an explicit list is spent.
    fn next<S: Scalar>(
        &mut self,
        t: u64,
        pop: &Population<S>,
    ) -> Result<Option<usize>, ModelError> {
        Ok(match self {
            Sampler::Uniform(rng) => Some(rng.below(pop.len() as u64) as usize),
            Sampler::Explicit { ids, next } => {
                let Some(id) = ids.get(*next).copied() else {
                    return Ok(None);
                };
                *next += 1;
                Some(pop.position(id).ok_or(ModelError::AgentOutOfRange {
                    agent: id.0,
                    n: pop.len(),
                })?)
            }
            Sampler::Shrink(schedule) => Some(schedule.at(t).pick(pop.config()).index()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationOptions<S> {
    pub max_steps: u64,
    pub tolerance: S,
    pub snapshot_every: u64,
    /// Stop on a numerically stable non-clustered state.
    pub stop_on_equilibrium: bool,
}

/// Distinct limit groups must be at least this many tolerances apart.
pub const GROUP_SEPARATION: i64 = 1000;

/// Tests whether the current state is a limit.
///
/// A state where every single-agent update is an exact no-op is a limit,
/// clustered if the groups of equal opinions, or the single-linkage groups
/// at `tolerance` when their spread is below it, all reach `k`. Otherwise the state is a numerical limit when
/// no agent would move by `tolerance` or more, every single-linkage group at
/// `tolerance` has spread below `tolerance`, and distinct groups are at least
/// `GROUP_SEPARATION * tolerance` apart. For k-NN the limit is clustered when
/// every group holds at least `k` agents, otherwise it is a non-clustered
/// equilibrium.
///
/// Without the separation requirement a state a few tolerances wide, still
/// collapsing to consensus, splits into small groups whose probe moves are
/// all below `tolerance`.
pub fn detect_limit<S: Scalar>(
    model: &Model<S>,
    config: &Configuration<S>,
    tolerance: &S,
) -> Result<Option<StopReason>, ModelError> {
    let mut fixed = true;
    for agent in config.agents() {
        let current = &config.opinions()[agent.index()];
        let next = model.updated_opinion(config, agent)?;
        if next != *current {
            fixed = false;
            if abs_diff(&next, current) >= *tolerance {
                return Ok(None);
            }
        }
    }
    let reason = |groups: &ClusterPartition<S>| {
        let clustered = match model {
            Model::Knn { k } => groups.min_size() >= *k,
            Model::Abc { .. } => true,
        };
        if clustered {
            StopReason::Converged
        } else {
            StopReason::EquilibriumDetected
        }
    };
    let groups = linkage_groups(config, tolerance);
    let tight = groups.max_spread() < *tolerance;
    if fixed {
        // float roundoff can freeze groups a few ulps apart; they count as one
        let exact = reason(&partition_by_equality(config));
        return Ok(Some(if exact == StopReason::Converged || !tight {
            exact
        } else {
            reason(&groups)
        }));
    }

    if !tight {
        return Ok(None);
    }
    if groups.len() > 1 {
        let separation = S::from_ratio(GROUP_SEPARATION, 1).mul(tolerance);
        let mut sorted = config.opinions().to_vec();
        sorted.sort();
        let too_close = sorted.windows(2).any(|w| {
            let gap = abs_diff(&w[1], &w[0]);
            gap > *tolerance && gap < separation
        });
        if too_close {
            return Ok(None);
        }
    }
    Ok(Some(reason(&groups)))
}

pub struct Simulation<S: Scalar> {
    model: Model<S>,
    population: Population<S>,
    sampler: Sampler,
    events: Vec<Event<S>>,
    options: SimulationOptions<S>,
}

impl<S: Scalar> Simulation<S> {
    pub fn new(
        model: Model<S>,
        initial: Configuration<S>,
        schedule: &ScheduleSpec,
        events: Vec<Event<S>>,
        options: SimulationOptions<S>,
    ) -> Result<Self, ModelError> {
        model.validate(initial.len())?;
        Ok(Simulation {
            model,
            population: Population::new(initial),
            sampler: Sampler::from_spec(schedule),
            events,
            options,
        })
    }

    pub fn from_spec(spec: &ScenarioSpec) -> Result<Self, ScenarioError> {
        spec.validate()?;
        if spec.backend != S::BACKEND {
            return Err(ScenarioError::invalid(
                "backend",
                format!(
                    "scenario asks for {}, caller runs {}",
                    spec.backend,
                    S::BACKEND
                ),
            ));
        }
        let options = SimulationOptions {
            max_steps: spec.max_steps,
            tolerance: spec.tolerance()?,
            snapshot_every: spec.record.snapshot_every,
            stop_on_equilibrium: true,
        };
        Ok(Simulation::new(
            spec.model()?,
            spec.initial_configuration()?,
            &spec.schedule,
            spec.resolved_events()?,
            options,
        )?)
    }

    pub fn model(&self) -> &Model<S> {
        &self.model
    }

    pub fn set_stop_on_equilibrium(&mut self, stop: bool) {
        self.options.stop_on_equilibrium = stop;
    }

    pub fn run(self) -> Result<TrajectoryRecord<S>, ModelError> {
        self.run_observed(|_, _| {})
    }

    /// Runs to a stop, calling `observer(step, population)` on every state
    /// reached (after that step's events), including the final one.
    pub fn run_observed(
        mut self,
        mut observer: impl FnMut(u64, &Population<S>),
    ) -> Result<TrajectoryRecord<S>, ModelError> {
        let tol = self.options.tolerance.clone();
        let every = self.options.snapshot_every;
        let mut record = TrajectoryRecord {
            snapshots: Vec::new(),
            updaters: Vec::new(),
            diameters: Vec::new(),
            events: Vec::new(),
            steps: 0,
            stop_reason: StopReason::MaxSteps,
            hitting_time: None,
        };
        let mut pending = self
            .events
            .drain(..)
            .collect::<std::collections::VecDeque<_>>();
        let mut last_move: Option<S> = None;
        let mut t: u64 = 0;

        let stop_reason = loop {
            let mut fired = false;
            while pending.front().is_some_and(|e| e.step == t) {
                let ev = pending.pop_front().expect("front checked");
                fired = true;
                match ev.kind {
                    EventKind::Add(value) => {
                        let text = value.to_text();
                        let agent = self.population.add(value);
                        record.events.push(EventRecord::Added {
                            step: t,
                            agent,
                            opinion: text,
                        });
                    }
                    EventKind::Remove(id) => {
                        self.population
                            .remove(id)
                            .ok_or(ModelError::AgentOutOfRange {
                                agent: id.0,
                                n: self.population.len(),
                            })?;
                        record
                            .events
                            .push(EventRecord::Removed { step: t, agent: id });
                    }
                }
            }
            if fired {
                if self.population.is_empty() {
                    return Err(ModelError::EmptyConfiguration);
                }
                self.model.validate(self.population.len())?;
            }

            let diam = diameter(self.population.config());
            if record.hitting_time.is_none() && diam < tol {
                record.hitting_time = Some(t);
            }
            record.diameters.push(diam);
            if t == 0 || fired || (every > 0 && t.is_multiple_of(every)) {
                record.snapshots.push(self.population.snapshot(t));
            }
            observer(t, &self.population);

            let settled = last_move.as_ref().is_none_or(|m| *m < tol);
            if pending.is_empty() && (settled || fired) {
                match detect_limit(&self.model, self.population.config(), &tol)? {
                    Some(StopReason::EquilibriumDetected) if !self.options.stop_on_equilibrium => {}
                    Some(reason) => break reason,
                    None => {}
                }
            }
            if t >= self.options.max_steps {
                break StopReason::MaxSteps;
            }
            let Some(pos) = self.sampler.next(t, &self.population)? else {
                break StopReason::ScheduleExhausted;
            };
            let agent = AgentId::from_index(pos);
            let config = self.population.config();
            let value = self.model.updated_opinion(config, agent)?;
            last_move = Some(abs_diff(&value, &config.opinions()[pos]));
            self.population.config.set(agent, value);
            record.updaters.push(self.population.ids[pos]);
            t += 1;
        };

        if record.snapshots.last().is_none_or(|s| s.step != t) {
            record.snapshots.push(self.population.snapshot(t));
        }
        record.steps = t;
        record.stop_reason = stop_reason;
        Ok(record)
    }
}

/// How a run ended, in terms of its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    Consensus,
    Clustered,
    NonClustered,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub stop_reason: StopReason,
    pub steps: u64,
    pub hitting_time: Option<u64>,
    pub limit: LimitClass,
    /// Single-linkage groups of the final state at the tolerance.
    pub cluster_sizes: Vec<usize>,
    pub cluster_opinions: Vec<f64>,
    pub final_diameter: f64,
    pub initial_min: f64,
    pub initial_max: f64,
    pub final_agents: usize,
    /// Exact verdict on a snapped non-clustered limit, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_certified: Option<bool>,
}

pub fn summarize<S: Scalar>(record: &TrajectoryRecord<S>, tolerance: &S) -> RunSummary {
    let last = record.last();
    let initial = record.initial();
    let final_config = Configuration::new(last.opinions.clone()).expect("non-empty population");
    let groups = linkage_groups(&final_config, tolerance);
    let limit = match record.stop_reason {
        StopReason::Converged if groups.len() == 1 => LimitClass::Consensus,
        StopReason::Converged => LimitClass::Clustered,
        StopReason::EquilibriumDetected => LimitClass::NonClustered,
        StopReason::MaxSteps | StopReason::ScheduleExhausted => LimitClass::NotConverged,
    };
    let f = |x: &S| x.to_f64();
    RunSummary {
        stop_reason: record.stop_reason,
        steps: record.steps,
        hitting_time: record.hitting_time,
        limit,
        cluster_sizes: groups.sizes.clone(),
        cluster_opinions: groups.groups.iter().map(|g| f(&g.opinion)).collect(),
        final_diameter: f(&diameter(&final_config)),
        initial_min: initial.opinions.iter().min().map(f).unwrap_or(0.0),
        initial_max: initial.opinions.iter().max().map(f).unwrap_or(0.0),
        final_agents: last.agents.len(),
        exact_certified: None,
    }
}

/// Runs a scenario on the backend type `S`, which must match the scenario's
/// `backend` field.
pub fn simulate<S: Scalar>(spec: &ScenarioSpec) -> Result<TrajectoryRecord<S>, ScenarioError> {
    Ok(Simulation::<S>::from_spec(spec)?.run()?)
}

/// Trajectory on whichever backend the scenario selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyTrajectory {
    Exact(TrajectoryRecord<Rational>),
    Float(TrajectoryRecord<Float>),
}

impl AnyTrajectory {
    pub fn to_csv(&self) -> String {
        match self {
            AnyTrajectory::Exact(r) => r.to_csv(),
            AnyTrajectory::Float(r) => r.to_csv(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        match self {
            AnyTrajectory::Exact(r) => r.write_csv(out),
            AnyTrajectory::Float(r) => r.write_csv(out),
        }
    }

    pub fn events(&self) -> &[EventRecord] {
        match self {
            AnyTrajectory::Exact(r) => &r.events,
            AnyTrajectory::Float(r) => &r.events,
        }
    }

    /// `(step, agent, opinion)` rows of every snapshot, as floats.
    pub fn float_rows(&self) -> Vec<(u64, AgentId, f64)> {
        fn rows<S: Scalar>(r: &TrajectoryRecord<S>) -> Vec<(u64, AgentId, f64)> {
            r.snapshots
                .iter()
                .flat_map(|s| {
                    s.agents
                        .iter()
                        .zip(&s.opinions)
                        .map(move |(a, x)| (s.step, *a, x.to_f64()))
                })
                .collect()
        }
        match self {
            AnyTrajectory::Exact(r) => rows(r),
            AnyTrajectory::Float(r) => rows(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub trajectory: AnyTrajectory,
    pub summary: RunSummary,
}

/// Validates and runs a scenario on its own backend, with the summary of its
/// limit.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioOutcome, ScenarioError> {
    match spec.backend {
        Backend::Exact => {
            let record = simulate::<Rational>(spec)?;
            let tol: Rational = spec.tolerance()?;
            let summary = summarize(&record, &tol);
            Ok(ScenarioOutcome {
                trajectory: AnyTrajectory::Exact(record),
                summary,
            })
        }
        Backend::Float => {
            let record = simulate::<Float>(spec)?;
            let tol: Float = spec.tolerance()?;
            let mut summary = summarize(&record, &tol);
            if spec.refine_exact && summary.limit == LimitClass::NonClustered {
                if let crate::harness::scenario::ModelSpec::Knn { k } = spec.model {
                    let last = Configuration::new(record.last().opinions.clone())?;
                    summary.exact_certified = refine_equilibrium(&last, k, tol.get())
                        .and_then(|snapped| is_equilibrium(&snapped, k))
                        .map(|r| r.is_equilibrium)
                        .ok();
                }
            }
            Ok(ScenarioOutcome {
                trajectory: AnyTrajectory::Float(record),
                summary,
            })
        }
    }
}
