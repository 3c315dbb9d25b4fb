//! Perturbing clustered equilibria by adding or removing agents, with the
//! bounded-confidence model as a side-by-side baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AgentId, Configuration, Model, ModelError, UpdateRule};
use crate::equilibria::{classify, partition_by_equality, EquilibriumError};
use crate::harness::engine::{summarize, RunSummary, Simulation, SimulationOptions};
use crate::harness::scenario::{
    Event, EventAction, EventKind, EventSpec, InitialSpec, ModelSpec, OpinionSpec, RecordSpec,
    ScenarioError, ScenarioSpec, ScheduleSpec, DEFAULT_MAX_STEPS, DEFAULT_TOLERANCE,
};
use crate::numeric::{Backend, Float, NumberLiteral, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustnessError {
    #[error("base configuration is not clustered for k = {k} (cluster sizes {sizes:?})")]
    NotClustered { k: usize, sizes: Vec<usize> },
    #[error("agent {0} is not in the base configuration")]
    UnknownAgent(AgentId),
    #[error("addition steps must be strictly increasing")]
    UnorderedAdditions,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("robustness spec: {0}")]
    Spec(String),
}

/// Clustered check by exact equality on either backend: the base is supplied
/// by the caller, not produced by rounding.
fn require_clustered<S: Scalar>(base: &Configuration<S>, k: usize) -> Result<(), RobustnessError> {
    base.check_k(k)?;
    let partition = partition_by_equality(base);
    if partition.min_size() < k {
        return Err(RobustnessError::NotClustered {
            k,
            sizes: partition.sizes,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditionScenario<S> {
    pub base: Configuration<S>,
    pub k: usize,
    /// `(step, opinion)`, steps strictly increasing.
    pub additions: Vec<(u64, S)>,
    pub schedule_seed: u64,
    pub max_steps: u64,
    pub tolerance: S,
    /// Also run the bounded-confidence model with this range.
    pub abc_range: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRun {
    /// Every original agent kept a bit-identical opinion at every step.
    pub originals_untouched: bool,
    /// First `(step, agent)` where an original agent moved.
    pub first_disturbance: Option<(u64, AgentId)>,
    /// Largest absolute change of an original opinion, over the whole run.
    pub max_original_shift: f64,
    /// Final opinions of the added agents, in id order.
    pub added_final: Vec<(AgentId, f64)>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditionReport {
    pub knn: ModelRun,
    pub abc: Option<ModelRun>,
}

fn run_with_additions<S: Scalar>(
    model: Model<S>,
    scenario: &AdditionScenario<S>,
) -> Result<ModelRun, RobustnessError> {
    let base = &scenario.base;
    let events = scenario
        .additions
        .iter()
        .map(|(step, v)| Event {
            step: *step,
            kind: EventKind::Add(v.clone()),
        })
        .collect();
    let options = SimulationOptions {
        max_steps: scenario.max_steps,
        tolerance: scenario.tolerance.clone(),
        snapshot_every: 0,
        stop_on_equilibrium: true,
    };
    let sim = Simulation::new(
        model,
        base.clone(),
        &ScheduleSpec::UniformRandom {
            seed: scenario.schedule_seed,
        },
        events,
        options,
    )?;

    let n = base.len();
    let mut first_disturbance = None;
    let mut max_shift = S::zero();
    let record = sim.run_observed(|step, pop| {
        // originals keep ids 1..=n and positions 0..n (nothing is removed)
        for (pos, (orig, now)) in base
            .opinions()
            .iter()
            .zip(pop.config().opinions())
            .enumerate()
        {
            if orig != now {
                first_disturbance.get_or_insert((step, AgentId::from_index(pos)));
                let shift = crate::numeric::abs_diff(orig, now);
                if shift > max_shift {
                    max_shift = shift;
                }
            }
        }
    })?;
    let last = record.last();
    let added_final = last
        .agents
        .iter()
        .zip(&last.opinions)
        .filter(|(a, _)| a.0 > n)
        .map(|(a, x)| (*a, x.to_f64()))
        .collect();
    Ok(ModelRun {
        originals_untouched: first_disturbance.is_none(),
        first_disturbance,
        max_original_shift: max_shift.to_f64(),
        added_final,
        summary: summarize(&record, &scenario.tolerance),
    })
}

/// Adds agents to a clustered equilibrium and runs the k-NN dynamics (and,
/// optionally, the bounded-confidence dynamics with the same additions and the
/// same selection sequence).
pub fn robustness_addition<S: Scalar>(
    scenario: &AdditionScenario<S>,
) -> Result<AdditionReport, RobustnessError> {
    require_clustered(&scenario.base, scenario.k)?;
    if scenario.additions.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(RobustnessError::UnorderedAdditions);
    }
    let knn = run_with_additions(Model::Knn { k: scenario.k }, scenario)?;
    let abc = scenario
        .abc_range
        .as_ref()
        .map(|d| run_with_additions(Model::Abc { d: d.clone() }, scenario))
        .transpose()?;
    Ok(AdditionReport { knn, abc })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalScenario<S> {
    pub base: Configuration<S>,
    pub k: usize,
    pub remove: AgentId,
    pub schedule_seed: u64,
    pub max_steps: u64,
    pub tolerance: S,
    pub abc_range: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalReport {
    pub removed: AgentId,
    /// Size of the victim's cluster before removal.
    pub victim_cluster_size: usize,
    /// `victim_cluster_size >= k + 1`.
    pub expected_equilibrium: bool,
    pub still_equilibrium: bool,
    /// Run of the remaining agents when the removal broke the equilibrium.
    /// Survivors keep their original ids.
    pub continuation: Option<RunSummary>,
    /// Bounded-confidence model: every single-agent update is a no-op before
    /// and after the removal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abc_fixed_before: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abc_fixed_after: Option<bool>,
}

fn is_fixed_point<S: Scalar>(
    model: &Model<S>,
    config: &Configuration<S>,
) -> Result<bool, ModelError> {
    for agent in config.agents() {
        if model.updated_opinion(config, agent)? != config.opinions()[agent.index()] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Removes one agent from a clustered equilibrium and reports whether the
/// rest is still an equilibrium; if not, runs the dynamics onward.
pub fn robustness_removal<S: Scalar>(
    scenario: &RemovalScenario<S>,
) -> Result<RemovalReport, RobustnessError> {
    let base = &scenario.base;
    require_clustered(base, scenario.k)?;
    base.check_agent(scenario.remove)
        .map_err(|_| RobustnessError::UnknownAgent(scenario.remove))?;
    let victim = &base.opinions()[scenario.remove.index()];
    let victim_cluster_size = base.opinions().iter().filter(|x| *x == victim).count();

    let mut remaining = base.opinions().to_vec();
    remaining.remove(scenario.remove.index());
    let remaining = Configuration::new(remaining)?;
    let still_equilibrium =
        remaining.len() >= scenario.k && classify(&remaining, scenario.k)?.is_equilibrium;

    let continuation = if still_equilibrium || remaining.len() < scenario.k {
        None
    } else {
        // run from the base with a removal event at step 0 so ids are preserved
        let sim = Simulation::new(
            Model::Knn { k: scenario.k },
            base.clone(),
            &ScheduleSpec::UniformRandom {
                seed: scenario.schedule_seed,
            },
            vec![Event {
                step: 0,
                kind: EventKind::Remove(scenario.remove),
            }],
            SimulationOptions {
                max_steps: scenario.max_steps,
                tolerance: scenario.tolerance.clone(),
                snapshot_every: 0,
                stop_on_equilibrium: true,
            },
        )?;
        let record = sim.run()?;
        Some(summarize(&record, &scenario.tolerance))
    };

    let (abc_fixed_before, abc_fixed_after) = match &scenario.abc_range {
        Some(d) => {
            let model = Model::Abc { d: d.clone() };
            (
                Some(is_fixed_point(&model, base)?),
                Some(is_fixed_point(&model, &remaining)?),
            )
        }
        None => (None, None),
    };

    Ok(RemovalReport {
        removed: scenario.remove,
        victim_cluster_size,
        expected_equilibrium: victim_cluster_size > scenario.k,
        still_equilibrium,
        continuation,
        abc_fixed_before,
        abc_fixed_after,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditionSpec {
    pub step: u64,
    pub opinion: OpinionSpec,
}

/// JSON document for the robustness experiments.
///
/// ```json
/// {
///   "k": 5,
///   "base": {"clusters": [{"opinion": 0.4, "size": 10}]},
///   "additions": [{"step": 2, "opinion": {"uniform": {"lo": 0, "hi": 1}}}],
///   "remove": 3,
///   "schedule_seed": 1,
///   "abc_d": 0.25
/// }
/// ```
///
/// `additions` drives `add`, `remove` drives `remove`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSpec {
    #[serde(default)]
    pub backend: Backend,
    pub k: usize,
    pub base: InitialSpec,
    #[serde(default)]
    pub additions: Vec<AdditionSpec>,
    /// Seed for `uniform` addition opinions.
    #[serde(default)]
    pub event_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remove: Option<AgentId>,
    #[serde(default)]
    pub schedule_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abc_d: Option<NumberLiteral>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_tolerance")]
    pub convergence_tolerance: NumberLiteral,
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_tolerance() -> NumberLiteral {
    NumberLiteral::Number(DEFAULT_TOLERANCE)
}

impl RobustnessSpec {
    pub fn from_json(text: &str) -> Result<Self, RobustnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            RobustnessError::Scenario(ScenarioError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })
        })
    }

    /// The k-NN scenario carrying the base, additions and seeds, so the
    /// scenario machinery resolves initial values and addition opinions.
    fn as_scenario(&self) -> ScenarioSpec {
        ScenarioSpec {
            name: None,
            backend: self.backend,
            model: ModelSpec::Knn { k: self.k },
            initial: self.base.clone(),
            schedule: ScheduleSpec::UniformRandom {
                seed: self.schedule_seed,
            },
            events: self
                .additions
                .iter()
                .map(|a| EventSpec {
                    step: a.step,
                    action: EventAction::Add(a.opinion.clone()),
                })
                .collect(),
            event_seed: self.event_seed,
            max_steps: self.max_steps,
            convergence_tolerance: self.convergence_tolerance.clone(),
            record: RecordSpec { snapshot_every: 0 },
            refine_exact: false,
        }
    }

    fn addition_scenario<S: Scalar>(&self) -> Result<AdditionScenario<S>, RobustnessError> {
        let scenario = self.as_scenario();
        scenario.validate()?;
        let additions = scenario
            .resolved_events::<S>()?
            .into_iter()
            .filter_map(|e| match e.kind {
                EventKind::Add(v) => Some((e.step, v)),
                EventKind::Remove(_) => None,
            })
            .collect();
        Ok(AdditionScenario {
            base: scenario.initial_configuration()?,
            k: self.k,
            additions,
            schedule_seed: self.schedule_seed,
            max_steps: self.max_steps,
            tolerance: scenario.tolerance()?,
            abc_range: self.abc_range()?,
        })
    }

    fn removal_scenario<S: Scalar>(&self) -> Result<RemovalScenario<S>, RobustnessError> {
        let remove = self
            .remove
            .ok_or_else(|| RobustnessError::Spec("`remove` is required".to_string()))?;
        let mut scenario = self.as_scenario();
        scenario.events.clear();
        scenario.validate()?;
        Ok(RemovalScenario {
            base: scenario.initial_configuration()?,
            k: self.k,
            remove,
            schedule_seed: self.schedule_seed,
            max_steps: self.max_steps,
            tolerance: scenario.tolerance()?,
            abc_range: self.abc_range()?,
        })
    }

    fn abc_range<S: Scalar>(&self) -> Result<Option<S>, RobustnessError> {
        self.abc_d
            .as_ref()
            .map(|d| {
                let d: S = d
                    .to_scalar()
                    .map_err(|e| RobustnessError::Spec(format!("abc_d: {e}")))?;
                if d < S::zero() {
                    return Err(RobustnessError::Spec(
                        "abc_d must be nonnegative".to_string(),
                    ));
                }
                Ok(d)
            })
            .transpose()
    }

    pub fn run_addition(&self) -> Result<AdditionReport, RobustnessError> {
        match self.backend {
            Backend::Exact => robustness_addition(&self.addition_scenario::<Rational>()?),
            Backend::Float => robustness_addition(&self.addition_scenario::<Float>()?),
        }
    }

    pub fn run_removal(&self) -> Result<RemovalReport, RobustnessError> {
        match self.backend {
            Backend::Exact => robustness_removal(&self.removal_scenario::<Rational>()?),
            Backend::Float => robustness_removal(&self.removal_scenario::<Float>()?),
        }
    }
}
