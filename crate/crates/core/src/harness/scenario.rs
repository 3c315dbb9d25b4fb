//! JSON scenario documents.
//!
//! ```json
//! {
//!   "backend": "float",
//!   "model": {"knn": {"k": 5}},
//!   "initial": {"uniform_random": {"lo": 0, "hi": 1, "n": 20, "seed": 1}},
//!   "schedule": {"uniform_random": {"seed": 2}},
//!   "events": [{"step": 2, "add": {"uniform": {"lo": 0, "hi": 1}}},
//!              {"step": 9, "remove": 3}],
//!   "max_steps": 1000000,
//!   "convergence_tolerance": 1e-9
//! }
//! ```
//!
//! Numbers may be bare JSON numbers or strings holding `p/q` / decimal text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{AgentId, Configuration, Model, ModelError};
use crate::equilibria::from_clusters;
use crate::numeric::{Backend, NumberLiteral, NumericError, Scalar};
use crate::rng::SimRng;

pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario JSON at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn numeric_field(field: &str) -> impl Fn(NumericError) -> ScenarioError + '_ {
    move |e| ScenarioError::invalid(field, e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Knn { k: usize },
    Abc { d: NumberLiteral },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBlock {
    pub opinion: NumberLiteral,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    UniformRandom {
        lo: NumberLiteral,
        hi: NumberLiteral,
        n: usize,
        seed: u64,
    },
    Explicit(Vec<NumberLiteral>),
    Clusters(Vec<ClusterBlock>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// i.i.d. uniform over the agents present at each step.
    UniformRandom { seed: u64 },
    /// Played once, in order; ids must be present when used.
    Explicit(Vec<AgentId>),
    /// `k-1` μ-steps then `k-1` M-steps, repeated.
    Shrink { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpinionSpec {
    Value(NumberLiteral),
    Uniform {
        lo: NumberLiteral,
        hi: NumberLiteral,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    Add(OpinionSpec),
    Remove(AgentId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub step: u64,
    #[serde(flatten)]
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    /// Snapshot period; `0` keeps only the initial, event and final states.
    #[serde(default = "one")]
    pub snapshot_every: u64,
}

fn one() -> u64 {
    1
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec { snapshot_every: 1 }
    }
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_tolerance() -> NumberLiteral {
    NumberLiteral::Number(DEFAULT_TOLERANCE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub backend: Backend,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    /// Seed for event opinions drawn from `uniform` descriptors.
    #[serde(default)]
    pub event_seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default = "default_tolerance")]
    pub convergence_tolerance: NumberLiteral,
    #[serde(default)]
    pub record: RecordSpec,
    /// Re-check numerically detected non-clustered limits exactly after
    /// snapping opinions to nearby rationals.
    #[serde(default)]
    pub refine_exact: bool,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ScenarioSpec =
            serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Uniform `[lo, hi]` initial opinions and uniform random schedule.
    pub fn uniform_knn(n: usize, k: usize, initial_seed: u64, schedule_seed: u64) -> Self {
        ScenarioSpec {
            name: None,
            backend: Backend::Float,
            model: ModelSpec::Knn { k },
            initial: InitialSpec::UniformRandom {
                lo: 0.0.into(),
                hi: 1.0.into(),
                n,
                seed: initial_seed,
            },
            schedule: ScheduleSpec::UniformRandom {
                seed: schedule_seed,
            },
            events: Vec::new(),
            event_seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            convergence_tolerance: DEFAULT_TOLERANCE.into(),
            record: RecordSpec::default(),
            refine_exact: false,
        }
    }

    pub fn initial_size(&self) -> usize {
        match &self.initial {
            InitialSpec::UniformRandom { n, .. } => *n,
            InitialSpec::Explicit(v) => v.len(),
            InitialSpec::Clusters(blocks) => blocks.iter().map(|b| b.size).sum(),
        }
    }

    /// Checks everything that can be checked without running: parameter
    /// ranges, event ordering, and that every id referenced by a removal or an
    /// explicit schedule is present when used.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match self.backend {
            Backend::Exact => self.validate_as::<crate::numeric::Rational>(),
            Backend::Float => self.validate_as::<crate::numeric::Float>(),
        }
    }

    fn validate_as<S: Scalar>(&self) -> Result<(), ScenarioError> {
        let n0 = self.initial_size();
        if n0 == 0 {
            return Err(ScenarioError::invalid(
                "initial",
                "needs at least one agent",
            ));
        }
        if let InitialSpec::UniformRandom { lo, hi, .. } = &self.initial {
            let lo: S = lo.to_scalar().map_err(numeric_field("initial.lo"))?;
            let hi: S = hi.to_scalar().map_err(numeric_field("initial.hi"))?;
            if lo > hi {
                return Err(ScenarioError::invalid("initial", "lo must not exceed hi"));
            }
        }
        if let InitialSpec::Clusters(blocks) = &self.initial {
            if blocks.iter().any(|b| b.size == 0) {
                return Err(ScenarioError::invalid("initial.clusters", "empty cluster"));
            }
        }
        let tol: S = self
            .convergence_tolerance
            .to_scalar()
            .map_err(numeric_field("convergence_tolerance"))?;
        if tol <= S::zero() {
            return Err(ScenarioError::invalid(
                "convergence_tolerance",
                "must be positive",
            ));
        }
        if let ModelSpec::Abc { d } = &self.model {
            let d: S = d.to_scalar().map_err(numeric_field("model.abc.d"))?;
            if d < S::zero() {
                return Err(ScenarioError::invalid("model.abc.d", "must be nonnegative"));
            }
        }
        if let ScheduleSpec::Shrink { k } = &self.schedule {
            if *k < 2 {
                return Err(ScenarioError::invalid("schedule.shrink.k", "needs k >= 2"));
            }
        }

        // replay the population through the events
        let mut present: Vec<AgentId> = (1..=n0).map(AgentId).collect();
        let mut next_id = n0 + 1;
        let mut min_size = n0;
        let mut last_step = None;
        let mut timeline: Vec<(u64, Vec<AgentId>)> = vec![(0, present.clone())];
        for (idx, ev) in self.events.iter().enumerate() {
            let field = format!("events[{idx}]");
            if last_step.is_some_and(|s| ev.step <= s) {
                return Err(ScenarioError::invalid(
                    field,
                    "event steps must be strictly increasing",
                ));
            }
            last_step = Some(ev.step);
            match &ev.action {
                EventAction::Add(op) => {
                    if let OpinionSpec::Uniform { lo, hi } = op {
                        let lo: S = lo.to_scalar().map_err(numeric_field(&field))?;
                        let hi: S = hi.to_scalar().map_err(numeric_field(&field))?;
                        if lo > hi {
                            return Err(ScenarioError::invalid(field, "lo must not exceed hi"));
                        }
                    } else if let OpinionSpec::Value(v) = op {
                        v.to_scalar::<S>().map_err(numeric_field(&field))?;
                    }
                    present.push(AgentId(next_id));
                    next_id += 1;
                }
                EventAction::Remove(id) => {
                    let Some(pos) = present.iter().position(|a| a == id) else {
                        return Err(ScenarioError::invalid(
                            field,
                            format!("agent {id} is not present at step {}", ev.step),
                        ));
                    };
                    present.remove(pos);
                    if present.is_empty() {
                        return Err(ScenarioError::invalid(field, "removes the last agent"));
                    }
                }
            }
            min_size = min_size.min(present.len());
            timeline.push((ev.step, present.clone()));
        }

        if let ModelSpec::Knn { k } = &self.model {
            if *k == 0 || *k > min_size {
                return Err(ScenarioError::invalid(
                    "model.knn.k",
                    format!("k = {k} outside 1..={min_size} (smallest population during the run)"),
                ));
            }
        }

        if let ScheduleSpec::Explicit(ids) = &self.schedule {
            for (t, id) in ids.iter().enumerate() {
                let t = t as u64;
                let agents = &timeline
                    .iter()
                    .rev()
                    .find(|(s, _)| *s <= t)
                    .expect("step 0 entry")
                    .1;
                if !agents.contains(id) {
                    return Err(ScenarioError::invalid(
                        format!("schedule.explicit[{t}]"),
                        format!("agent {id} is not present at step {t}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn model<S: Scalar>(&self) -> Result<Model<S>, ScenarioError> {
        Ok(match &self.model {
            ModelSpec::Knn { k } => Model::Knn { k: *k },
            ModelSpec::Abc { d } => Model::Abc {
                d: d.to_scalar().map_err(numeric_field("model.abc.d"))?,
            },
        })
    }

    pub(crate) fn tolerance<S: Scalar>(&self) -> Result<S, ScenarioError> {
        self.convergence_tolerance
            .to_scalar()
            .map_err(numeric_field("convergence_tolerance"))
    }

    pub(crate) fn initial_configuration<S: Scalar>(
        &self,
    ) -> Result<Configuration<S>, ScenarioError> {
        let config = match &self.initial {
            InitialSpec::UniformRandom { lo, hi, n, seed } => {
                let lo: S = lo.to_scalar().map_err(numeric_field("initial.lo"))?;
                let hi: S = hi.to_scalar().map_err(numeric_field("initial.hi"))?;
                let mut rng = SimRng::new(*seed);
                Configuration::new((0..*n).map(|_| rng.uniform(&lo, &hi)).collect())?
            }
            InitialSpec::Explicit(values) => Configuration::from_literals(values)?,
            InitialSpec::Clusters(blocks) => {
                let blocks = blocks
                    .iter()
                    .map(|b| Ok((b.opinion.to_scalar::<S>()?, b.size)))
                    .collect::<Result<Vec<_>, NumericError>>()
                    .map_err(numeric_field("initial.clusters"))?;
                from_clusters(&blocks)?
            }
        };
        Ok(config)
    }

    /// Events with opinions drawn, in order, from the event seed.
    pub(crate) fn resolved_events<S: Scalar>(&self) -> Result<Vec<Event<S>>, ScenarioError> {
        let mut rng = SimRng::new(self.event_seed);
        self.events
            .iter()
            .map(|ev| {
                let action = match &ev.action {
                    EventAction::Add(OpinionSpec::Value(v)) => {
                        EventKind::Add(v.to_scalar().map_err(numeric_field("events"))?)
                    }
                    EventAction::Add(OpinionSpec::Uniform { lo, hi }) => {
                        let lo: S = lo.to_scalar().map_err(numeric_field("events"))?;
                        let hi: S = hi.to_scalar().map_err(numeric_field("events"))?;
                        EventKind::Add(rng.uniform(&lo, &hi))
                    }
                    EventAction::Remove(id) => EventKind::Remove(*id),
                };
                Ok(Event {
                    step: ev.step,
                    kind: action,
                })
            })
            .collect()
    }
}

/// Command-line style overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Sets the initial, schedule and event seeds together.
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub d: Option<NumberLiteral>,
    /// Population size of a `uniform_random` initial configuration.
    pub n: Option<usize>,
    pub tol: Option<NumberLiteral>,
    pub max_steps: Option<u64>,
}

impl ScenarioSpec {
    /// Applies `overrides` and re-validates. Overrides that do not fit the
    /// scenario (`k` on a bounded-confidence model, `n` on an explicit list)
    /// are errors rather than being ignored.
    pub fn apply_overrides(&mut self, overrides: &Overrides) -> Result<(), ScenarioError> {
        if let Some(seed) = overrides.seed {
            if let InitialSpec::UniformRandom { seed: s, .. } = &mut self.initial {
                *s = seed;
            }
            if let ScheduleSpec::UniformRandom { seed: s } = &mut self.schedule {
                *s = seed;
            }
            self.event_seed = seed;
        }
        if let Some(new_k) = overrides.k {
            match &mut self.model {
                ModelSpec::Knn { k } => *k = new_k,
                ModelSpec::Abc { .. } => {
                    return Err(ScenarioError::invalid(
                        "k",
                        "scenario uses the bounded-confidence model",
                    ))
                }
            }
        }
        if let Some(new_d) = &overrides.d {
            match &mut self.model {
                ModelSpec::Abc { d } => *d = new_d.clone(),
                ModelSpec::Knn { .. } => {
                    return Err(ScenarioError::invalid("d", "scenario uses the k-NN model"))
                }
            }
        }
        if let Some(new_n) = overrides.n {
            match &mut self.initial {
                InitialSpec::UniformRandom { n, .. } => *n = new_n,
                _ => {
                    return Err(ScenarioError::invalid(
                        "n",
                        "only a uniform_random initial configuration has a free size",
                    ))
                }
            }
        }
        if let Some(tol) = &overrides.tol {
            self.convergence_tolerance = tol.clone();
        }
        if let Some(max_steps) = overrides.max_steps {
            self.max_steps = max_steps;
        }
        self.validate()
    }
}

/// An event with a concrete opinion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<S> {
    pub step: u64,
    pub kind: EventKind<S>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind<S> {
    Add(S),
    Remove(AgentId),
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"{
        "model": {"knn": {"k": 5}},
        "initial": {"clusters": [{"opinion": 0.4, "size": 10}]},
        "schedule": {"uniform_random": {"seed": 3}},
        "events": [
            {"step": 2, "add": {"uniform": {"lo": 0, "hi": 1}}},
            {"step": 3, "add": {"value": "1/3"}},
            {"step": 7, "remove": 11}
        ]
    }"#;

    #[test]
    fn parses_full_document() {
        let spec = ScenarioSpec::from_json(FIG3).unwrap();
        assert_eq!(spec.backend, Backend::Float);
        assert_eq!(spec.max_steps, DEFAULT_MAX_STEPS);
        assert_eq!(spec.events.len(), 3);
        assert_eq!(spec.events[2].action, EventAction::Remove(AgentId(11)));
        let back = ScenarioSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn k_larger_than_population_names_the_field() {
        let text = r#"{"model": {"knn": {"k": 4}},
            "initial": {"explicit": [0, 1, 2]},
            "schedule": {"uniform_random": {"seed": 1}}}"#;
        let err = ScenarioSpec::from_json(text).unwrap_err();
        assert!(
            matches!(&err, ScenarioError::Invalid { field, .. } if field == "model.knn.k"),
            "{err}"
        );
    }

    #[test]
    fn removals_must_name_present_agents() {
        let text = r#"{"model": {"knn": {"k": 1}},
            "initial": {"explicit": [0, 1, 2]},
            "schedule": {"uniform_random": {"seed": 1}},
            "events": [{"step": 1, "remove": 2}, {"step": 4, "remove": 2}]}"#;
        let err = ScenarioSpec::from_json(text).unwrap_err();
        assert!(err.to_string().contains("events[1]"), "{err}");
    }

    #[test]
    fn removal_can_shrink_below_k() {
        let text = r#"{"model": {"knn": {"k": 3}},
            "initial": {"explicit": [0, 1, 2]},
            "schedule": {"uniform_random": {"seed": 1}},
            "events": [{"step": 1, "remove": 2}]}"#;
        assert!(ScenarioSpec::from_json(text).is_err());
    }

    #[test]
    fn event_steps_increase_strictly() {
        let text = r#"{"model": {"knn": {"k": 1}},
            "initial": {"explicit": [0, 1]},
            "schedule": {"uniform_random": {"seed": 1}},
            "events": [{"step": 3, "add": {"value": 0}}, {"step": 3, "add": {"value": 1}}]}"#;
        assert!(ScenarioSpec::from_json(text).is_err());
    }

    #[test]
    fn explicit_schedule_ids_checked_against_time() {
        let text = r#"{"model": {"knn": {"k": 1}},
            "initial": {"explicit": [0, 1]},
            "schedule": {"explicit": [1, 3, 3]},
            "events": [{"step": 1, "add": {"value": 0.5}}]}"#;
        assert!(ScenarioSpec::from_json(text).is_ok());
        let text = r#"{"model": {"knn": {"k": 1}},
            "initial": {"explicit": [0, 1]},
            "schedule": {"explicit": [3]},
            "events": [{"step": 1, "add": {"value": 0.5}}]}"#;
        assert!(ScenarioSpec::from_json(text).is_err());
    }

    #[test]
    fn parse_errors_carry_the_path() {
        let text = r#"{"model": {"knn": {"k": "five"}},
            "initial": {"explicit": [0]},
            "schedule": {"uniform_random": {"seed": 1}}}"#;
        match ScenarioSpec::from_json(text).unwrap_err() {
            ScenarioError::Parse { path, .. } => assert_eq!(path, "model.knn.k"),
            other => panic!("unexpected {other}"),
        }
        assert!(ScenarioSpec::from_json(r#"{"model": {"knn": {"k": 1}}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn bad_tolerance_and_range() {
        let base = ScenarioSpec::uniform_knn(5, 2, 1, 2);
        let mut spec = base.clone();
        spec.convergence_tolerance = 0.0.into();
        assert!(spec.validate().is_err());
        let mut spec = base;
        spec.model = ModelSpec::Abc { d: (-0.1).into() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn overrides_replace_fields_and_revalidate() {
        let mut spec = ScenarioSpec::uniform_knn(20, 5, 1, 2);
        spec.apply_overrides(&Overrides {
            seed: Some(9),
            k: Some(3),
            n: Some(6),
            max_steps: Some(50),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(spec.model, ModelSpec::Knn { k: 3 });
        assert_eq!(spec.initial_size(), 6);
        assert_eq!(spec.schedule, ScheduleSpec::UniformRandom { seed: 9 });
        assert_eq!(spec.event_seed, 9);
        assert_eq!(spec.max_steps, 50);

        let err = spec
            .apply_overrides(&Overrides {
                k: Some(7),
                ..Overrides::default()
            })
            .unwrap_err();
        assert!(err.to_string().contains("model.knn.k"), "{err}");
        let err = spec
            .apply_overrides(&Overrides {
                d: Some("1/4".into()),
                ..Overrides::default()
            })
            .unwrap_err();
        assert!(err.to_string().contains("`d`"), "{err}");
    }
}
