//! Extremal selectors, the shrinking schedule, and executable checks of the
//! monotonicity and contraction properties that drive convergence when
//! `n < 2k`.
//!
//! `μ(x)` is the lowest-index minimizer and `M(x)` the lowest-index maximizer.
//! `y` is the largest opinion inside `N_μ`, `z` the smallest inside `N_M`.
//! Every check here drives the ordinary update law through a schedule; there
//! is no separate dynamics implementation.

use serde::Serialize;

use crate::dynamics::{
    diameter, knn_neighbors, AgentId, Configuration, KnnRule, ModelError, UpdateRule,
};
use crate::numeric::{Rational, Scalar};
use crate::rng::{random_exact_configuration, SimRng};
use crate::trajectory::{Snapshot, StopReason, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Selector {
    Mu,
    BigM,
}

impl Selector {
    pub fn pick<S: Scalar>(self, config: &Configuration<S>) -> AgentId {
        match self {
            Selector::Mu => mu(config),
            Selector::BigM => big_m(config),
        }
    }
}

/// Lowest-index minimizer.
pub fn mu<S: Scalar>(config: &Configuration<S>) -> AgentId {
    let xs = config.opinions();
    let mut best = 0;
    for (j, x) in xs.iter().enumerate().skip(1) {
        if *x < xs[best] {
            best = j;
        }
    }
    AgentId::from_index(best)
}

/// Lowest-index maximizer.
pub fn big_m<S: Scalar>(config: &Configuration<S>) -> AgentId {
    let xs = config.opinions();
    let mut best = 0;
    for (j, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = j;
        }
    }
    AgentId::from_index(best)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtremalSelection<S> {
    pub mu: AgentId,
    pub big_m: AgentId,
    /// `max_{i ∈ N_μ} x_i`
    pub y: S,
    /// `min_{i ∈ N_M} x_i`
    pub z: S,
}

pub fn extremal_selection<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<ExtremalSelection<S>, ModelError> {
    let lo = mu(config);
    let hi = big_m(config);
    let y = neighborhood_extreme(config, lo, k, Selector::BigM)?;
    let z = neighborhood_extreme(config, hi, k, Selector::Mu)?;
    Ok(ExtremalSelection {
        mu: lo,
        big_m: hi,
        y,
        z,
    })
}

/// Max (`BigM`) or min (`Mu`) opinion over `N_agent`.
fn neighborhood_extreme<S: Scalar>(
    config: &Configuration<S>,
    agent: AgentId,
    k: usize,
    which: Selector,
) -> Result<S, ModelError> {
    let set = knn_neighbors(config, agent, k)?;
    let values = set.opinions(config).into_iter();
    Ok(match which {
        Selector::BigM => values.max(),
        Selector::Mu => values.min(),
    }
    .expect("k >= 1"))
}

/// `k-1` μ-selections followed by `k-1` M-selections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShrinkSchedule {
    pub k: usize,
    pub steps: Vec<Selector>,
}

impl ShrinkSchedule {
    pub fn new(k: usize) -> Self {
        let half = k.saturating_sub(1);
        let steps = std::iter::repeat_n(Selector::Mu, half)
            .chain(std::iter::repeat_n(Selector::BigM, half))
            .collect();
        ShrinkSchedule { k, steps }
    }

    /// `T = 2k - 2`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Selector used at step `t` when the schedule is repeated cyclically.
    pub fn at(&self, t: u64) -> Selector {
        self.steps[(t % self.steps.len() as u64) as usize]
    }
}

/// Plays a selector sequence through `rule`, returning every intermediate
/// configuration (`len + 1` entries) and the chosen agents.
fn run_selectors<S: Scalar, R: UpdateRule<S>>(
    rule: &R,
    config: &Configuration<S>,
    selectors: impl IntoIterator<Item = Selector>,
) -> Result<(Vec<Configuration<S>>, Vec<AgentId>), ModelError> {
    let mut states = vec![config.clone()];
    let mut chosen = Vec::new();
    for sel in selectors {
        let current = states.last().expect("non-empty");
        let agent = sel.pick(current);
        let next = rule.apply(current, agent)?;
        chosen.push(agent);
        states.push(next);
    }
    Ok((states, chosen))
}

/// Applies the shrinking schedule (`T = 2k - 2` updates). Runs for any `n`;
/// the contraction guarantee only covers `n < 2k`.
pub fn run_shrink_schedule<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<TrajectoryRecord<S>, ModelError> {
    config.check_k(k)?;
    let schedule = ShrinkSchedule::new(k);
    let (states, updaters) = run_selectors(&KnnRule { k }, config, schedule.steps)?;
    let agents: Vec<AgentId> = config.agents().collect();
    let diameters = states.iter().map(diameter).collect();
    let steps = updaters.len() as u64;
    let snapshots = states
        .into_iter()
        .enumerate()
        .map(|(t, c)| Snapshot {
            step: t as u64,
            agents: agents.clone(),
            opinions: c.into_opinions(),
        })
        .collect();
    Ok(TrajectoryRecord {
        snapshots,
        updaters,
        diameters,
        events: Vec::new(),
        steps,
        stop_reason: StopReason::ScheduleExhausted,
        hitting_time: None,
    })
}

/// First violation found by a check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub step: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
}

impl CheckOutcome {
    fn pass() -> Self {
        CheckOutcome {
            passed: true,
            violation: None,
        }
    }

    fn fail(step: u64, agent: Option<AgentId>, message: String) -> Self {
        CheckOutcome {
            passed: false,
            violation: Some(Violation {
                step,
                agent,
                message,
            }),
        }
    }
}

/// Monotonicity under the all-`side` schedule. For `Mu`: the set `N_μ` and
/// `y` stay constant, members of `N_μ(x(0))` never decrease and never exceed
/// `y(0)`, everyone else is frozen. `BigM` is the mirror image with `z`.
fn extremal_monotonicity<S: Scalar, R: UpdateRule<S>>(
    rule: &R,
    config: &Configuration<S>,
    steps: u64,
    side: Selector,
) -> Result<CheckOutcome, ModelError> {
    // the neighborhood's far end: y = max over N_μ, z = min over N_M
    let far = match side {
        Selector::Mu => Selector::BigM,
        Selector::BigM => Selector::Mu,
    };
    let extreme_of = |set: &[S]| -> S {
        let it = set.iter().cloned();
        match far {
            Selector::BigM => it.max(),
            Selector::Mu => it.min(),
        }
        .expect("non-empty neighborhood")
    };
    // "moves toward the far end": nondecreasing for μ, nonincreasing for M
    let toward = |before: &S, after: &S| match side {
        Selector::Mu => after >= before,
        Selector::BigM => after <= before,
    };
    let within = |value: &S, bound: &S| match side {
        Selector::Mu => value <= bound,
        Selector::BigM => value >= bound,
    };

    let first = side.pick(config);
    let set0 = rule.neighbors(config, first)?;
    let members0 = set0.sorted_members();
    let bound0 = extreme_of(&set0.opinions(config));

    let mut current = config.clone();
    for t in 0..steps {
        let agent = side.pick(&current);
        let set = rule.neighbors(&current, agent)?;
        if set.sorted_members() != members0 {
            return Ok(CheckOutcome::fail(
                t,
                Some(agent),
                format!(
                    "neighborhood changed from {:?} to {:?}",
                    members0,
                    set.sorted_members()
                ),
            ));
        }
        let bound = extreme_of(&set.opinions(&current));
        if bound != bound0 {
            return Ok(CheckOutcome::fail(
                t,
                Some(agent),
                format!("far-end value changed from {bound0} to {bound}"),
            ));
        }
        let next = rule.apply(&current, agent)?;
        for j in current.agents() {
            let before = &current.opinions()[j.index()];
            let after = &next.opinions()[j.index()];
            let ok = if members0.binary_search(&j).is_ok() {
                toward(before, after) && within(after, &bound0)
            } else {
                before == after
            };
            if !ok {
                return Ok(CheckOutcome::fail(
                    t,
                    Some(j),
                    format!("agent {j} moved from {before} to {after} (bound {bound0})"),
                ));
            }
        }
        current = next;
    }
    Ok(CheckOutcome::pass())
}

/// Monotonicity under the all-μ schedule for `steps` steps.
pub fn verify_lemma2_monotonicity<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
    steps: u64,
) -> Result<CheckOutcome, ModelError> {
    verify_lemma2_monotonicity_with(&KnnRule { k }, config, steps)
}

/// As [`verify_lemma2_monotonicity`] with an arbitrary update rule, so a
/// deliberately broken rule can be shown to fail.
pub fn verify_lemma2_monotonicity_with<S: Scalar, R: UpdateRule<S>>(
    rule: &R,
    config: &Configuration<S>,
    steps: u64,
) -> Result<CheckOutcome, ModelError> {
    extremal_monotonicity(rule, config, steps, Selector::Mu)
}

/// Both sides of a contraction inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contraction<S> {
    pub lhs: S,
    pub rhs: S,
    pub holds: bool,
    pub tight: bool,
}

impl<S: Scalar> Contraction<S> {
    fn new(lhs: S, rhs: S) -> Self {
        Contraction {
            holds: lhs <= rhs,
            tight: lhs == rhs,
            lhs,
            rhs,
        }
    }
}

/// `(1 - 1/k) * value`.
fn shrink_factor<S: Scalar>(value: &S, k: usize) -> S {
    value.sub(&value.div_count(k))
}

/// After `k-1` μ-steps: `y(k-1) - min x(k-1) <= (1 - 1/k)(y(0) - min x(0))`.
pub fn verify_lemma3_contraction<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<Contraction<S>, ModelError> {
    config.check_k(k)?;
    let rule = KnnRule { k };
    let (states, _) = run_selectors(&rule, config, std::iter::repeat_n(Selector::Mu, k - 1))?;
    let gap = |c: &Configuration<S>| -> Result<S, ModelError> {
        let y = extremal_selection(c, k)?.y;
        Ok(y.sub(c.min()))
    };
    let before = gap(&states[0])?;
    let after = gap(states.last().expect("non-empty"))?;
    Ok(Contraction::new(after, shrink_factor(&before, k)))
}

/// Mirror of the μ-side checks under the all-M schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BigMReport<S> {
    /// Monotonicity checked directly with `M` and `z`.
    pub direct: CheckOutcome,
    /// Monotonicity checked as the μ-side property of `-x`.
    pub reflected: CheckOutcome,
    /// `max x(k-1) - z(k-1) <= (1 - 1/k)(max x(0) - z(0))`, directly.
    pub contraction: Contraction<S>,
    /// The μ-side contraction of `-x`, which must carry the same numbers.
    pub reflected_contraction: Contraction<S>,
    /// The M-schedule trajectory of `x` equals the negated μ-schedule
    /// trajectory of `-x` at every step.
    pub trajectories_agree: bool,
    pub passed: bool,
}

pub fn verify_lemma_bigm<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
    steps: u64,
) -> Result<BigMReport<S>, ModelError> {
    config.check_k(k)?;
    let rule = KnnRule { k };
    let mirrored = config.negated();

    let direct = extremal_monotonicity(&rule, config, steps, Selector::BigM)?;
    let reflected = verify_lemma2_monotonicity(&mirrored, k, steps)?;

    let (states, _) = run_selectors(&rule, config, std::iter::repeat_n(Selector::BigM, k - 1))?;
    let gap = |c: &Configuration<S>| -> Result<S, ModelError> {
        let z = extremal_selection(c, k)?.z;
        Ok(c.max().sub(&z))
    };
    let before = gap(&states[0])?;
    let after = gap(states.last().expect("non-empty"))?;
    let contraction = Contraction::new(after, shrink_factor(&before, k));
    let reflected_contraction = verify_lemma3_contraction(&mirrored, k)?;

    let horizon = steps.max(k as u64 - 1);
    let (down, _) = run_selectors(
        &rule,
        config,
        std::iter::repeat_n(Selector::BigM, horizon as usize),
    )?;
    let (up, _) = run_selectors(
        &rule,
        &mirrored,
        std::iter::repeat_n(Selector::Mu, horizon as usize),
    )?;
    let trajectories_agree = down.iter().zip(&up).all(|(a, b)| *a == b.negated());

    let passed = direct.passed
        && reflected.passed
        && contraction.holds
        && reflected_contraction.holds
        && contraction.lhs == reflected_contraction.lhs
        && contraction.rhs == reflected_contraction.rhs
        && trajectories_agree;
    Ok(BigMReport {
        direct,
        reflected,
        contraction,
        reflected_contraction,
        trajectories_agree,
        passed,
    })
}

/// Diameter contraction over one pass of the shrinking schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkCheck<S> {
    pub initial_diameter: S,
    pub final_diameter: S,
    /// `(1 - 1/k) * initial_diameter`
    pub bound: S,
    pub holds: bool,
    pub tight: bool,
    /// `n < 2k`: only then is `holds` guaranteed.
    pub guaranteed: bool,
    /// `final / initial` as a float, for reporting when `n >= 2k`.
    pub observed_ratio: Option<f64>,
}

pub fn verify_shrink_contraction<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<ShrinkCheck<S>, ModelError> {
    let record = run_shrink_schedule(config, k)?;
    let initial = record.diameters.first().expect("initial").clone();
    let last = record.diameters.last().expect("final").clone();
    let bound = shrink_factor(&initial, k);
    let observed_ratio = (!initial.is_zero()).then(|| last.to_f64() / initial.to_f64());
    Ok(ShrinkCheck {
        holds: last <= bound,
        tight: last == bound,
        guaranteed: config.len() < 2 * k,
        initial_diameter: initial,
        final_diameter: last,
        bound,
        observed_ratio,
    })
}

/// Outcome of the `z <= y` dichotomy check for one `(n, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZyReport {
    pub n: usize,
    pub k: usize,
    /// `n < 2k`
    pub bounded_regime: bool,
    pub trials: usize,
    pub passed: bool,
    /// A sampled configuration with `z > y` in the bounded regime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Configuration<Rational>>,
    /// The constructed configuration with `z > y` when `n >= 2k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Configuration<Rational>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_y: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_z: Option<Rational>,
}

/// Sorted distinct opinions `0, 1, ..., n-1`: the `k` smallest sit strictly
/// below the `k` largest whenever `n >= 2k`.
pub fn zy_witness(n: usize) -> Configuration<Rational> {
    Configuration::new((0..n as i64).map(Rational::integer).collect()).expect("n >= 1")
}

/// `z <= y` holds for every configuration iff `n < 2k`. For `n < 2k` this
/// samples `trials` random exact configurations; otherwise it checks the
/// explicit witness.
pub fn check_z_le_y(n: usize, k: usize, trials: usize, seed: u64) -> Result<ZyReport, ModelError> {
    if k == 0 || k > n {
        return Err(ModelError::KOutOfRange { k, n });
    }
    let bounded_regime = n < 2 * k;
    let mut report = ZyReport {
        n,
        k,
        bounded_regime,
        trials: 0,
        passed: true,
        counterexample: None,
        witness: None,
        witness_y: None,
        witness_z: None,
    };
    if bounded_regime {
        let mut rng = SimRng::new(seed);
        for _ in 0..trials {
            let x = random_exact_configuration(&mut rng, n);
            let sel = extremal_selection(&x, k)?;
            report.trials += 1;
            if sel.z > sel.y {
                report.passed = false;
                report.counterexample = Some(x);
                break;
            }
        }
    } else {
        let x = zy_witness(n);
        let sel = extremal_selection(&x, k)?;
        report.trials = 1;
        report.passed = sel.z > sel.y;
        report.witness = Some(x);
        report.witness_y = Some(sel.y);
        report.witness_z = Some(sel.z);
    }
    Ok(report)
}
