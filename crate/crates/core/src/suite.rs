//! The randomized verification suite behind `verify-lemmas`: every structural
//! claim about equilibria and the convergence argument, checked in exact
//! arithmetic on seeded random inputs.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::convergence::{
    check_z_le_y, verify_lemma2_monotonicity, verify_lemma3_contraction, verify_lemma_bigm,
    verify_shrink_contraction,
};
use crate::dynamics::{Configuration, ModelError};
use crate::equilibria::{build_max_clusters, is_equilibrium, max_cluster_count, EquilibriumError};
use crate::numeric::Rational;
use crate::rng::{random_cluster_layout, random_exact_configuration, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub statement: &'static str,
    pub cases: usize,
    pub passed: bool,
    /// Input and details of the first failing case.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub trials: usize,
    pub all_passed: bool,
    pub checks: Vec<LemmaCheck>,
}

const CLUSTER_COUNT_BOUND: &str =
    "a clustered configuration has at most floor(n/k) clusters, and only consensus when n < 2k";

const SHRINK_CONTRACTION: &str =
    "for n < 2k, k-1 minimizer then k-1 maximizer updates shrink the diameter by at least 1 - 1/k";

type Verdict = Result<Option<Value>, EquilibriumError>;

/// Runs `trials` cases in parallel; case `i` draws from stream `i` of a seed
/// private to this check. The reported counterexample is the lowest-indexed
/// failure.
fn randomized(
    name: &'static str,
    statement: &'static str,
    seed: u64,
    tag: u64,
    trials: usize,
    case: impl Fn(&mut SimRng) -> Verdict + Sync,
) -> Result<LemmaCheck, EquilibriumError> {
    let check_seed = SimRng::with_stream(seed, tag).next_u64();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| case(&mut SimRng::with_stream(check_seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let counterexample = outcomes.into_iter().flatten().next();
    Ok(LemmaCheck {
        name,
        statement,
        cases: trials,
        passed: counterexample.is_none(),
        counterexample,
    })
}

fn random_n_k(rng: &mut SimRng, max_n: usize) -> (usize, usize) {
    let n = 1 + rng.below(max_n as u64) as usize;
    let k = 1 + rng.below(n as u64) as usize;
    (n, k)
}

/// Random `(n, k)` with `n < 2k`.
fn random_bounded_n_k(rng: &mut SimRng, max_n: usize) -> (usize, usize) {
    let n = 1 + rng.below(max_n as u64) as usize;
    let k = n / 2 + 1 + rng.below((n - n / 2) as u64) as usize;
    (n, k)
}

fn cluster_size_criterion(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    randomized(
        "cluster_size_criterion",
        "every neighbor set holds the agent's own opinion iff every group of equal opinions has at least k members",
        seed,
        1,
        trials,
        |rng| {
            let n = 1 + rng.below(30) as usize;
            let x = random_cluster_layout(rng, n);
            let k = 1 + rng.below(x.len() as u64) as usize;
            match is_equilibrium(&x, k) {
                Ok(r) => {
                    let by_size = r.cluster_sizes.iter().all(|&s| s >= k);
                    Ok((r.is_clustered != by_size).then(|| {
                        json!({"config": x, "k": k, "clustered": r.is_clustered, "sizes": r.cluster_sizes})
                    }))
                }
                Err(EquilibriumError::CriterionMismatch { .. }) => {
                    Ok(Some(json!({"config": x, "k": k, "error": "criteria disagree"})))
                }
                Err(e) => Err(e),
            }
        },
    )
}

fn cluster_count_bound(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    // the bound is attained: floor(n/k) clusters for every 1 <= k <= n <= 30
    for n in 1..=30 {
        for k in 1..=n {
            let x = build_max_clusters(n, k)?;
            let r = is_equilibrium(&x, k)?;
            if !r.is_clustered || r.cluster_sizes.len() != max_cluster_count(n, k)? {
                return Ok(LemmaCheck {
                    name: "cluster_count_bound",
                    statement: CLUSTER_COUNT_BOUND,
                    cases: 0,
                    passed: false,
                    counterexample: Some(json!({"construction": x, "k": k})),
                });
            }
        }
    }
    randomized(
        "cluster_count_bound",
        CLUSTER_COUNT_BOUND,
        seed,
        2,
        trials,
        |rng| {
            let n = 1 + rng.below(30) as usize;
            let x = random_cluster_layout(rng, n);
            let n = x.len();
            let k = 1 + rng.below(n as u64) as usize;
            let r = is_equilibrium(&x, k)?;
            let ok = !r.is_clustered
                || (r.cluster_sizes.len() <= n / k && (n >= 2 * k || r.is_consensus));
            Ok((!ok).then(|| json!({"config": x, "k": k, "sizes": r.cluster_sizes})))
        },
    )
}

fn random_config(
    rng: &mut SimRng,
    max_n: usize,
    bounded: bool,
) -> (Configuration<Rational>, usize) {
    let (n, k) = if bounded {
        random_bounded_n_k(rng, max_n)
    } else {
        random_n_k(rng, max_n)
    };
    (random_exact_configuration(rng, n), k)
}

fn mu_monotonicity(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    randomized(
        "mu_monotonicity",
        "always updating the lowest-index minimizer keeps its neighbor set and y fixed, members rise but stay at most y, others never move",
        seed,
        3,
        trials,
        |rng| {
            let (x, k) = random_config(rng, 12, false);
            let steps = 3 * x.len() as u64;
            let out = verify_lemma2_monotonicity(&x, k, steps)?;
            Ok(out.violation.map(|v| json!({"config": x, "k": k, "violation": v})))
        },
    )
}

fn mu_contraction(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    randomized(
        "mu_contraction",
        "after k-1 minimizer updates, y - min x shrinks by at least the factor 1 - 1/k",
        seed,
        4,
        trials,
        |rng| {
            let (x, k) = random_config(rng, 12, false);
            let c = verify_lemma3_contraction(&x, k)?;
            Ok((!c.holds).then(|| json!({"config": x, "k": k, "contraction": c})))
        },
    )
}

fn big_m_mirror(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    randomized(
        "big_m_mirror",
        "the maximizer schedule mirrors the minimizer schedule under x -> -x, with members falling but staying at least z",
        seed,
        5,
        trials,
        |rng| {
            let (x, k) = random_config(rng, 12, false);
            let steps = 3 * x.len() as u64;
            let r = verify_lemma_bigm(&x, k, steps)?;
            Ok((!r.passed).then(|| json!({"config": x, "k": k, "report": r})))
        },
    )
}

fn z_le_y_dichotomy(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    let pairs: Vec<(usize, usize)> = (2..=12)
        .flat_map(|n| (1..=n).map(move |k| (n, k)))
        .collect();
    let check_seed = SimRng::with_stream(seed, 6).next_u64();
    let reports = pairs
        .par_iter()
        .map(|&(n, k)| {
            check_z_le_y(
                n,
                k,
                trials,
                SimRng::with_stream(check_seed, (n * 16 + k) as u64).next_u64(),
            )
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let cases = reports.iter().map(|r| r.trials).sum();
    let failure = reports.iter().find(|r| !r.passed);
    Ok(LemmaCheck {
        name: "z_le_y_dichotomy",
        statement:
            "z <= y for every configuration iff n < 2k, with an explicit z > y witness otherwise",
        cases,
        passed: failure.is_none(),
        counterexample: failure.map(|r| json!(r)),
    })
}

fn shrink_contraction(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    let tight =
        verify_shrink_contraction(&Configuration::<Rational>::parse(&["0", "1/2", "1"])?, 2)?;
    if !tight.tight {
        return Ok(LemmaCheck {
            name: "shrink_contraction",
            statement: SHRINK_CONTRACTION,
            cases: 1,
            passed: false,
            counterexample: Some(json!({"config": ["0", "1/2", "1"], "k": 2, "check": tight})),
        });
    }
    randomized(
        "shrink_contraction",
        SHRINK_CONTRACTION,
        seed,
        7,
        trials,
        |rng| {
            let (x, k) = random_config(rng, 15, true);
            let c = verify_shrink_contraction(&x, k)?;
            Ok((!c.holds).then(|| json!({"config": x, "k": k, "check": c})))
        },
    )
}

fn consensus_only_equilibrium(seed: u64, trials: usize) -> Result<LemmaCheck, EquilibriumError> {
    randomized(
        "consensus_only_equilibrium",
        "for n < 2k the shrinking schedule from any state reaches diameter below any positive bound, so only consensus can be an equilibrium",
        seed,
        8,
        trials,
        |rng| {
            // iterate the schedule: the diameter shrinks geometrically
            let (x, k) = random_config(rng, 9, true);
            if k == 1 {
                return Ok(None);
            }
            let rounds = 8;
            let mut state = x.clone();
            for _ in 0..rounds {
                let record = crate::convergence::run_shrink_schedule(&state, k)?;
                state = Configuration::new(record.last().opinions.clone())?;
            }
            let d0 = crate::dynamics::diameter(&x);
            let d = crate::dynamics::diameter(&state);
            let factor = Rational::new(k as i64 - 1, k as i64);
            let mut bound = d0.clone();
            for _ in 0..rounds {
                bound = crate::numeric::Scalar::mul(&bound, &factor);
            }
            let r = is_equilibrium(&x, k)?;
            let ok = d <= bound && (!r.is_equilibrium || r.is_consensus);
            Ok((!ok).then(|| json!({"config": x, "k": k, "final_diameter": d, "bound": bound})))
        },
    )
}

/// Runs every check with `trials` random cases each (the `z <= y` check uses
/// `trials` per `(n, k)` pair).
pub fn verify_lemmas(seed: u64, trials: usize) -> Result<SuiteReport, EquilibriumError> {
    let trials = trials.max(1);
    let checks = vec![
        cluster_size_criterion(seed, trials)?,
        cluster_count_bound(seed, trials)?,
        mu_monotonicity(seed, trials)?,
        mu_contraction(seed, trials)?,
        big_m_mirror(seed, trials)?,
        z_le_y_dichotomy(seed, trials)?,
        shrink_contraction(seed, trials)?,
        consensus_only_equilibrium(seed, trials)?,
    ];
    Ok(SuiteReport {
        seed,
        trials,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = verify_lemmas(7, 60).unwrap();
        assert!(
            a.all_passed,
            "{}",
            serde_json::to_string_pretty(&a).unwrap()
        );
        assert_eq!(a.checks.len(), 8);
        let b = verify_lemmas(7, 60).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_trial_runs() {
        let r = verify_lemmas(0, 1).unwrap();
        assert!(r.all_passed);
        assert_eq!(r.checks[0].cases, 1);
    }

    #[test]
    fn bounded_pairs_satisfy_n_lt_2k() {
        let mut rng = SimRng::new(3);
        for _ in 0..1000 {
            let (n, k) = random_bounded_n_k(&mut rng, 15);
            assert!(n < 2 * k && k <= n, "{n} {k}");
        }
    }
}
