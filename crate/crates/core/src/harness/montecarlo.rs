//! Seeded Monte Carlo check of convergence to consensus for `n < 2k`.

use rayon::prelude::*;
use serde::Serialize;

use crate::harness::engine::{summarize, Simulation};
use crate::harness::scenario::{ScenarioError, ScenarioSpec};
use crate::numeric::Float;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    pub max_steps: u64,
    pub tolerance: f64,
    /// Permit exploratory runs with `n >= 2k`, outside the guarantee.
    pub allow_unguaranteed: bool,
}

impl MonteCarloConfig {
    pub fn new(n: usize, k: usize, runs: usize, seed: u64) -> Self {
        MonteCarloConfig {
            n,
            k,
            runs,
            seed,
            max_steps: crate::harness::scenario::DEFAULT_MAX_STEPS,
            tolerance: crate::harness::scenario::DEFAULT_TOLERANCE,
            allow_unguaranteed: false,
        }
    }

    /// Scenario of run `index`: uniform `[0, 1]` initial opinions and a
    /// uniform random schedule, with both seeds drawn from stream `index` of
    /// the master seed.
    pub fn run_spec(&self, index: usize) -> ScenarioSpec {
        let mut seeds = SimRng::with_stream(self.seed, index as u64);
        let mut spec =
            ScenarioSpec::uniform_knn(self.n, self.k, seeds.next_u64(), seeds.next_u64());
        spec.max_steps = self.max_steps;
        spec.convergence_tolerance = self.tolerance.into();
        spec.record.snapshot_every = 0;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusRun {
    pub index: usize,
    /// Diameter fell below the tolerance within `max_steps`.
    pub converged: bool,
    pub hitting_time: Option<u64>,
    /// Mean of the final opinions.
    pub consensus_value: f64,
    pub initial_min: f64,
    pub initial_max: f64,
    /// `consensus_value` and every final opinion lie in the initial hull.
    pub in_hull: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: u64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
    pub mean: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles; `None` for an empty sample.
    pub fn of(values: &[u64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let rank = |p: f64| {
            let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
            sorted[idx]
        };
        Some(Quantiles {
            min: sorted[0],
            p50: rank(0.5),
            p90: rank(0.9),
            p99: rank(0.99),
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().map(|&v| v as f64).sum::<f64>() / sorted.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusStats {
    pub config: MonteCarloConfig,
    pub converged_runs: usize,
    pub fraction_converged: f64,
    pub all_in_hull: bool,
    pub hitting_times: Option<Quantiles>,
    pub runs: Vec<ConsensusRun>,
}

pub fn monte_carlo_consensus(config: &MonteCarloConfig) -> Result<ConsensusStats, ScenarioError> {
    if config.n >= 2 * config.k && !config.allow_unguaranteed {
        return Err(ScenarioError::invalid(
            "n",
            format!(
                "n = {} >= 2k = {}: consensus is not guaranteed (set allow_unguaranteed to explore)",
                config.n,
                2 * config.k
            ),
        ));
    }
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|index| run_one(config, index))
        .collect::<Result<Vec<_>, _>>()?;

    let converged_runs = runs.iter().filter(|r| r.converged).count();
    let times: Vec<u64> = runs.iter().filter_map(|r| r.hitting_time).collect();
    Ok(ConsensusStats {
        converged_runs,
        fraction_converged: if runs.is_empty() {
            0.0
        } else {
            converged_runs as f64 / runs.len() as f64
        },
        all_in_hull: runs.iter().all(|r| r.in_hull),
        hitting_times: Quantiles::of(&times),
        config: config.clone(),
        runs,
    })
}

fn run_one(config: &MonteCarloConfig, index: usize) -> Result<ConsensusRun, ScenarioError> {
    let spec = config.run_spec(index);
    let mut sim = Simulation::<Float>::from_spec(&spec)?;
    sim.set_stop_on_equilibrium(config.n >= 2 * config.k);
    let record = sim.run()?;
    let tol = Float::new(config.tolerance)
        .map_err(|e| ScenarioError::invalid("tolerance", e.to_string()))?;
    let summary = summarize(&record, &tol);
    let last = &record.last().opinions;
    let value = last.iter().map(|x| x.get()).sum::<f64>() / last.len() as f64;
    let (lo, hi) = (summary.initial_min, summary.initial_max);
    let in_hull = (lo..=hi).contains(&value) && last.iter().all(|x| (lo..=hi).contains(&x.get()));
    Ok(ConsensusRun {
        index,
        converged: record.hitting_time.is_some(),
        hitting_time: record.hitting_time,
        consensus_value: value,
        initial_min: lo,
        initial_max: hi,
        in_hull,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_agent_is_immediately_converged() {
        let stats = monte_carlo_consensus(&MonteCarloConfig::new(1, 1, 5, 9)).unwrap();
        assert_eq!(stats.converged_runs, 5);
        assert!(stats.runs.iter().all(|r| r.hitting_time == Some(0)));
        assert!(stats.all_in_hull);
    }

    #[test]
    fn two_agents_reach_consensus_inside_the_hull() {
        let stats = monte_carlo_consensus(&MonteCarloConfig::new(2, 2, 20, 4)).unwrap();
        assert_eq!(stats.fraction_converged, 1.0);
        assert!(stats.all_in_hull);
        for r in &stats.runs {
            assert!(r.hitting_time.unwrap() >= 1);
        }
    }

    #[test]
    fn refuses_unguaranteed_regime_by_default() {
        assert!(monte_carlo_consensus(&MonteCarloConfig::new(10, 5, 1, 0)).is_err());
        let mut cfg = MonteCarloConfig::new(10, 5, 2, 0);
        cfg.allow_unguaranteed = true;
        cfg.max_steps = 20_000;
        assert!(monte_carlo_consensus(&cfg).is_ok());
    }

    #[test]
    fn quantiles_nearest_rank() {
        let q = Quantiles::of(&[5, 1, 3, 2, 4]).unwrap();
        assert_eq!((q.min, q.p50, q.p90, q.max), (1, 3, 5, 5));
        assert_eq!(q.mean, 3.0);
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = MonteCarloConfig::new(5, 3, 6, 77);
        assert_eq!(
            monte_carlo_consensus(&cfg).unwrap(),
            monte_carlo_consensus(&cfg).unwrap()
        );
    }
}
