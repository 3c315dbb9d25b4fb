//! Batches of independent scenarios, run in parallel and merged by index.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::engine::{run_scenario, LimitClass, RunSummary};
use crate::harness::montecarlo::Quantiles;
use crate::harness::scenario::{InitialSpec, ScenarioError, ScenarioSpec, ScheduleSpec};

/// A sweep file: either an explicit list of scenarios or a template
/// replicated with shifted seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepGrid {
    List(Vec<ScenarioSpec>),
    Replicated {
        template: ScenarioSpec,
        replicates: usize,
    },
}

impl SweepGrid {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: ".".to_string(),
            message: e.to_string(),
        })
    }

    /// Replicate `r` adds `r` to the initial, schedule and event seeds.
    pub fn expand(&self) -> Vec<ScenarioSpec> {
        match self {
            SweepGrid::List(specs) => specs.clone(),
            SweepGrid::Replicated {
                template,
                replicates,
            } => (0..*replicates as u64)
                .map(|r| {
                    let mut spec = template.clone();
                    if let InitialSpec::UniformRandom { seed, .. } = &mut spec.initial {
                        *seed = seed.wrapping_add(r);
                    }
                    if let ScheduleSpec::UniformRandom { seed } = &mut spec.schedule {
                        *seed = seed.wrapping_add(r);
                    }
                    spec.event_seed = spec.event_seed.wrapping_add(r);
                    spec
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LimitCounts {
    pub consensus: usize,
    pub clustered: usize,
    pub non_clustered: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepStats {
    pub scenarios: usize,
    pub counts: LimitCounts,
    /// Number of clusters in consensus and clustered limits -> runs.
    pub cluster_count_histogram: BTreeMap<usize, usize>,
    /// Sorted cluster sizes of clustered limits -> runs.
    pub cluster_size_patterns: BTreeMap<String, usize>,
    pub hitting_times: Option<Quantiles>,
    pub stop_steps: Option<Quantiles>,
    pub errors: Vec<ScenarioFailure>,
    /// Per-scenario summaries in input order; `None` where the scenario failed.
    pub results: Vec<Option<RunSummary>>,
}

/// Runs every scenario on a pool of `parallelism` threads (`0` = rayon's
/// default). Output depends only on the scenario list.
pub fn batch_sweep(grid: &[ScenarioSpec], parallelism: usize) -> SweepStats {
    let run_all = || -> Vec<Result<RunSummary, ScenarioError>> {
        grid.par_iter()
            .map(|spec| run_scenario(spec).map(|o| o.summary))
            .collect()
    };
    let outcomes = if parallelism == 0 {
        run_all()
    } else {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
        {
            Ok(pool) => pool.install(run_all),
            Err(_) => run_all(),
        }
    };
    aggregate(outcomes)
}

fn aggregate(outcomes: Vec<Result<RunSummary, ScenarioError>>) -> SweepStats {
    let mut counts = LimitCounts::default();
    let mut histogram = BTreeMap::new();
    let mut patterns = BTreeMap::new();
    let mut hitting = Vec::new();
    let mut stops = Vec::new();
    let mut errors = Vec::new();
    let mut results = Vec::with_capacity(outcomes.len());

    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(summary) => {
                match summary.limit {
                    LimitClass::Consensus => counts.consensus += 1,
                    LimitClass::Clustered => counts.clustered += 1,
                    LimitClass::NonClustered => counts.non_clustered += 1,
                    LimitClass::NotConverged => counts.not_converged += 1,
                }
                if matches!(summary.limit, LimitClass::Consensus | LimitClass::Clustered) {
                    *histogram.entry(summary.cluster_sizes.len()).or_insert(0) += 1;
                    let mut sizes = summary.cluster_sizes.clone();
                    sizes.sort_unstable();
                    let key = sizes
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join("/");
                    *patterns.entry(key).or_insert(0) += 1;
                }
                if let Some(t) = summary.hitting_time {
                    hitting.push(t);
                }
                stops.push(summary.steps);
                results.push(Some(summary));
            }
            Err(e) => {
                errors.push(ScenarioFailure {
                    index,
                    message: e.to_string(),
                });
                results.push(None);
            }
        }
    }

    SweepStats {
        scenarios: results.len(),
        counts,
        cluster_count_histogram: histogram,
        cluster_size_patterns: patterns,
        hitting_times: Quantiles::of(&hitting),
        stop_steps: Quantiles::of(&stops),
        errors,
        results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::ModelSpec;

    #[test]
    fn trivial_consensus_grid() {
        let spec = ScenarioSpec::from_json(
            r#"{"model": {"knn": {"k": 2}},
                "initial": {"clusters": [{"opinion": "1/3", "size": 4}]},
                "schedule": {"uniform_random": {"seed": 0}}}"#,
        )
        .unwrap();
        let stats = batch_sweep(&[spec], 1);
        assert_eq!(stats.counts.consensus, 1);
        assert_eq!(stats.hitting_times.unwrap().max, 0);
    }

    #[test]
    fn errors_do_not_abort_the_batch() {
        let good = ScenarioSpec::uniform_knn(5, 3, 1, 1);
        let mut bad = good.clone();
        bad.model = ModelSpec::Knn { k: 9 };
        let stats = batch_sweep(&[bad, good], 2);
        assert_eq!(stats.scenarios, 2);
        assert_eq!(stats.errors.len(), 1);
        assert_eq!(stats.errors[0].index, 0);
        assert!(stats.results[0].is_none() && stats.results[1].is_some());
    }

    #[test]
    fn small_groups_reach_consensus_and_parallelism_does_not_matter() {
        let grid = SweepGrid::Replicated {
            template: ScenarioSpec::uniform_knn(9, 5, 100, 200),
            replicates: 12,
        }
        .expand();
        let a = batch_sweep(&grid, 1);
        let b = batch_sweep(&grid, 4);
        assert_eq!(a, b);
        assert_eq!(a.counts.consensus, 12);
    }

    #[test]
    fn grid_json_forms() {
        let one = ScenarioSpec::uniform_knn(4, 2, 1, 1);
        let list = serde_json::to_string(&vec![one.clone()]).unwrap();
        assert_eq!(SweepGrid::from_json(&list).unwrap().expand().len(), 1);
        let rep = format!(r#"{{"template": {}, "replicates": 3}}"#, one.to_json());
        let specs = SweepGrid::from_json(&rep).unwrap().expand();
        assert_eq!(specs.len(), 3);
        assert_ne!(specs[0], specs[1]);
    }
}
