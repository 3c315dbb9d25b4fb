//! The three reference figures: a clustered limit, a non-clustered limit found
//! by seed search, and the addition of four agents to a consensus under both
//! models. Scenarios ship as JSON data.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::AgentId;
use crate::equilibria::build_example1;
use crate::export::write_run_outputs;
use crate::harness::{
    run_scenario, InitialSpec, LimitClass, ScenarioError, ScenarioOutcome, ScenarioSpec,
    ScheduleSpec,
};
use crate::numeric::{Backend, NumberLiteral, Rational, Scalar};

pub const FIG1_SPEC: &str = include_str!("../data/fig1.json");
pub const FIG2_SPEC: &str = include_str!("../data/fig2.json");
pub const FIG3_KNN_SPEC: &str = include_str!("../data/fig3_knn.json");
pub const FIG3_ABC_SPEC: &str = include_str!("../data/fig3_abc.json");

/// Seeds tried, in order, when looking for a non-clustered limit. Seed `s`
/// sets both the initial and the schedule seed to `s`.
pub const FIG2_SEED_RANGE: std::ops::Range<u64> = 0..4000;

/// Number of agents present from the start in the addition figure.
const FIG3_ORIGINALS: usize = 10;

#[derive(Debug, Error)]
pub enum FigureError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("writing figure output: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSearch {
    pub first: u64,
    pub last: u64,
    /// First seed in the range whose limit is non-clustered.
    pub found: Option<u64>,
    /// Whether the snapped limit of the found run is an exact equilibrium.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_certified: Option<bool>,
    /// Set when no seed qualified and an exact construction stands in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRun {
    pub id: &'static str,
    pub files: Vec<PathBuf>,
    pub limit: LimitClass,
    pub cluster_sizes: Vec<usize>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiguresReport {
    pub runs: Vec<FigureRun>,
    pub fig2_search: SeedSearch,
    /// Agents 1..=10 never moved in the k-NN addition run.
    pub fig3_knn_originals_constant: bool,
    /// Some agent in 1..=10 moved in the bounded-confidence addition run.
    pub fig3_abc_originals_changed: bool,
}

pub fn fig1_spec() -> ScenarioSpec {
    ScenarioSpec::from_json(FIG1_SPEC).expect("shipped scenario is valid")
}

pub fn fig2_template() -> ScenarioSpec {
    ScenarioSpec::from_json(FIG2_SPEC).expect("shipped scenario is valid")
}

pub fn fig3_specs() -> (ScenarioSpec, ScenarioSpec) {
    (
        ScenarioSpec::from_json(FIG3_KNN_SPEC).expect("shipped scenario is valid"),
        ScenarioSpec::from_json(FIG3_ABC_SPEC).expect("shipped scenario is valid"),
    )
}

fn with_seed(template: &ScenarioSpec, seed: u64) -> ScenarioSpec {
    let mut spec = template.clone();
    if let InitialSpec::UniformRandom { seed: s, .. } = &mut spec.initial {
        *s = seed;
    }
    if let ScheduleSpec::UniformRandom { seed: s } = &mut spec.schedule {
        *s = seed;
    }
    spec
}

/// Searches [`FIG2_SEED_RANGE`] for a run ending in a non-clustered limit.
/// Seeds are tried in parallel batches; the lowest qualifying seed wins.
pub fn search_non_clustered(
    template: &ScenarioSpec,
) -> Result<Option<(u64, ScenarioSpec, ScenarioOutcome)>, ScenarioError> {
    const BATCH: u64 = 256;
    let mut start = FIG2_SEED_RANGE.start;
    while start < FIG2_SEED_RANGE.end {
        let end = (start + BATCH).min(FIG2_SEED_RANGE.end);
        let hit = (start..end)
            .into_par_iter()
            .map(|seed| {
                let spec = with_seed(template, seed);
                let outcome = run_scenario(&spec)?;
                Ok((outcome.summary.limit == LimitClass::NonClustered)
                    .then_some((seed, spec, outcome)))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?
            .into_iter()
            .flatten()
            .next();
        if hit.is_some() {
            return Ok(hit);
        }
        start = end;
    }
    Ok(None)
}

/// Exact stand-in for the non-clustered figure: the 20-agent, k = 5
/// construction with opinions 0 and 1 at the ends, run on the exact backend
/// (it stops at once).
pub fn fig2_fallback_spec(template: &ScenarioSpec) -> ScenarioSpec {
    let config = build_example1(&Rational::integer(0), &Rational::integer(1))
        .expect("0 < 1 gives a valid construction");
    let mut spec = template.clone();
    spec.name = Some("exact non-clustered equilibrium, n = 20, k = 5".to_string());
    spec.backend = Backend::Exact;
    spec.initial = InitialSpec::Explicit(
        config
            .opinions()
            .iter()
            .map(|x| NumberLiteral::Text(x.to_text()))
            .collect(),
    );
    spec.convergence_tolerance = NumberLiteral::Text("1/1000000000".to_string());
    spec.refine_exact = false;
    spec
}

fn originals_constant(outcome: &ScenarioOutcome) -> bool {
    let rows = outcome.trajectory.float_rows();
    let initial: Vec<f64> = rows
        .iter()
        .filter(|(step, a, _)| *step == 0 && a.0 <= FIG3_ORIGINALS)
        .map(|r| r.2)
        .collect();
    rows.iter()
        .filter(|(_, a, _)| a.0 <= FIG3_ORIGINALS)
        .all(|(_, AgentId(a), x)| x.to_bits() == initial[a - 1].to_bits())
}

fn record(id: &'static str, files: Vec<PathBuf>, outcome: &ScenarioOutcome) -> FigureRun {
    FigureRun {
        id,
        files,
        limit: outcome.summary.limit,
        cluster_sizes: outcome.summary.cluster_sizes.clone(),
        steps: outcome.summary.steps,
    }
}

/// Runs all figure scenarios and writes `<id>.csv`, `<id>.json` and
/// `<id>.svg` for each, plus a `figures.json` index, into `out_dir`.
pub fn generate_figures(out_dir: &Path) -> Result<FiguresReport, FigureError> {
    fs::create_dir_all(out_dir)?;
    let mut runs = Vec::new();

    let fig1 = fig1_spec();
    let outcome = run_scenario(&fig1)?;
    runs.push(record(
        "fig1",
        write_run_outputs(&out_dir.join("fig1"), &fig1, &outcome)?,
        &outcome,
    ));

    let template = fig2_template();
    let (spec, outcome, fig2_search) = match search_non_clustered(&template)? {
        Some((seed, spec, outcome)) => {
            let search = SeedSearch {
                first: FIG2_SEED_RANGE.start,
                last: FIG2_SEED_RANGE.end - 1,
                found: Some(seed),
                exact_certified: outcome.summary.exact_certified,
                fallback: None,
            };
            (spec, outcome, search)
        }
        None => {
            let spec = fig2_fallback_spec(&template);
            let outcome = run_scenario(&spec)?;
            let search = SeedSearch {
                first: FIG2_SEED_RANGE.start,
                last: FIG2_SEED_RANGE.end - 1,
                found: None,
                exact_certified: None,
                fallback: Some(
                    "no seed in range reached a non-clustered limit; plotting the exact 20-agent construction instead"
                        .to_string(),
                ),
            };
            (spec, outcome, search)
        }
    };
    runs.push(record(
        "fig2",
        write_run_outputs(&out_dir.join("fig2"), &spec, &outcome)?,
        &outcome,
    ));

    let (knn, abc) = fig3_specs();
    let knn_outcome = run_scenario(&knn)?;
    let abc_outcome = run_scenario(&abc)?;
    runs.push(record(
        "fig3_knn",
        write_run_outputs(&out_dir.join("fig3_knn"), &knn, &knn_outcome)?,
        &knn_outcome,
    ));
    runs.push(record(
        "fig3_abc",
        write_run_outputs(&out_dir.join("fig3_abc"), &abc, &abc_outcome)?,
        &abc_outcome,
    ));

    let report = FiguresReport {
        runs,
        fig2_search,
        fig3_knn_originals_constant: originals_constant(&knn_outcome),
        fig3_abc_originals_changed: !originals_constant(&abc_outcome),
    };
    fs::write(
        out_dir.join("figures.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    Ok(report)
}
