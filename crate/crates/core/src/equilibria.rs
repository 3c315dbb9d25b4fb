//! Equilibrium, clustered and consensus classification, cluster
//! decomposition, and exact constructions of non-clustered equilibria.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{
    knn_neighbors, AgentId, AnyConfiguration, Configuration, ModelError, NeighborSet,
};
use crate::numeric::{Backend, Float, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("exact classification needs the exact backend; quantize float configurations with quantize_clusters first")]
    FloatBackend,
    #[error("alpha must be strictly below beta (alpha = {alpha}, beta = {beta})")]
    InvalidInterval { alpha: String, beta: String },
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(String),
    #[error("neighbor-set and cluster-size criteria disagree for k = {k} on {config}")]
    CriterionMismatch { k: usize, config: String },
    #[error("constructed configuration failed its own check: {0}")]
    ConstructionFailed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One same-opinion group `V_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterGroup<S> {
    /// Shared opinion, or the group mean for quantized partitions.
    pub opinion: S,
    /// Ascending ids.
    pub members: Vec<AgentId>,
    /// `max - min` inside the group; zero for exact partitions.
    pub spread: S,
}

impl<S> ClusterGroup<S> {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Partition of the agents into groups, sorted by ascending opinion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterPartition<S> {
    pub groups: Vec<ClusterGroup<S>>,
    pub sizes: Vec<usize>,
}

impl<S: Scalar> ClusterPartition<S> {
    fn from_groups(groups: Vec<ClusterGroup<S>>) -> Self {
        let sizes = groups.iter().map(ClusterGroup::size).collect();
        ClusterPartition { groups, sizes }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn min_size(&self) -> usize {
        self.sizes.iter().copied().min().unwrap_or(0)
    }

    pub fn opinions(&self) -> Vec<S> {
        self.groups.iter().map(|g| g.opinion.clone()).collect()
    }

    pub fn max_spread(&self) -> S {
        self.groups
            .iter()
            .map(|g| g.spread.clone())
            .max()
            .unwrap_or_else(S::zero)
    }

    /// Group index of every agent, indexed by `agent.index()`.
    pub fn labels(&self, n: usize) -> Vec<usize> {
        let mut labels = vec![0; n];
        for (g, group) in self.groups.iter().enumerate() {
            for m in &group.members {
                labels[m.index()] = g;
            }
        }
        labels
    }
}

/// Single-linkage grouping on the sorted opinion line: neighbors in sorted
/// order whose gap is at most `tolerance` share a group. With a zero tolerance
/// this is grouping by exact equality.
pub(crate) fn linkage_groups<S: Scalar>(
    config: &Configuration<S>,
    tolerance: &S,
) -> ClusterPartition<S> {
    let mut order: Vec<(&S, usize)> = config.opinions().iter().zip(0..).collect();
    order.sort_unstable();

    let mut groups = Vec::new();
    let mut start = 0;
    for pos in 1..=order.len() {
        let split = pos == order.len() || order[pos].0.sub(order[pos - 1].0) > *tolerance;
        if !split {
            continue;
        }
        let slice = &order[start..pos];
        let values: Vec<S> = slice.iter().map(|(x, _)| (*x).clone()).collect();
        let lo = slice[0].0;
        let hi = slice[slice.len() - 1].0;
        let opinion = if lo == hi {
            lo.clone()
        } else {
            S::mean_nonempty(&values).clamp(lo.clone(), hi.clone())
        };
        let mut members: Vec<AgentId> =
            slice.iter().map(|(_, j)| AgentId::from_index(*j)).collect();
        members.sort_unstable();
        groups.push(ClusterGroup {
            opinion,
            members,
            spread: hi.sub(lo),
        });
        start = pos;
    }
    ClusterPartition::from_groups(groups)
}

/// Partition by exact equality of opinions, on either backend (bitwise for
/// floats). Used where the caller knows the values were never perturbed.
pub(crate) fn partition_by_equality<S: Scalar>(config: &Configuration<S>) -> ClusterPartition<S> {
    linkage_groups(config, &S::zero())
}

fn require_exact<S: Scalar>() -> Result<(), EquilibriumError> {
    match S::BACKEND {
        Backend::Exact => Ok(()),
        Backend::Float => Err(EquilibriumError::FloatBackend),
    }
}

/// `V_i = {j : x_j = x_i}` for every agent, as a partition.
pub fn partition_clusters<S: Scalar>(
    config: &Configuration<S>,
) -> Result<ClusterPartition<S>, EquilibriumError> {
    require_exact::<S>()?;
    Ok(partition_by_equality(config))
}

/// Single-linkage grouping with gap threshold `tolerance`; each group reports
/// its mean as representative opinion. Chains: `[0, 0.5, 1]` at tolerance
/// `0.5` is one group.
pub fn quantize_clusters<S: Scalar>(
    config: &Configuration<S>,
    tolerance: &S,
) -> Result<ClusterPartition<S>, EquilibriumError> {
    if *tolerance <= S::zero() {
        return Err(EquilibriumError::NonPositiveTolerance(
            tolerance.to_string(),
        ));
    }
    Ok(linkage_groups(config, tolerance))
}

/// Agent whose neighborhood breaks a predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub agent: AgentId,
    pub neighbors: Vec<AgentId>,
}

impl From<NeighborSet> for Witness {
    fn from(set: NeighborSet) -> Self {
        Witness {
            agent: set.agent,
            neighbors: set.members,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Witnesses {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clustered: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquilibriumReport {
    pub k: usize,
    pub n: usize,
    pub is_equilibrium: bool,
    pub is_clustered: bool,
    pub is_consensus: bool,
    pub cluster_sizes: Vec<usize>,
    /// Set when the classified configuration was snapped from float values.
    pub numerical: bool,
    pub witnesses: Witnesses,
}

/// Classification by the definitions, comparing values with `==`. Works on
/// any backend; the public entry points restrict it to exact values.
pub(crate) fn classify<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<EquilibriumReport, EquilibriumError> {
    config.check_k(k)?;
    let mut witnesses = Witnesses::default();

    for i in config.agents() {
        let set = knn_neighbors(config, i, k)?;
        let own = &config.opinions()[i.index()];
        let values = set.opinions(config);
        if witnesses.clustered.is_none() && values.iter().any(|v| v != own) {
            witnesses.clustered = Some(Witness::from(set.clone()));
        }
        if witnesses.equilibrium.is_none() && S::mean_nonempty(&values) != *own {
            witnesses.equilibrium = Some(Witness::from(set));
        }
        if witnesses.equilibrium.is_some() && witnesses.clustered.is_some() {
            break;
        }
    }

    let partition = partition_by_equality(config);
    let by_sizes = partition.min_size() >= k;
    let direct = witnesses.clustered.is_none();
    if by_sizes != direct {
        return Err(EquilibriumError::CriterionMismatch {
            k,
            config: config.to_string(),
        });
    }

    let first = &config.opinions()[0];
    if let Some(pos) = config.opinions().iter().position(|x| x != first) {
        let agent = AgentId::from_index(pos);
        witnesses.consensus = Some(Witness::from(knn_neighbors(config, agent, k)?));
    }

    Ok(EquilibriumReport {
        k,
        n: config.len(),
        is_equilibrium: witnesses.equilibrium.is_none(),
        is_clustered: direct,
        is_consensus: witnesses.consensus.is_none(),
        cluster_sizes: partition.sizes,
        numerical: false,
        witnesses,
    })
}

/// Full classification report; `is_equilibrium` holds iff `f(x, i) = x` for
/// every agent.
pub fn is_equilibrium<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<EquilibriumReport, EquilibriumError> {
    require_exact::<S>()?;
    classify(config, k)
}

/// True iff every neighborhood is opinion-homogeneous at the agent's own
/// opinion. Cross-checked against "every cluster has at least `k` members".
pub fn is_clustered<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<bool, EquilibriumError> {
    require_exact::<S>()?;
    config.check_k(k)?;
    let mut direct = true;
    for i in config.agents() {
        let set = knn_neighbors(config, i, k)?;
        let own = &config.opinions()[i.index()];
        if set
            .members
            .iter()
            .any(|j| &config.opinions()[j.index()] != own)
        {
            direct = false;
            break;
        }
    }
    let by_sizes = partition_by_equality(config).min_size() >= k;
    if direct != by_sizes {
        return Err(EquilibriumError::CriterionMismatch {
            k,
            config: config.to_string(),
        });
    }
    Ok(direct)
}

/// Largest number of distinct clusters a clustered configuration can hold:
/// `floor(n / k)`.
pub fn max_cluster_count(n: usize, k: usize) -> Result<usize, EquilibriumError> {
    if k == 0 || k > n {
        return Err(ModelError::KOutOfRange { k, n }.into());
    }
    Ok(n / k)
}

/// Configuration made of consecutive blocks, each `(opinion, size)`.
pub fn from_clusters<S: Scalar>(blocks: &[(S, usize)]) -> Result<Configuration<S>, ModelError> {
    let opinions = blocks
        .iter()
        .flat_map(|(v, size)| std::iter::repeat_n(v.clone(), *size))
        .collect();
    Configuration::new(opinions)
}

/// Clustered configuration with the maximum `floor(n/k)` clusters at opinions
/// `0, 1, 2, ...`; the last cluster absorbs the remainder.
pub fn build_max_clusters(n: usize, k: usize) -> Result<Configuration<Rational>, EquilibriumError> {
    let count = max_cluster_count(n, k)?;
    let blocks: Vec<(Rational, usize)> = (0..count)
        .map(|c| {
            let size = if c + 1 == count {
                n - k * (count - 1)
            } else {
                k
            };
            (Rational::integer(c as i64), size)
        })
        .collect();
    Ok(from_clusters(&blocks)?)
}

fn check_interval(alpha: &Rational, beta: &Rational) -> Result<(), EquilibriumError> {
    if alpha >= beta {
        return Err(EquilibriumError::InvalidInterval {
            alpha: alpha.to_string(),
            beta: beta.to_string(),
        });
    }
    Ok(())
}

fn certify_non_clustered(
    config: &Configuration<Rational>,
    k: usize,
) -> Result<(), EquilibriumError> {
    let report = is_equilibrium(config, k)?;
    if !report.is_equilibrium || report.is_clustered {
        return Err(EquilibriumError::ConstructionFailed(format!(
            "{config} with k = {k}: equilibrium = {}, clustered = {}",
            report.is_equilibrium, report.is_clustered
        )));
    }
    Ok(())
}

/// Seven agents, `k = 3`: `α` at odd ids 1, 3, 5, `β` at even ids 2, 4, 6 and
/// the midpoint at agent 7. An equilibrium only because of the lower-id tie
/// rule.
pub fn build_tie_counterexample(
    alpha: &Rational,
    beta: &Rational,
) -> Result<Configuration<Rational>, EquilibriumError> {
    check_interval(alpha, beta)?;
    let mid = alpha.add(beta).div_count(2);
    let mut opinions = Vec::with_capacity(7);
    for i in 1..=6 {
        opinions.push(if i % 2 == 1 {
            alpha.clone()
        } else {
            beta.clone()
        });
    }
    opinions.push(mid);
    let config = Configuration::new(opinions)?;
    certify_non_clustered(&config, 3)?;
    Ok(config)
}

/// Twenty agents, `k = 5`: eleven at `α`, two at `(3α+2β)/5`, two at
/// `(2α+3β)/5`, five at `β`. Non-clustered without relying on ties.
pub fn build_example1(
    alpha: &Rational,
    beta: &Rational,
) -> Result<Configuration<Rational>, EquilibriumError> {
    check_interval(alpha, beta)?;
    let combo = |a: i64, b: i64| {
        alpha
            .mul(&Rational::integer(a))
            .add(&beta.mul(&Rational::integer(b)))
            .div_count(5)
    };
    let config = from_clusters(&[
        (alpha.clone(), 11),
        (combo(3, 2), 2),
        (combo(2, 3), 2),
        (beta.clone(), 5),
    ])?;
    certify_non_clustered(&config, 5)?;
    Ok(config)
}

/// Snaps a float configuration onto nearby simple rationals: agents are
/// grouped by [`quantize_clusters`] and each group's representative is
/// replaced by the rational with the smallest denominator within `tolerance`.
pub fn refine_to_exact(
    config: &Configuration<Float>,
    tolerance: f64,
) -> Result<Configuration<Rational>, EquilibriumError> {
    let tol = Float::new(tolerance).map_err(ModelError::from)?;
    let partition = quantize_clusters(config, &tol)?;
    let tol_exact = Rational::from_f64(tolerance).map_err(ModelError::from)?;
    let mut opinions = vec![Rational::zero(); config.len()];
    for group in &partition.groups {
        let center = Rational::from_f64(group.opinion.get()).map_err(ModelError::from)?;
        let snapped = Rational::simplest_between(&center.sub(&tol_exact), &center.add(&tol_exact));
        for m in &group.members {
            opinions[m.index()] = snapped.clone();
        }
    }
    Ok(Configuration::new(opinions)?)
}

/// Exact candidate for the k-NN limit near a float state. Groups are first
/// snapped independently to the simplest rationals within `tolerance`; if
/// that is not an exact equilibrium, groups whose neighbor sets stay inside
/// the group keep their snapped values and the other groups are solved from
/// the fixed-point equations `k * r_g = sum_h c_gh * r_h`, where `c_gh`
/// counts the neighbors in group `h` of a member of group `g` in the float
/// state. The returned configuration still has to be checked.
pub fn refine_equilibrium(
    config: &Configuration<Float>,
    k: usize,
    tolerance: f64,
) -> Result<Configuration<Rational>, EquilibriumError> {
    config.check_k(k)?;
    let snapped = refine_to_exact(config, tolerance)?;
    if is_equilibrium(&snapped, k)?.is_equilibrium {
        return Ok(snapped);
    }
    let tol = Float::new(tolerance).map_err(ModelError::from)?;
    let partition = quantize_clusters(config, &tol)?;
    let labels = partition.labels(config.len());
    let g = partition.len();

    // counts[a][b]: neighbors in group b of the first member of group a
    let mut counts = vec![vec![0i64; g]; g];
    for (a, group) in partition.groups.iter().enumerate() {
        for j in knn_neighbors(config, group.members[0], k)?.members {
            counts[a][labels[j.index()]] += 1;
        }
    }
    let anchored: Vec<bool> = (0..g).map(|a| counts[a][a] == k as i64).collect();
    let unknowns: Vec<usize> = (0..g).filter(|&a| !anchored[a]).collect();
    let value_of = |a: usize| snapped.opinions()[partition.groups[a].members[0].index()].clone();

    // rows: k * r_a - sum_{b unknown} c_ab r_b = sum_{b anchored} c_ab r_b
    let mut rows: Vec<Vec<BigRational>> = unknowns
        .iter()
        .map(|&a| {
            let mut row: Vec<BigRational> = unknowns
                .iter()
                .map(|&b| {
                    let diag = if a == b { k as i64 } else { 0 };
                    BigRational::from_integer((diag - counts[a][b]).into())
                })
                .collect();
            let rhs = (0..g)
                .filter(|&b| anchored[b])
                .map(|b| value_of(b).into_big() * BigRational::from_integer(counts[a][b].into()))
                .fold(BigRational::zero(), |acc, v| acc + v);
            row.push(rhs);
            row
        })
        .collect();
    let Some(solution) = solve_linear(&mut rows) else {
        return Ok(snapped);
    };

    let mut opinions = snapped.into_opinions();
    for (&a, value) in unknowns.iter().zip(solution) {
        for m in &partition.groups[a].members {
            opinions[m.index()] = Rational::from(value.clone());
        }
    }
    Ok(Configuration::new(opinions)?)
}

/// Gauss-Jordan elimination on an augmented square system; `None` when
/// singular.
fn solve_linear(rows: &mut [Vec<BigRational>]) -> Option<Vec<BigRational>> {
    let n = rows.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !rows[r][col].is_zero())?;
        rows.swap(col, pivot);
        let p = rows[col][col].clone();
        for v in rows[col].iter_mut() {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                let pivot_row = rows[col].clone();
                for (v, pv) in rows[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &factor * pv;
                }
            }
        }
    }
    Some(rows.iter().map(|row| row[n].clone()).collect())
}

/// Classification of float values: snap with [`refine_to_exact`], then
/// classify exactly. The report is flagged `numerical`.
pub fn classify_numerical(
    config: &Configuration<Float>,
    k: usize,
    tolerance: f64,
) -> Result<EquilibriumReport, EquilibriumError> {
    let snapped = refine_equilibrium(config, k, tolerance)?;
    let mut report = is_equilibrium(&snapped, k)?;
    report.numerical = true;
    Ok(report)
}

/// Exact classification for exact input; float input is snapped to nearby
/// rationals at `tolerance` first and the report is marked numerical.
pub fn classify_any(
    config: &AnyConfiguration,
    k: usize,
    tolerance: f64,
) -> Result<EquilibriumReport, EquilibriumError> {
    match config {
        AnyConfiguration::Exact(x) => is_equilibrium(x, k),
        AnyConfiguration::Float(x) => classify_numerical(x, k, tolerance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::knn_update;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn exact(values: &[&str]) -> Configuration<Rational> {
        Configuration::parse(values).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = partition_clusters(&exact(&["3/7"; 5])).unwrap();
        assert_eq!(p.sizes, vec![5]);

        let x = build_example1(&q("0"), &q("1")).unwrap();
        let p = partition_clusters(&x).unwrap();
        assert_eq!(p.sizes, vec![11, 2, 2, 5]);
        assert_eq!(p.opinions(), vec![q("0"), q("2/5"), q("3/5"), q("1")]);

        let p = partition_clusters(&exact(&["0", "1", "0", "1", "0", "1", "1/2"])).unwrap();
        assert_eq!(p.sizes, vec![3, 1, 3]);
        assert_eq!(p.opinions(), vec![q("0"), q("1/2"), q("1")]);
        assert_eq!(
            p.groups[0].members,
            vec![AgentId(1), AgentId(3), AgentId(5)]
        );
    }

    #[test]
    fn float_input_is_rejected_by_exact_classifiers() {
        let x = Configuration::new(vec![Float::new(0.5).unwrap(); 3]).unwrap();
        assert_eq!(partition_clusters(&x), Err(EquilibriumError::FloatBackend));
        assert_eq!(
            is_equilibrium(&x, 2).unwrap_err(),
            EquilibriumError::FloatBackend
        );
        assert_eq!(is_clustered(&x, 2), Err(EquilibriumError::FloatBackend));
    }

    #[test]
    fn counterexamples_are_non_clustered_equilibria() {
        let x = build_tie_counterexample(&q("0"), &q("1")).unwrap();
        assert_eq!(x, exact(&["0", "1", "0", "1", "0", "1", "1/2"]));
        let r = is_equilibrium(&x, 3).unwrap();
        assert!(r.is_equilibrium && !r.is_clustered && !r.is_consensus);
        assert_eq!(r.witnesses.clustered.as_ref().unwrap().agent, AgentId(7));
        assert!(r.witnesses.equilibrium.is_none());

        let x = build_example1(&q("0"), &q("1")).unwrap();
        let r = is_equilibrium(&x, 5).unwrap();
        assert!(r.is_equilibrium && !r.is_clustered);
    }

    #[test]
    fn constructor_parameter_variants() {
        let x = build_tie_counterexample(&q("-1"), &q("1")).unwrap();
        assert_eq!(x.opinions()[6], q("0"));
        let x = build_tie_counterexample(&q("1/3"), &q("2/3")).unwrap();
        assert_eq!(x.opinions()[6], q("1/2"));

        let x = build_example1(&q("0"), &q("5")).unwrap();
        assert_eq!(x.opinions()[11], q("2"));
        assert_eq!(x.opinions()[13], q("3"));
        let x = build_example1(&q("-1"), &q("1")).unwrap();
        assert_eq!(x.opinions()[12], q("-1/5"));
        assert_eq!(x.opinions()[14], q("1/5"));

        assert!(matches!(
            build_tie_counterexample(&q("1"), &q("1")),
            Err(EquilibriumError::InvalidInterval { .. })
        ));
        assert!(build_example1(&q("2"), &q("1")).is_err());
    }

    #[test]
    fn every_configuration_is_clustered_for_k_one() {
        let x = exact(&["0", "1/3", "5", "-2", "1/3"]);
        let r = is_equilibrium(&x, 1).unwrap();
        assert!(r.is_equilibrium);
        assert!(r.is_clustered);
    }

    #[test]
    fn clustered_examples() {
        let mut v = vec!["0"; 10];
        v.extend(["1"; 10]);
        assert!(is_clustered(&exact(&v), 5).unwrap());
        assert!(!is_clustered(&exact(&["0", "1", "0", "1", "0", "1", "1/2"]), 3).unwrap());
        assert!(is_clustered(&exact(&["9"; 4]), 4).unwrap());
        let r = is_equilibrium(&exact(&["9"; 4]), 4).unwrap();
        assert!(r.is_consensus && r.is_clustered && r.is_equilibrium);
    }

    #[test]
    fn non_equilibrium_has_witness() {
        let x = exact(&["0", "1/2", "1"]);
        let r = is_equilibrium(&x, 2).unwrap();
        assert!(!r.is_equilibrium);
        let w = r.witnesses.equilibrium.unwrap();
        assert_eq!(w.agent, AgentId(1));
        assert_eq!(w.neighbors, vec![AgentId(1), AgentId(2)]);
    }

    #[test]
    fn cluster_count_bound() {
        assert_eq!(max_cluster_count(20, 5).unwrap(), 4);
        assert_eq!(max_cluster_count(9, 5).unwrap(), 1);
        for k in 1..12 {
            assert_eq!(max_cluster_count(2 * k - 1, k).unwrap(), 1);
            assert_eq!(max_cluster_count(2 * k, k).unwrap(), 2);
        }
        assert!(max_cluster_count(3, 4).is_err());
        assert!(max_cluster_count(3, 0).is_err());
    }

    #[test]
    fn max_cluster_construction_is_tight() {
        for n in 1..=16 {
            for k in 1..=n {
                let x = build_max_clusters(n, k).unwrap();
                assert_eq!(x.len(), n);
                assert!(is_clustered(&x, k).unwrap());
                assert_eq!(partition_clusters(&x).unwrap().len(), n / k);
            }
        }
    }

    #[test]
    fn quantize_examples() {
        let f = |v: &[f64]| {
            Configuration::new(v.iter().map(|&x| Float::new(x).unwrap()).collect()).unwrap()
        };
        let tol = Float::new(1e-3).unwrap();
        let p = quantize_clusters(&f(&[0.4000001, 0.3999999, 0.9]), &tol).unwrap();
        assert_eq!(p.sizes, vec![2, 1]);
        assert_eq!(p.groups[0].members, vec![AgentId(1), AgentId(2)]);

        let p = quantize_clusters(&f(&[0.5, 0.5002, 0.4999]), &tol).unwrap();
        assert_eq!(p.sizes, vec![3]);

        let p = quantize_clusters(&f(&[0.0, 0.5, 1.0]), &Float::new(0.5).unwrap()).unwrap();
        assert_eq!(p.sizes, vec![3]);
        assert_eq!(p.groups[0].spread.get(), 1.0);

        assert!(quantize_clusters(&f(&[0.0]), &Float::new(0.0).unwrap()).is_err());
    }

    #[test]
    fn numerical_classification_snaps_to_simple_rationals() {
        let mut v = vec![1e-12; 11];
        v.extend([0.4 + 2e-12, 0.4 - 1e-12, 0.6, 0.6 + 1e-12]);
        v.extend([1.0 - 3e-12; 5]);
        let x =
            Configuration::new(v.into_iter().map(|a| Float::new(a).unwrap()).collect()).unwrap();
        let snapped = refine_to_exact(&x, 1e-9).unwrap();
        assert_eq!(snapped, build_example1(&q("0"), &q("1")).unwrap());
        let r = classify_numerical(&x, 5, 1e-9).unwrap();
        assert!(r.numerical && r.is_equilibrium && !r.is_clustered);
    }

    #[test]
    fn counterexamples_are_fixed_points_of_each_update() {
        let x = build_example1(&q("-3/7"), &q("11/4")).unwrap();
        for i in x.agents() {
            assert_eq!(knn_update(&x, i, 5).unwrap(), x);
        }
    }

    #[test]
    fn refinement_solves_for_the_small_groups() {
        // large groups at values without a short rational, small groups off
        // by more than the snapping window from any simple rational
        let x = build_example1(&q("1/7"), &q("29/31")).unwrap();
        let jitter = [3e-12, -2e-12, 1e-12, 0.0];
        let v: Vec<Float> = x
            .opinions()
            .iter()
            .enumerate()
            .map(|(i, r)| Float::new(r.to_f64() + jitter[i % 4]).unwrap())
            .collect();
        let float = Configuration::new(v).unwrap();
        let refined = refine_equilibrium(&float, 5, 1e-9).unwrap();
        assert_eq!(refined, x);
        let r = classify_numerical(&float, 5, 1e-9).unwrap();
        assert!(r.is_equilibrium && !r.is_clustered);
    }

    #[test]
    fn singular_systems_fall_back_to_plain_snapping() {
        let mut rows = vec![
            vec![
                BigRational::from_integer(1.into()),
                BigRational::from_integer(1.into()),
                BigRational::zero(),
            ],
            vec![
                BigRational::from_integer(2.into()),
                BigRational::from_integer(2.into()),
                BigRational::zero(),
            ],
        ];
        assert!(solve_linear(&mut rows).is_none());
    }
}
