//! Neighbor selection and the two asynchronous update laws.
//!
//! k-NN rule: agent `i` orders every agent `j` by `(|x_j - x_i|, j)` and
//! averages the first `k`. Agent `i` is not forced into its own neighborhood;
//! when more than `k` agents share distance zero the lowest ids win, which can
//! push `i` out.
//!
//! Bounded-confidence (ABC) rule: agent `i` averages every agent within
//! distance `d`, itself included.
//!
//! Agent ids are 1-based everywhere in the public API.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{abs_diff, Backend, Float, NumberLiteral, NumericError, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("configuration must hold at least one agent")]
    EmptyConfiguration,
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("agent {agent} outside 1..={n}")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("confidence range must be nonnegative, got {0}")]
    NegativeConfidence(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// 1-based agent identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        AgentId(index + 1)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opinion vector `x`, one entry per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Configuration<S> {
    opinions: Vec<S>,
}

impl<S: Scalar> Configuration<S> {
    pub fn new(opinions: Vec<S>) -> Result<Self, ModelError> {
        if opinions.is_empty() {
            return Err(ModelError::EmptyConfiguration);
        }
        Ok(Configuration { opinions })
    }

    /// Builds from `p/q` or decimal literals.
    pub fn parse(values: &[&str]) -> Result<Self, ModelError> {
        let opinions = values
            .iter()
            .map(|v| S::parse_text(v))
            .collect::<Result<Vec<_>, _>>()?;
        Configuration::new(opinions)
    }

    pub fn consensus(value: S, n: usize) -> Result<Self, ModelError> {
        Configuration::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    pub fn opinions(&self) -> &[S] {
        &self.opinions
    }

    pub fn into_opinions(self) -> Vec<S> {
        self.opinions
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (1..=self.len()).map(AgentId)
    }

    pub fn check_agent(&self, agent: AgentId) -> Result<(), ModelError> {
        if agent.0 == 0 || agent.0 > self.len() {
            return Err(ModelError::AgentOutOfRange {
                agent: agent.0,
                n: self.len(),
            });
        }
        Ok(())
    }

    pub fn check_k(&self, k: usize) -> Result<(), ModelError> {
        if k == 0 || k > self.len() {
            return Err(ModelError::KOutOfRange { k, n: self.len() });
        }
        Ok(())
    }

    pub fn opinion(&self, agent: AgentId) -> Result<&S, ModelError> {
        self.check_agent(agent)?;
        Ok(&self.opinions[agent.index()])
    }

    /// Copy with one component replaced.
    pub fn with_opinion(&self, agent: AgentId, value: S) -> Result<Self, ModelError> {
        self.check_agent(agent)?;
        let mut next = self.clone();
        next.opinions[agent.index()] = value;
        Ok(next)
    }

    pub(crate) fn set(&mut self, agent: AgentId, value: S) {
        self.opinions[agent.index()] = value;
    }

    pub(crate) fn push(&mut self, value: S) {
        self.opinions.push(value);
    }

    pub(crate) fn remove_index(&mut self, index: usize) -> S {
        self.opinions.remove(index)
    }

    pub fn min(&self) -> &S {
        self.opinions.iter().min().expect("non-empty configuration")
    }

    pub fn max(&self) -> &S {
        self.opinions.iter().max().expect("non-empty configuration")
    }

    /// `x -> -x`.
    pub fn negated(&self) -> Self {
        Configuration {
            opinions: self.opinions.iter().map(Scalar::neg).collect(),
        }
    }

    /// `x -> scale * x + shift * 1`.
    pub fn affine(&self, scale: &S, shift: &S) -> Self {
        Configuration {
            opinions: self
                .opinions
                .iter()
                .map(|x| x.mul(scale).add(shift))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.opinions.iter().map(Scalar::to_f64).collect()
    }

    pub fn from_literals(values: &[NumberLiteral]) -> Result<Self, ModelError> {
        let opinions = values
            .iter()
            .map(NumberLiteral::to_scalar)
            .collect::<Result<Vec<S>, _>>()?;
        Configuration::new(opinions)
    }
}

impl<S: Scalar> fmt::Display for Configuration<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (idx, x) in self.opinions.iter().enumerate() {
            if idx > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("]")
    }
}

/// A configuration read from a file whose backend is decided at parse time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyConfiguration {
    Exact(Configuration<Rational>),
    Float(Configuration<Float>),
}

impl AnyConfiguration {
    /// Parses a JSON array of numbers and/or `"p/q"` strings. Any string entry
    /// (or `force_exact`) selects the exact backend; an array of bare numbers
    /// selects the float backend.
    pub fn from_json(text: &str, force_exact: bool) -> Result<Self, ConfigParseError> {
        let literals: Vec<NumberLiteral> =
            serde_json::from_str(text).map_err(|e| ConfigParseError::Json(e.to_string()))?;
        AnyConfiguration::from_literals(&literals, force_exact)
    }

    pub fn from_literals(
        literals: &[NumberLiteral],
        force_exact: bool,
    ) -> Result<Self, ConfigParseError> {
        let exact = force_exact || literals.iter().any(NumberLiteral::is_text);
        if exact {
            Ok(AnyConfiguration::Exact(Configuration::from_literals(
                literals,
            )?))
        } else {
            Ok(AnyConfiguration::Float(Configuration::from_literals(
                literals,
            )?))
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            AnyConfiguration::Exact(_) => Backend::Exact,
            AnyConfiguration::Float(_) => Backend::Float,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyConfiguration::Exact(c) => c.len(),
            AnyConfiguration::Float(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigParseError {
    #[error("invalid configuration JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Neighborhood `N_i` of one agent, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub agent: AgentId,
    pub members: Vec<AgentId>,
}

impl NeighborSet {
    pub fn contains(&self, agent: AgentId) -> bool {
        self.members.contains(&agent)
    }

    /// Members in ascending id order.
    pub fn sorted_members(&self) -> Vec<AgentId> {
        let mut m = self.members.clone();
        m.sort_unstable();
        m
    }

    pub fn opinions<'a, S: Scalar>(&'a self, config: &'a Configuration<S>) -> Vec<S> {
        self.members
            .iter()
            .map(|j| config.opinions[j.index()].clone())
            .collect()
    }
}

/// The first `k` agents under the order `(|x_j - x_i|, j)`.
pub fn knn_neighbors<S: Scalar>(
    config: &Configuration<S>,
    agent: AgentId,
    k: usize,
) -> Result<NeighborSet, ModelError> {
    config.check_agent(agent)?;
    config.check_k(k)?;
    let own = &config.opinions[agent.index()];
    let mut order: Vec<(S::DistanceKey, usize)> = config
        .opinions
        .iter()
        .enumerate()
        .map(|(j, x)| (x.distance_key(own), j))
        .collect();
    // (distance, index) is a strict total order, so partial selection followed
    // by sorting the prefix yields exactly the fully sorted prefix.
    if k < order.len() {
        order.select_nth_unstable(k - 1);
        order.truncate(k);
    }
    order.sort_unstable();
    Ok(NeighborSet {
        agent,
        members: order
            .into_iter()
            .map(|(_, j)| AgentId::from_index(j))
            .collect(),
    })
}

/// Every agent within distance `d` of `agent`, ascending by id.
pub fn abc_neighbors<S: Scalar>(
    config: &Configuration<S>,
    agent: AgentId,
    d: &S,
) -> Result<NeighborSet, ModelError> {
    config.check_agent(agent)?;
    if *d < S::zero() {
        return Err(ModelError::NegativeConfidence(d.to_string()));
    }
    let own = &config.opinions[agent.index()];
    let members = config
        .opinions
        .iter()
        .enumerate()
        .filter(|(_, x)| abs_diff(*x, own) <= *d)
        .map(|(j, _)| AgentId::from_index(j))
        .collect();
    Ok(NeighborSet { agent, members })
}

fn neighborhood_mean<S: Scalar>(config: &Configuration<S>, set: &NeighborSet) -> S {
    S::mean_nonempty(&set.opinions(config))
}

/// `f(x, i)`: agent `i` moves to the mean of its k nearest neighbors.
pub fn knn_update<S: Scalar>(
    config: &Configuration<S>,
    agent: AgentId,
    k: usize,
) -> Result<Configuration<S>, ModelError> {
    KnnRule { k }.apply(config, agent)
}

/// `f_ABC(x, i)`: agent `i` moves to the mean of everyone within `d`.
pub fn abc_update<S: Scalar>(
    config: &Configuration<S>,
    agent: AgentId,
    d: &S,
) -> Result<Configuration<S>, ModelError> {
    AbcRule { d: d.clone() }.apply(config, agent)
}

/// An asynchronous single-agent update law.
pub trait UpdateRule<S: Scalar> {
    fn neighbors(
        &self,
        config: &Configuration<S>,
        agent: AgentId,
    ) -> Result<NeighborSet, ModelError>;

    /// The opinion `agent` would adopt if selected now.
    fn updated_opinion(&self, config: &Configuration<S>, agent: AgentId) -> Result<S, ModelError> {
        let set = self.neighbors(config, agent)?;
        Ok(neighborhood_mean(config, &set))
    }

    fn apply(
        &self,
        config: &Configuration<S>,
        agent: AgentId,
    ) -> Result<Configuration<S>, ModelError> {
        let value = self.updated_opinion(config, agent)?;
        config.with_opinion(agent, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnRule {
    pub k: usize,
}

impl<S: Scalar> UpdateRule<S> for KnnRule {
    fn neighbors(
        &self,
        config: &Configuration<S>,
        agent: AgentId,
    ) -> Result<NeighborSet, ModelError> {
        knn_neighbors(config, agent, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbcRule<S> {
    pub d: S,
}

impl<S: Scalar> UpdateRule<S> for AbcRule<S> {
    fn neighbors(
        &self,
        config: &Configuration<S>,
        agent: AgentId,
    ) -> Result<NeighborSet, ModelError> {
        abc_neighbors(config, agent, &self.d)
    }
}

/// Model parameters: either k-NN with neighborhood size `k` or bounded
/// confidence with range `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Model<S> {
    Knn { k: usize },
    Abc { d: S },
}

impl<S: Scalar> Model<S> {
    pub fn k(&self) -> Option<usize> {
        match self {
            Model::Knn { k } => Some(*k),
            Model::Abc { .. } => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        match self {
            Model::Knn { k } if *k == 0 || *k > n => Err(ModelError::KOutOfRange { k: *k, n }),
            Model::Abc { d } if *d < S::zero() => {
                Err(ModelError::NegativeConfidence(d.to_string()))
            }
            _ => Ok(()),
        }
    }
}

impl<S: Scalar> UpdateRule<S> for Model<S> {
    fn neighbors(
        &self,
        config: &Configuration<S>,
        agent: AgentId,
    ) -> Result<NeighborSet, ModelError> {
        match self {
            Model::Knn { k } => knn_neighbors(config, agent, *k),
            Model::Abc { d } => abc_neighbors(config, agent, d),
        }
    }
}

/// Directed interaction graph `G(x)`: `(i, j)` whenever `j ∈ N_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InteractionGraph {
    pub n: usize,
    /// `out[i - 1]` is `N_i` in selection order.
    out: Vec<Vec<AgentId>>,
}

impl InteractionGraph {
    pub fn out_neighbors(&self, agent: AgentId) -> &[AgentId] {
        &self.out[agent.index()]
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, targets)| targets.iter().map(move |&j| (AgentId::from_index(i), j)))
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, from: AgentId, to: AgentId) -> bool {
        self.out[from.index()].contains(&to)
    }

    /// One `i j` line per edge, sorted, 1-based.
    pub fn to_edge_list(&self) -> String {
        let mut edges: Vec<_> = self.edges().collect();
        edges.sort_unstable();
        edges
            .into_iter()
            .map(|(i, j)| format!("{i} {j}\n"))
            .collect()
    }
}

pub fn interaction_graph<S: Scalar>(
    config: &Configuration<S>,
    k: usize,
) -> Result<InteractionGraph, ModelError> {
    config.check_k(k)?;
    let out = config
        .agents()
        .map(|i| knn_neighbors(config, i, k).map(|set| set.members))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InteractionGraph {
        n: config.len(),
        out,
    })
}

/// `max_i x_i - min_i x_i`.
pub fn diameter<S: Scalar>(config: &Configuration<S>) -> S {
    config.max().sub(config.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rational;

    fn exact(values: &[&str]) -> Configuration<Rational> {
        Configuration::parse(values).unwrap()
    }

    fn ids(v: &[usize]) -> Vec<AgentId> {
        v.iter().map(|&i| AgentId(i)).collect()
    }

    fn example1() -> Configuration<Rational> {
        let mut v = vec!["0"; 11];
        v.extend(["2/5", "2/5", "3/5", "3/5"]);
        v.extend(["1"; 5]);
        exact(&v)
    }

    #[test]
    fn tie_counterexample_neighbors_of_agent_seven() {
        let x = exact(&["0", "1", "0", "1", "0", "1", "1/2"]);
        let set = knn_neighbors(&x, AgentId(7), 3).unwrap();
        assert_eq!(set.members, ids(&[7, 1, 2]));
        assert_eq!(set.sorted_members(), ids(&[1, 2, 7]));
    }

    #[test]
    fn complete_neighborhood_when_k_is_n() {
        let x = exact(&["3", "-1", "2/7", "5"]);
        for i in x.agents() {
            assert_eq!(
                knn_neighbors(&x, i, 4).unwrap().sorted_members(),
                ids(&[1, 2, 3, 4])
            );
        }
    }

    #[test]
    fn example1_neighbors_of_agent_twelve() {
        let set = knn_neighbors(&example1(), AgentId(12), 5).unwrap();
        assert_eq!(set.sorted_members(), ids(&[1, 12, 13, 14, 15]));
    }

    #[test]
    fn tie_rule_can_exclude_the_agent_itself() {
        let x = exact(&["0", "0", "0", "0"]);
        let set = knn_neighbors(&x, AgentId(3), 2).unwrap();
        assert_eq!(set.members, ids(&[1, 2]));
        assert!(!set.contains(AgentId(3)));
    }

    #[test]
    fn neighbor_parameter_errors() {
        let x = exact(&["0", "1"]);
        assert_eq!(
            knn_neighbors(&x, AgentId(1), 3),
            Err(ModelError::KOutOfRange { k: 3, n: 2 })
        );
        assert_eq!(
            knn_neighbors(&x, AgentId(1), 0),
            Err(ModelError::KOutOfRange { k: 0, n: 2 })
        );
        assert_eq!(
            knn_neighbors(&x, AgentId(3), 1),
            Err(ModelError::AgentOutOfRange { agent: 3, n: 2 })
        );
        assert!(knn_neighbors(&x, AgentId(0), 1).is_err());
        assert!(Configuration::<Rational>::new(vec![]).is_err());
    }

    #[test]
    fn knn_update_examples() {
        let x = example1();
        assert_eq!(knn_update(&x, AgentId(12), 5).unwrap(), x);

        let c = exact(&["2/3"; 6]);
        for i in c.agents() {
            assert_eq!(knn_update(&c, i, 4).unwrap(), c);
        }

        let x = exact(&["0", "1/2", "1"]);
        assert_eq!(
            knn_update(&x, AgentId(2), 2).unwrap(),
            exact(&["0", "1/4", "1"])
        );
    }

    #[test]
    fn abc_update_examples() {
        let f = |v: f64| Float::new(v).unwrap();
        let x = Configuration::new(vec![f(0.0), f(0.2), f(1.0)]).unwrap();
        let next = abc_update(&x, AgentId(1), &f(0.25)).unwrap();
        assert_eq!(next.to_f64(), vec![0.1, 0.2, 1.0]);

        let x = exact(&["0", "1/5", "1"]);
        let d: Rational = "1/4".parse().unwrap();
        assert_eq!(
            abc_update(&x, AgentId(1), &d).unwrap(),
            exact(&["1/10", "1/5", "1"])
        );
        // isolated
        assert_eq!(abc_update(&x, AgentId(3), &d).unwrap(), x);
        // full neighborhood
        let big: Rational = "2".parse().unwrap();
        assert_eq!(
            abc_update(&x, AgentId(3), &big).unwrap(),
            exact(&["0", "1/5", "2/5"])
        );
    }

    #[test]
    fn abc_zero_range_and_negative_range() {
        let x = exact(&["0", "0", "1"]);
        let set = abc_neighbors(&x, AgentId(1), &Rational::zero()).unwrap();
        assert_eq!(set.members, ids(&[1, 2]));
        assert!(abc_neighbors(&x, AgentId(1), &"-1/2".parse().unwrap()).is_err());
    }

    #[test]
    fn interaction_graph_examples() {
        let x = exact(&["0", "1/3", "1", "5"]);
        let g = interaction_graph(&x, 4).unwrap();
        assert_eq!(g.edge_count(), 16);

        let x = exact(&["0", "1"]);
        let g = interaction_graph(&x, 1).unwrap();
        assert_eq!(g.to_edge_list(), "1 1\n2 2\n");

        let x = exact(&["0", "1/2", "1"]);
        let g = interaction_graph(&x, 2).unwrap();
        assert_eq!(g.out_neighbors(AgentId(1)).to_vec(), ids(&[1, 2]));
        assert_eq!(g.out_neighbors(AgentId(2)).to_vec(), ids(&[2, 1]));
        assert_eq!(g.out_neighbors(AgentId(3)).to_vec(), ids(&[3, 2]));
        assert_eq!(g.to_edge_list(), "1 1\n1 2\n2 1\n2 2\n3 2\n3 3\n");
    }

    #[test]
    fn diameter_examples() {
        assert!(diameter(&exact(&["1/3"; 4])).is_zero());
        assert_eq!(
            diameter(&exact(&["0", "1", "2", "3"])),
            "3".parse().unwrap()
        );
        assert_eq!(diameter(&example1()), "1".parse().unwrap());
    }

    #[test]
    fn configuration_json_selects_backend() {
        let any = AnyConfiguration::from_json(r#"[0, "1/2", 1]"#, false).unwrap();
        assert_eq!(any, AnyConfiguration::Exact(exact(&["0", "1/2", "1"])));
        let any = AnyConfiguration::from_json("[0.25, 1]", false).unwrap();
        assert_eq!(any.backend(), Backend::Float);
        let any = AnyConfiguration::from_json("[0.4, 1]", true).unwrap();
        assert_eq!(any, AnyConfiguration::Exact(exact(&["2/5", "1"])));
        assert!(AnyConfiguration::from_json("[]", false).is_err());
        assert!(AnyConfiguration::from_json("[\"x\"]", false).is_err());
        let json = serde_json::to_string(&exact(&["0", "1/2"])).unwrap();
        assert_eq!(json, r#"["0/1","1/2"]"#);
    }
}
