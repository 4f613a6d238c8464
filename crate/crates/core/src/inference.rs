//! Exact conditional-probability queries.
//!
//! [`query`] runs variable elimination on the CPT factors of the ancestors of
//! the query and evidence variables (everything else is barren and sums to
//! one). [`enumerate_query`] sums the full joint directly and serves as the
//! reference the eliminator is checked against.

use std::collections::BTreeSet;

use crate::data::Case;
use crate::error::{Error, Result};
use crate::network::NetworkStructure;
use crate::params::{for_each_assignment, joint_probability_full, ParameterSet};

/// Observed states, at most one per variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    observed: Vec<Option<usize>>,
}

impl Evidence {
    pub fn none(structure: &NetworkStructure) -> Self {
        Self {
            observed: vec![None; structure.len()],
        }
    }

    /// Evidence from `(variable, state)` labels.
    pub fn from_labels(structure: &NetworkStructure, labels: &[(&str, &str)]) -> Result<Self> {
        let mut observed = vec![None; structure.len()];
        for (name, label) in labels {
            let i = structure.index_or_err(name)?;
            let s = structure.variable(i).state_index_or_err(label)?;
            if observed[i].replace(s).is_some() {
                return Err(Error::InvalidParameters(format!(
                    "`{name}` appears more than once in the evidence"
                )));
            }
        }
        Ok(Self { observed })
    }

    /// The observed part of a (possibly incomplete) case.
    pub fn from_case(structure: &NetworkStructure, case: &[Option<usize>]) -> Result<Self> {
        if case.len() != structure.len() {
            return Err(Error::SchemaMismatch(format!(
                "case has {} entries for {} variables",
                case.len(),
                structure.len()
            )));
        }
        for (i, s) in case.iter().enumerate() {
            if let Some(s) = *s {
                if s >= structure.cardinality(i) {
                    return Err(Error::UnknownState {
                        variable: structure.variable(i).name().into(),
                        state: format!("#{s}"),
                        row: None,
                        column: None,
                    });
                }
            }
        }
        Ok(Self {
            observed: case.to_vec(),
        })
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.observed.get(i).copied().flatten()
    }

    pub fn as_case(&self) -> &[Option<usize>] {
        &self.observed
    }

    pub fn is_empty(&self) -> bool {
        self.observed.iter().all(Option::is_none)
    }
}

/// Joint conditional distribution over the target variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// Target variable indices, in the order requested.
    pub targets: Vec<usize>,
    /// Cardinalities of the targets.
    pub cardinalities: Vec<usize>,
    /// Probabilities over target configurations, last target fastest.
    pub probabilities: Vec<f64>,
    /// p(evidence).
    pub evidence_probability: f64,
}

impl QueryResult {
    /// Probability of one target configuration (states in target order).
    pub fn probability(&self, states: &[usize]) -> f64 {
        self.probabilities[crate::network::config_index(&self.cardinalities, states)]
    }
}

#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.vars.len()];
        for p in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * self.cards[p + 1];
        }
        strides
    }

    /// Stride of each variable of `union` inside `self` (0 if absent).
    fn strides_in(&self, union: &[usize]) -> Vec<usize> {
        let own = self.strides();
        union
            .iter()
            .map(|v| self.vars.iter().position(|x| x == v).map_or(0, |p| own[p]))
            .collect()
    }

    /// The CPT of family `i` with observed members fixed.
    fn from_family(
        structure: &NetworkStructure,
        params: &ParameterSet,
        i: usize,
        evidence: &Evidence,
    ) -> Self {
        let mut members: Vec<usize> = structure.parents(i).to_vec();
        members.push(i);
        let mut vars: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&v| evidence.get(v).is_none())
            .collect();
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&v| structure.cardinality(v)).collect();
        let size = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut full = vec![0; structure.len()];
        for (v, s) in evidence.observed.iter().enumerate() {
            if let Some(s) = s {
                full[v] = *s;
            }
        }
        for_each_assignment(&cards, |a| {
            for (&v, &s) in vars.iter().zip(a) {
                full[v] = s;
            }
            let j = structure.config_of(i, &full);
            values.push(params.get(i, j, full[i]));
        });
        Self { vars, cards, values }
    }

    fn product(&self, other: &Factor) -> Factor {
        let vars: Vec<usize> = self
            .vars
            .iter()
            .chain(&other.vars)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map(|p| self.cards[p])
                    .unwrap_or_else(|| other.cards[other.vars.iter().position(|x| x == v).unwrap()])
            })
            .collect();
        let sa = self.strides_in(&vars);
        let sb = other.strides_in(&vars);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut state = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for p in (0..vars.len()).rev() {
                state[p] += 1;
                ia += sa[p];
                ib += sb[p];
                if state[p] < cards[p] {
                    break;
                }
                ia -= sa[p] * cards[p];
                ib -= sb[p] * cards[p];
                state[p] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let pos = self.vars.iter().position(|&v| v == var).unwrap();
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        let r = cards.remove(pos);
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..r {
                let base = (o * r + s) * inner;
                for t in 0..inner {
                    values[o * inner + t] += self.values[base + t];
                }
            }
        }
        Factor { vars, cards, values }
    }
}

fn ancestral_set(structure: &NetworkStructure, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; structure.len()];
    let mut stack: Vec<usize> = seeds.into_iter().collect();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut keep[v], true) {
            stack.extend(structure.parents(v).iter().copied());
        }
    }
    keep
}

/// Picks the next variable to eliminate: fewest neighbours in the current
/// interaction graph, ties broken by variable name.
fn min_degree_pick(structure: &NetworkStructure, factors: &[Factor], pending: &[usize]) -> usize {
    let degree = |v: usize| {
        factors
            .iter()
            .filter(|f| f.vars.contains(&v))
            .flat_map(|f| f.vars.iter().copied())
            .filter(|&u| u != v)
            .collect::<BTreeSet<_>>()
            .len()
    };
    *pending
        .iter()
        .min_by(|&&a, &&b| {
            degree(a)
                .cmp(&degree(b))
                .then_with(|| structure.variable(a).name().cmp(structure.variable(b).name()))
        })
        .unwrap()
}

fn check_targets(structure: &NetworkStructure, targets: &[usize], evidence: &Evidence) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &t in targets {
        if t >= structure.len() {
            return Err(Error::InvalidIndex(format!("variable #{t}")));
        }
        if evidence.get(t).is_some() {
            return Err(Error::OverlapTargetEvidence(structure.variable(t).name().into()));
        }
        if !seen.insert(t) {
            return Err(Error::InvalidParameters(format!(
                "`{}` listed twice as a target",
                structure.variable(t).name()
            )));
        }
    }
    if evidence.observed.len() != structure.len() {
        return Err(Error::SchemaMismatch("evidence built for a different structure".into()));
    }
    Ok(())
}

/// Exact p(targets | evidence) by variable elimination.
pub fn query(
    structure: &NetworkStructure,
    params: &ParameterSet,
    targets: &[usize],
    evidence: &Evidence,
) -> Result<QueryResult> {
    check_targets(structure, targets, evidence)?;
    let observed = (0..structure.len()).filter(|&v| evidence.get(v).is_some());
    let keep = ancestral_set(structure, targets.iter().copied().chain(observed));

    let mut factors: Vec<Factor> = (0..structure.len())
        .filter(|&i| keep[i])
        .map(|i| Factor::from_family(structure, params, i, evidence))
        .collect();
    let mut pending: Vec<usize> = (0..structure.len())
        .filter(|&v| keep[v] && evidence.get(v).is_none() && !targets.contains(&v))
        .collect();

    while !pending.is_empty() {
        let v = min_degree_pick(structure, &factors, &pending);
        pending.retain(|&u| u != v);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        if let Some(prod) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(prod.sum_out(v));
        }
    }

    let unit = Factor {
        vars: Vec::new(),
        cards: Vec::new(),
        values: vec![1.0],
    };
    let joint = factors.into_iter().fold(unit, |a, b| a.product(&b));
    let z: f64 = joint.values.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ZeroEvidenceProbability);
    }

    // joint.vars is sorted; reorder to the requested target order.
    let cardinalities: Vec<usize> = targets.iter().map(|&t| structure.cardinality(t)).collect();
    let strides = joint.strides_in(targets);
    let mut probabilities = Vec::with_capacity(joint.values.len());
    for_each_assignment(&cardinalities, |a| {
        let idx: usize = a.iter().zip(&strides).map(|(s, st)| s * st).sum();
        probabilities.push(joint.values[idx] / z);
    });
    if targets.is_empty() {
        probabilities = vec![1.0];
    }
    Ok(QueryResult {
        targets: targets.to_vec(),
        cardinalities,
        probabilities,
        evidence_probability: z,
    })
}

/// p(evidence) under the network.
pub fn evidence_probability(
    structure: &NetworkStructure,
    params: &ParameterSet,
    evidence: &Evidence,
) -> Result<f64> {
    match query(structure, params, &[], evidence) {
        Ok(r) => Ok(r.evidence_probability),
        Err(Error::ZeroEvidenceProbability) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Name-based front end to [`query`].
pub fn query_by_name(
    structure: &NetworkStructure,
    params: &ParameterSet,
    targets: &[&str],
    evidence: &[(&str, &str)],
) -> Result<QueryResult> {
    let ids = targets
        .iter()
        .map(|t| structure.index_or_err(t))
        .collect::<Result<Vec<_>>>()?;
    let ev = Evidence::from_labels(structure, evidence)?;
    query(structure, params, &ids, &ev)
}

/// Reference implementation: sums the full joint over every assignment
/// consistent with the evidence.
pub fn enumerate_query(
    structure: &NetworkStructure,
    params: &ParameterSet,
    targets: &[usize],
    evidence: &Evidence,
) -> Result<QueryResult> {
    check_targets(structure, targets, evidence)?;
    let cardinalities: Vec<usize> = targets.iter().map(|&t| structure.cardinality(t)).collect();
    let mut table = vec![0.0; cardinalities.iter().product()];
    let cards = structure.cardinalities();
    for_each_assignment(&cards, |x| {
        if (0..x.len()).any(|v| evidence.get(v).is_some_and(|s| s != x[v])) {
            return;
        }
        let idx = targets
            .iter()
            .fold(0, |acc, &t| acc * structure.cardinality(t) + x[t]);
        table[idx] += joint_probability_full(structure, params, x);
    });
    let z: f64 = table.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ZeroEvidenceProbability);
    }
    Ok(QueryResult {
        targets: targets.to_vec(),
        cardinalities,
        probabilities: table.iter().map(|p| p / z).collect(),
        evidence_probability: z,
    })
}

/// p(x_i^k, pa_i^j | y) for every family, given a partially observed case y.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPosteriors {
    /// `tables[i][j][k]`.
    pub tables: Vec<Vec<Vec<f64>>>,
    /// p(y).
    pub evidence_probability: f64,
}

/// Family posteriors for one case. Families whose members are all observed
/// get an indicator table without running inference.
pub fn family_posteriors(
    structure: &NetworkStructure,
    params: &ParameterSet,
    case: &Case,
) -> Result<FamilyPosteriors> {
    let evidence = Evidence::from_case(structure, case)?;
    let z = evidence_probability(structure, params, &evidence)?;
    if !(z > 0.0) {
        return Err(Error::ZeroEvidenceProbability);
    }
    let mut tables = Vec::with_capacity(structure.len());
    for i in 0..structure.len() {
        let q = structure.num_configs(i);
        let r = structure.cardinality(i);
        let mut table = vec![vec![0.0; r]; q];
        let mut members = structure.parents(i).to_vec();
        members.push(i);
        let hidden: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&v| case[v].is_none())
            .collect();
        let mut full: Vec<usize> = case.iter().map(|s| s.unwrap_or(0)).collect();
        if hidden.is_empty() {
            let j = structure.config_of(i, &full);
            table[j][full[i]] = 1.0;
        } else {
            let result = query(structure, params, &hidden, &evidence)?;
            let cards: Vec<usize> = hidden.iter().map(|&v| structure.cardinality(v)).collect();
            let mut idx = 0;
            for_each_assignment(&cards, |a| {
                for (&v, &s) in hidden.iter().zip(a) {
                    full[v] = s;
                }
                let j = structure.config_of(i, &full);
                table[j][full[i]] += result.probabilities[idx];
                idx += 1;
            });
        }
        tables.push(table);
    }
    Ok(FamilyPosteriors {
        tables,
        evidence_probability: z,
    })
}
