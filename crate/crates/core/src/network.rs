//! Variables, network structures and the parent-configuration index.
//!
//! A structure is a DAG over declared discrete variables. Parent lists keep the
//! order they were given in, because that order fixes the meaning of the
//! configuration index `j`: the last listed parent varies fastest.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A discrete variable with an ordered list of state labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableSpec {
    name: String,
    states: Vec<String>,
}

impl VariableSpec {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let name = name.into();
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.len() < 2 {
            return Err(Error::TooFewStates(name));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateState {
                    variable: name,
                    state: s.clone(),
                });
            }
        }
        Ok(Self { name, states })
    }

    /// Convenience for a variable with states `s0, s1, ...`.
    pub fn indexed(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        Self::new(name, (0..cardinality).map(|k| format!("s{k}")))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub(crate) fn state_index_or_err(&self, label: &str) -> Result<usize> {
        self.state_index(label).ok_or_else(|| Error::UnknownState {
            variable: self.name.clone(),
            state: label.to_string(),
            row: None,
            column: None,
        })
    }
}

/// Mixed-radix index of `states` under `cards`, last position fastest.
pub fn config_index(cards: &[usize], states: &[usize]) -> usize {
    debug_assert_eq!(cards.len(), states.len());
    cards
        .iter()
        .zip(states)
        .fold(0, |acc, (&r, &s)| acc * r + s)
}

/// Inverse of [`config_index`].
pub fn decode_config(cards: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for (slot, &r) in out.iter_mut().zip(cards).rev() {
        *slot = index % r;
        index /= r;
    }
    out
}

/// Checks names, parent references and acyclicity, returning a topological
/// order. Ties are broken by declaration order, so the result is deterministic.
pub fn validate_dag(variables: &[VariableSpec], parents: &[Vec<String>]) -> Result<Vec<usize>> {
    let index = name_index(variables)?;
    if parents.len() != variables.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parent lists for {} variables",
            parents.len(),
            variables.len()
        )));
    }
    let mut resolved = Vec::with_capacity(parents.len());
    for (child, list) in variables.iter().zip(parents) {
        let mut ps = Vec::with_capacity(list.len());
        for p in list {
            let pi = *index.get(p.as_str()).ok_or_else(|| Error::UnknownParent {
                child: child.name.clone(),
                parent: p.clone(),
            })?;
            ps.push(pi);
        }
        resolved.push(ps);
    }
    check_parent_lists(variables, &resolved)?;
    topological_order(variables, &resolved)
}

fn name_index(variables: &[VariableSpec]) -> Result<HashMap<&str, usize>> {
    let mut index = HashMap::with_capacity(variables.len());
    for (i, v) in variables.iter().enumerate() {
        if index.insert(v.name.as_str(), i).is_some() {
            return Err(Error::DuplicateVariable(v.name.clone()));
        }
    }
    Ok(index)
}

fn check_parent_lists(variables: &[VariableSpec], parents: &[Vec<usize>]) -> Result<()> {
    for (i, list) in parents.iter().enumerate() {
        let mut seen = HashSet::new();
        for &p in list {
            if p >= variables.len() {
                return Err(Error::UnknownParent {
                    child: variables[i].name.clone(),
                    parent: format!("#{p}"),
                });
            }
            if p == i {
                return Err(Error::SelfLoop(variables[i].name.clone()));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidParameters(format!(
                    "`{}` lists parent `{}` twice",
                    variables[i].name, variables[p].name
                )));
            }
        }
    }
    Ok(())
}

fn topological_order(variables: &[VariableSpec], parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = variables.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (c, list) in parents.iter().enumerate() {
        for &p in list {
            children[p].push(c);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every unplaced node has an unplaced parent; walking parents must revisit a node.
    let start = (0..n).find(|&i| indegree[i] > 0).unwrap();
    let mut path = vec![start];
    let mut pos: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let next = *parents[cur].iter().find(|&&p| indegree[p] > 0).unwrap();
        if let Some(&at) = pos.get(&next) {
            let mut cycle: Vec<String> = path[at..]
                .iter()
                .rev()
                .map(|&i| variables[i].name.clone())
                .collect();
            cycle.push(cycle[0].clone());
            return Err(Error::CycleDetected(cycle));
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

/// A validated DAG over named discrete variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkStructure {
    variables: Vec<VariableSpec>,
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl NetworkStructure {
    /// Builds a structure from parent lists given as variable indices.
    pub fn new(variables: Vec<VariableSpec>, parents: Vec<Vec<usize>>) -> Result<Self> {
        name_index(&variables)?;
        if parents.len() != variables.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parent lists for {} variables",
                parents.len(),
                variables.len()
            )));
        }
        check_parent_lists(&variables, &parents)?;
        let order = topological_order(&variables, &parents)?;
        Ok(Self {
            variables,
            parents,
            order,
        })
    }

    /// Builds a structure from `(child, parents)` name pairs. Variables not
    /// mentioned have no parents.
    pub fn from_names(variables: Vec<VariableSpec>, families: &[(&str, &[&str])]) -> Result<Self> {
        let mut lists = vec![Vec::new(); variables.len()];
        let index = name_index(&variables)?;
        for (child, ps) in families {
            let c = *index
                .get(child)
                .ok_or_else(|| Error::UnknownVariable(child.to_string()))?;
            lists[c] = ps.iter().map(|p| p.to_string()).collect();
        }
        let order = validate_dag(&variables, &lists)?;
        let parents = lists
            .iter()
            .map(|l| l.iter().map(|p| index[p.as_str()]).collect())
            .collect();
        Ok(Self {
            variables,
            parents,
            order,
        })
    }

    /// The arcless structure over `variables`.
    pub fn empty(variables: Vec<VariableSpec>) -> Result<Self> {
        let n = variables.len();
        Self::new(variables, vec![Vec::new(); n])
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &VariableSpec {
        &self.variables[i]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub(crate) fn index_or_err(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn all_parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| self.parents[c].contains(&i))
            .collect()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(VariableSpec::cardinality).collect()
    }

    pub fn parent_cardinalities(&self, i: usize) -> Vec<usize> {
        self.parents[i].iter().map(|&p| self.cardinality(p)).collect()
    }

    /// q_i: number of parent configurations (1 for a root).
    pub fn num_configs(&self, i: usize) -> usize {
        self.parents[i].iter().map(|&p| self.cardinality(p)).product()
    }

    /// Topological order, ties broken by declaration order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_arc(a, b) || self.has_arc(b, a)
    }

    /// All arcs as `(parent, child)`, sorted.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut arcs: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        arcs.sort_unstable();
        arcs
    }

    pub fn num_arcs(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Same structure with the parent list of `child` replaced.
    pub fn with_parents(&self, child: usize, parents: Vec<usize>) -> Result<Self> {
        let mut lists = self.parents.clone();
        lists[child] = parents;
        Self::new(self.variables.clone(), lists)
    }

    /// True when both structures declare identical variables in the same order.
    pub fn same_variables(&self, other: &Self) -> bool {
        self.variables == other.variables
    }

    /// True when `to` is reachable from `from` along directed arcs.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let n = self.len();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(children[v].iter().copied());
        }
        false
    }

    /// Configuration index `j` of variable `i`'s parents in `row`
    /// (state indices, `None` for missing).
    pub fn parent_config_index(&self, i: usize, row: &[Option<usize>]) -> Result<usize> {
        let mut j = 0;
        for &p in &self.parents[i] {
            let s = row[p].ok_or_else(|| Error::MissingParentValue {
                variable: self.variables[i].name.clone(),
                parent: self.variables[p].name.clone(),
            })?;
            let r = self.cardinality(p);
            if s >= r {
                return Err(Error::UnknownState {
                    variable: self.variables[p].name.clone(),
                    state: format!("#{s}"),
                    row: None,
                    column: None,
                });
            }
            j = j * r + s;
        }
        Ok(j)
    }

    /// Same as [`parent_config_index`](Self::parent_config_index) for a full assignment.
    pub fn config_of(&self, i: usize, assignment: &[usize]) -> usize {
        self.parents[i]
            .iter()
            .fold(0, |acc, &p| acc * self.cardinality(p) + assignment[p])
    }

    /// Parent states for configuration `j` of variable `i`, in parent-list order.
    pub fn config_states(&self, i: usize, j: usize) -> Vec<usize> {
        decode_config(&self.parent_cardinalities(i), j)
    }

    /// Maps a name/label assignment to state indices in variable order.
    pub fn assignment_from_labels(&self, labels: &[(&str, &str)]) -> Result<Vec<Option<usize>>> {
        let mut row = vec![None; self.len()];
        for (name, label) in labels {
            let i = self.index_or_err(name)?;
            row[i] = Some(self.variables[i].state_index_or_err(label)?);
        }
        Ok(row)
    }

    /// Total number of joint configurations, or `None` on overflow.
    pub fn state_space_size(&self) -> Option<usize> {
        self.variables
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.cardinality()))
    }
}
