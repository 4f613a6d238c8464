//! Cases over a fixed set of discrete variables, possibly with missing entries.

use crate::error::{Error, Result};
use crate::network::{NetworkStructure, VariableSpec};
use rand::Rng;

use crate::params::{FamilyCounts, ParameterSet};

/// One case: a state index per variable, `None` where the value is missing.
pub type Case = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSet {
    variables: Vec<VariableSpec>,
    cases: Vec<Case>,
}

impl DataSet {
    pub fn new(variables: Vec<VariableSpec>, cases: Vec<Case>) -> Result<Self> {
        for (r, case) in cases.iter().enumerate() {
            if case.len() != variables.len() {
                return Err(Error::SchemaMismatch(format!(
                    "case {} has {} entries, expected {}",
                    r + 1,
                    case.len(),
                    variables.len()
                )));
            }
            for (c, (entry, var)) in case.iter().zip(&variables).enumerate() {
                if let Some(s) = *entry {
                    if s >= var.cardinality() {
                        return Err(Error::UnknownState {
                            variable: var.name().to_string(),
                            state: format!("#{s}"),
                            row: Some(r + 1),
                            column: Some(c + 1),
                        });
                    }
                }
            }
        }
        Ok(Self { variables, cases })
    }

    /// Builds a data set from state labels; `None` marks a missing entry.
    pub fn from_labels(variables: Vec<VariableSpec>, rows: &[Vec<Option<&str>>]) -> Result<Self> {
        let mut cases = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != variables.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row {} has {} entries, expected {}",
                    r + 1,
                    row.len(),
                    variables.len()
                )));
            }
            let mut case = Vec::with_capacity(row.len());
            for (c, (label, var)) in row.iter().zip(&variables).enumerate() {
                case.push(match label {
                    None => None,
                    Some(l) => Some(var.state_index(l).ok_or_else(|| Error::UnknownState {
                        variable: var.name().to_string(),
                        state: l.to_string(),
                        row: Some(r + 1),
                        column: Some(c + 1),
                    })?),
                });
            }
            cases.push(case);
        }
        Ok(Self { variables, cases })
    }

    pub fn empty(variables: Vec<VariableSpec>) -> Self {
        Self {
            variables,
            cases: Vec::new(),
        }
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.cases.iter().all(|c| c.iter().all(Option::is_some))
    }

    pub fn missing_count(&self) -> usize {
        self.cases
            .iter()
            .map(|c| c.iter().filter(|e| e.is_none()).count())
            .sum()
    }

    /// Data set holding the first `n` cases.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            variables: self.variables.clone(),
            cases: self.cases[..n.min(self.cases.len())].to_vec(),
        }
    }

    /// Appends the cases of `other`, which must share the schema.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.variables != other.variables {
            return Err(Error::SchemaMismatch("data sets declare different variables".into()));
        }
        let mut cases = self.cases.clone();
        cases.extend(other.cases.iter().cloned());
        Ok(Self {
            variables: self.variables.clone(),
            cases,
        })
    }

    /// Complete cases as plain state vectors. Fails if any entry is missing.
    pub fn complete_cases(&self) -> Result<Vec<Vec<usize>>> {
        self.cases
            .iter()
            .map(|c| c.iter().copied().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::IncompleteData)
    }

    /// Errors unless the data set declares exactly the structure's variables, in order.
    pub fn check_schema(&self, structure: &NetworkStructure) -> Result<()> {
        if self.variables != structure.variables() {
            let data: Vec<_> = self.variables.iter().map(VariableSpec::name).collect();
            let net: Vec<_> = structure.variables().iter().map(VariableSpec::name).collect();
            return Err(Error::SchemaMismatch(format!(
                "data variables {data:?} do not match network variables {net:?} (names, order and states must agree)"
            )));
        }
        Ok(())
    }
}

/// N_ijk for one family: `counts[j][k]`.
pub fn count_family(
    cases: &[Vec<usize>],
    cards: &[usize],
    child: usize,
    parents: &[usize],
) -> Vec<Vec<u64>> {
    let q: usize = parents.iter().map(|&p| cards[p]).product();
    let mut counts = vec![vec![0u64; cards[child]]; q];
    for case in cases {
        let j = parents.iter().fold(0, |acc, &p| acc * cards[p] + case[p]);
        counts[j][case[child]] += 1;
    }
    counts
}

/// Sufficient statistics N_ijk of a complete data set for every family.
pub fn count_sufficient_stats(structure: &NetworkStructure, data: &DataSet) -> Result<FamilyCounts> {
    data.check_schema(structure)?;
    let cases = data.complete_cases()?;
    let cards = structure.cardinalities();
    let counts = (0..structure.len())
        .map(|i| count_family(&cases, &cards, i, structure.parents(i)))
        .collect();
    Ok(FamilyCounts::from_raw(counts))
}

/// Draws `n` complete cases from the network by ancestral sampling.
pub fn forward_sample<R: Rng + ?Sized>(
    structure: &NetworkStructure,
    params: &ParameterSet,
    n: usize,
    rng: &mut R,
) -> Result<DataSet> {
    ParameterSet::new(structure, params.tables().to_vec())?;
    let mut cases = Vec::with_capacity(n);
    let mut full = vec![0usize; structure.len()];
    for _ in 0..n {
        for &i in structure.topological_order() {
            let row = params.row(i, structure.config_of(i, &full));
            let mut u: f64 = rng.random();
            let mut k = row.len() - 1;
            for (s, p) in row.iter().enumerate() {
                if u < *p {
                    k = s;
                    break;
                }
                u -= p;
            }
            full[i] = k;
        }
        cases.push(full.iter().map(|&s| Some(s)).collect());
    }
    DataSet::new(structure.variables().to_vec(), cases)
}
