//! Per-family tables aligned with a structure: probabilities θ_ijk,
//! Dirichlet hyperparameters α_ijk and counts N_ijk. All are indexed
//! `[variable][configuration][state]`.

use crate::error::{Error, Result};
use crate::network::NetworkStructure;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

fn check_shape<T>(structure: &NetworkStructure, table: &[Vec<Vec<T>>], what: &str) -> Result<()> {
    if table.len() != structure.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what} has {} families, structure has {}",
            table.len(),
            structure.len()
        )));
    }
    for (i, rows) in table.iter().enumerate() {
        let q = structure.num_configs(i);
        let r = structure.cardinality(i);
        if rows.len() != q || rows.iter().any(|row| row.len() != r) {
            return Err(Error::ShapeMismatch(format!(
                "{what} family `{}` is not {q} x {r}",
                structure.variable(i).name()
            )));
        }
    }
    Ok(())
}

/// Conditional probability tables θ_ijk.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    theta: Vec<Vec<Vec<f64>>>,
}

impl ParameterSet {
    /// Validates shape and that every row is a probability vector.
    pub fn new(structure: &NetworkStructure, theta: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        check_shape(structure, &theta, "parameter set")?;
        for (i, rows) in theta.iter().enumerate() {
            for (j, row) in rows.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite())
                    || (sum - 1.0).abs() > ROW_SUM_TOLERANCE
                {
                    return Err(Error::InvalidParameters(format!(
                        "row {j} of `{}` is not a probability vector (sum {sum})",
                        structure.variable(i).name()
                    )));
                }
            }
        }
        Ok(Self { theta })
    }

    /// Rows renormalized before validation, for tables assembled from
    /// rounded or computed values.
    pub fn normalized(structure: &NetworkStructure, mut theta: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for row in theta.iter_mut().flatten() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Self::new(structure, theta)
    }

    pub fn uniform(structure: &NetworkStructure) -> Self {
        let theta = (0..structure.len())
            .map(|i| {
                let r = structure.cardinality(i);
                vec![vec![1.0 / r as f64; r]; structure.num_configs(i)]
            })
            .collect();
        Self { theta }
    }

    pub(crate) fn from_raw(theta: Vec<Vec<Vec<f64>>>) -> Self {
        Self { theta }
    }

    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        &self.theta[i][j]
    }

    pub fn family(&self, i: usize) -> &[Vec<f64>] {
        &self.theta[i]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.theta[i][j][k]
    }

    pub fn tables(&self) -> &[Vec<Vec<f64>>] {
        &self.theta
    }

    pub fn into_tables(self) -> Vec<Vec<Vec<f64>>> {
        self.theta
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.theta
            .iter()
            .flatten()
            .flatten()
            .zip(other.theta.iter().flatten().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dirichlet hyperparameters α_ijk (all strictly positive).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpec {
    alpha: Vec<Vec<Vec<f64>>>,
}

impl DirichletSpec {
    pub fn new(structure: &NetworkStructure, alpha: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        check_shape(structure, &alpha, "Dirichlet spec")?;
        if let Some(&a) = alpha
            .iter()
            .flatten()
            .flatten()
            .find(|&&a| !(a > 0.0) || !a.is_finite())
        {
            return Err(Error::NonPositiveAlpha(a));
        }
        Ok(Self { alpha })
    }

    /// Every α_ijk set to `value`.
    pub fn constant(structure: &NetworkStructure, value: f64) -> Result<Self> {
        let alpha = (0..structure.len())
            .map(|i| vec![vec![value; structure.cardinality(i)]; structure.num_configs(i)])
            .collect();
        Self::new(structure, alpha)
    }

    pub(crate) fn from_raw(alpha: Vec<Vec<Vec<f64>>>) -> Self {
        Self { alpha }
    }

    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        &self.alpha[i][j]
    }

    pub fn family(&self, i: usize) -> &[Vec<f64>] {
        &self.alpha[i]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.alpha[i][j][k]
    }

    /// α_ij = Σ_k α_ijk.
    pub fn row_sum(&self, i: usize, j: usize) -> f64 {
        self.alpha[i][j].iter().sum()
    }

    pub fn num_families(&self) -> usize {
        self.alpha.len()
    }

    pub fn tables(&self) -> &[Vec<Vec<f64>>] {
        &self.alpha
    }

    /// Posterior-mean parameters α_ijk / α_ij.
    pub fn mean(&self) -> ParameterSet {
        ParameterSet::from_raw(
            self.alpha
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|row| {
                            let s: f64 = row.iter().sum();
                            row.iter().map(|a| a / s).collect()
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub(crate) fn same_shape<T>(&self, other: &[Vec<Vec<T>>]) -> bool {
        self.alpha.len() == other.len()
            && self.alpha.iter().zip(other).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len())
            })
    }
}

/// Sufficient statistics N_ijk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyCounts {
    counts: Vec<Vec<Vec<u64>>>,
}

impl FamilyCounts {
    pub fn zeros(structure: &NetworkStructure) -> Self {
        let counts = (0..structure.len())
            .map(|i| vec![vec![0; structure.cardinality(i)]; structure.num_configs(i)])
            .collect();
        Self { counts }
    }

    pub fn new(structure: &NetworkStructure, counts: Vec<Vec<Vec<u64>>>) -> Result<Self> {
        check_shape(structure, &counts, "family counts")?;
        Ok(Self { counts })
    }

    pub(crate) fn from_raw(counts: Vec<Vec<Vec<u64>>>) -> Self {
        Self { counts }
    }

    pub fn row(&self, i: usize, j: usize) -> &[u64] {
        &self.counts[i][j]
    }

    pub fn family(&self, i: usize) -> &[Vec<u64>] {
        &self.counts[i]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u64 {
        self.counts[i][j][k]
    }

    /// N_ij = Σ_k N_ijk.
    pub fn row_sum(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j].iter().sum()
    }

    /// Σ_j N_ij, the number of cases seen by family `i`.
    pub fn total(&self, i: usize) -> u64 {
        self.counts[i].iter().flatten().sum()
    }

    pub fn num_families(&self) -> usize {
        self.counts.len()
    }

    pub fn tables(&self) -> &[Vec<Vec<u64>>] {
        &self.counts
    }

    /// Elementwise sum of two count tables of the same shape.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        if self.counts.len() != other.counts.len()
            || self
                .counts
                .iter()
                .zip(&other.counts)
                .any(|(a, b)| a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()))
        {
            return Err(Error::ShapeMismatch("count tables differ in shape".into()));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.iter().zip(y).map(|(m, n)| m + n).collect())
                    .collect()
            })
            .collect();
        Ok(Self { counts })
    }

    /// Maximum-likelihood parameters N_ijk / N_ij; rows with N_ij = 0 are uniform.
    pub fn ml_parameters(&self) -> ParameterSet {
        ParameterSet::from_raw(
            self.counts
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|row| {
                            let n: u64 = row.iter().sum();
                            if n == 0 {
                                vec![1.0 / row.len() as f64; row.len()]
                            } else {
                                row.iter().map(|&c| c as f64 / n as f64).collect()
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

/// p(x) = ∏_i θ_{i, j(x), x_i} for a full assignment of state indices.
pub fn joint_probability(
    structure: &NetworkStructure,
    params: &ParameterSet,
    assignment: &[Option<usize>],
) -> Result<f64> {
    if assignment.len() != structure.len() {
        return Err(Error::ShapeMismatch(format!(
            "assignment has {} entries for {} variables",
            assignment.len(),
            structure.len()
        )));
    }
    let mut full = Vec::with_capacity(assignment.len());
    for (i, entry) in assignment.iter().enumerate() {
        let s = entry.ok_or_else(|| Error::MissingValue(structure.variable(i).name().into()))?;
        if s >= structure.cardinality(i) {
            return Err(Error::UnknownState {
                variable: structure.variable(i).name().into(),
                state: format!("#{s}"),
                row: None,
                column: None,
            });
        }
        full.push(s);
    }
    Ok(joint_probability_full(structure, params, &full))
}

pub(crate) fn joint_probability_full(
    structure: &NetworkStructure,
    params: &ParameterSet,
    assignment: &[usize],
) -> f64 {
    (0..structure.len())
        .map(|i| params.get(i, structure.config_of(i, assignment), assignment[i]))
        .product()
}

/// Calls `f` with every full assignment, last variable fastest.
pub fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    if cards.contains(&0) {
        return;
    }
    let mut state = vec![0; cards.len()];
    loop {
        f(&state);
        let mut pos = cards.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            state[pos] += 1;
            if state[pos] < cards[pos] {
                break;
            }
            state[pos] = 0;
        }
    }
}
