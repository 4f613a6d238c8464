//! Conjugate Dirichlet learning for multinomial families.
//!
//! With independent Dirichlet priors the posterior after complete data is
//! Dirichlet with α_ijk + N_ijk, the one-step predictive is the posterior
//! mean, and the evidence for one configuration row is a ratio of gamma
//! functions. Everything likelihood-valued here is returned as a natural log.
//!
//! Assessing a beta prior by hand: imagine `a` prior heads and `b` prior tails
//! (equivalent sample size a + b) and use Beta(a, b). Hyperparameters must
//! stay strictly positive; a near-uninformative prior uses small positive
//! values chosen by the caller rather than Beta(0, 0).

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::inference::{query, Evidence};
use crate::network::NetworkStructure;
use crate::params::{DirichletSpec, FamilyCounts, ParameterSet};

/// Smallest BDe hyperparameter accepted before reporting a zero prior.
pub const MIN_BDE_ALPHA: f64 = 1e-12;

/// Posterior hyperparameters α_ijk + N_ijk.
pub fn dirichlet_update(prior: &DirichletSpec, counts: &FamilyCounts) -> Result<DirichletSpec> {
    if !prior.same_shape(counts.tables()) {
        return Err(Error::ShapeMismatch(
            "counts and hyperparameters have different shapes".into(),
        ));
    }
    let alpha = prior
        .tables()
        .iter()
        .zip(counts.tables())
        .map(|(a, n)| {
            a.iter()
                .zip(n)
                .map(|(ar, nr)| ar.iter().zip(nr).map(|(x, &c)| x + c as f64).collect())
                .collect()
        })
        .collect();
    Ok(DirichletSpec::from_raw(alpha))
}

/// Predictive distribution α_ijk / α_ij for family `i`, configuration `j`.
pub fn dirichlet_predictive(spec: &DirichletSpec, i: usize, j: usize) -> Result<Vec<f64>> {
    let row = spec
        .tables()
        .get(i)
        .and_then(|f| f.get(j))
        .ok_or_else(|| Error::InvalidIndex(format!("family {i}, configuration {j}")))?;
    let total: f64 = row.iter().sum();
    Ok(row.iter().map(|a| a / total).collect())
}

/// log Γ(α_ij)/Γ(α_ij + N_ij) · ∏_k Γ(α_ijk + N_ijk)/Γ(α_ijk).
pub fn family_marginal_loglik(alpha: &[f64], counts: &[u64]) -> Result<f64> {
    if alpha.len() != counts.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} hyperparameters for {} counts",
            alpha.len(),
            counts.len()
        )));
    }
    if let Some(&a) = alpha.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::NonPositiveAlpha(a));
    }
    Ok(row_marginal_loglik(alpha, counts))
}

pub(crate) fn row_marginal_loglik(alpha: &[f64], counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let a: f64 = alpha.iter().sum();
    let mut total = ln_gamma(a) - ln_gamma(a + n as f64);
    for (&ak, &nk) in alpha.iter().zip(counts) {
        if nk > 0 {
            total += ln_gamma(ak + nk as f64) - ln_gamma(ak);
        }
    }
    total
}

/// Sum of [`family_marginal_loglik`] over all configurations of one family.
pub(crate) fn family_table_loglik(alpha: &[Vec<f64>], counts: &[Vec<u64>]) -> f64 {
    alpha
        .iter()
        .zip(counts)
        .map(|(a, n)| row_marginal_loglik(a, n))
        .sum()
}

/// p(next case = assignment | D) = ∏_i α'_ijk / α'_ij with posterior α'.
pub fn network_predictive(
    structure: &NetworkStructure,
    posterior: &DirichletSpec,
    assignment: &[Option<usize>],
) -> Result<f64> {
    if !posterior.same_shape(
        &(0..structure.len())
            .map(|i| vec![vec![(); structure.cardinality(i)]; structure.num_configs(i)])
            .collect::<Vec<_>>(),
    ) {
        return Err(Error::ShapeMismatch("hyperparameters do not fit the structure".into()));
    }
    let mut p = 1.0;
    for i in 0..structure.len() {
        let k = assignment
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| Error::MissingValue(structure.variable(i).name().into()))?;
        let j = structure.parent_config_index(i, assignment)?;
        let row = posterior.row(i, j);
        let k_alpha = *row.get(k).ok_or_else(|| Error::UnknownState {
            variable: structure.variable(i).name().into(),
            state: format!("#{k}"),
            row: None,
            column: None,
        })?;
        p *= k_alpha / row.iter().sum::<f64>();
    }
    Ok(p)
}

/// Equivalent sample size plus the prior network encoding p(x | S_c).
#[derive(Debug, Clone)]
pub struct BdePriorInputs {
    pub equivalent_sample_size: f64,
    pub prior_structure: NetworkStructure,
    pub prior_params: ParameterSet,
}

impl BdePriorInputs {
    pub fn new(
        equivalent_sample_size: f64,
        prior_structure: NetworkStructure,
        prior_params: ParameterSet,
    ) -> Result<Self> {
        if !(equivalent_sample_size > 0.0) || !equivalent_sample_size.is_finite() {
            return Err(Error::NonPositiveAlpha(equivalent_sample_size));
        }
        ParameterSet::new(&prior_structure, prior_params.tables().to_vec())?;
        Ok(Self {
            equivalent_sample_size,
            prior_structure,
            prior_params,
        })
    }

    /// Prior network in which all variables are independent and uniform.
    pub fn uniform(
        equivalent_sample_size: f64,
        variables: Vec<crate::network::VariableSpec>,
    ) -> Result<Self> {
        let s = NetworkStructure::empty(variables)?;
        let p = ParameterSet::uniform(&s);
        Self::new(equivalent_sample_size, s, p)
    }

    /// α · p(x_i^k, pa^j) for the family (`child`, `parents`), as `[j][k]`.
    pub fn family(&self, child: usize, parents: &[usize]) -> Result<Vec<Vec<f64>>> {
        let s = &self.prior_structure;
        let mut targets = parents.to_vec();
        targets.push(child);
        let joint = query(s, &self.prior_params, &targets, &Evidence::none(s))?;
        let r = s.cardinality(child);
        let rows: Vec<Vec<f64>> = joint
            .probabilities
            .chunks(r)
            .map(|c| c.iter().map(|p| p * self.equivalent_sample_size).collect())
            .collect();
        if let Some((j, k)) = rows.iter().enumerate().find_map(|(j, row)| {
            row.iter()
                .position(|&a| a < MIN_BDE_ALPHA)
                .map(|k| (j, k))
        }) {
            return Err(Error::ZeroPriorProbability(format!(
                "`{}` = `{}` with parent configuration {j} has prior probability {:e}",
                s.variable(child).name(),
                s.variable(child).states()[k],
                rows[j][k] / self.equivalent_sample_size
            )));
        }
        Ok(rows)
    }
}

/// BDe hyperparameters for `target`: α_ijk = α · p(x_i^k, pa_i^j | S_c),
/// where pa_i are the target structure's parents.
pub fn bde_priors(inputs: &BdePriorInputs, target: &NetworkStructure) -> Result<DirichletSpec> {
    if !inputs.prior_structure.same_variables(target) {
        return Err(Error::VariableSetMismatch);
    }
    let alpha = (0..target.len())
        .map(|i| inputs.family(i, target.parents(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DirichletSpec::from_raw(alpha))
}

/// Memoizes BDe family tables by (variable, parent list).
#[derive(Debug)]
pub struct BdeCache<'a> {
    inputs: &'a BdePriorInputs,
    tables: HashMap<(usize, Vec<usize>), Vec<Vec<f64>>>,
}

impl<'a> BdeCache<'a> {
    pub fn new(inputs: &'a BdePriorInputs) -> Self {
        Self {
            inputs,
            tables: HashMap::new(),
        }
    }

    pub fn family(&mut self, child: usize, parents: &[usize]) -> Result<&Vec<Vec<f64>>> {
        let key = (child, parents.to_vec());
        if !self.tables.contains_key(&key) {
            let t = self.inputs.family(child, parents)?;
            self.tables.insert(key.clone(), t);
        }
        Ok(&self.tables[&key])
    }
}
