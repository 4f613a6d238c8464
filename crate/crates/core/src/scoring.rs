//! Structure-level criteria: BD log marginal likelihood, its sequential
//! predictive form, structure priors, BIC and the local (classification)
//! criterion.

use std::collections::BTreeSet;

use crate::data::{count_sufficient_stats, DataSet};
use crate::dirichlet::{dirichlet_update, family_table_loglik, network_predictive};
use crate::error::{Error, Result};
use crate::inference::{query, Evidence};
use crate::network::{NetworkStructure, VariableSpec};
use crate::params::{joint_probability_full, DirichletSpec, FamilyCounts, ParameterSet};

/// Hard structural constraints shared by scoring and search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Constraints {
    /// Variables that may not have parents.
    pub no_parents: BTreeSet<usize>,
    /// Variables that may not have children.
    pub leaves: BTreeSet<usize>,
    /// Individually forbidden arcs `(parent, child)`.
    pub forbidden_arcs: BTreeSet<(usize, usize)>,
    /// Optional bound on the number of parents of any variable.
    pub max_parents: Option<usize>,
}

impl Constraints {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_names(variables: &[VariableSpec], no_parents: &[&str], leaves: &[&str]) -> Result<Self> {
        let resolve = |names: &[&str]| -> Result<BTreeSet<usize>> {
            names
                .iter()
                .map(|n| {
                    variables
                        .iter()
                        .position(|v| v.name() == *n)
                        .ok_or_else(|| Error::UnknownVariable(n.to_string()))
                })
                .collect()
        };
        Ok(Self {
            no_parents: resolve(no_parents)?,
            leaves: resolve(leaves)?,
            ..Self::default()
        })
    }

    pub fn with_max_parents(mut self, k: usize) -> Self {
        self.max_parents = Some(k);
        self
    }

    /// Whether the arc `parent -> child` is allowed on its own.
    pub fn allows_arc(&self, parent: usize, child: usize) -> bool {
        !self.no_parents.contains(&child)
            && !self.leaves.contains(&parent)
            && !self.forbidden_arcs.contains(&(parent, child))
    }

    pub fn allows_family(&self, child: usize, parents: &[usize]) -> bool {
        self.max_parents.is_none_or(|k| parents.len() <= k)
            && parents.iter().all(|&p| self.allows_arc(p, child))
    }

    pub fn check(&self, structure: &NetworkStructure) -> Result<()> {
        for i in 0..structure.len() {
            let ps = structure.parents(i);
            if let Some(k) = self.max_parents {
                if ps.len() > k {
                    return Err(Error::ConstraintViolation(format!(
                        "`{}` has {} parents, limit is {k}",
                        structure.variable(i).name(),
                        ps.len()
                    )));
                }
            }
            for &p in ps {
                if !self.allows_arc(p, i) {
                    return Err(Error::ConstraintViolation(format!(
                        "arc {} -> {} is not allowed",
                        structure.variable(p).name(),
                        structure.variable(i).name()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructurePriorKind {
    /// Every allowed structure equally likely; contributes log 1 = 0.
    Uniform,
    /// Independent arcs, each present with probability `kappa`, over a fixed
    /// variable ordering (arcs must point forward in `ordering`).
    PerArc { kappa: f64, ordering: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructurePrior {
    pub kind: StructurePriorKind,
    pub constraints: Constraints,
}

impl StructurePrior {
    pub fn uniform() -> Self {
        Self {
            kind: StructurePriorKind::Uniform,
            constraints: Constraints::none(),
        }
    }

    pub fn per_arc(kappa: f64, ordering: Vec<usize>) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidParameters(format!("arc probability {kappa} is not in (0,1)")));
        }
        let mut sorted = ordering.clone();
        sorted.sort_unstable();
        if sorted != (0..ordering.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidParameters("ordering is not a permutation of the variables".into()));
        }
        let mut constraints = Constraints::none();
        for (a, &u) in ordering.iter().enumerate() {
            for &v in &ordering[a + 1..] {
                constraints.forbidden_arcs.insert((v, u));
            }
        }
        Ok(Self {
            kind: StructurePriorKind::PerArc { kappa, ordering },
            constraints,
        })
    }

    pub fn with_constraints(mut self, extra: Constraints) -> Self {
        self.constraints.no_parents.extend(extra.no_parents);
        self.constraints.leaves.extend(extra.leaves);
        self.constraints.forbidden_arcs.extend(extra.forbidden_arcs);
        self.constraints.max_parents = match (self.constraints.max_parents, extra.max_parents) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }

    /// Log prior contribution of one family. The sum over families is the
    /// structure's log prior.
    pub fn family_log_prior(&self, child: usize, parents: &[usize]) -> f64 {
        match &self.kind {
            StructurePriorKind::Uniform => 0.0,
            StructurePriorKind::PerArc { kappa, ordering } => {
                let earlier = ordering.iter().position(|&v| v == child).unwrap_or(0);
                let present = parents.len();
                present as f64 * kappa.ln() + (earlier - present.min(earlier)) as f64 * (1.0 - kappa).ln()
            }
        }
    }

    pub fn log_prior(&self, structure: &NetworkStructure) -> Result<f64> {
        self.constraints.check(structure)?;
        if let StructurePriorKind::PerArc { ordering, .. } = &self.kind {
            if ordering.len() != structure.len() {
                return Err(Error::InvalidParameters("ordering length differs from variable count".into()));
            }
        }
        Ok((0..structure.len())
            .map(|i| self.family_log_prior(i, structure.parents(i)))
            .sum())
    }
}

/// Per-family BD log marginal likelihoods and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLikelihood {
    pub per_family: Vec<f64>,
    pub total: f64,
}

/// Unnormalized log posterior of a structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub log_prior: f64,
    pub log_marginal: f64,
    pub total: f64,
    pub family_marginals: Vec<f64>,
    pub family_priors: Vec<f64>,
}

/// log p(D | S) = Σ_i Σ_j log[Γ(α_ij)/Γ(α_ij+N_ij) ∏_k Γ(α_ijk+N_ijk)/Γ(α_ijk)].
pub fn bd_log_marginal(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    counts: &FamilyCounts,
) -> Result<MarginalLikelihood> {
    let expected: Vec<Vec<Vec<()>>> = (0..structure.len())
        .map(|i| vec![vec![(); structure.cardinality(i)]; structure.num_configs(i)])
        .collect();
    if !priors.same_shape(&expected) || !priors.same_shape(counts.tables()) {
        return Err(Error::ShapeMismatch(
            "hyperparameters, counts and structure disagree in shape".into(),
        ));
    }
    let per_family: Vec<f64> = (0..structure.len())
        .map(|i| family_table_loglik(priors.family(i), counts.family(i)))
        .collect();
    let total = per_family.iter().sum();
    Ok(MarginalLikelihood { per_family, total })
}

/// Σ_l log p(x_l | x_1..x_{l-1}, S) via incremental Dirichlet updates.
pub fn sequential_predictive_log(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
) -> Result<f64> {
    data.check_schema(structure)?;
    let cases = data.complete_cases()?;
    let mut alpha = priors.tables().to_vec();
    let mut total = 0.0;
    for case in &cases {
        for i in 0..structure.len() {
            let j = structure.config_of(i, case);
            let row = &mut alpha[i][j];
            let sum: f64 = row.iter().sum();
            total += (row[case[i]] / sum).ln();
            row[case[i]] += 1.0;
        }
    }
    Ok(total)
}

/// log p(S) + log p(D | S) for complete-data counts.
pub fn log_posterior_score(
    structure: &NetworkStructure,
    prior: &StructurePrior,
    priors: &DirichletSpec,
    counts: &FamilyCounts,
) -> Result<ScoreReport> {
    let log_prior = prior.log_prior(structure)?;
    let family_priors = (0..structure.len())
        .map(|i| prior.family_log_prior(i, structure.parents(i)))
        .collect();
    let marginal = bd_log_marginal(structure, priors, counts)?;
    Ok(ScoreReport {
        log_prior,
        log_marginal: marginal.total,
        total: log_prior + marginal.total,
        family_marginals: marginal.per_family,
        family_priors,
    })
}

/// Convenience: counts the data and scores it.
pub fn score_data(
    structure: &NetworkStructure,
    prior: &StructurePrior,
    priors: &DirichletSpec,
    data: &DataSet,
) -> Result<ScoreReport> {
    let counts = count_sufficient_stats(structure, data)?;
    log_posterior_score(structure, prior, priors, &counts)
}

/// Number of free parameters Σ_i q_i (r_i − 1).
pub fn dimension(structure: &NetworkStructure) -> usize {
    (0..structure.len())
        .map(|i| structure.num_configs(i) * (structure.cardinality(i) - 1))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicScore {
    pub log_likelihood: f64,
    pub dimension: usize,
    pub penalty: f64,
    pub score: f64,
}

/// log p(D | θ̂, S) − (d/2) log N.
pub fn bic_score(structure: &NetworkStructure, ml_params: &ParameterSet, data: &DataSet) -> Result<BicScore> {
    data.check_schema(structure)?;
    let cases = data.complete_cases()?;
    if cases.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ParameterSet::new(structure, ml_params.tables().to_vec())?;
    let log_likelihood: f64 = cases
        .iter()
        .map(|c| joint_probability_full(structure, ml_params, c).ln())
        .sum();
    let d = dimension(structure);
    let penalty = 0.5 * d as f64 * (cases.len() as f64).ln();
    Ok(BicScore {
        log_likelihood,
        dimension: d,
        penalty,
        score: log_likelihood - penalty,
    })
}

/// BIC with the maximum-likelihood fit computed from the data.
pub fn bic_from_data(structure: &NetworkStructure, data: &DataSet) -> Result<BicScore> {
    let counts = count_sufficient_stats(structure, data)?;
    bic_score(structure, &counts.ml_parameters(), data)
}

/// Σ_l log p(a_l | findings_l, D_{l-1}, S): the model is trained on the cases
/// before `l` and asked to predict the target from the other variables of
/// case `l`.
pub fn local_criterion(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
    target: usize,
) -> Result<f64> {
    data.check_schema(structure)?;
    if target >= structure.len() {
        return Err(Error::InvalidIndex(format!("target variable #{target}")));
    }
    let cases = data.complete_cases()?;
    let mut posterior = priors.clone();
    let mut total = 0.0;
    for case in &cases {
        let mut findings: Vec<Option<usize>> = case.iter().map(|&s| Some(s)).collect();
        findings[target] = None;
        let evidence = Evidence::from_case(structure, &findings)?;
        let result = query(structure, &posterior.mean(), &[target], &evidence)?;
        total += result.probabilities[case[target]].ln();
        let mut one = FamilyCounts::zeros(structure).tables().to_vec();
        for i in 0..structure.len() {
            one[i][structure.config_of(i, case)][case[i]] = 1;
        }
        posterior = dirichlet_update(&posterior, &FamilyCounts::from_raw(one))?;
    }
    Ok(total)
}

/// Log predictive of a single complete case under `priors` (no data).
pub fn log_prior_predictive(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    case: &[usize],
) -> Result<f64> {
    let row: Vec<Option<usize>> = case.iter().map(|&s| Some(s)).collect();
    Ok(network_predictive(structure, priors, &row)?.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::{bde_priors, BdePriorInputs};

    fn coin_data(h: usize, t: usize) -> (NetworkStructure, DataSet) {
        let v = VariableSpec::new("C", ["h", "t"]).unwrap();
        let s = NetworkStructure::empty(vec![v.clone()]).unwrap();
        let mut cases = vec![vec![Some(0)]; h];
        cases.extend(vec![vec![Some(1)]; t]);
        (s, DataSet::new(vec![v], cases).unwrap())
    }

    #[test]
    fn single_coin_bd() {
        let (s, d) = coin_data(2, 0);
        let priors = DirichletSpec::constant(&s, 1.0).unwrap();
        let counts = count_sufficient_stats(&s, &d).unwrap();
        let m = bd_log_marginal(&s, &priors, &counts).unwrap();
        assert!((m.total - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        let seq = sequential_predictive_log(&s, &priors, &d).unwrap();
        assert!((seq - m.total).abs() < 1e-12);
    }

    #[test]
    fn empty_and_single_case_sequential() {
        let (s, d) = coin_data(1, 0);
        let priors = DirichletSpec::new(&s, vec![vec![vec![2.0, 3.0]]]).unwrap();
        assert_eq!(sequential_predictive_log(&s, &priors, &d.prefix(0)).unwrap(), 0.0);
        let one = sequential_predictive_log(&s, &priors, &d).unwrap();
        assert!((one - log_prior_predictive(&s, &priors, &[0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn equivalent_pair_scores_equally_on_uniform_cases() {
        let vars = vec![VariableSpec::indexed("X", 2).unwrap(), VariableSpec::indexed("Y", 2).unwrap()];
        let rows: Vec<Vec<Option<usize>>> = vec![
            vec![Some(0), Some(0)],
            vec![Some(0), Some(1)],
            vec![Some(1), Some(0)],
            vec![Some(1), Some(1)],
        ];
        let data = DataSet::new(vars.clone(), rows).unwrap();
        let inputs = BdePriorInputs::uniform(1.0, vars.clone()).unwrap();
        let empty = NetworkStructure::empty(vars.clone()).unwrap();
        let forward = NetworkStructure::from_names(vars.clone(), &[("Y", &["X"])]).unwrap();
        let backward = NetworkStructure::from_names(vars, &[("X", &["Y"])]).unwrap();
        let score = |s: &NetworkStructure| {
            let p = bde_priors(&inputs, s).unwrap();
            bd_log_marginal(s, &p, &count_sufficient_stats(s, &data).unwrap()).unwrap().total
        };
        assert!((score(&forward) - score(&backward)).abs() < 1e-12);
        // Not equivalent to the arcless graph; by hand the Y family gives
        // (1/24)(3/4)^2 without the arc and ((4/3)(1/4)^2)^2 with it.
        let gap = (1.0f64 / 24.0 * 0.5625).ln() - ((4.0f64 / 3.0 / 16.0).powi(2)).ln();
        assert!((score(&empty) - score(&forward) - gap).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_is_zero_and_per_arc_counts_arcs() {
        let vars = vec![VariableSpec::indexed("X", 2).unwrap(), VariableSpec::indexed("Y", 2).unwrap()];
        let empty = NetworkStructure::empty(vars.clone()).unwrap();
        let arc = NetworkStructure::from_names(vars.clone(), &[("Y", &["X"])]).unwrap();
        assert_eq!(StructurePrior::uniform().log_prior(&arc).unwrap(), 0.0);
        let prior = StructurePrior::per_arc(0.5, vec![0, 1]).unwrap();
        assert!((prior.log_prior(&empty).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!((prior.log_prior(&arc).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        let back = NetworkStructure::from_names(vars, &[("X", &["Y"])]).unwrap();
        assert_eq!(prior.log_prior(&back).unwrap_err().name(), "ConstraintViolation");
        assert!(StructurePrior::per_arc(1.0, vec![0, 1]).is_err());
    }

    #[test]
    fn thumbtack_bic() {
        let (s, d) = coin_data(6, 4);
        let b = bic_from_data(&s, &d).unwrap();
        let loglik = 6.0 * 0.6f64.ln() + 4.0 * 0.4f64.ln();
        assert!((b.log_likelihood - loglik).abs() < 1e-12);
        assert_eq!(b.dimension, 1);
        assert!((b.penalty - 0.5 * 10f64.ln()).abs() < 1e-12);
        assert!((b.score - (-7.8814)).abs() < 5e-5, "{}", b.score);
        assert_eq!(bic_from_data(&s, &d.prefix(0)).unwrap_err(), Error::EmptyDataset);
    }

    #[test]
    fn adding_an_arc_never_lowers_dimension() {
        let vars = vec![VariableSpec::indexed("X", 3).unwrap(), VariableSpec::indexed("Y", 2).unwrap()];
        let empty = NetworkStructure::empty(vars.clone()).unwrap();
        let arc = NetworkStructure::from_names(vars, &[("Y", &["X"])]).unwrap();
        assert!(dimension(&arc) >= dimension(&empty));
        assert_eq!(dimension(&empty), 3);
        assert_eq!(dimension(&arc), 2 + 3);
    }

    #[test]
    fn local_criterion_without_findings_is_sequential() {
        let (s, d) = coin_data(3, 2);
        let priors = DirichletSpec::new(&s, vec![vec![vec![1.5, 0.5]]]).unwrap();
        let lc = local_criterion(&s, &priors, &d, 0).unwrap();
        let seq = sequential_predictive_log(&s, &priors, &d).unwrap();
        assert!((lc - seq).abs() < 1e-12);
    }
}
