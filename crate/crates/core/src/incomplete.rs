//! Parameter learning from cases with missing entries.
//!
//! Missing values are assumed to be missing independently of their state.
//! EM climbs to a local ML or MAP point, Gibbs sampling estimates posterior
//! means, and [`single_case_posterior`] gives the exact Dirichlet mixture for
//! one incomplete case. [`exhaustive_posterior_mean`] enumerates completions
//! and serves as an oracle for small problems.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::data::{Case, DataSet};
use crate::dirichlet::family_table_loglik;
use crate::error::{Error, Result};
use crate::inference::family_posteriors;
use crate::network::NetworkStructure;
use crate::params::{DirichletSpec, FamilyCounts, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EmMode {
    /// Maximize the observed-data log likelihood.
    MaximumLikelihood,
    /// Maximize log likelihood + Σ α_ijk ln θ_ijk, whose M-step is
    /// θ_ijk ∝ α_ijk + E[N_ijk].
    MaximumAPosteriori,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitPolicy {
    Uniform,
    PriorMean,
    /// Rows drawn uniformly from the simplex.
    RandomSimplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmOptions {
    pub mode: EmMode,
    pub init: InitPolicy,
    /// Stop once the relative objective improvement drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            mode: EmMode::MaximumLikelihood,
            init: InitPolicy::PriorMean,
            tolerance: 1e-6,
            max_iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmResult {
    #[serde(skip)]
    pub params: ParameterSet,
    pub mode: EmMode,
    /// Objective at θ_0, θ_1, ..., θ_T.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmResult {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace always holds the initial objective")
    }
}

/// Distinct cases with multiplicities, in first-seen order.
fn group_cases(cases: &[Case]) -> Vec<(Case, usize)> {
    let mut index: HashMap<&Case, usize> = HashMap::new();
    let mut out: Vec<(Case, usize)> = Vec::new();
    for c in cases {
        match index.get(c) {
            Some(&g) => out[g].1 += 1,
            None => {
                index.insert(c, out.len());
                out.push((c.clone(), 1));
            }
        }
    }
    out
}

/// E[N_ijk] = Σ_l p(x_i^k, pa_i^j | y_l, θ) together with Σ_l ln p(y_l | θ).
pub fn expected_counts(
    structure: &NetworkStructure,
    params: &ParameterSet,
    data: &DataSet,
) -> Result<(Vec<Vec<Vec<f64>>>, f64)> {
    data.check_schema(structure)?;
    expected_counts_grouped(structure, params, &group_cases(data.cases()))
}

fn expected_counts_grouped(
    structure: &NetworkStructure,
    params: &ParameterSet,
    groups: &[(Case, usize)],
) -> Result<(Vec<Vec<Vec<f64>>>, f64)> {
    let mut tables: Vec<Vec<Vec<f64>>> = (0..structure.len())
        .map(|i| vec![vec![0.0; structure.cardinality(i)]; structure.num_configs(i)])
        .collect();
    let mut loglik = 0.0;
    for (case, m) in groups {
        let fp = family_posteriors(structure, params, case)?;
        let m = *m as f64;
        loglik += m * fp.evidence_probability.ln();
        for (acc, t) in tables.iter_mut().zip(&fp.tables) {
            for (ar, tr) in acc.iter_mut().zip(t) {
                for (a, v) in ar.iter_mut().zip(tr) {
                    *a += m * v;
                }
            }
        }
    }
    Ok((tables, loglik))
}

fn log_prior_kernel(priors: &DirichletSpec, params: &ParameterSet) -> f64 {
    let mut s = 0.0;
    for (a_fam, t_fam) in priors.tables().iter().zip(params.tables()) {
        for (a_row, t_row) in a_fam.iter().zip(t_fam) {
            for (a, t) in a_row.iter().zip(t_row) {
                s += a * t.ln();
            }
        }
    }
    s
}

fn random_simplex(structure: &NetworkStructure, rng: &mut ChaCha8Rng) -> ParameterSet {
    let theta = (0..structure.len())
        .map(|i| {
            (0..structure.num_configs(i))
                .map(|_| {
                    let draws: Vec<f64> = (0..structure.cardinality(i))
                        .map(|_| rng.sample::<f64, _>(Exp1).max(f64::MIN_POSITIVE))
                        .collect();
                    let z: f64 = draws.iter().sum();
                    draws.into_iter().map(|d| d / z).collect()
                })
                .collect()
        })
        .collect();
    ParameterSet::from_raw(theta)
}

fn initial_params(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    policy: InitPolicy,
    rng: &mut ChaCha8Rng,
) -> ParameterSet {
    match policy {
        InitPolicy::Uniform => ParameterSet::uniform(structure),
        InitPolicy::PriorMean => priors.mean(),
        InitPolicy::RandomSimplex => random_simplex(structure, rng),
    }
}

/// Expectation-maximization for the network parameters.
///
/// In ML mode a configuration whose expected mass is zero keeps its previous
/// row (it does not affect the objective); a family with zero total mass is
/// an error. Complete data converge after one iteration.
pub fn em_fit(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
    options: &EmOptions,
) -> Result<EmResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    em_fit_with_rng(structure, priors, data, options, &mut rng)
}

fn em_fit_with_rng(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
    options: &EmOptions,
    rng: &mut ChaCha8Rng,
) -> Result<EmResult> {
    data.check_schema(structure)?;
    check_priors(structure, priors)?;
    if !(options.tolerance >= 0.0) {
        return Err(Error::InvalidParameters("tolerance must be non-negative".into()));
    }
    let groups = group_cases(data.cases());
    let map = options.mode == EmMode::MaximumAPosteriori;
    let objective = |theta: &ParameterSet, loglik: f64| {
        if map {
            loglik + log_prior_kernel(priors, theta)
        } else {
            loglik
        }
    };

    let mut theta = initial_params(structure, priors, options.init, rng);
    let (mut expected, loglik) = expected_counts_grouped(structure, &theta, &groups)?;
    let mut trace = vec![objective(&theta, loglik)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        let mut next = theta.tables().to_vec();
        for (i, fam) in expected.iter().enumerate() {
            let total: f64 = fam.iter().flatten().sum();
            if !map && !(total > 0.0) {
                return Err(Error::ZeroFamilyMass(format!(
                    "no expected cases for family of `{}`",
                    structure.variable(i).name()
                )));
            }
            for (j, row) in fam.iter().enumerate() {
                let weights: Vec<f64> = if map {
                    row.iter().zip(priors.row(i, j)).map(|(n, a)| n + a).collect()
                } else {
                    row.clone()
                };
                let z: f64 = weights.iter().sum();
                if z > 0.0 {
                    next[i][j] = weights.iter().map(|w| w / z).collect();
                }
            }
        }
        theta = ParameterSet::from_raw(next);
        let (e, loglik) = expected_counts_grouped(structure, &theta, &groups)?;
        expected = e;
        let previous = *trace.last().unwrap();
        let current = objective(&theta, loglik);
        trace.push(current);
        iterations += 1;
        if data.is_complete() {
            converged = true;
            break;
        }
        let relative = (current - previous) / previous.abs().max(f64::MIN_POSITIVE);
        if relative < options.tolerance {
            converged = true;
            break;
        }
    }

    Ok(EmResult {
        params: theta,
        mode: options.mode,
        trace,
        iterations,
        converged,
    })
}

/// Runs EM from `restarts` starting points and keeps the best objective.
/// Restart `r` draws from stream `r` of a generator seeded with the seed.
pub fn em_fit_restarts(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
    options: &EmOptions,
    restarts: usize,
) -> Result<Vec<EmResult>> {
    (0..restarts.max(1))
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64);
            em_fit_with_rng(structure, priors, data, options, &mut rng)
        })
        .collect()
}

/// Index of the result with the highest final objective.
pub fn best_run(results: &[EmResult]) -> Option<usize> {
    (0..results.len()).max_by(|&a, &b| results[a].objective().total_cmp(&results[b].objective()))
}

fn check_priors(structure: &NetworkStructure, priors: &DirichletSpec) -> Result<()> {
    let shape: Vec<Vec<Vec<()>>> = (0..structure.len())
        .map(|i| vec![vec![(); structure.cardinality(i)]; structure.num_configs(i)])
        .collect();
    if !priors.same_shape(&shape) {
        return Err(Error::ShapeMismatch("hyperparameters do not fit the structure".into()));
    }
    if let Some(&a) = priors.tables().iter().flatten().flatten().find(|a| !(**a > 0.0)) {
        return Err(Error::NonPositiveAlpha(a));
    }
    Ok(())
}

fn posterior_means(priors: &DirichletSpec, counts: &[Vec<Vec<u64>>]) -> Vec<Vec<Vec<f64>>> {
    priors
        .tables()
        .iter()
        .zip(counts)
        .map(|(af, nf)| {
            af.iter()
                .zip(nf)
                .map(|(ar, nr)| {
                    let z: f64 = ar.iter().sum::<f64>() + nr.iter().sum::<u64>() as f64;
                    ar.iter().zip(nr).map(|(a, &n)| (a + n as f64) / z).collect()
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsSummary {
    /// Estimated E[θ_ijk | D].
    pub mean: Vec<Vec<Vec<f64>>>,
    /// Batch-means Monte-Carlo standard error of each estimate.
    pub std_error: Vec<Vec<Vec<f64>>>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub batches: usize,
    pub init_policy: &'static str,
}

pub const GIBBS_INIT_POLICY: &str = "prior predictive, topological order";

/// Gibbs sampling over the missing entries.
///
/// Missing entries start from prior-predictive draws and are resampled in a
/// fixed rotation (case by case, variable by variable) from
/// p(x_il | D_c \ x_il), computed from complete-data predictive ratios.
/// After `burn_in` sweeps each sweep contributes the exact complete-data
/// posterior mean, so a complete data set returns the exact posterior mean
/// without drawing a single random number.
pub fn gibbs_posterior(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<GibbsSummary> {
    data.check_schema(structure)?;
    check_priors(structure, priors)?;
    let zero_se = |t: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<Vec<f64>>> {
        t.iter().map(|f| f.iter().map(|r| vec![0.0; r.len()]).collect()).collect()
    };
    if data.is_complete() {
        let counts = crate::data::count_sufficient_stats(structure, data)?;
        let mean = crate::dirichlet::dirichlet_update(priors, &counts)?.mean().into_tables();
        let std_error = zero_se(&mean);
        return Ok(GibbsSummary { mean, std_error, iterations, burn_in, seed, batches: 0, init_policy: GIBBS_INIT_POLICY });
    }
    if iterations <= burn_in {
        return Err(Error::InvalidParameters("iterations must exceed burn-in".into()));
    }

    let n = structure.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let missing: Vec<(usize, usize)> = data
        .cases()
        .iter()
        .enumerate()
        .flat_map(|(l, c)| (0..n).filter(move |&i| c[i].is_none()).map(move |i| (l, i)))
        .collect();

    // Initial completion from the prior predictive, parents first.
    let mut cases: Vec<Vec<usize>> = Vec::with_capacity(data.len());
    for case in data.cases() {
        let mut full = vec![0usize; n];
        for &i in structure.topological_order() {
            full[i] = match case[i] {
                Some(k) => k,
                None => {
                    let j = structure.config_of(i, &full);
                    sample_index(priors.row(i, j), &mut rng).ok_or_else(|| {
                        Error::ZeroCompletionProbability(structure.variable(i).name().into())
                    })?
                }
            };
        }
        cases.push(full);
    }

    let mut counts: Vec<Vec<Vec<u64>>> = (0..n)
        .map(|i| vec![vec![0; structure.cardinality(i)]; structure.num_configs(i)])
        .collect();
    for c in &cases {
        for (i, fam) in counts.iter_mut().enumerate() {
            fam[structure.config_of(i, c)][c[i]] += 1;
        }
    }
    let children: Vec<Vec<usize>> = (0..n).map(|i| structure.children(i)).collect();
    let kept = iterations - burn_in;
    let batches = ((kept as f64).sqrt() as usize).clamp(1, kept);
    let batch_size = kept / batches;
    let shape = posterior_means(priors, &counts);
    let mut sum = zero_se(&shape);
    let mut batch_sum = zero_se(&shape);
    let mut batch_means: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(batches);
    let mut in_batch = 0;
    let mut weights = Vec::new();

    for sweep in 0..iterations {
        for &(l, i) in &missing {
            let mut touched = vec![i];
            touched.extend(&children[i]);
            for &f in &touched {
                counts[f][structure.config_of(f, &cases[l])][cases[l][f]] -= 1;
            }
            weights.clear();
            for k in 0..structure.cardinality(i) {
                cases[l][i] = k;
                let mut w = 1.0;
                for &f in &touched {
                    let j = structure.config_of(f, &cases[l]);
                    let a = priors.row(f, j);
                    let nr = &counts[f][j];
                    let z = a.iter().sum::<f64>() + nr.iter().sum::<u64>() as f64;
                    let kf = cases[l][f];
                    w *= (a[kf] + nr[kf] as f64) / z;
                }
                weights.push(w);
            }
            let k = sample_index(&weights, &mut rng).ok_or_else(|| {
                Error::ZeroCompletionProbability(format!(
                    "case {} variable `{}`",
                    l + 1,
                    structure.variable(i).name()
                ))
            })?;
            cases[l][i] = k;
            for &f in &touched {
                counts[f][structure.config_of(f, &cases[l])][cases[l][f]] += 1;
            }
        }
        if sweep >= burn_in {
            let m = posterior_means(priors, &counts);
            add_into(&mut sum, &m);
            if batch_means.len() < batches {
                add_into(&mut batch_sum, &m);
                in_batch += 1;
                if in_batch == batch_size {
                    batch_means.push(scale(&batch_sum, 1.0 / batch_size as f64));
                    batch_sum = zero_se(&shape);
                    in_batch = 0;
                }
            }
        }
    }

    let mean = scale(&sum, 1.0 / kept as f64);
    let mut std_error = zero_se(&shape);
    if batch_means.len() > 1 {
        let b = batch_means.len() as f64;
        for (i, fam) in std_error.iter_mut().enumerate() {
            for (j, row) in fam.iter_mut().enumerate() {
                for (k, se) in row.iter_mut().enumerate() {
                    let bm: Vec<f64> = batch_means.iter().map(|t| t[i][j][k]).collect();
                    let mu = bm.iter().sum::<f64>() / b;
                    let var = bm.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (b - 1.0);
                    *se = (var / b).sqrt();
                }
            }
        }
    }
    Ok(GibbsSummary { mean, std_error, iterations, burn_in, seed, batches: batch_means.len(), init_policy: GIBBS_INIT_POLICY })
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return Some(k);
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

fn add_into(acc: &mut [Vec<Vec<f64>>], t: &[Vec<Vec<f64>>]) {
    for (af, tf) in acc.iter_mut().zip(t) {
        for (ar, tr) in af.iter_mut().zip(tf) {
            for (a, v) in ar.iter_mut().zip(tr) {
                *a += v;
            }
        }
    }
}

fn scale(t: &[Vec<Vec<f64>>], c: f64) -> Vec<Vec<Vec<f64>>> {
    t.iter()
        .map(|f| f.iter().map(|r| r.iter().map(|v| v * c).collect()).collect())
        .collect()
}

/// Mixture of Dirichlet rows for one family and parent configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletMixture {
    /// `(weight, α row)`; zero-weight components are dropped.
    pub components: Vec<(f64, Vec<f64>)>,
}

impl DirichletMixture {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }

    /// Mixture mean of θ_ij.
    pub fn mean(&self) -> Vec<f64> {
        let r = self.components.first().map_or(0, |(_, a)| a.len());
        let mut out = vec![0.0; r];
        for (w, a) in &self.components {
            let z: f64 = a.iter().sum();
            for (o, ak) in out.iter_mut().zip(a) {
                *o += w * ak / z;
            }
        }
        out
    }
}

/// Exact posterior of θ_ij after one incomplete case y:
/// (1 − p(pa_i^j | y)) Dir(α_ij) + Σ_k p(x_i^k, pa_i^j | y) Dir(α_ij + e_k),
/// with probabilities evaluated at the prior-mean parameters.
pub fn single_case_posterior(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    case: &[Option<usize>],
    family: usize,
    config: usize,
) -> Result<DirichletMixture> {
    check_priors(structure, priors)?;
    if family >= structure.len() || config >= structure.num_configs(family) {
        return Err(Error::InvalidIndex(format!("family {family}, configuration {config}")));
    }
    if case.len() != structure.len() {
        return Err(Error::SchemaMismatch(format!(
            "case has {} entries, network has {} variables",
            case.len(),
            structure.len()
        )));
    }
    let fp = family_posteriors(structure, &priors.mean(), &case.to_vec())?;
    let joint = &fp.tables[family][config];
    let p_config: f64 = joint.iter().sum();
    let base = priors.row(family, config).to_vec();
    let clean = |w: f64| if w.abs() < 1e-15 { 0.0 } else { w };
    let mut components = Vec::new();
    let w0 = clean(1.0 - p_config);
    if w0 > 0.0 {
        components.push((w0, base.clone()));
    }
    for (k, &p) in joint.iter().enumerate() {
        let w = clean(p);
        if w > 0.0 {
            let mut a = base.clone();
            a[k] += 1.0;
            components.push((w, a));
        }
    }
    Ok(DirichletMixture { components })
}

/// Upper bound on the grouped completions visited by [`exhaustive_posterior_mean`].
pub const MAX_COMPLETION_PATTERNS: u128 = 5_000_000;

/// E[θ_ijk | D] by summing over every completion of the missing entries,
/// each weighted by its complete-data marginal likelihood. Identical cases
/// are grouped, so only the per-group completion counts are enumerated.
pub fn exhaustive_posterior_mean(
    structure: &NetworkStructure,
    priors: &DirichletSpec,
    data: &DataSet,
) -> Result<Vec<Vec<Vec<f64>>>> {
    data.check_schema(structure)?;
    check_priors(structure, priors)?;
    let n = structure.len();
    let mut base = FamilyCounts::zeros(structure).tables().to_vec();
    // Each incomplete group: multiplicity and its list of full completions.
    let mut groups: Vec<(usize, Vec<Vec<usize>>)> = Vec::new();
    for (case, m) in group_cases(data.cases()) {
        let hidden: Vec<usize> = (0..n).filter(|&i| case[i].is_none()).collect();
        if hidden.is_empty() {
            let full: Vec<usize> = case.iter().map(|s| s.unwrap()).collect();
            for (i, fam) in base.iter_mut().enumerate() {
                fam[structure.config_of(i, &full)][full[i]] += m as u64;
            }
            continue;
        }
        let cards: Vec<usize> = hidden.iter().map(|&v| structure.cardinality(v)).collect();
        let mut completions = Vec::new();
        crate::params::for_each_assignment(&cards, |a| {
            let mut full: Vec<usize> = case.iter().map(|s| s.unwrap_or(0)).collect();
            for (&v, &s) in hidden.iter().zip(a) {
                full[v] = s;
            }
            completions.push(full);
        });
        groups.push((m, completions));
    }
    let patterns: u128 = groups
        .iter()
        .map(|(m, c)| binomial((m + c.len() - 1) as u64, (c.len() - 1) as u64))
        .product();
    if patterns > MAX_COMPLETION_PATTERNS {
        return Err(Error::TooLarge(format!("{patterns} completion patterns")));
    }

    let mut log_weights: Vec<f64> = Vec::new();
    let mut means: Vec<Vec<Vec<Vec<f64>>>> = Vec::new();
    let mut parts: Vec<Vec<usize>> = groups.iter().map(|(m, c)| first_composition(*m, c.len())).collect();
    loop {
        let mut counts = base.clone();
        let mut log_mult = 0.0;
        for ((m, comps), part) in groups.iter().zip(&parts) {
            log_mult += ln_factorial(*m);
            for (full, &cnt) in comps.iter().zip(part) {
                log_mult -= ln_factorial(cnt);
                for (i, fam) in counts.iter_mut().enumerate() {
                    fam[structure.config_of(i, full)][full[i]] += cnt as u64;
                }
            }
        }
        let ll: f64 = priors
            .tables()
            .iter()
            .zip(&counts)
            .map(|(a, c)| family_table_loglik(a, c))
            .sum();
        log_weights.push(log_mult + ll);
        means.push(posterior_means(priors, &counts));

        // Advance the odometer over per-group compositions.
        let mut g = parts.len();
        loop {
            if g == 0 {
                let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = w.iter().sum();
                let mut out = scale(&means[0], 0.0);
                for (wi, m) in w.iter().zip(&means) {
                    add_into(&mut out, &scale(m, wi / z));
                }
                return Ok(out);
            }
            g -= 1;
            if next_composition(&mut parts[g]) {
                break;
            }
            parts[g] = first_composition(groups[g].0, groups[g].1.len());
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

fn binomial(n: u64, k: u64) -> u128 {
    let mut r: u128 = 1;
    for i in 0..k.min(n - k) {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

fn first_composition(m: usize, parts: usize) -> Vec<usize> {
    let mut v = vec![0; parts];
    v[parts - 1] = m;
    v
}

/// Next composition of the same total in colexicographic-like order; false
/// after the last one.
fn next_composition(v: &mut [usize]) -> bool {
    let p = v.len();
    // Find the rightmost position (excluding the first) holding a positive value.
    let Some(t) = (1..p).rev().find(|&t| v[t] > 0) else { return false };
    let moved = v[t] - 1;
    v[t] = 0;
    v[t - 1] += 1;
    v[p - 1] += moved;
    true
}
