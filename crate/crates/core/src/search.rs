//! Score-based structure search over DAGs.
//!
//! The BD score plus a separable structure prior decomposes into one term per
//! family, so a single-arc change only needs the families whose parent sets
//! it touches: one for an add or delete, two for a reversal. Family terms are
//! memoized by `(variable, parent set)`.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{count_family, DataSet};
use crate::dirichlet::{dirichlet_update, family_table_loglik, network_predictive, BdePriorInputs};
use crate::error::{Error, Result};
use crate::network::{NetworkStructure, VariableSpec};
use crate::params::{DirichletSpec, FamilyCounts};
use crate::scoring::{Constraints, ScoreReport, StructurePrior};

/// Identifier of the generator behind every seeded routine in this crate.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha), stream = restart index";

/// Differences at or below this are treated as ties, not improvements.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Supplies Dirichlet hyperparameters for a family given its parent set.
pub trait FamilyPrior {
    fn family_alpha(&self, child: usize, parents: &[usize]) -> Result<Vec<Vec<f64>>>;

    fn build(&self, structure: &NetworkStructure) -> Result<DirichletSpec> {
        let alpha = (0..structure.len())
            .map(|i| self.family_alpha(i, structure.parents(i)))
            .collect::<Result<Vec<_>>>()?;
        DirichletSpec::new(structure, alpha)
    }
}

impl FamilyPrior for BdePriorInputs {
    fn family_alpha(&self, child: usize, parents: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.family(child, parents)
    }
}

/// Every α_ijk equal to a constant (α = 1 gives the K2 prior).
#[derive(Debug, Clone)]
pub struct ConstantPrior {
    pub value: f64,
    pub cardinalities: Vec<usize>,
}

impl FamilyPrior for ConstantPrior {
    fn family_alpha(&self, child: usize, parents: &[usize]) -> Result<Vec<Vec<f64>>> {
        if !(self.value > 0.0) {
            return Err(Error::NonPositiveAlpha(self.value));
        }
        let q: usize = parents.iter().map(|&p| self.cardinalities[p]).product();
        Ok(vec![vec![self.value; self.cardinalities[child]]; q])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ChangeKind {
    Add,
    Delete,
    Reverse,
}

/// A single-arc change. For `Add` the arc `from -> to` is created, for
/// `Delete` it is removed and for `Reverse` it becomes `to -> from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ChangeOp {
    pub kind: ChangeKind,
    pub from: usize,
    pub to: usize,
}

impl ChangeOp {
    pub fn describe(&self, s: &NetworkStructure) -> String {
        let (a, b) = (s.variable(self.from).name(), s.variable(self.to).name());
        match self.kind {
            ChangeKind::Add => format!("add {a} -> {b}"),
            ChangeKind::Delete => format!("delete {a} -> {b}"),
            ChangeKind::Reverse => format!("reverse {a} -> {b}"),
        }
    }

    /// New parent lists of the affected children, as `(child, parents)`.
    fn new_families(&self, s: &NetworkStructure) -> Vec<(usize, Vec<usize>)> {
        let with = |child: usize, extra: usize| {
            let mut ps = s.parents(child).to_vec();
            ps.push(extra);
            ps.sort_unstable();
            ps
        };
        let without = |child: usize, gone: usize| {
            s.parents(child).iter().copied().filter(|&p| p != gone).collect::<Vec<_>>()
        };
        match self.kind {
            ChangeKind::Add => vec![(self.to, with(self.to, self.from))],
            ChangeKind::Delete => vec![(self.to, without(self.to, self.from))],
            ChangeKind::Reverse => vec![
                (self.to, without(self.to, self.from)),
                (self.from, with(self.from, self.to)),
            ],
        }
    }
}

/// Applies a change, keeping parent lists sorted by variable index.
pub fn apply_change(s: &NetworkStructure, op: &ChangeOp) -> Result<NetworkStructure> {
    let mut lists = s.all_parents().to_vec();
    for (child, ps) in op.new_families(s) {
        lists[child] = ps;
    }
    NetworkStructure::new(s.variables().to_vec(), lists)
}

/// Every single-arc change that keeps the graph acyclic and within
/// `constraints`, ordered by kind then by endpoint names.
pub fn eligible_changes(s: &NetworkStructure, constraints: &Constraints) -> Vec<ChangeOp> {
    let n = s.len();
    let mut out = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            if s.has_arc(from, to) {
                out.push(ChangeOp { kind: ChangeKind::Delete, from, to });
                let mut ps = s.parents(from).to_vec();
                ps.push(to);
                if constraints.allows_family(from, &ps) && !has_indirect_path(s, from, to) {
                    out.push(ChangeOp { kind: ChangeKind::Reverse, from, to });
                }
            } else if !s.has_arc(to, from) {
                let mut ps = s.parents(to).to_vec();
                ps.push(from);
                if constraints.allows_family(to, &ps) && !s.reaches(to, from) {
                    out.push(ChangeOp { kind: ChangeKind::Add, from, to });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then_with(|| s.variable(a.from).name().cmp(s.variable(b.from).name()))
            .then_with(|| s.variable(a.to).name().cmp(s.variable(b.to).name()))
    });
    out
}

/// Is there a directed path `from -> ... -> to` other than the arc itself?
fn has_indirect_path(s: &NetworkStructure, from: usize, to: usize) -> bool {
    let n = s.len();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&c| c != to && s.has_arc(from, c))
        .collect();
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend((0..n).filter(|&c| s.has_arc(v, c)));
    }
    false
}

/// Memoized family scores c(X_i, Pa_i, D_i) = log BD term + log prior term,
/// and the per-variable scores of the current structure.
pub struct ScoreCache<'a> {
    cases: Vec<Vec<usize>>,
    cards: Vec<usize>,
    prior: &'a dyn FamilyPrior,
    structure_prior: &'a StructurePrior,
    memo: HashMap<(usize, Vec<usize>), (f64, f64)>,
    family: Vec<f64>,
    total: f64,
    evaluations: usize,
}

impl<'a> ScoreCache<'a> {
    pub fn new(
        data: &DataSet,
        prior: &'a dyn FamilyPrior,
        structure_prior: &'a StructurePrior,
        structure: &NetworkStructure,
    ) -> Result<Self> {
        data.check_schema(structure)?;
        let mut cache = Self {
            cases: data.complete_cases()?,
            cards: structure.cardinalities(),
            prior,
            structure_prior,
            memo: HashMap::new(),
            family: Vec::new(),
            total: 0.0,
            evaluations: 0,
        };
        cache.reset(structure)?;
        Ok(cache)
    }

    /// Recomputes the per-variable scores for `structure` (memo retained).
    pub fn reset(&mut self, structure: &NetworkStructure) -> Result<()> {
        self.structure_prior.constraints.check(structure)?;
        self.family = (0..structure.len())
            .map(|i| self.family_score(i, structure.parents(i)))
            .collect::<Result<_>>()?;
        self.total = self.family.iter().sum();
        Ok(())
    }

    fn components(&mut self, child: usize, parents: &[usize]) -> Result<(f64, f64)> {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(&v) = self.memo.get(&(child, key.clone())) {
            return Ok(v);
        }
        self.evaluations += 1;
        let alpha = self.prior.family_alpha(child, &key)?;
        let counts = count_family(&self.cases, &self.cards, child, &key);
        let v = (
            family_table_loglik(&alpha, &counts),
            self.structure_prior.family_log_prior(child, &key),
        );
        self.memo.insert((child, key), v);
        Ok(v)
    }

    /// c(X_i, Pa_i, D_i).
    pub fn family_score(&mut self, child: usize, parents: &[usize]) -> Result<f64> {
        let (m, p) = self.components(child, parents)?;
        Ok(m + p)
    }

    /// Δ(e): change in total log score if `op` were applied to `s`.
    pub fn delta(&mut self, s: &NetworkStructure, op: &ChangeOp) -> Result<f64> {
        let mut d = 0.0;
        for (child, ps) in op.new_families(s) {
            d += self.family_score(child, &ps)? - self.family[child];
        }
        Ok(d)
    }

    /// Applies `op`, updating only the affected family scores.
    pub fn apply(&mut self, s: &NetworkStructure, op: &ChangeOp) -> Result<NetworkStructure> {
        let next = apply_change(s, op)?;
        for (child, ps) in op.new_families(s) {
            self.family[child] = self.family_score(child, &ps)?;
        }
        self.total = self.family.iter().sum();
        Ok(next)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn family_scores(&self) -> &[f64] {
        &self.family
    }

    /// Number of distinct family terms computed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn report(&mut self, s: &NetworkStructure) -> Result<ScoreReport> {
        let mut family_marginals = Vec::with_capacity(s.len());
        let mut family_priors = Vec::with_capacity(s.len());
        for i in 0..s.len() {
            let (m, p) = self.components(i, s.parents(i))?;
            family_marginals.push(m);
            family_priors.push(p);
        }
        let log_marginal: f64 = family_marginals.iter().sum();
        let log_prior: f64 = family_priors.iter().sum();
        Ok(ScoreReport {
            log_prior,
            log_marginal,
            total: log_prior + log_marginal,
            family_marginals,
            family_priors,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Climb,
    Perturb,
    Anneal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub restart: usize,
    pub kind: StepKind,
    pub change: ChangeOp,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub initial: NetworkStructure,
    pub best: NetworkStructure,
    pub report: ScoreReport,
    /// Every applied change, in order.
    pub trace: Vec<TraceStep>,
    /// Replaying `trace[..best_trace_len]` from `initial` yields `best`.
    pub best_trace_len: usize,
    pub winning_restart: usize,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    pub family_evaluations: usize,
}

impl SearchOutcome {
    /// Re-applies the trace prefix that led to the best structure.
    pub fn replay(&self) -> Result<NetworkStructure> {
        self.trace[..self.best_trace_len]
            .iter()
            .try_fold(self.initial.clone(), |s, step| apply_change(&s, &step.change))
    }
}

/// Greedy hill climbing with random restarts.
///
/// Each climb repeatedly applies the eligible change with the largest
/// positive Δ (first in [`eligible_changes`] order on ties) until none
/// improves by more than [`TIE_TOLERANCE`]. Each restart then applies
/// `perturbation` random eligible changes to the current local optimum and
/// climbs again. Restart `r` draws from stream `r` of a generator seeded
/// with `seed`.
#[allow(clippy::too_many_arguments)]
pub fn greedy_search(
    data: &DataSet,
    prior: &dyn FamilyPrior,
    structure_prior: &StructurePrior,
    init: &NetworkStructure,
    restarts: usize,
    perturbation: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    let constraints = &structure_prior.constraints;
    let mut cache = ScoreCache::new(data, prior, structure_prior, init)?;
    let mut current = init.clone();
    let mut trace = Vec::new();
    let mut best = (current.clone(), cache.total(), 0usize, 0usize);
    let mut iteration = 0;

    for restart in 0..=restarts {
        if restart > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            for _ in 0..perturbation {
                let options = eligible_changes(&current, constraints);
                let Some(op) = options.choose(&mut rng).copied() else { break };
                let delta = cache.delta(&current, &op)?;
                current = cache.apply(&current, &op)?;
                iteration += 1;
                trace.push(TraceStep { iteration, restart, kind: StepKind::Perturb, change: op, delta });
            }
        }
        loop {
            let mut chosen: Option<(ChangeOp, f64)> = None;
            for op in eligible_changes(&current, constraints) {
                let d = cache.delta(&current, &op)?;
                if d > TIE_TOLERANCE && chosen.is_none_or(|(_, bd)| d > bd) {
                    chosen = Some((op, d));
                }
            }
            let Some((op, delta)) = chosen else { break };
            current = cache.apply(&current, &op)?;
            iteration += 1;
            trace.push(TraceStep { iteration, restart, kind: StepKind::Climb, change: op, delta });
        }
        if cache.total() > best.1 + TIE_TOLERANCE {
            best = (current.clone(), cache.total(), trace.len(), restart);
        }
    }

    let report = cache.report(&best.0)?;
    Ok(SearchOutcome {
        initial: init.clone(),
        best: best.0,
        report,
        trace,
        best_trace_len: best.2,
        winning_restart: best.3,
        seed,
        rng_algorithm: RNG_ALGORITHM,
        family_evaluations: cache.evaluations(),
    })
}

/// Annealing controls: initial temperature, trials per temperature, accepted
/// changes per temperature, decay factor and maximum number of decays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnealingSchedule {
    pub initial_temperature: f64,
    pub trials_per_temperature: usize,
    pub max_accepted_per_temperature: usize,
    pub decay: f64,
    pub max_decays: usize,
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature > 0.0) || !self.initial_temperature.is_finite() {
            return Err(Error::InvalidSchedule("initial temperature must be positive".into()));
        }
        if self.trials_per_temperature == 0 {
            return Err(Error::InvalidSchedule("trials per temperature must be positive".into()));
        }
        if self.max_accepted_per_temperature == 0 {
            return Err(Error::InvalidSchedule("accepted changes per temperature must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidSchedule("decay must lie in (0,1)".into()));
        }
        Ok(())
    }
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: 10.0,
            trials_per_temperature: 200,
            max_accepted_per_temperature: 50,
            decay: 0.9,
            max_decays: 100,
        }
    }
}

/// Starting point for annealing: the empty graph (pair it with a high
/// initial temperature) or a given structure (pair it with a lower one).
#[derive(Debug, Clone)]
pub enum AnnealingStart {
    EmptyGraph,
    From(NetworkStructure),
}

/// Acceptance probability min(1, exp(Δ/T)).
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    (delta / temperature).exp().min(1.0)
}

/// Simulated annealing over single-arc changes.
///
/// At temperature T a random eligible change is accepted when exp(Δ/T) > 1,
/// otherwise with that probability. A temperature level ends after
/// `trials_per_temperature` trials or `max_accepted_per_temperature`
/// acceptances; a level with no acceptance stops the search, as does
/// lowering the temperature more than `max_decays` times.
pub fn simulated_annealing(
    data: &DataSet,
    prior: &dyn FamilyPrior,
    structure_prior: &StructurePrior,
    schedule: &AnnealingSchedule,
    start: &AnnealingStart,
    seed: u64,
) -> Result<SearchOutcome> {
    schedule.validate()?;
    let init = match start {
        AnnealingStart::EmptyGraph => NetworkStructure::empty(data.variables().to_vec())?,
        AnnealingStart::From(s) => s.clone(),
    };
    let constraints = &structure_prior.constraints;
    let mut cache = ScoreCache::new(data, prior, structure_prior, &init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = init.clone();
    let mut best = (current.clone(), cache.total(), 0usize);
    let mut trace = Vec::new();
    let mut temperature = schedule.initial_temperature;
    let mut decays = 0;
    let mut iteration = 0;

    loop {
        let mut accepted = 0;
        for _ in 0..schedule.trials_per_temperature {
            let options = eligible_changes(&current, constraints);
            let Some(op) = options.choose(&mut rng).copied() else { break };
            let delta = cache.delta(&current, &op)?;
            let p = (delta / temperature).exp();
            if p > 1.0 || rng.random::<f64>() < p {
                current = cache.apply(&current, &op)?;
                iteration += 1;
                trace.push(TraceStep { iteration, restart: 0, kind: StepKind::Anneal, change: op, delta });
                if cache.total() > best.1 + TIE_TOLERANCE {
                    best = (current.clone(), cache.total(), trace.len());
                }
                accepted += 1;
                if accepted >= schedule.max_accepted_per_temperature {
                    break;
                }
            }
        }
        if accepted == 0 {
            break;
        }
        temperature *= schedule.decay;
        decays += 1;
        if decays > schedule.max_decays {
            break;
        }
    }

    let report = cache.report(&best.0)?;
    Ok(SearchOutcome {
        initial: init,
        best: best.0,
        report,
        trace,
        best_trace_len: best.2,
        winning_restart: 0,
        seed,
        rng_algorithm: RNG_ALGORITHM,
        family_evaluations: cache.evaluations(),
    })
}

/// Upper bound on candidate parent-set combinations for [`enumerate_dags`].
pub const MAX_DAG_COMBINATIONS: u128 = 1 << 22;

/// All DAGs over `variables` satisfying `constraints`, by brute force over
/// parent sets.
pub fn enumerate_dags(variables: &[VariableSpec], constraints: &Constraints) -> Result<Vec<NetworkStructure>> {
    let n = variables.len();
    let candidates: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|child| {
            let allowed: Vec<usize> = (0..n)
                .filter(|&p| p != child && constraints.allows_arc(p, child))
                .collect();
            (0u64..1 << allowed.len())
                .map(|mask| {
                    allowed
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask >> b & 1 == 1)
                        .map(|(_, &p)| p)
                        .collect::<Vec<_>>()
                })
                .filter(|ps| constraints.allows_family(child, ps))
                .collect()
        })
        .collect();
    let combos: u128 = candidates.iter().map(|c| c.len() as u128).product();
    if combos > MAX_DAG_COMBINATIONS {
        return Err(Error::TooLarge(format!("{combos} parent-set combinations")));
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        let lists: Vec<Vec<usize>> = (0..n).map(|i| candidates[i][choice[i]].clone()).collect();
        if let Ok(s) = NetworkStructure::new(variables.to_vec(), lists) {
            out.push(s);
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < candidates[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Softmax of log scores: p(S | D) over the given set.
pub fn posterior_weights(log_scores: &[f64]) -> Result<Vec<f64>> {
    if log_scores.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    if log_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameters("model scores must be finite".into()));
    }
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// One candidate model for averaging.
#[derive(Debug, Clone)]
pub struct ScoredModel {
    pub structure: NetworkStructure,
    pub log_score: f64,
    pub posterior: DirichletSpec,
}

impl ScoredModel {
    /// Scores `structure` on complete data and keeps its posterior hyperparameters.
    pub fn fit(
        structure: &NetworkStructure,
        prior: &dyn FamilyPrior,
        structure_prior: &StructurePrior,
        data: &DataSet,
    ) -> Result<Self> {
        let priors = prior.build(structure)?;
        let counts = crate::data::count_sufficient_stats(structure, data)?;
        let report = crate::scoring::log_posterior_score(structure, structure_prior, &priors, &counts)?;
        Ok(Self {
            structure: structure.clone(),
            log_score: report.total,
            posterior: dirichlet_update(&priors, &counts)?,
        })
    }
}

/// p(x_{N+1} | D) = Σ_S p(S | D) p(x_{N+1} | D, S) over the given models.
pub fn model_average_predict(models: &[ScoredModel], assignment: &[Option<usize>]) -> Result<f64> {
    let scores: Vec<f64> = models.iter().map(|m| m.log_score).collect();
    let weights = posterior_weights(&scores)?;
    models.iter().zip(&weights).try_fold(0.0, |acc, (m, w)| {
        Ok(acc + w * network_predictive(&m.structure, &m.posterior, assignment)?)
    })
}

/// Counts as posterior hyperparameters require the same shape as the prior.
pub fn posterior_for(
    structure: &NetworkStructure,
    prior: &dyn FamilyPrior,
    counts: &FamilyCounts,
) -> Result<DirichletSpec> {
    dirichlet_update(&prior.build(structure)?, counts)
}
