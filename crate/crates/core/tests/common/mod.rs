//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use bayesnet::data::forward_sample;
use bayesnet::{DataSet, DirichletSpec, NetworkStructure, ParameterSet, VariableSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn variables(cards: &[usize]) -> Vec<VariableSpec> {
    cards
        .iter()
        .enumerate()
        .map(|(i, &c)| VariableSpec::indexed(format!("V{i}"), c).unwrap())
        .collect()
}

pub fn random_variables(rng: &mut impl Rng, n: usize, max_card: usize) -> Vec<VariableSpec> {
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_card)).collect();
    variables(&cards)
}

/// Random DAG: a random ordering, each forward pair linked with probability `p`.
pub fn random_dag(rng: &mut impl Rng, vars: Vec<VariableSpec>, p: f64, max_parents: usize) -> NetworkStructure {
    let n = vars.len();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut parents = vec![Vec::new(); n];
    for b in 1..n {
        for a in 0..b {
            if parents[order[b]].len() < max_parents && rng.random::<f64>() < p {
                parents[order[b]].push(order[a]);
            }
        }
    }
    for ps in &mut parents {
        ps.sort_unstable();
    }
    NetworkStructure::new(vars, parents).unwrap()
}

pub fn random_params(rng: &mut impl Rng, s: &NetworkStructure) -> ParameterSet {
    let theta = (0..s.len())
        .map(|i| {
            (0..s.num_configs(i))
                .map(|_| (0..s.cardinality(i)).map(|_| rng.random_range(0.05..1.0)).collect())
                .collect()
        })
        .collect();
    ParameterSet::normalized(s, theta).unwrap()
}

pub fn random_priors(rng: &mut impl Rng, s: &NetworkStructure) -> DirichletSpec {
    let alpha = (0..s.len())
        .map(|i| {
            (0..s.num_configs(i))
                .map(|_| (0..s.cardinality(i)).map(|_| rng.random_range(0.2..5.0)).collect())
                .collect()
        })
        .collect();
    DirichletSpec::new(s, alpha).unwrap()
}

pub fn sample(rng: &mut ChaCha8Rng, s: &NetworkStructure, p: &ParameterSet, n: usize) -> DataSet {
    forward_sample(s, p, n, rng).unwrap()
}

/// Hides each entry independently with probability `rate`.
pub fn hide(rng: &mut impl Rng, data: &DataSet, rate: f64) -> DataSet {
    let cases = data
        .cases()
        .iter()
        .map(|c| c.iter().map(|&v| if rng.random::<f64>() < rate { None } else { v }).collect())
        .collect();
    DataSet::new(data.variables().to_vec(), cases).unwrap()
}
