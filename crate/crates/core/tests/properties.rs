//! Property-based invariants over randomly generated networks and data.

mod common;

use bayesnet::data::count_sufficient_stats;
use bayesnet::dirichlet::{bde_priors, dirichlet_update, BdePriorInputs};
use bayesnet::equivalence::{enumerate_equivalence_class, independence_equivalent};
use bayesnet::incomplete::{em_fit, expected_counts, EmMode, EmOptions, InitPolicy};
use bayesnet::inference::{enumerate_query, query, Evidence};
use bayesnet::network::{config_index, decode_config};
use bayesnet::params::{for_each_assignment, joint_probability};
use bayesnet::scoring::{bd_log_marginal, log_posterior_score, sequential_predictive_log, Constraints, StructurePrior};
use bayesnet::search::{eligible_changes, greedy_search, ScoreCache};
use bayesnet::{DataSet, FamilyCounts};
use common::{hide, random_dag, random_params, random_priors, random_variables, rng, sample};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_index_is_a_bijection(cards in prop::collection::vec(1usize..5, 0..5)) {
        let total: usize = cards.iter().product();
        let mut seen = vec![false; total];
        for_each_assignment(&cards, |a| {
            let j = config_index(&cards, a);
            assert!(!seen[j]);
            seen[j] = true;
            assert_eq!(decode_config(&cards, j), a);
        });
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn joint_sums_to_one(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let vars = random_variables(&mut r, n, 3);
        let s = random_dag(&mut r, vars, 0.5, 3);
        let p = random_params(&mut r, &s);
        let mut total = 0.0;
        for_each_assignment(&s.cardinalities(), |a| {
            let x: Vec<_> = a.iter().map(|&v| Some(v)).collect();
            total += joint_probability(&s, &p, &x).unwrap();
        });
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn elimination_matches_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=5);
        let vars = random_variables(&mut r, n, 3);
        let s = random_dag(&mut r, vars, 0.5, 3);
        let p = random_params(&mut r, &s);
        let mut case: Vec<Option<usize>> = vec![None; n];
        let mut targets = Vec::new();
        for i in 0..n {
            match r.random_range(0..3) {
                0 => case[i] = Some(r.random_range(0..s.cardinality(i))),
                1 if targets.len() < 2 => targets.push(i),
                _ => {}
            }
        }
        if targets.is_empty() {
            targets.push((0..n).find(|&i| case[i].is_none()).unwrap_or(0));
            case[targets[0]] = None;
        }
        let ev = Evidence::from_case(&s, &case).unwrap();
        let a = query(&s, &p, &targets, &ev).unwrap();
        let b = enumerate_query(&s, &p, &targets, &ev).unwrap();
        prop_assert!((a.evidence_probability - b.evidence_probability).abs() < 1e-12);
        prop_assert!((a.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.probabilities.iter().zip(&b.probabilities) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn bde_hyperparameters_sum_to_ess(seed in any::<u64>(), ess in 0.5f64..20.0) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let vars = random_variables(&mut r, n, 3);
        let prior_s = random_dag(&mut r, vars.clone(), 0.5, 2);
        let prior_p = random_params(&mut r, &prior_s);
        let target = random_dag(&mut r, vars, 0.5, 3);
        let inputs = BdePriorInputs::new(ess, prior_s, prior_p).unwrap();
        let spec = bde_priors(&inputs, &target).unwrap();
        for fam in spec.tables() {
            let total: f64 = fam.iter().flatten().sum();
            prop_assert!((total - ess).abs() < 1e-9 * ess);
        }
    }

    #[test]
    fn conjugate_updates_compose(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let vars = random_variables(&mut r, n, 3);
        let s = random_dag(&mut r, vars, 0.5, 2);
        let p = random_params(&mut r, &s);
        let prior = random_priors(&mut r, &s);
        let (n1, n2) = (r.random_range(0..20), r.random_range(0..20));
        let d1 = sample(&mut r, &s, &p, n1);
        let d2 = sample(&mut r, &s, &p, n2);
        let c1 = count_sufficient_stats(&s, &d1).unwrap();
        let c2 = count_sufficient_stats(&s, &d2).unwrap();
        let stepwise = dirichlet_update(&dirichlet_update(&prior, &c1).unwrap(), &c2).unwrap();
        let at_once = dirichlet_update(&prior, &c1.merged(&c2).unwrap()).unwrap();
        let pairs = stepwise.tables().iter().flatten().flatten().zip(at_once.tables().iter().flatten().flatten());
        for (a, b) in pairs {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn bd_equals_sequential_and_ignores_case_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let vars = random_variables(&mut r, n, 3);
        let s = random_dag(&mut r, vars, 0.5, 3);
        let p = random_params(&mut r, &s);
        let priors = random_priors(&mut r, &s);
        let m = r.random_range(0..=30);
        let data = sample(&mut r, &s, &p, m);
        let mut shuffled = data.cases().to_vec();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.random_range(0..=i));
        }
        let shuffled = DataSet::new(data.variables().to_vec(), shuffled).unwrap();
        let bd = bd_log_marginal(&s, &priors, &count_sufficient_stats(&s, &data).unwrap()).unwrap().total;
        let a = sequential_predictive_log(&s, &priors, &data).unwrap();
        let b = sequential_predictive_log(&s, &priors, &shuffled).unwrap();
        prop_assert!((bd - a).abs() < 1e-9);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn equivalence_class_is_an_equivalence_relation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=5);
        let vars = random_variables(&mut r, n, 2);
        let s = random_dag(&mut r, vars, 0.5, 3);
        let class = enumerate_equivalence_class(&s).unwrap();
        prop_assert!(class.contains(&s));
        for a in &class {
            prop_assert!(independence_equivalent(a, &s).unwrap());
            prop_assert!(independence_equivalent(&s, a).unwrap());
            prop_assert_eq!(enumerate_equivalence_class(a).unwrap().len(), class.len());
        }
    }

    #[test]
    fn score_cache_tracks_from_scratch_scores(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=5);
        let vars = random_variables(&mut r, n, 3);
        let truth = random_dag(&mut r, vars.clone(), 0.5, 2);
        let p = random_params(&mut r, &truth);
        let data = sample(&mut r, &truth, &p, 25);
        let inputs = BdePriorInputs::uniform(3.0, vars.clone()).unwrap();
        let ordering: Vec<usize> = (0..n).collect();
        let prior = StructurePrior::per_arc(0.3, ordering).unwrap();
        let mut s = bayesnet::NetworkStructure::empty(vars).unwrap();
        let mut cache = ScoreCache::new(&data, &inputs, &prior, &s).unwrap();
        for _ in 0..10 {
            let options = eligible_changes(&s, &prior.constraints);
            if options.is_empty() {
                break;
            }
            let op = options[r.random_range(0..options.len())];
            let before = cache.total();
            let delta = cache.delta(&s, &op).unwrap();
            s = cache.apply(&s, &op).unwrap();
            let fresh = log_posterior_score(
                &s,
                &prior,
                &bde_priors(&inputs, &s).unwrap(),
                &count_sufficient_stats(&s, &data).unwrap(),
            )
            .unwrap()
            .total;
            prop_assert!((cache.total() - fresh).abs() < 1e-9);
            prop_assert!((before + delta - fresh).abs() < 1e-9);
        }
    }

    #[test]
    fn greedy_result_is_a_replayable_local_optimum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=4);
        let vars = random_variables(&mut r, n, 3);
        let truth = random_dag(&mut r, vars.clone(), 0.6, 2);
        let p = random_params(&mut r, &truth);
        let data = sample(&mut r, &truth, &p, 60);
        let inputs = BdePriorInputs::uniform(2.0, vars.clone()).unwrap();
        let prior = StructurePrior::uniform();
        let empty = bayesnet::NetworkStructure::empty(vars).unwrap();
        let out = greedy_search(&data, &inputs, &prior, &empty, 2, 2, seed).unwrap();
        prop_assert_eq!(out.replay().unwrap(), out.best.clone());
        let mut cache = ScoreCache::new(&data, &inputs, &prior, &out.best).unwrap();
        prop_assert!((cache.total() - out.report.total).abs() < 1e-9);
        for op in eligible_changes(&out.best, &Constraints::none()) {
            prop_assert!(cache.delta(&out.best, &op).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn em_is_monotone_and_e_step_preserves_mass(seed in any::<u64>(), map in any::<bool>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=3);
        let vars = random_variables(&mut r, n, 3);
        let s = random_dag(&mut r, vars, 0.6, 2);
        let p = random_params(&mut r, &s);
        let full = sample(&mut r, &s, &p, 20);
        let data = hide(&mut r, &full, 0.3);
        let priors = random_priors(&mut r, &s);
        let (e, _) = expected_counts(&s, &p, &data).unwrap();
        for fam in &e {
            prop_assert!((fam.iter().flatten().sum::<f64>() - 20.0).abs() < 1e-8);
        }
        let opts = EmOptions {
            mode: if map { EmMode::MaximumAPosteriori } else { EmMode::MaximumLikelihood },
            init: InitPolicy::RandomSimplex,
            tolerance: 1e-10,
            max_iterations: 200,
            seed,
        };
        let fit = em_fit(&s, &priors, &data, &opts).unwrap();
        prop_assert_eq!(fit.trace.len(), fit.iterations + 1);
        for w in fit.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
    }
}

#[test]
fn zero_counts_leave_priors_unchanged() {
    let mut r = rng(3);
    let vars = random_variables(&mut r, 3, 3);
    let s = random_dag(&mut r, vars, 0.5, 2);
    let prior = random_priors(&mut r, &s);
    let post = dirichlet_update(&prior, &FamilyCounts::zeros(&s)).unwrap();
    assert_eq!(post, prior);
}
