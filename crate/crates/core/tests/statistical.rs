//! Statistical checks. Every guarantee "correct with probability >= 1 - delta"
//! passes when the success count reaches the 0.1% quantile of
//! Binomial(trials, 1 - delta).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use pure_explore::best_arm::random_permutation;
use pure_explore::harness::{run_trials, Algorithm, InstanceSource, SeqSpec, TrialConfig};
use pure_explore::model::{derive_seed, make_instance, Arm, BanditEnv, Family, RngStream};
use pure_explore::primitives::median_elim;

fn min_successes(trials: u64, p: f64) -> u64 {
    let b = Binomial::new(p, trials).unwrap();
    (0..=trials).find(|&k| b.cdf(k) >= 0.001).unwrap()
}

#[test]
fn binomial_threshold_matches_known_value() {
    assert_eq!(min_successes(200, 0.95), 179);
    assert_eq!(min_successes(200, 0.9), 166);
}

#[test]
fn median_elim_finds_the_better_arm() {
    let inst = make_instance(&[0.9, 0.1], Family::Gaussian, 1.0, None).unwrap();
    let wins = (0..200)
        .filter(|&t| {
            let mut env = BanditEnv::new(&inst, derive_seed(11, t));
            median_elim(&mut env, &[0, 1], 0.2, 0.1).unwrap() == 0
        })
        .count() as u64;
    assert!(wins >= min_successes(200, 0.9), "{wins}");
}

#[test]
fn sign_test_above() {
    let cfg = TrialConfig::sign(0.0, 0.1, 0.05, SeqSpec::Geometric(std::f64::consts::E), 200, 3);
    let rep = run_trials(&cfg).unwrap();
    let above_ok = rep.rows.iter().filter(|r| r.trial % 2 == 0 && r.answer == "above").count() as u64;
    assert!(above_ok >= min_successes(100, 0.95));
    assert!(rep.aggregates.correct as u64 >= min_successes(200, 0.95));
}

#[test]
fn sim_and_standalone_sign_both_correct() {
    let base = TrialConfig::sign(0.0, 0.5, 0.05, SeqSpec::Geometric(std::f64::consts::E), 200, 8);
    let plain = run_trials(&base).unwrap();
    let sim = run_trials(&base.clone().with_sim(true)).unwrap();
    let need = min_successes(200, 0.95);
    assert!(plain.aggregates.correct as u64 >= need);
    assert!(sim.aggregates.correct as u64 >= need);
}

#[test]
fn pac_returns_eps_optimal_arm() {
    let mut means = vec![0.5; 9];
    means.push(0.7);
    let inst = make_instance(&means, Family::Gaussian, 1.0, None).unwrap();
    let cfg = TrialConfig::new(Algorithm::Pac { epsilon: 0.1 }, InstanceSource::Given(inst), 0.05, 200, 21);
    let rep = run_trials(&cfg).unwrap();
    assert!(rep.aggregates.correct as u64 >= min_successes(200, 0.95));
}

#[test]
fn permutations_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let trials = 6000;
    for _ in 0..trials {
        *counts.entry(random_permutation(3, &mut rng)).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    let expected = trials as f64 / 6.0;
    let stat: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(5.0).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn pull_counts_do_not_depend_on_input_order() {
    let run = |means: &[f64]| {
        let inst = make_instance(means, Family::Gaussian, 1.0, None).unwrap();
        let cfg = TrialConfig::new(Algorithm::DistrBasedElim, InstanceSource::Given(inst), 0.1, 500, 4);
        run_trials(&cfg).unwrap().aggregates.mean_pulls
    };
    let a = run(&[0.9, 0.5, 0.5, 0.3]);
    let b = run(&[0.3, 0.5, 0.9, 0.5]);
    assert!((a - b).abs() / a.max(b) < 0.05, "{a} vs {b}");
}

#[test]
fn batched_sums_have_exact_moments() {
    let n = 20_000;
    let k = 50u64;
    for arm in [Arm::gaussian(0, 0.3, 2.0).unwrap(), Arm::bernoulli(0, 0.3).unwrap()] {
        let var_one = match arm.family {
            Family::Gaussian => arm.sigma * arm.sigma,
            Family::Bernoulli => arm.mean * (1.0 - arm.mean),
        };
        let mut rng = RngStream::new(5, 0).rng();
        let sums: Vec<f64> = (0..n).map(|_| arm.draw_sum(k, &mut rng)).collect();
        let mean = sums.iter().sum::<f64>() / n as f64;
        let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target_var = k as f64 * var_one;
        // 5 standard errors
        assert!((mean - k as f64 * arm.mean).abs() < 5.0 * (target_var / n as f64).sqrt());
        assert!((var / target_var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }
}
