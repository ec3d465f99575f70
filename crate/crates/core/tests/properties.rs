use std::collections::BTreeMap;

use proptest::prelude::*;

use pure_explore::best_arm::{distr_based_elim, BestArmConfig};
use pure_explore::harness::{run_trials, Aggregates, SeqSpec, TrialConfig};
use pure_explore::instances::LowerBoundFamilySpec;
use pure_explore::meta::{schedule_active, sim_parallel, sim_parallel_literal, Advance, Resumable, SimConfig, StepOutcome};
use pure_explore::model::{make_instance, BanditEnv, Family, PullLedger};
use pure_explore::primitives::{elimination, median_elim, median_elim_budget, uniform_sample, MEDIAN_ELIM_BUDGET_K};
use pure_explore::stats::{gap_profile, hoeffding_pulls, kl_bernoulli, kl_gaussian};
use pure_explore::Result;

/// Deterministic machine that finishes after a fixed number of steps.
#[derive(Clone)]
struct Fixed {
    len: u64,
    done: u64,
    tag: u32,
}

impl Resumable for Fixed {
    type Answer = u32;

    fn step(&mut self) -> Result<StepOutcome<u32>> {
        self.done += 1;
        Ok(if self.done >= self.len {
            StepOutcome::Finished(self.tag)
        } else {
            StepOutcome::Pulled(0)
        })
    }

    fn advance(&mut self, max_steps: u64) -> Result<Advance<u32>> {
        let k = (self.len - self.done).min(max_steps);
        self.done += k;
        Ok(Advance {
            steps: k,
            finished: (self.done >= self.len).then_some(self.tag),
        })
    }

    fn steps_taken(&self) -> u64 {
        self.done
    }

    fn ledger(&self) -> PullLedger {
        let mut l = PullLedger::new(1);
        l.record(0, self.done);
        l
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hoeffding_is_monotone(e1 in 0.01f64..1.0, e2 in 0.01f64..1.0, d1 in 0.001f64..0.99, d2 in 0.001f64..0.99) {
        let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(hoeffding_pulls(ehi, dlo).unwrap() <= hoeffding_pulls(elo, dlo).unwrap());
        prop_assert!(hoeffding_pulls(elo, dhi).unwrap() <= hoeffding_pulls(elo, dlo).unwrap());
    }

    #[test]
    fn kl_is_positive_off_diagonal(p in 0.01f64..0.99, q in 0.01f64..0.99, m1 in -3.0f64..3.0, m2 in -3.0f64..3.0) {
        prop_assert_eq!(kl_bernoulli(p, p).unwrap(), 0.0);
        prop_assert_eq!(kl_gaussian(m1, m1, 1.0).unwrap(), 0.0);
        if (p - q).abs() > 1e-9 {
            prop_assert!(kl_bernoulli(p, q).unwrap() > 0.0);
        }
        if (m1 - m2).abs() > 1e-9 {
            prop_assert!(kl_gaussian(m1, m2, 1.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn entropy_bounded_by_group_count(gaps in prop::collection::vec(1e-4f64..1.0, 1..60)) {
        let mut means = vec![1.0];
        means.extend(gaps.iter().map(|g| 1.0 - g));
        let inst = make_instance(&means, Family::Gaussian, 1.0, None).unwrap();
        let p = gap_profile(&inst).unwrap();
        prop_assert!(p.entropy >= 0.0);
        prop_assert!(p.entropy <= (p.n_groups() as f64).log2());
        let total: f64 = p.probs.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_elim_budget_bound(n in 1usize..5000, eps in 0.01f64..1.0, delta in 0.001f64..0.99) {
        let spent = median_elim_budget(n, eps, delta).unwrap() as f64;
        prop_assert!(spent <= MEDIAN_ELIM_BUDGET_K * n as f64 * eps.powi(-2) * (3.0 / delta).ln());
    }

    #[test]
    fn median_elim_spends_its_budget(n in 1usize..40, seed in any::<u64>()) {
        let means: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let inst = make_instance(&means, Family::Gaussian, 1.0, None).unwrap();
        let mut env = BanditEnv::new(&inst, seed);
        let arms: Vec<usize> = (0..n).collect();
        let chosen = median_elim(&mut env, &arms, 0.5, 0.1).unwrap();
        prop_assert!(chosen < n);
        prop_assert_eq!(env.ledger().total(), median_elim_budget(n, 0.5, 0.1).unwrap());
    }

    #[test]
    fn uniform_sample_pulls_each_arm_equally(k in 1usize..10, eps in 0.05f64..1.0, seed in any::<u64>()) {
        let means: Vec<f64> = (0..k).map(|i| 0.1 * i as f64).collect();
        let inst = make_instance(&means, Family::Gaussian, 1.0, None).unwrap();
        let mut env = BanditEnv::new(&inst, seed);
        let arms: Vec<usize> = (0..k).collect();
        let est = uniform_sample(&mut env, &arms, eps, 0.05).unwrap();
        let per = hoeffding_pulls(eps, 0.05).unwrap();
        prop_assert_eq!(est.pulls_per_arm, per);
        prop_assert!(env.ledger().per_arm().iter().all(|&p| p == per));
    }

    #[test]
    fn elimination_keeps_a_subset(seed in any::<u64>(), n in 2usize..12) {
        let means: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.05 + 0.005 * i as f64 }).collect();
        let inst = make_instance(&means, Family::Bernoulli, 1.0, None).unwrap();
        let mut env = BanditEnv::new(&inst, seed);
        let arms: Vec<usize> = (0..n).collect();
        let kept = elimination(&mut env, &arms, 0.4, 0.6, 0.01, 64).unwrap();
        prop_assert!(kept.iter().all(|a| arms.contains(a)));
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn survivors_never_grow(seed in any::<u64>()) {
        let inst = make_instance(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], Family::Bernoulli, 1.0, None).unwrap();
        let mut env = BanditEnv::new(&inst, seed);
        let res = distr_based_elim(&mut env, &BestArmConfig::new(0.05)).unwrap();
        prop_assert_eq!(res.chosen, 2);
        prop_assert!(res.per_round_trace.windows(2).all(|w| w[1].survivors <= w[0].survivors));
        let trues = res.per_round_trace.iter().filter(|t| t.fraction_test).count() as u32;
        prop_assert_eq!(trues, res.eliminations_performed);
        prop_assert_eq!(res.ledger.per_arm().iter().sum::<u64>(), res.ledger.total());
    }

    #[test]
    fn lower_bound_recipe(half_m in 1u32..3, extra in 0usize..50, levels in prop::collection::btree_set(0u32..7, 0..4)) {
        let m = 2 * half_m;
        let ladder: usize = (0..=m).map(|k| 4usize.pow(k)).sum();
        let n = ladder + 1 + extra;
        let levels: Vec<u32> = levels.into_iter().filter(|&k| k <= m).collect();
        let spec = LowerBoundFamilySpec::new(m, n, 0.5).with_levels(levels.clone());
        if levels.len() > extra {
            prop_assert!(spec.build().is_err());
            return Ok(());
        }
        let inst = spec.build().unwrap();
        prop_assert_eq!(inst.len(), n);
        // independent re-evaluation of the recipe
        let mut expected: BTreeMap<i64, usize> = BTreeMap::new();
        expected.insert(0, 1);
        for k in 0..=m {
            let key = -(1_000_000.0 * 2f64.powi(-(k as i32))).round() as i64;
            expected.insert(key, 4usize.pow(m - k) + levels.contains(&k) as usize);
        }
        expected.insert(-2_000_000, extra - levels.len());
        expected.retain(|_, c| *c > 0);
        let mut got: BTreeMap<i64, usize> = BTreeMap::new();
        for mean in inst.means() {
            *got.entry(((mean - 0.5) * 1_000_000.0).round() as i64).or_default() += 1;
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn sim_step_counts(lens in prop::collection::vec(1u64..40, 1..6)) {
        let factory = |i: u32, _d: f64| Ok(Fixed { len: lens.get(i as usize - 1).copied().unwrap_or(1000), done: 0, tag: i });
        let fast = sim_parallel(factory, SimConfig::new(0.1)).unwrap();
        let lit = sim_parallel_literal(factory, SimConfig::new(0.1), 1 << 16).unwrap().unwrap();
        prop_assert_eq!(&fast, &lit);
        let r = fast.finish_round;
        for (k, &s) in fast.steps.iter().enumerate() {
            let i = k as u32 + 1;
            let full = r >> i;
            prop_assert!(s == full || (i > fast.winner && s == (r - 1) >> i));
        }
        prop_assert!(schedule_active(r).contains(&fast.winner));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn aggregates_recompute_from_rows(seed in any::<u64>(), trials in 1u32..12) {
        let rep = run_trials(&TrialConfig::sign(0.0, 0.3, 0.05, SeqSpec::Geometric(2.0), trials, seed)).unwrap();
        let again = Aggregates::from_rows(&rep.rows, rep.aggregates.references.clone());
        prop_assert_eq!(&again, &rep.aggregates);
        prop_assert_eq!(rep.aggregates.correct as usize, rep.rows.iter().filter(|r| r.correct).count());
        for row in &rep.rows {
            prop_assert_eq!(row.per_arm_pulls.iter().sum::<u64>(), row.total_pulls);
        }
    }
}
