//! Best-arm building blocks: uniform sampling, median elimination, the
//! fraction test and the elimination procedure.
//!
//! Every call draws fresh samples; nothing is cached across calls.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ArmId, BanditEnv};
use crate::stats::{ceil_count, hoeffding_pulls};

/// Empirical means from one [`uniform_sample`] call.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeans {
    pub means: Vec<(ArmId, f64)>,
    pub pulls_per_arm: u64,
}

impl EmpiricalMeans {
    pub fn get(&self, arm: ArmId) -> Option<f64> {
        self.means.iter().find(|(a, _)| *a == arm).map(|&(_, m)| m)
    }
}

/// Samples every arm of `arms` `hoeffding_pulls(epsilon, delta)` times.
pub fn uniform_sample(
    env: &mut BanditEnv,
    arms: &[ArmId],
    epsilon: f64,
    delta: f64,
) -> Result<EmpiricalMeans> {
    if arms.is_empty() {
        return Err(Error::EmptySet);
    }
    let k = hoeffding_pulls(epsilon, delta)?;
    let means = arms
        .iter()
        .map(|&a| Ok((a, env.sample_mean(a, k)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalMeans {
        means,
        pulls_per_arm: k,
    })
}

/// Single-arm shorthand for [`uniform_sample`].
pub fn sample_one(env: &mut BanditEnv, arm: ArmId, epsilon: f64, delta: f64) -> Result<f64> {
    let k = hoeffding_pulls(epsilon, delta)?;
    env.sample_mean(arm, k)
}

/// One round of median elimination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MedianElimRound {
    pub arms: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub pulls_per_arm: u64,
}

/// Multiplier in the median-elimination budget bound
/// `total <= MEDIAN_ELIM_BUDGET_K * n * eps^-2 * ln(3/delta)`. With
/// `eps_l = (eps/4)(3/4)^(l-1)`, `delta_l = delta/2^l` and at most
/// `n/2^(l-1) + 1` arms in round `l`, the per-arm series converges; the worst
/// case over small `n` (where the `+1` arms dominate) stays below 4300.
pub const MEDIAN_ELIM_BUDGET_K: f64 = 6000.0;

/// Round schedule of median elimination on `n` arms: `eps_1 = eps/4`,
/// `delta_1 = delta/2`, then `eps *= 3/4`, `delta /= 2`; each round pulls every
/// surviving arm `ceil(2 (eps_l/2)^-2 ln(3/delta_l))` times and keeps the best
/// `ceil(size/2)`.
pub fn median_elim_schedule(n: usize, epsilon: f64, delta: f64) -> Result<Vec<MedianElimRound>> {
    if !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("median elimination needs eps > 0 and delta in (0, 1)"));
    }
    let mut rounds = Vec::new();
    let mut size = n;
    let mut eps_l = epsilon / 4.0;
    let mut delta_l = delta / 2.0;
    while size > 1 {
        let half = eps_l / 2.0;
        let pulls = ceil_count(2.0 * (3.0 / delta_l).ln() / (half * half))?;
        rounds.push(MedianElimRound {
            arms: size,
            epsilon: eps_l,
            delta: delta_l,
            pulls_per_arm: pulls,
        });
        size = size.div_ceil(2);
        eps_l *= 0.75;
        delta_l /= 2.0;
    }
    Ok(rounds)
}

/// Exact number of pulls median elimination spends on `n` arms.
pub fn median_elim_budget(n: usize, epsilon: f64, delta: f64) -> Result<u64> {
    Ok(median_elim_schedule(n, epsilon, delta)?
        .iter()
        .map(|r| r.arms as u64 * r.pulls_per_arm)
        .sum())
}

/// Returns an arm that is `epsilon`-optimal within `arms` with probability at
/// least `1 - delta`. Ties at the median go to the lower arm index.
pub fn median_elim(env: &mut BanditEnv, arms: &[ArmId], epsilon: f64, delta: f64) -> Result<ArmId> {
    if arms.is_empty() {
        return Err(Error::EmptySet);
    }
    let schedule = median_elim_schedule(arms.len(), epsilon, delta)?;
    let mut alive: Vec<ArmId> = arms.to_vec();
    for round in schedule {
        debug_assert_eq!(alive.len(), round.arms);
        let mut scored = alive
            .iter()
            .map(|&a| Ok((a, env.sample_mean(a, round.pulls_per_arm)?)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        scored.truncate(alive.len().div_ceil(2));
        alive = scored.into_iter().map(|(a, _)| a).collect();
    }
    Ok(alive[0])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FractionTestParams {
    pub c_l: f64,
    pub c_r: f64,
    pub delta: f64,
    pub t: f64,
    pub epsilon: f64,
}

impl FractionTestParams {
    pub fn new(c_l: f64, c_r: f64, delta: f64, t: f64, epsilon: f64) -> Result<Self> {
        if !(c_l < c_r) || !c_l.is_finite() || !c_r.is_finite() {
            return Err(Error::params(format!("need c_l < c_r, got {c_l}, {c_r}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::params(format!("delta must lie in (0, 1), got {delta}")));
        }
        // the best-arm routine calls this with epsilon = 0.1 exactly
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err(Error::params(format!("epsilon must lie in (0, 0.1], got {epsilon}")));
        }
        if !(t > epsilon && t < 1.0 - epsilon) {
            return Err(Error::params(format!("t must lie in (eps, 1 - eps), got {t}")));
        }
        Ok(FractionTestParams {
            c_l,
            c_r,
            delta,
            t,
            epsilon,
        })
    }

    pub fn c_m(&self) -> f64 {
        (self.c_l + self.c_r) / 2.0
    }

    /// `tot = ceil(ln(2/delta) (eps/3)^-2 / 2)`.
    pub fn iterations(&self) -> Result<u64> {
        fraction_test_iterations(self.delta, self.epsilon)
    }

    /// Pulls spent by one iteration.
    pub fn pulls_per_iteration(&self) -> Result<u64> {
        hoeffding_pulls((self.c_r - self.c_l) / 2.0, self.epsilon / 3.0)
    }
}

pub fn fraction_test_iterations(delta: f64, epsilon: f64) -> Result<u64> {
    let third = epsilon / 3.0;
    ceil_count((2.0 / delta).ln() / (third * third) / 2.0)
}

/// Estimates whether more than a `t` fraction of `arms` lie below the middle
/// of `[c_l, c_r]` by sampling arms uniformly at random.
pub fn fraction_test(env: &mut BanditEnv, arms: &[ArmId], params: &FractionTestParams) -> Result<bool> {
    if arms.is_empty() {
        return Err(Error::EmptySet);
    }
    let tot = params.iterations()?;
    let k = params.pulls_per_iteration()?;
    let c_m = params.c_m();
    let mut cnt: u64 = 0;
    for _ in 0..tot {
        let a = arms[env.aux().random_range(0..arms.len())];
        if env.sample_mean(a, k)? < c_m {
            cnt += 1;
        }
    }
    Ok(cnt as f64 / tot as f64 > params.t)
}

/// `delta_r = delta / (10 * 2^r)`.
pub fn elimination_round_confidence(delta: f64, r: u32) -> f64 {
    delta / (10.0 * 2f64.powi(r as i32))
}

pub const DEFAULT_ELIMINATION_ROUNDS: u32 = 64;

/// Repeatedly removes arms whose empirical mean falls below the upper part of
/// `[c_l, c_r]` until the fraction test reports few low arms remain.
pub fn elimination(
    env: &mut BanditEnv,
    arms: &[ArmId],
    c_l: f64,
    c_r: f64,
    delta: f64,
    max_rounds: u32,
) -> Result<Vec<ArmId>> {
    if !(c_l < c_r) {
        return Err(Error::params(format!("need c_l < c_r, got {c_l}, {c_r}")));
    }
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::params(format!("elimination needs delta in (0, 0.1), got {delta}")));
    }
    if arms.is_empty() {
        return Err(Error::EmptySet);
    }
    let c_m = (c_l + c_r) / 2.0;
    let keep_above = (c_m + c_r) / 2.0;
    let mut current: Vec<ArmId> = arms.to_vec();
    for r in 1..=max_rounds {
        let delta_r = elimination_round_confidence(delta, r);
        let params = FractionTestParams::new(c_l, c_m, delta_r, 0.075, 0.025)?;
        if !fraction_test(env, &current, &params)? {
            return Ok(current);
        }
        let est = uniform_sample(env, &current, (c_r - c_m) / 2.0, delta_r)?;
        current = est
            .means
            .into_iter()
            .filter(|&(_, m)| m > keep_above)
            .map(|(a, _)| a)
            .collect();
        if current.is_empty() {
            return Ok(current);
        }
    }
    Err(Error::RoundLimitExceeded { limit: max_rounds })
}
