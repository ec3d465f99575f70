//! Best-arm identification by distribution-based elimination, its PAC
//! variant, and a wrapper that runs any algorithm on a uniformly permuted
//! copy of the instance.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmId, BanditEnv, Instance, PullLedger};
use crate::primitives::{
    elimination, fraction_test, median_elim, sample_one, FractionTestParams, DEFAULT_ELIMINATION_ROUNDS,
};

pub const DEFAULT_BEST_ARM_ROUNDS: u32 = 60;

/// Confidence of the first median-elimination call in every round.
pub const SCOUT_CONFIDENCE: f64 = 0.01;

/// One round of [`distr_based_elim`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub r: u32,
    pub eps: f64,
    pub survivors: usize,
    pub fraction_test: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestArmResult {
    pub chosen: ArmId,
    /// Completed rounds before the answer was returned.
    pub rounds_used: u32,
    /// Number of rounds that called the elimination procedure.
    pub eliminations_performed: u32,
    pub ledger: PullLedger,
    pub per_round_trace: Vec<RoundTrace>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestArmConfig {
    pub delta: f64,
    pub max_rounds: u32,
    pub elimination_rounds: u32,
}

impl BestArmConfig {
    pub fn new(delta: f64) -> Self {
        BestArmConfig {
            delta,
            max_rounds: DEFAULT_BEST_ARM_ROUNDS,
            elimination_rounds: DEFAULT_ELIMINATION_ROUNDS,
        }
    }

    pub fn with_max_rounds(mut self, max_rounds: u32) -> Self {
        self.max_rounds = max_rounds;
        self
    }
}

/// `eps_r = 2^-r`.
pub fn round_eps(r: u32) -> f64 {
    2f64.powi(-(r as i32))
}

/// `delta / (50 r^2)`; used both per round and per elimination call.
pub fn round_confidence(delta: f64, r: u32) -> f64 {
    delta / (50.0 * (r as f64) * (r as f64))
}

/// Where a (possibly truncated) run stopped.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ElimState {
    pub survivors: Vec<ArmId>,
    /// Next round to run.
    pub next_round: u32,
    pub h: u32,
    pub trace: Vec<RoundTrace>,
}

/// Runs rounds `1..=stop_after` (or until one arm is left).
pub(crate) fn elim_rounds(env: &mut BanditEnv, cfg: &BestArmConfig, stop_after: u32) -> Result<ElimState> {
    let delta = cfg.delta;
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::domain(format!("delta must lie in (0, 0.1], got {delta}")));
    }
    let mut state = ElimState {
        survivors: (0..env.n_arms()).collect(),
        next_round: 1,
        h: 1,
        trace: Vec::new(),
    };
    loop {
        let r = state.next_round;
        match state.survivors.len() {
            0 => return Err(Error::AllArmsEliminated),
            1 => return Ok(state),
            _ => {}
        }
        if r > stop_after {
            return Ok(state);
        }
        if r > cfg.max_rounds {
            return Err(Error::RoundLimitExceeded { limit: cfg.max_rounds });
        }
        let s = &state.survivors;
        let eps = round_eps(r);
        let delta_r = round_confidence(delta, r);

        let a = median_elim(env, s, eps / 4.0, SCOUT_CONFIDENCE)?;
        let mu_a = sample_one(env, a, eps / 4.0, delta_r)?;
        let params = FractionTestParams::new(mu_a - 1.5 * eps, mu_a - 1.25 * eps, delta_r, 0.4, 0.1)?;
        let verdict = fraction_test(env, s, &params)?;
        state.trace.push(RoundTrace {
            r,
            eps,
            survivors: s.len(),
            fraction_test: verdict,
        });
        if verdict {
            let delta_h = round_confidence(delta, state.h);
            let b = median_elim(env, s, eps / 4.0, delta_h)?;
            let mu_b = sample_one(env, b, eps / 4.0, delta_h)?;
            state.survivors = elimination(
                env,
                s,
                mu_b - 0.5 * eps,
                mu_b - 0.25 * eps,
                delta_h,
                cfg.elimination_rounds,
            )?;
            state.h += 1;
        }
        state.next_round += 1;
    }
}

/// Identifies the best arm with probability at least `1 - delta`.
pub fn distr_based_elim(env: &mut BanditEnv, cfg: &BestArmConfig) -> Result<BestArmResult> {
    let state = elim_rounds(env, cfg, u32::MAX)?;
    Ok(BestArmResult {
        chosen: state.survivors[0],
        rounds_used: state.next_round - 1,
        eliminations_performed: state.h - 1,
        ledger: env.ledger().clone(),
        per_round_trace: state.trace,
    })
}

/// Number of elimination rounds the PAC variant runs: `ceil(log2(1/eps))`.
pub fn pac_rounds(epsilon: f64) -> u32 {
    epsilon.recip().log2().ceil() as u32
}

/// Returns an `epsilon`-optimal arm with probability at least `1 - delta`:
/// distribution-based elimination at `delta/2` for `ceil(log2(1/eps))` rounds,
/// then median elimination at `(epsilon, delta/2)` over the survivors.
pub fn pac_best_arm(env: &mut BanditEnv, epsilon: f64, cfg: &BestArmConfig) -> Result<BestArmResult> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::domain(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let half = BestArmConfig {
        delta: cfg.delta / 2.0,
        ..*cfg
    };
    let state = elim_rounds(env, &half, pac_rounds(epsilon))?;
    let chosen = if state.survivors.len() == 1 {
        state.survivors[0]
    } else {
        median_elim(env, &state.survivors, epsilon, cfg.delta / 2.0)?
    };
    Ok(BestArmResult {
        chosen,
        rounds_used: state.next_round - 1,
        eliminations_performed: state.h - 1,
        ledger: env.ledger().clone(),
        per_round_trace: state.trace,
    })
}

/// Answer types whose arm ids can be mapped back through a permutation.
pub trait Relabel {
    /// `map[j]` is the original index of permuted arm `j`.
    fn relabel(self, map: &[usize]) -> Self;
}

impl Relabel for ArmId {
    fn relabel(self, map: &[usize]) -> Self {
        map[self]
    }
}

impl Relabel for BestArmResult {
    fn relabel(mut self, map: &[usize]) -> Self {
        self.chosen = map[self.chosen];
        self.ledger = self.ledger.remapped(map);
        self
    }
}

/// Draws a uniformly random permutation `perm` (permuted arm `j` is original
/// arm `perm[j]`).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Runs `algorithm` on a uniformly permuted copy of `instance` and maps the
/// answer back to the original arm ids.
pub fn permuted<R, T, F>(instance: &Instance, rng: &mut R, algorithm: F) -> Result<T>
where
    R: Rng + ?Sized,
    T: Relabel,
    F: FnOnce(&Instance) -> Result<T>,
{
    let perm = random_permutation(instance.len(), rng);
    let shuffled = instance.permuted(&perm)?;
    Ok(algorithm(&shuffled)?.relabel(&perm))
}
