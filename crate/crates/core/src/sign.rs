//! Sign testing: decide whether an arm's mean lies above or below a known
//! threshold `xi`, driven by a decreasing reference sequence of gaps.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{Advance, Resumable, StepOutcome};
use crate::model::{ArmId, BanditEnv, PullLedger};
use crate::stats::ceil_count;

pub const DEFAULT_SIGN_ROUNDS: u32 = 60;
pub const DEFAULT_MAX_HALVINGS: u32 = 1100;
pub const DEFAULT_KAPPA_LIMIT: usize = 100_000;

/// A gap schedule `Lambda_1 > Lambda_2 > ...` in (0, 1) with
/// `Lambda_{i+1} <= c * Lambda_i`.
#[derive(Clone)]
pub enum ReferenceSequence {
    Geometric { base: f64 },
    /// A precomputed finite prefix.
    Table { values: Arc<[f64]>, contraction: f64 },
}

impl fmt::Debug for ReferenceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceSequence::Geometric { base } => write!(f, "Geometric({base})"),
            ReferenceSequence::Table { values, contraction } => {
                write!(f, "Table(len={}, c={contraction})", values.len())
            }
        }
    }
}

impl ReferenceSequence {
    /// `Lambda_i` for `i >= 1`.
    pub fn lambda(&self, i: usize) -> Result<f64> {
        if i == 0 {
            return Err(Error::params("reference sequence is indexed from 1"));
        }
        match self {
            ReferenceSequence::Geometric { base } => {
                let v = base.powf(-(i as f64));
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(Error::SearchBudgetExceeded(format!("Lambda_{i} underflows")))
                }
            }
            ReferenceSequence::Table { values, .. } => values.get(i - 1).copied().ok_or_else(|| {
                Error::SearchBudgetExceeded(format!(
                    "reference sequence has only {} terms, Lambda_{i} requested",
                    values.len()
                ))
            }),
        }
    }

    pub fn contraction(&self) -> f64 {
        match self {
            ReferenceSequence::Geometric { base } => base.recip(),
            ReferenceSequence::Table { contraction, .. } => *contraction,
        }
    }

    /// Number of available terms, if finite.
    pub fn len_hint(&self) -> Option<usize> {
        match self {
            ReferenceSequence::Geometric { .. } => None,
            ReferenceSequence::Table { values, .. } => Some(values.len()),
        }
    }

    /// Checks `0 < Lambda_i < 1` and the contraction bound over `1..=len`.
    pub fn check_prefix(&self, len: usize) -> Result<()> {
        let c = self.contraction();
        let mut prev: Option<f64> = None;
        for i in 1..=len {
            let v = self.lambda(i)?;
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::domain(format!("Lambda_{i} = {v} outside (0, 1)")));
            }
            if let Some(p) = prev {
                if v > c * p {
                    return Err(Error::domain(format!("Lambda_{i} breaks contraction {c}")));
                }
            }
            prev = Some(v);
        }
        Ok(())
    }
}

/// `Lambda_i = base^-i` with contraction `1/base`.
pub fn geometric_reference_sequence(base: f64) -> Result<ReferenceSequence> {
    if !(base > 1.0 && base.is_finite()) {
        return Err(Error::domain(format!("base must be > 1, got {base}")));
    }
    Ok(ReferenceSequence::Geometric { base })
}

/// Builds `terms` reference gaps with `Lambda_{i+1} <= Lambda_i / 2` and
/// `time_bound(Lambda_i) >= i * Lambda_i^-2`, searching greedily: start at
/// half the previous term (with `Lambda_0 = 1/2`) and halve until the
/// inequality holds.
///
/// `time_bound` must grow faster than `gap^-2` as the gap shrinks; when it
/// does not, the search gives up after `max_halvings` halvings per term.
pub fn fast_reference_sequence<F>(time_bound: F, terms: usize, max_halvings: u32) -> Result<ReferenceSequence>
where
    F: Fn(f64) -> f64,
{
    let mut values = Vec::with_capacity(terms);
    let mut prev = 0.5f64;
    for i in 1..=terms {
        let mut cand = prev / 2.0;
        let mut halvings = 0;
        loop {
            if cand < f64::MIN_POSITIVE {
                return Err(Error::SearchBudgetExceeded(format!(
                    "Lambda_{i} underflows before the time bound is met"
                )));
            }
            if time_bound(cand) >= i as f64 * cand.powi(-2) {
                break;
            }
            halvings += 1;
            if halvings > max_halvings {
                return Err(Error::SearchBudgetExceeded(format!(
                    "no Lambda_{i} found within {max_halvings} halvings"
                )));
            }
            cand /= 2.0;
        }
        values.push(cand);
        prev = cand;
    }
    Ok(ReferenceSequence::Table {
        values: values.into(),
        contraction: 0.5,
    })
}

/// `kappa`: the smallest `i` with `Lambda_i <= gap`.
pub fn kappa(seq: &ReferenceSequence, gap: f64) -> Result<usize> {
    kappa_with_limit(seq, gap, DEFAULT_KAPPA_LIMIT)
}

pub fn kappa_with_limit(seq: &ReferenceSequence, gap: f64, max_index: usize) -> Result<usize> {
    if !(gap > 0.0 && gap < 1.0) {
        return Err(Error::domain(format!("gap must lie in (0, 1), got {gap}")));
    }
    for i in 1..=max_index {
        if seq.lambda(i)? <= gap {
            return Ok(i);
        }
    }
    Err(Error::SearchBudgetExceeded(format!("no Lambda_i <= {gap} for i <= {max_index}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Above,
    Below,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Above => "above",
            Sign::Below => "below",
        })
    }
}

/// Outcome of [`test_sign`].
#[derive(Clone, Debug, PartialEq)]
pub struct SignResult {
    pub verdict: Sign,
    pub rounds_used: u32,
    pub ledger: PullLedger,
    /// Empirical mean of the terminating round.
    pub final_mean: f64,
    /// Half-width `eps_r` of the terminating round.
    pub final_eps: f64,
}

/// Per-round parameters: `eps_r = Lambda_r / 2`, `delta_r = delta / (10 r^2)`,
/// `t_r = ceil(2 ln(2/delta_r) / eps_r^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignRound {
    pub r: u32,
    pub eps: f64,
    pub delta: f64,
    pub pulls: u64,
}

pub fn sign_round(seq: &ReferenceSequence, delta: f64, r: u32) -> Result<SignRound> {
    let eps = seq.lambda(r as usize)? / 2.0;
    let delta_r = delta / (10.0 * (r as f64) * (r as f64));
    let pulls = ceil_count(2.0 * (2.0 / delta_r).ln() / (eps * eps))?;
    Ok(SignRound {
        r,
        eps,
        delta: delta_r,
        pulls,
    })
}

fn check_sign_args(delta: f64, max_rounds: u32) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if max_rounds == 0 {
        return Err(Error::params("max_rounds must be >= 1"));
    }
    Ok(())
}

fn verdict(mean: f64, xi: f64, eps: f64) -> Option<Sign> {
    if mean > xi + eps {
        Some(Sign::Above)
    } else if mean < xi - eps {
        Some(Sign::Below)
    } else {
        None
    }
}

/// Runs the sign test on `arm`. Each round uses only its own fresh samples.
pub fn test_sign(
    env: &mut BanditEnv,
    arm: ArmId,
    xi: f64,
    delta: f64,
    seq: &ReferenceSequence,
    max_rounds: u32,
) -> Result<SignResult> {
    check_sign_args(delta, max_rounds)?;
    for r in 1..=max_rounds {
        let round = sign_round(seq, delta, r)?;
        let mean = env.sample_mean(arm, round.pulls)?;
        if let Some(v) = verdict(mean, xi, round.eps) {
            return Ok(SignResult {
                verdict: v,
                rounds_used: r,
                ledger: env.ledger().clone(),
                final_mean: mean,
                final_eps: round.eps,
            });
        }
    }
    Err(Error::RoundLimitExceeded { limit: max_rounds })
}

/// The sign test as a resumable state machine: one step is one pull.
#[derive(Clone, Debug)]
pub struct TestSignMachine {
    env: BanditEnv,
    arm: ArmId,
    xi: f64,
    delta: f64,
    seq: ReferenceSequence,
    max_rounds: u32,
    round: Option<SignRound>,
    completed: u32,
    done_in_round: u64,
    sum_in_round: f64,
    steps: u64,
    result: Option<SignResult>,
}

impl TestSignMachine {
    pub fn new(
        env: BanditEnv,
        arm: ArmId,
        xi: f64,
        delta: f64,
        seq: ReferenceSequence,
        max_rounds: u32,
    ) -> Result<Self> {
        check_sign_args(delta, max_rounds)?;
        Ok(TestSignMachine {
            env,
            arm,
            xi,
            delta,
            seq,
            max_rounds,
            round: None,
            completed: 0,
            done_in_round: 0,
            sum_in_round: 0.0,
            steps: 0,
            result: None,
        })
    }

    pub fn result(&self) -> Option<&SignResult> {
        self.result.as_ref()
    }

    fn current_round(&mut self) -> Result<SignRound> {
        if let Some(r) = self.round {
            return Ok(r);
        }
        let r = self.completed + 1;
        if r > self.max_rounds {
            return Err(Error::RoundLimitExceeded {
                limit: self.max_rounds,
            });
        }
        let round = sign_round(&self.seq, self.delta, r)?;
        self.round = Some(round);
        self.done_in_round = 0;
        self.sum_in_round = 0.0;
        Ok(round)
    }

}

impl Resumable for TestSignMachine {
    type Answer = SignResult;

    fn step(&mut self) -> Result<StepOutcome<SignResult>> {
        let adv = self.advance(1)?;
        Ok(match adv.finished {
            Some(ans) => StepOutcome::Finished(ans),
            None => StepOutcome::Pulled(self.arm),
        })
    }

    fn advance(&mut self, max_steps: u64) -> Result<Advance<SignResult>> {
        if self.result.is_some() {
            return Err(Error::AlreadyFinished);
        }
        let mut used = 0;
        while used < max_steps {
            let round = self.current_round()?;
            let k = (round.pulls - self.done_in_round).min(max_steps - used);
            self.sum_in_round += self.env.sample_sum(self.arm, k)?;
            self.done_in_round += k;
            used += k;
            self.steps += k;
            if self.done_in_round == round.pulls {
                let mean = self.sum_in_round / round.pulls as f64;
                self.round = None;
                self.completed += 1;
                if let Some(v) = verdict(mean, self.xi, round.eps) {
                    let res = SignResult {
                        verdict: v,
                        rounds_used: round.r,
                        ledger: self.env.ledger().clone(),
                        final_mean: mean,
                        final_eps: round.eps,
                    };
                    self.result = Some(res.clone());
                    return Ok(Advance {
                        steps: used,
                        finished: Some(res),
                    });
                }
            }
        }
        Ok(Advance {
            steps: used,
            finished: None,
        })
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn ledger(&self) -> PullLedger {
        self.env.ledger().clone()
    }
}
