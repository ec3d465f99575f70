//! Parallel simulation: run copies of an algorithm at confidences
//! `delta / 2^i` with rates `2^i` and answer with the first one to finish.
//!
//! In global round `r` every instance `i` with `2^i | r` advances one step,
//! in increasing index order, and the whole simulation stops as soon as one
//! of them finishes. A step is one arm pull; bookkeeping between pulls is
//! folded into the pull that follows it, and a run that finishes without
//! pulling at all takes a single step.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ArmId, BanditEnv, Instance, PullLedger};

pub const DEFAULT_MAX_INSTANCES: u32 = 48;

/// What one step did.
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome<A> {
    Pulled(ArmId),
    Finished(A),
}

/// Result of advancing by up to a number of steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Advance<A> {
    pub steps: u64,
    pub finished: Option<A>,
}

/// An algorithm run that can be executed incrementally. Each value owns its
/// reward streams and ledger.
pub trait Resumable: Clone {
    type Answer: Clone;

    fn step(&mut self) -> Result<StepOutcome<Self::Answer>>;

    /// Advances by at most `max_steps` steps, stopping early on completion.
    fn advance(&mut self, max_steps: u64) -> Result<Advance<Self::Answer>> {
        let mut steps = 0;
        while steps < max_steps {
            steps += 1;
            if let StepOutcome::Finished(a) = self.step()? {
                return Ok(Advance {
                    steps,
                    finished: Some(a),
                });
            }
        }
        Ok(Advance {
            steps,
            finished: None,
        })
    }

    fn steps_taken(&self) -> u64;

    fn ledger(&self) -> PullLedger;
}

/// Rates `2^i` and confidences `delta / 2^i` for `i >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSchedule {
    pub delta: f64,
}

impl SimSchedule {
    pub fn rate(&self, i: u32) -> u64 {
        1u64 << i
    }

    pub fn confidence(&self, i: u32) -> f64 {
        self.delta / 2f64.powi(i as i32)
    }
}

/// Indices `i >= 1` with `2^i | round`, increasing.
pub fn schedule_active(round: u64) -> Vec<u32> {
    assert!(round >= 1, "rounds are numbered from 1");
    (1..=round.trailing_zeros()).collect()
}

/// Outcome of a parallel simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome<A> {
    pub answer: A,
    /// Index `i >= 1` of the instance that finished.
    pub winner: u32,
    /// Global round in which it finished.
    pub finish_round: u64,
    /// Steps taken by each instantiated instance, index `i` at position `i-1`.
    pub steps: Vec<u64>,
    /// Pulls of all instances combined.
    pub ledger: PullLedger,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub delta: f64,
    pub max_instances: u32,
}

impl SimConfig {
    pub fn new(delta: f64) -> Self {
        SimConfig {
            delta,
            max_instances: DEFAULT_MAX_INSTANCES,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

fn instantiate<R, F>(factory: &mut F, instances: &mut Vec<R>, upto: u32, cfg: &SimConfig) -> Result<()>
where
    F: FnMut(u32, f64) -> Result<R>,
{
    let schedule = SimSchedule { delta: cfg.delta };
    while (instances.len() as u32) < upto {
        let i = instances.len() as u32 + 1;
        if i > cfg.max_instances {
            return Err(Error::InstanceBudgetExceeded {
                limit: cfg.max_instances,
            });
        }
        instances.push(factory(i, schedule.confidence(i))?);
    }
    Ok(())
}

fn combined_ledger<R: Resumable>(instances: &[R]) -> PullLedger {
    let mut total = PullLedger::default();
    for inst in instances {
        total.absorb(&inst.ledger());
    }
    total
}

/// Literal round-by-round simulation, one `step` call per active instance.
/// Stops with `Ok(None)` after `max_rounds` rounds without a finisher.
pub fn sim_parallel_literal<R, F>(mut factory: F, cfg: SimConfig, max_rounds: u64) -> Result<Option<SimOutcome<R::Answer>>>
where
    R: Resumable,
    F: FnMut(u32, f64) -> Result<R>,
{
    cfg.check()?;
    let mut instances: Vec<R> = Vec::new();
    for round in 1..=max_rounds {
        let active = schedule_active(round);
        if let Some(&top) = active.last() {
            instantiate(&mut factory, &mut instances, top, &cfg)?;
        }
        for i in active {
            if let StepOutcome::Finished(answer) = instances[i as usize - 1].step()? {
                return Ok(Some(SimOutcome {
                    answer,
                    winner: i,
                    finish_round: round,
                    steps: instances.iter().map(|r| r.steps_taken()).collect(),
                    ledger: combined_ledger(&instances),
                }));
            }
        }
    }
    Ok(None)
}

/// Steps instance `i` has taken at the end of round `round` (when it is
/// `winner`'s finishing round, instances after the winner do not move).
fn steps_at(i: u32, round: u64, winner: u32) -> u64 {
    if i <= winner {
        round >> i
    } else {
        (round - 1) >> i
    }
}

/// Runs the parallel simulation to completion.
///
/// Instances are advanced in batches over doubling horizons of global rounds
/// instead of one round at a time. When a horizon contains a finisher, every
/// instance is rolled back to its state at the start of the horizon and
/// re-advanced to its exact step count at the finishing round, so the answer,
/// the step counts and the combined ledger match the round-by-round
/// definition.
pub fn sim_parallel<R, F>(mut factory: F, cfg: SimConfig) -> Result<SimOutcome<R::Answer>>
where
    R: Resumable,
    F: FnMut(u32, f64) -> Result<R>,
{
    cfg.check()?;
    let mut instances: Vec<R> = Vec::new();
    let mut horizon: u64 = 2;
    loop {
        instantiate(&mut factory, &mut instances, 63 - horizon.leading_zeros(), &cfg)?;
        let snapshot = instances.clone();
        // (finish round, index)
        let mut best: Option<(u64, u32)> = None;
        for (k, inst) in instances.iter_mut().enumerate() {
            let i = k as u32 + 1;
            let cur = inst.steps_taken();
            let target = horizon >> i;
            if target <= cur {
                continue;
            }
            let adv = inst.advance(target - cur)?;
            if adv.finished.is_some() {
                let finish = (cur + adv.steps) << i;
                if best.is_none_or(|(f, _)| finish < f) {
                    best = Some((finish, i));
                }
            }
        }

        if let Some((finish_round, winner)) = best {
            instances = snapshot;
            // instance i only exists from round 2^i on
            instances.truncate((63 - finish_round.leading_zeros()) as usize);
            let mut answer = None;
            for (k, inst) in instances.iter_mut().enumerate() {
                let i = k as u32 + 1;
                let cur = inst.steps_taken();
                let target = steps_at(i, finish_round, winner);
                if target > cur {
                    let adv = inst.advance(target - cur)?;
                    if i == winner {
                        answer = adv.finished;
                    } else if adv.finished.is_some() {
                        unreachable!("instance {i} finished before the winner");
                    }
                }
            }
            let answer = answer.expect("replayed winner must finish at the same step");
            return Ok(SimOutcome {
                answer,
                winner,
                finish_round,
                steps: instances.iter().map(|r| r.steps_taken()).collect(),
                ledger: combined_ledger(&instances),
            });
        }
        horizon = horizon.checked_mul(2).ok_or(Error::InstanceBudgetExceeded {
            limit: cfg.max_instances,
        })?;
    }
}

/// A budgeted run: executes an algorithm from scratch on a fresh
/// environment whose total pulls are capped.
type RunFn<A> = Arc<dyn Fn(&mut BanditEnv) -> Result<A> + Send + Sync>;

/// Makes any deterministic algorithm resumable by re-running it from the
/// start with a larger pull budget on each advance. Because every run starts
/// from the same seed, the prefix of pulls is identical across re-runs and
/// only the final, partially granted batch differs.
#[derive(Clone)]
pub struct ReplayRun<A> {
    instance: Arc<Instance>,
    seed: u64,
    run: RunFn<A>,
    steps: u64,
    ledger: PullLedger,
    finished: Option<A>,
}

impl<A: Clone> ReplayRun<A> {
    pub fn new<F>(instance: Arc<Instance>, seed: u64, run: F) -> Self
    where
        F: Fn(&mut BanditEnv) -> Result<A> + Send + Sync + 'static,
    {
        let n = instance.len();
        ReplayRun {
            instance,
            seed,
            run: Arc::new(run),
            steps: 0,
            ledger: PullLedger::new(n),
            finished: None,
        }
    }

    pub fn answer(&self) -> Option<&A> {
        self.finished.as_ref()
    }
}

impl<A: Clone> Resumable for ReplayRun<A> {
    type Answer = A;

    fn step(&mut self) -> Result<StepOutcome<A>> {
        let adv = self.advance(1)?;
        Ok(match adv.finished {
            Some(a) => StepOutcome::Finished(a),
            // the arm id of a replayed pull is not tracked
            None => StepOutcome::Pulled(usize::MAX),
        })
    }

    fn advance(&mut self, max_steps: u64) -> Result<Advance<A>> {
        if self.finished.is_some() {
            return Err(Error::AlreadyFinished);
        }
        if max_steps == 0 {
            return Ok(Advance {
                steps: 0,
                finished: None,
            });
        }
        let budget = self.steps + max_steps;
        let mut env = BanditEnv::new(&self.instance, self.seed).with_budget(budget);
        match (self.run)(&mut env) {
            Ok(answer) => {
                let done = env.ledger().total().max(1);
                debug_assert!(done > self.steps && done <= budget);
                let used = done - self.steps;
                self.steps = done;
                self.ledger = env.into_ledger();
                self.finished = Some(answer.clone());
                Ok(Advance {
                    steps: used,
                    finished: Some(answer),
                })
            }
            Err(Error::BudgetExhausted) => {
                self.steps = budget;
                self.ledger = env.into_ledger();
                Ok(Advance {
                    steps: max_steps,
                    finished: None,
                })
            }
            Err(e) => Err(e),
        }
    }

    fn steps_taken(&self) -> u64 {
        self.steps
    }

    fn ledger(&self) -> PullLedger {
        self.ledger.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Finishes after a fixed number of steps with its own index as answer.
    #[derive(Clone, Debug)]
    struct Countdown {
        index: u32,
        length: u64,
        steps: u64,
        ledger: PullLedger,
    }

    impl Countdown {
        fn new(index: u32, length: u64) -> Self {
            Countdown {
                index,
                length,
                steps: 0,
                ledger: PullLedger::new(1),
            }
        }
    }

    impl Resumable for Countdown {
        type Answer = u32;

        fn step(&mut self) -> Result<StepOutcome<u32>> {
            if self.steps >= self.length {
                return Err(Error::AlreadyFinished);
            }
            self.steps += 1;
            self.ledger.record(0, 1);
            if self.steps == self.length {
                Ok(StepOutcome::Finished(self.index))
            } else {
                Ok(StepOutcome::Pulled(0))
            }
        }

        fn steps_taken(&self) -> u64 {
            self.steps
        }

        fn ledger(&self) -> PullLedger {
            self.ledger.clone()
        }
    }

    #[test]
    fn active_sets() {
        assert_eq!(schedule_active(6), vec![1]);
        assert_eq!(schedule_active(8), vec![1, 2, 3]);
        assert!(schedule_active(1).is_empty());
        assert!(schedule_active(7).is_empty());
    }

    #[test]
    fn schedule_confidences_sum_to_delta() {
        let s = SimSchedule { delta: 0.05 };
        let sum: f64 = (1..60).map(|i| s.confidence(i)).sum();
        assert!((sum - 0.05).abs() < 1e-15);
        assert_eq!(s.rate(3), 8);
    }

    #[test]
    fn five_step_base() {
        let out = sim_parallel(|i, _| Ok(Countdown::new(i, 5)), SimConfig::new(0.1)).unwrap();
        assert_eq!(out.winner, 1);
        assert_eq!(out.finish_round, 10);
        assert_eq!(out.answer, 1);
        assert_eq!(out.steps[0], 5);
        assert_eq!(out.steps[1], 2);
        assert_eq!(out.steps[2], 1);
        assert_eq!(out.ledger.total(), 8);
        let lit = sim_parallel_literal(|i, _| Ok(Countdown::new(i, 5)), SimConfig::new(0.1), 100)
            .unwrap()
            .unwrap();
        assert_eq!(lit, out);
    }

    #[test]
    fn step_counts_follow_rates() {
        for rounds in 1..=64u64 {
            let mut instances: Vec<Countdown> = Vec::new();
            let cfg = SimConfig::new(0.1);
            let mut factory = |i: u32, _d: f64| Ok(Countdown::new(i, u64::MAX));
            for round in 1..=rounds {
                let active = schedule_active(round);
                if let Some(&top) = active.last() {
                    instantiate(&mut factory, &mut instances, top, &cfg).unwrap();
                }
                for i in active {
                    instances[i as usize - 1].step().unwrap();
                }
            }
            for (k, inst) in instances.iter().enumerate() {
                let i = k as u32 + 1;
                assert_eq!(inst.steps_taken(), rounds >> i, "R={rounds} i={i}");
            }
            assert_eq!(instances.len() as u32, 63 - rounds.leading_zeros());
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        // instance 1 needs 4 steps (round 8), instance 2 needs 2 (round 8)
        let lens = [4u64, 2, 100, 100];
        let out = sim_parallel(|i, _| Ok(Countdown::new(i, lens[i as usize - 1])), SimConfig::new(0.1))
            .unwrap();
        assert_eq!(out.winner, 1);
        assert_eq!(out.finish_round, 8);
        assert_eq!(out.steps, vec![4, 1, 0]);
        let lit = sim_parallel_literal(
            |i, _| Ok(Countdown::new(i, lens[i as usize - 1])),
            SimConfig::new(0.1),
            100,
        )
        .unwrap()
        .unwrap();
        assert_eq!(lit, out);
    }

    #[test]
    fn instance_cap() {
        let cfg = SimConfig {
            delta: 0.1,
            max_instances: 3,
        };
        let err = sim_parallel(|i, _| Ok(Countdown::new(i, u64::MAX)), cfg).unwrap_err();
        assert!(matches!(err, Error::InstanceBudgetExceeded { limit: 3 }));
    }
}
