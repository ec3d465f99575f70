//! Seeded trial runner, scaling sweeps and report writers.
//!
//! Every trial `t` runs on its own seed `derive_seed(base_seed, t)`, so rows
//! do not depend on execution order or on how many trials are requested.
//! Trials run concurrently and are merged back in trial order.

mod report;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{write_report, Aggregates, References, ReportFormat, TrialReport, TrialRow, CSV_HEADER};
pub use sweep::{scaling_sweep, suite_sweep, CurveRow, CurveTable, Suite};

use crate::best_arm::{distr_based_elim, pac_best_arm, random_permutation, BestArmConfig, BestArmResult, Relabel};
use crate::error::{Error, Result};
use crate::instances::{clustered_instance, sign_instance, LowerBoundFamilySpec};
use crate::meta::{sim_parallel, ReplayRun, SimConfig};
use crate::model::{derive_seed, BanditEnv, Family, Instance, PullLedger};
use crate::sign::{
    fast_reference_sequence, geometric_reference_sequence, test_sign, ReferenceSequence, Sign, TestSignMachine,
    DEFAULT_MAX_HALVINGS, DEFAULT_SIGN_ROUNDS,
};

/// Stream index used to draw the per-trial arm permutation.
const PERMUTATION_STREAM: u64 = 0x7065_726d;

/// Number of terms built for the `fast:loglog` sequence; the next term
/// would underflow an `f64`.
const LOGLOG_TERMS: usize = 6;

/// A reference sequence by name: `geom:e`, `geom:<base>` or `fast:loglog`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SeqSpec {
    Geometric(f64),
    FastLogLog,
}

impl SeqSpec {
    pub fn build(&self) -> Result<ReferenceSequence> {
        match *self {
            SeqSpec::Geometric(base) => geometric_reference_sequence(base),
            SeqSpec::FastLogLog => fast_reference_sequence(
                |g: f64| g.powi(-2) * g.recip().ln().ln(),
                LOGLOG_TERMS,
                DEFAULT_MAX_HALVINGS,
            ),
        }
    }
}

impl FromStr for SeqSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geom:e" => Ok(SeqSpec::Geometric(std::f64::consts::E)),
            "fast:loglog" => Ok(SeqSpec::FastLogLog),
            _ => {
                let base = s
                    .strip_prefix("geom:")
                    .and_then(|b| b.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown reference sequence '{s}'")))?;
                Ok(SeqSpec::Geometric(base))
            }
        }
    }
}

impl fmt::Display for SeqSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeqSpec::Geometric(b) if *b == std::f64::consts::E => f.write_str("geom:e"),
            SeqSpec::Geometric(b) => write!(f, "geom:{b}"),
            SeqSpec::FastLogLog => f.write_str("fast:loglog"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    TestSign { seq: SeqSpec },
    DistrBasedElim,
    Pac { epsilon: f64 },
}

/// Where the instance of every trial comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSource {
    File(PathBuf),
    Given(Instance),
    Clustered {
        n: usize,
        gap: f64,
        best_mean: f64,
        family: Family,
    },
    LowerBound(LowerBoundFamilySpec),
    /// Sign trials alternate between the arm at `xi + gap` (even trials)
    /// and the arm at `xi - gap` (odd trials).
    SignPair {
        xi: f64,
        gap: f64,
        family: Family,
        sigma: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig {
    pub algorithm: Algorithm,
    pub source: InstanceSource,
    pub delta: f64,
    pub trials: u32,
    pub base_seed: u64,
    /// Round cap of the algorithm; `None` keeps its default.
    pub max_rounds: Option<u32>,
    pub sim_wrap: bool,
    /// Record wall time per trial. Off by default so reports are
    /// byte-identical across runs.
    pub record_wall_time: bool,
}

impl TrialConfig {
    pub fn new(algorithm: Algorithm, source: InstanceSource, delta: f64, trials: u32, base_seed: u64) -> Self {
        TrialConfig {
            algorithm,
            source,
            delta,
            trials,
            base_seed,
            max_rounds: None,
            sim_wrap: false,
            record_wall_time: false,
        }
    }

    pub fn sign(xi: f64, gap: f64, delta: f64, seq: SeqSpec, trials: u32, base_seed: u64) -> Self {
        TrialConfig::new(
            Algorithm::TestSign { seq },
            InstanceSource::SignPair {
                xi,
                gap,
                family: Family::Gaussian,
                sigma: 1.0,
            },
            delta,
            trials,
            base_seed,
        )
    }

    pub fn with_sim(mut self, on: bool) -> Self {
        self.sim_wrap = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.max_rounds == Some(0) {
            return Err(Error::Config("max_rounds must be >= 1".into()));
        }
        let sign_algo = matches!(self.algorithm, Algorithm::TestSign { .. });
        let sign_src = matches!(self.source, InstanceSource::SignPair { .. });
        if sign_algo != sign_src {
            return Err(Error::Config(
                "the sign test runs on sign pairs and best-arm algorithms on instances".into(),
            ));
        }
        Ok(())
    }

    fn label(&self) -> String {
        let algo = match &self.algorithm {
            Algorithm::TestSign { seq } => format!("test_sign[{seq}]"),
            Algorithm::DistrBasedElim => "distr_based_elim".into(),
            Algorithm::Pac { epsilon } => format!("pac[eps={epsilon}]"),
        };
        if self.sim_wrap {
            format!("sim({algo})")
        } else {
            algo
        }
    }
}

/// Instances the trials run on: one fixed instance, or the above/below pair.
enum Resolved {
    Fixed(Arc<Instance>),
    Pair { above: Arc<Instance>, below: Arc<Instance> },
}

impl Resolved {
    fn for_trial(&self, trial: u32) -> &Arc<Instance> {
        match self {
            Resolved::Fixed(i) => i,
            Resolved::Pair { above, below } => {
                if trial.is_multiple_of(2) {
                    above
                } else {
                    below
                }
            }
        }
    }

    fn references(&self) -> References {
        match self {
            Resolved::Fixed(inst) => References::for_instance(inst),
            Resolved::Pair { above, .. } => References::for_sign_gap(above.sign_gap(0).unwrap_or(f64::NAN)),
        }
    }
}

fn resolve(source: &InstanceSource) -> Result<Resolved> {
    Ok(match source {
        InstanceSource::File(path) => Resolved::Fixed(Arc::new(Instance::load(path)?)),
        InstanceSource::Given(inst) => Resolved::Fixed(Arc::new(inst.clone())),
        InstanceSource::Clustered {
            n,
            gap,
            best_mean,
            family,
        } => Resolved::Fixed(Arc::new(clustered_instance(*n, *gap, *best_mean, *family)?)),
        InstanceSource::LowerBound(spec) => Resolved::Fixed(Arc::new(spec.build()?)),
        InstanceSource::SignPair { xi, gap, family, sigma } => Resolved::Pair {
            above: Arc::new(sign_instance(*xi, *gap, *family, *sigma, true)?),
            below: Arc::new(sign_instance(*xi, *gap, *family, *sigma, false)?),
        },
    })
}

/// What one run produced, in original arm ids.
struct Outcome {
    answer: String,
    correct: bool,
    ledger: PullLedger,
    rounds: u32,
    eliminations: u32,
}

fn sign_outcome(inst: &Instance, verdict: Sign, rounds: u32, ledger: PullLedger) -> Outcome {
    let xi = inst.xi().unwrap_or(0.0);
    let truth = if inst.arm(0).mean > xi { Sign::Above } else { Sign::Below };
    Outcome {
        answer: verdict.to_string(),
        correct: verdict == truth,
        ledger,
        rounds,
        eliminations: 0,
    }
}

fn run_sign(cfg: &TrialConfig, seq: &ReferenceSequence, inst: &Arc<Instance>, seed: u64) -> (Result<Outcome>, PullLedger) {
    let xi = inst.xi().unwrap_or(0.0);
    let max_rounds = cfg.max_rounds.unwrap_or(DEFAULT_SIGN_ROUNDS);
    if cfg.sim_wrap {
        let factory = |i: u32, delta_i: f64| {
            TestSignMachine::new(
                BanditEnv::new(inst, derive_seed(seed, i as u64)),
                0,
                xi,
                delta_i,
                seq.clone(),
                max_rounds,
            )
        };
        let res = sim_parallel(factory, SimConfig::new(cfg.delta))
            .map(|out| sign_outcome(inst, out.answer.verdict, out.answer.rounds_used, out.ledger));
        (res, PullLedger::new(inst.len()))
    } else {
        let mut env = BanditEnv::new(inst, seed);
        let res = test_sign(&mut env, 0, xi, cfg.delta, seq, max_rounds)
            .map(|r| sign_outcome(inst, r.verdict, r.rounds_used, r.ledger));
        (res, env.into_ledger())
    }
}

fn best_arm_cfg(cfg: &TrialConfig, delta: f64) -> BestArmConfig {
    let mut c = BestArmConfig::new(delta);
    if let Some(r) = cfg.max_rounds {
        c = c.with_max_rounds(r);
    }
    c
}

fn run_best_arm_on(
    cfg: &TrialConfig,
    inst: &Arc<Instance>,
    seed: u64,
) -> (Result<(BestArmResult, PullLedger)>, PullLedger) {
    let algorithm = cfg.algorithm.clone();
    let run = move |env: &mut BanditEnv, delta: f64, bc: BestArmConfig| match algorithm {
        Algorithm::Pac { epsilon } => pac_best_arm(env, epsilon, &BestArmConfig { delta, ..bc }),
        _ => distr_based_elim(env, &BestArmConfig { delta, ..bc }),
    };
    let bc = best_arm_cfg(cfg, cfg.delta);
    if cfg.sim_wrap {
        let factory = |i: u32, delta_i: f64| {
            let run = run.clone();
            Ok(ReplayRun::new(inst.clone(), derive_seed(seed, i as u64), move |env| {
                run(env, delta_i, bc)
            }))
        };
        let res = sim_parallel(factory, SimConfig::new(cfg.delta)).map(|out| (out.answer, out.ledger));
        (res, PullLedger::new(inst.len()))
    } else {
        let mut env = BanditEnv::new(inst, seed);
        let res = run(&mut env, cfg.delta, bc).map(|r| {
            let l = r.ledger.clone();
            (r, l)
        });
        (res, env.into_ledger())
    }
}

/// Best-arm trials run on a uniformly permuted copy of the instance.
fn run_best_arm(cfg: &TrialConfig, inst: &Arc<Instance>, seed: u64) -> (Result<Outcome>, PullLedger) {
    let mut prng = ChaCha8Rng::seed_from_u64(derive_seed(seed, PERMUTATION_STREAM));
    let perm = random_permutation(inst.len(), &mut prng);
    let shuffled = match inst.permuted(&perm) {
        Ok(s) => Arc::new(s),
        Err(e) => return (Err(e), PullLedger::new(inst.len())),
    };
    let (res, partial) = run_best_arm_on(cfg, &shuffled, seed);
    let best = inst.best_arm();
    let res = res.map(|(r, ledger)| {
        let r = r.relabel(&perm);
        let correct = match cfg.algorithm {
            Algorithm::Pac { epsilon } => inst.arm(r.chosen).mean >= inst.best_mean() - epsilon,
            _ => Some(r.chosen) == best,
        };
        Outcome {
            answer: r.chosen.to_string(),
            correct,
            ledger: ledger.remapped(&perm),
            rounds: r.rounds_used,
            eliminations: r.eliminations_performed,
        }
    });
    (res, partial.remapped(&perm))
}

fn run_one(cfg: &TrialConfig, seq: Option<&ReferenceSequence>, inst: &Arc<Instance>, trial: u32) -> TrialRow {
    let seed = derive_seed(cfg.base_seed, trial as u64);
    let start = cfg.record_wall_time.then(Instant::now);
    let (res, partial) = match seq {
        Some(seq) => run_sign(cfg, seq, inst, seed),
        None => run_best_arm(cfg, inst, seed),
    };
    let wall_time_ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
    match res {
        Ok(o) => TrialRow {
            trial,
            seed,
            answer: o.answer,
            correct: o.correct,
            total_pulls: o.ledger.total(),
            per_arm_pulls: o.ledger.per_arm().to_vec(),
            rounds: o.rounds,
            eliminations: o.eliminations,
            wall_time_ns,
            error: None,
        },
        Err(e) => TrialRow {
            trial,
            seed,
            answer: "error".into(),
            correct: false,
            total_pulls: partial.total(),
            per_arm_pulls: partial.per_arm().to_vec(),
            rounds: 0,
            eliminations: 0,
            wall_time_ns,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `cfg.trials` independent trials. Algorithm errors are recorded as
/// incorrect rows, not propagated.
pub fn run_trials(cfg: &TrialConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let resolved = resolve(&cfg.source)?;
    let seq = match &cfg.algorithm {
        Algorithm::TestSign { seq } => Some(seq.build()?),
        _ => None,
    };
    if let Algorithm::Pac { epsilon } = cfg.algorithm {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::Config(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
        }
    }
    let rows: Vec<TrialRow> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_one(cfg, seq.as_ref(), resolved.for_trial(t), t))
        .collect();
    Ok(TrialReport::new(cfg.label(), rows, resolved.references()))
}

/// Trial seed used for trial index `trial`.
pub fn trial_seed(base_seed: u64, trial: u32) -> u64 {
    derive_seed(base_seed, trial as u64)
}
