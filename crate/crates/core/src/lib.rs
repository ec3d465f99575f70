//! Pure-exploration algorithms for stochastic multi-armed bandits.
//!
//! - [`sign`]: decide whether one arm's mean lies above or below a threshold.
//! - [`best_arm`]: identify the arm with the largest mean by
//!   distribution-based elimination, and its PAC variant.
//! - [`meta`]: the parallel-simulation transform that runs copies of an
//!   algorithm at shrinking confidences and returns the first finisher.
//! - [`harness`]: seeded trials, scaling sweeps and reports.
//!
//! Arms are simulated; every reward draw goes through a [`model::BanditEnv`]
//! which keeps an exact per-arm pull ledger.

pub mod best_arm;
pub mod error;
pub mod harness;
pub mod instances;
pub mod meta;
pub mod model;
pub mod primitives;
pub mod sign;
pub mod stats;

pub use best_arm::{distr_based_elim, pac_best_arm, permuted, BestArmConfig, BestArmResult};
pub use error::{Error, Result};
pub use harness::{run_trials, write_report, TrialConfig, TrialReport};
pub use meta::{sim_parallel, Resumable, SimConfig, SimOutcome};
pub use model::{make_instance, Arm, ArmId, BanditEnv, Family, Instance, PullLedger};
pub use sign::{geometric_reference_sequence, kappa, test_sign, ReferenceSequence, Sign, SignResult};
pub use stats::{gap_profile, hoeffding_pulls, kl_bernoulli, kl_gaussian, GapProfile};
