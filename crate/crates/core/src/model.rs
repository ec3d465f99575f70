//! Arms, instances, pull accounting and seeded reward streams.
//!
//! Every arm of a run draws from its own ChaCha8 stream keyed by
//! `(seed, arm id)`, so the order in which an algorithm visits arms never
//! changes the rewards another arm produces. Algorithm-internal randomness
//! (uniform arm picks, permutations) uses a separate auxiliary stream.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ArmId = usize;

/// Stream id reserved for algorithm-internal randomness.
pub const AUX_STREAM: u64 = u64::MAX;

/// Largest pull count a single request may ask for.
pub const MAX_PULLS: u64 = 1 << 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Bernoulli,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "bernoulli" => Ok(Family::Bernoulli),
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

/// A reward distribution with a hidden mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub id: ArmId,
    pub family: Family,
    pub mean: f64,
    /// Gaussian scale. Ignored for Bernoulli arms.
    pub sigma: f64,
}

impl Arm {
    pub fn new(id: ArmId, family: Family, mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::domain(format!("arm {id}: mean must be finite")));
        }
        match family {
            Family::Gaussian => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::domain(format!("arm {id}: sigma must be > 0")));
                }
            }
            Family::Bernoulli => {
                if !(0.0..=1.0).contains(&mean) {
                    return Err(Error::domain(format!(
                        "arm {id}: bernoulli mean {mean} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Arm {
            id,
            family,
            mean,
            sigma,
        })
    }

    pub fn gaussian(id: ArmId, mean: f64, sigma: f64) -> Result<Self> {
        Arm::new(id, Family::Gaussian, mean, sigma)
    }

    pub fn bernoulli(id: ArmId, mean: f64) -> Result<Self> {
        Arm::new(id, Family::Bernoulli, mean, 1.0)
    }

    /// True when the reward distribution is 1-sub-Gaussian.
    pub fn is_unit_sub_gaussian(&self) -> bool {
        match self.family {
            Family::Gaussian => self.sigma <= 1.0,
            Family::Bernoulli => true,
        }
    }

    /// One reward.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.mean + self.sigma * z
            }
            Family::Bernoulli => {
                if rng.random::<f64>() < self.mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Sum of `k` i.i.d. rewards, drawn from the exact distribution of the
    /// sum (normal for Gaussian arms, binomial for Bernoulli arms).
    pub fn draw_sum<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> f64 {
        match k {
            0 => 0.0,
            1 => self.draw(rng),
            _ => match self.family {
                Family::Gaussian => {
                    let z: f64 = StandardNormal.sample(rng);
                    let kf = k as f64;
                    kf * self.mean + self.sigma * kf.sqrt() * z
                }
                Family::Bernoulli => {
                    // mean is validated to lie in [0, 1]
                    let b = Binomial::new(k, self.mean).expect("valid binomial");
                    b.sample(rng) as f64
                }
            },
        }
    }
}

/// An ordered collection of arms, optionally with a sign threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    arms: Vec<Arm>,
    xi: Option<f64>,
}

/// Build an instance from means. Without `xi` the maximum mean must be unique.
pub fn make_instance(means: &[f64], family: Family, sigma: f64, xi: Option<f64>) -> Result<Instance> {
    if means.is_empty() {
        return Err(Error::domain("an instance needs at least one arm"));
    }
    let arms = means
        .iter()
        .enumerate()
        .map(|(id, &m)| Arm::new(id, family, m, sigma))
        .collect::<Result<Vec<_>>>()?;
    Instance::from_arms(arms, xi)
}

impl Instance {
    pub fn from_arms(mut arms: Vec<Arm>, xi: Option<f64>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::domain("an instance needs at least one arm"));
        }
        for (id, arm) in arms.iter_mut().enumerate() {
            arm.id = id;
        }
        match xi {
            None => {
                let max = arms.iter().map(|a| a.mean).fold(f64::NEG_INFINITY, f64::max);
                if arms.iter().filter(|a| a.mean == max).count() > 1 {
                    return Err(Error::TiedBest { mean: max });
                }
            }
            Some(xi) => {
                if !xi.is_finite() {
                    return Err(Error::domain("xi must be finite"));
                }
                if let Some(a) = arms.iter().find(|a| a.mean == xi) {
                    return Err(Error::domain(format!("arm {} has mean equal to xi", a.id)));
                }
            }
        }
        Ok(Instance { arms, xi })
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm(&self, id: ArmId) -> &Arm {
        &self.arms[id]
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn xi(&self) -> Option<f64> {
        self.xi
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.mean).collect()
    }

    pub fn family(&self) -> Family {
        self.arms[0].family
    }

    pub fn sigma(&self) -> f64 {
        self.arms[0].sigma
    }

    /// Index of the unique best arm, if the maximum is unique.
    pub fn best_arm(&self) -> Option<ArmId> {
        let max = self.arms.iter().map(|a| a.mean).fold(f64::NEG_INFINITY, f64::max);
        let mut it = self.arms.iter().filter(|a| a.mean == max);
        let first = it.next()?;
        if it.next().is_some() {
            None
        } else {
            Some(first.id)
        }
    }

    pub fn best_mean(&self) -> f64 {
        self.arms.iter().map(|a| a.mean).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sign-test gap |mu - xi| of an arm, if a threshold is set.
    pub fn sign_gap(&self, id: ArmId) -> Option<f64> {
        self.xi.map(|xi| (self.arms[id].mean - xi).abs())
    }

    /// The instance with arm `j` taken from position `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Instance> {
        if perm.len() != self.arms.len() {
            return Err(Error::params("permutation length mismatch"));
        }
        let arms = perm.iter().map(|&p| self.arms[p]).collect();
        Instance::from_arms(arms, self.xi)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            family: self.family(),
            sigma: self.sigma(),
            means: self.means(),
            xi: self.xi,
        }
    }

    pub fn load(path: &Path) -> Result<Instance> {
        let text = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        file.into_instance()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_file())?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// On-disk instance description. Arm order is authoritative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub family: Family,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub means: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

fn default_sigma() -> f64 {
    1.0
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance> {
        make_instance(&self.means, self.family, self.sigma, self.xi)
    }
}

/// Exact per-arm and total sample counts of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullLedger {
    per_arm: Vec<u64>,
    total: u64,
}

impl PullLedger {
    pub fn new(n_arms: usize) -> Self {
        PullLedger {
            per_arm: vec![0; n_arms],
            total: 0,
        }
    }

    pub fn record(&mut self, arm: ArmId, k: u64) {
        if arm >= self.per_arm.len() {
            self.per_arm.resize(arm + 1, 0);
        }
        self.per_arm[arm] += k;
        self.total += k;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn per_arm(&self) -> &[u64] {
        &self.per_arm
    }

    pub fn pulls(&self, arm: ArmId) -> u64 {
        self.per_arm.get(arm).copied().unwrap_or(0)
    }

    /// Adds another ledger's counts into this one.
    pub fn absorb(&mut self, other: &PullLedger) {
        for (arm, &k) in other.per_arm.iter().enumerate() {
            if k > 0 {
                self.record(arm, k);
            }
        }
    }

    /// Relabels arms: count of arm `j` moves to `map[j]`.
    pub fn remapped(&self, map: &[usize]) -> PullLedger {
        let mut out = PullLedger::new(self.per_arm.len());
        for (j, &k) in self.per_arm.iter().enumerate() {
            out.per_arm[map[j]] += k;
        }
        out.total = self.total;
        out
    }
}

/// A `(seed, stream)` pair naming one independent reward stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an index:
/// `splitmix64(parent ^ splitmix64(index))`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

/// The simulated environment of one run: arms, their reward streams, the
/// auxiliary stream and the pull ledger.
#[derive(Clone, Debug)]
pub struct BanditEnv {
    arms: Vec<Arm>,
    streams: Vec<ChaCha8Rng>,
    aux: ChaCha8Rng,
    ledger: PullLedger,
    budget: Option<u64>,
    seed: u64,
}

impl BanditEnv {
    pub fn new(instance: &Instance, seed: u64) -> Self {
        let arms = instance.arms().to_vec();
        let streams = (0..arms.len())
            .map(|i| RngStream::new(seed, i as u64).rng())
            .collect();
        BanditEnv {
            ledger: PullLedger::new(arms.len()),
            arms,
            streams,
            aux: RngStream::new(seed, AUX_STREAM).rng(),
            budget: None,
            seed,
        }
    }

    /// Caps the total number of pulls; requests beyond it fail with
    /// [`Error::BudgetExhausted`] after using up what remains.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn ledger(&self) -> &PullLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> PullLedger {
        self.ledger
    }

    pub fn aux(&mut self) -> &mut ChaCha8Rng {
        &mut self.aux
    }

    /// Pulls `arm` once.
    pub fn pull(&mut self, arm: ArmId) -> Result<f64> {
        self.sample_sum(arm, 1)
    }

    /// Pulls `arm` `k` times and returns the reward sum.
    pub fn sample_sum(&mut self, arm: ArmId, k: u64) -> Result<f64> {
        if k > MAX_PULLS {
            return Err(Error::PullOverflow(k as f64));
        }
        let granted = match self.budget {
            Some(b) => k.min(b.saturating_sub(self.ledger.total())),
            None => k,
        };
        let a = self.arms[arm];
        let sum = a.draw_sum(granted, &mut self.streams[arm]);
        self.ledger.record(arm, granted);
        if granted < k {
            return Err(Error::BudgetExhausted);
        }
        Ok(sum)
    }

    /// Pulls `arm` `k >= 1` times and returns the empirical mean.
    pub fn sample_mean(&mut self, arm: ArmId, k: u64) -> Result<f64> {
        debug_assert!(k >= 1);
        Ok(self.sample_sum(arm, k)? / k as f64)
    }
}

/// `pull` as a free function over an explicit ledger and stream.
pub fn pull<R: Rng + ?Sized>(arm: &Arm, ledger: &mut PullLedger, rng: &mut R) -> f64 {
    ledger.record(arm.id, 1);
    arm.draw(rng)
}
