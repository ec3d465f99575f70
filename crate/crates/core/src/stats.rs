//! Closed-form quantities: Hoeffding sample counts, KL divergences, relative
//! entropy, gap structure and gap entropy.
//!
//! Logs are natural except for the gap entropy, which is in bits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmId, Instance, MAX_PULLS};

/// Rounds a real-valued sample count up, with a minimum of one pull.
pub(crate) fn ceil_count(x: f64) -> Result<u64> {
    if !x.is_finite() || x > MAX_PULLS as f64 {
        return Err(Error::PullOverflow(x));
    }
    Ok((x.ceil() as u64).max(1))
}

/// `ceil(2 eps^-2 ln(2/delta))`, at least 1: enough pulls for the empirical
/// mean of a 1-sub-Gaussian arm to be eps-accurate with probability 1 - delta.
pub fn hoeffding_pulls(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    ceil_count(2.0 * (2.0 / delta).ln() / (epsilon * epsilon))
}

/// KL divergence between N(mu1, sigma^2) and N(mu2, sigma^2).
pub fn kl_gaussian(mu1: f64, mu2: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma must be > 0"));
    }
    let d = mu1 - mu2;
    Ok(d * d / (2.0 * sigma * sigma))
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// KL(Bernoulli(p) || Bernoulli(q)) in nats.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    check_bernoulli_args(p, q)?;
    Ok(xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q))
}

/// Upper bound `(p - q)^2 / (q (1 - q))` on the Bernoulli KL divergence.
pub fn kl_bernoulli_bound(p: f64, q: f64) -> Result<f64> {
    check_bernoulli_args(p, q)?;
    Ok((p - q) * (p - q) / (q * (1.0 - q)))
}

fn check_bernoulli_args(p: f64, q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
    }
    Ok(())
}

/// Relative entropy `x ln(x/y) + (1-x) ln((1-x)/(1-y))` for x, y in (0, 1).
pub fn rel_entropy(x: f64, y: f64) -> Result<f64> {
    for (name, v) in [("x", x), ("y", y)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    Ok(x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln())
}

/// `F(gap) = gap^-2 ln ln gap^-1`, defined for gap in (0, 1/e).
pub fn benchmark_f(gap: f64) -> Result<f64> {
    if !(gap > 0.0 && gap < (-1.0f64).exp()) {
        return Err(Error::domain(format!("gap must lie in (0, 1/e), got {gap}")));
    }
    Ok(gap.powi(-2) * gap.recip().ln().ln())
}

/// Dyadic group index `i` with `2^-i <= gap < 2^-i+1`; gaps above 1 map to 0.
pub fn gap_group(gap: f64) -> u32 {
    debug_assert!(gap > 0.0);
    if gap >= 1.0 {
        return 0;
    }
    let mut i = (-gap.log2()).ceil().max(1.0) as i32;
    // correct any rounding in log2 against exact powers of two
    while gap < 2f64.powi(-i) {
        i += 1;
    }
    while i > 1 && gap >= 2f64.powi(-i + 1) {
        i -= 1;
    }
    i as u32
}

/// Gap structure of a best-arm instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub best: ArmId,
    /// `(arm, gap)` for every suboptimal arm, by increasing gap.
    pub gaps: Vec<(ArmId, f64)>,
    /// Nonempty dyadic groups.
    pub groups: BTreeMap<u32, Vec<ArmId>>,
    /// `H_i`: sum of `gap^-2` over group `i`.
    pub weights: BTreeMap<u32, f64>,
    /// `p_i = H_i / sum_j H_j`.
    pub probs: BTreeMap<u32, f64>,
    /// Gap entropy in bits.
    pub entropy: f64,
    /// `H(I)`: sum of `gap^-2` over suboptimal arms.
    pub hardness: f64,
    /// Largest group index in use.
    pub max_s: u32,
}

impl GapProfile {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Second-largest mean gap, `Delta_2`.
    pub fn min_gap(&self) -> Option<f64> {
        self.gaps.first().map(|&(_, g)| g)
    }

    /// `sum_i gap_i^-2 (1 + ln ln min(n, gap_i^-1))`, with the inner double
    /// log clamped at zero where its argument is below e.
    pub fn entropy_upper_reference(&self, n: usize) -> f64 {
        self.gaps
            .iter()
            .map(|&(_, g)| {
                let m = (n as f64).min(g.recip()).max(std::f64::consts::E);
                g.powi(-2) * (1.0 + m.ln().ln())
            })
            .sum()
    }
}

pub fn gap_profile(instance: &Instance) -> Result<GapProfile> {
    let best = instance.best_arm().ok_or(Error::TiedBest {
        mean: instance.best_mean(),
    })?;
    let top = instance.arm(best).mean;
    let mut gaps: Vec<(ArmId, f64)> = instance
        .arms()
        .iter()
        .filter(|a| a.id != best)
        .map(|a| (a.id, top - a.mean))
        .collect();
    gaps.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut groups: BTreeMap<u32, Vec<ArmId>> = BTreeMap::new();
    let mut weights: BTreeMap<u32, f64> = BTreeMap::new();
    let mut hardness = 0.0;
    for &(id, g) in &gaps {
        let i = gap_group(g);
        groups.entry(i).or_default().push(id);
        *weights.entry(i).or_default() += g.powi(-2);
        hardness += g.powi(-2);
    }
    let total: f64 = weights.values().sum();
    let probs: BTreeMap<u32, f64> = weights.iter().map(|(&i, &h)| (i, h / total)).collect();
    let entropy = probs
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0);
    let max_s = groups.keys().next_back().copied().unwrap_or(0);
    Ok(GapProfile {
        best,
        gaps,
        groups,
        weights,
        probs,
        entropy,
        hardness,
        max_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_instance, Family};

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_pulls(0.5, 0.1).unwrap(), 24);
        assert_eq!(hoeffding_pulls(0.1, 0.05).unwrap(), 738);
        assert_eq!(hoeffding_pulls(1.0, 0.999_999_999).unwrap(), 2);
        assert_eq!(hoeffding_pulls(100.0, 0.999_999).unwrap(), 1);
        assert!(hoeffding_pulls(0.0, 0.1).is_err());
        assert!(hoeffding_pulls(0.1, 1.0).is_err());
        assert!(hoeffding_pulls(0.1, 0.0).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian(0.0, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(kl_gaussian(0.0, 2.0, 1.0).unwrap(), 2.0);
        assert_eq!(kl_gaussian(0.3, 0.3, 2.0).unwrap(), 0.0);
        assert!(kl_gaussian(0.0, 1.0, 0.0).is_err());
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(kl_bernoulli_bound(0.5, 0.5).unwrap(), 0.0);
        assert!((kl_bernoulli_bound(0.6, 0.5).unwrap() - 0.04).abs() < 1e-15);
        assert!(kl_bernoulli(0.6, 0.5).unwrap() <= 0.04);
        assert!((kl_bernoulli(0.2, 0.01).unwrap() - 0.4287).abs() < 1e-3);
        assert!(kl_bernoulli(0.0, 0.3).unwrap() > 0.0);
        assert!(kl_bernoulli(0.2, 0.0).is_err());
        assert!(kl_bernoulli(0.2, 1.0).is_err());
    }

    #[test]
    fn rel_entropy_examples() {
        assert_eq!(rel_entropy(0.5, 0.5).unwrap(), 0.0);
        assert!((rel_entropy(0.2, 0.01).unwrap() - 0.4287).abs() < 1e-3);
        assert_ne!(rel_entropy(0.2, 0.01).unwrap(), rel_entropy(0.01, 0.2).unwrap());
        assert!(rel_entropy(0.0, 0.5).is_err());
        assert!(rel_entropy(0.5, 1.0).is_err());
    }

    #[test]
    fn benchmark_f_examples() {
        let e = std::f64::consts::E;
        let f = benchmark_f((-e).exp()).unwrap();
        assert!((f - (2.0 * e).exp()).abs() < 0.1);
        assert!((f - 229.6517).abs() < 1e-4);
        assert!(benchmark_f((-1.0f64).exp()).is_err());
        assert!(benchmark_f(0.5).is_err());
        let r = benchmark_f(2f64.powi(-11)).unwrap() / benchmark_f(2f64.powi(-10)).unwrap();
        assert!(r > 4.0 && r < 4.2, "{r}");
    }

    #[test]
    fn groups_are_half_open() {
        assert_eq!(gap_group(0.5), 1);
        assert_eq!(gap_group(0.75), 1);
        assert_eq!(gap_group(0.25), 2);
        assert_eq!(gap_group(0.4999999), 2);
        assert_eq!(gap_group(1.0), 0);
        assert_eq!(gap_group(2.0), 0);
        assert_eq!(gap_group(2f64.powi(-30)), 30);
        assert_eq!(gap_group(2f64.powi(-30) * 1.5), 30);
    }

    #[test]
    fn three_arm_profile() {
        let inst = make_instance(&[1.0, 0.5, 0.75], Family::Gaussian, 1.0, None).unwrap();
        let p = gap_profile(&inst).unwrap();
        assert_eq!(p.best, 0);
        assert_eq!(p.gaps, vec![(2, 0.25), (1, 0.5)]);
        assert_eq!(p.groups[&1], vec![1]);
        assert_eq!(p.groups[&2], vec![2]);
        assert_eq!(p.weights[&1], 4.0);
        assert_eq!(p.weights[&2], 16.0);
        assert_eq!(p.hardness, 20.0);
        assert_eq!(p.max_s, 2);
        assert!((p.probs[&1] - 0.2).abs() < 1e-15);
        assert!((p.entropy - 0.7219).abs() < 1e-4);
    }

    #[test]
    fn single_group_has_zero_entropy() {
        let inst = make_instance(&[0.7, 0.5, 0.5, 0.5], Family::Gaussian, 1.0, None).unwrap();
        let p = gap_profile(&inst).unwrap();
        assert_eq!(p.entropy, 0.0);
        assert_eq!(p.n_groups(), 1);
    }
}
