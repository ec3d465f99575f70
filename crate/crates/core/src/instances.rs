//! Instance generators: clustered instances, the lower-bound family built
//! around a threshold `xi`, and sign-test pairs.
//!
//! The lower-bound family is only meaningful asymptotically for large `m`
//! and `n`; these generators accept any feasible size.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_instance, Arm, Family, Instance};
use crate::stats::gap_group;

/// One arm at `best_mean`, followed by `n - 1` arms at `best_mean - gap`.
pub fn clustered_instance(n: usize, gap: f64, best_mean: f64, family: Family) -> Result<Instance> {
    if n < 2 {
        return Err(Error::domain("a clustered instance needs n >= 2"));
    }
    if !(gap > 0.0 && gap <= 0.5) {
        return Err(Error::domain(format!("gap must lie in (0, 0.5], got {gap}")));
    }
    let mut means = vec![best_mean - gap; n];
    means[0] = best_mean;
    make_instance(&means, family, 1.0, None)
}

/// Clustered instance description: groups of equal-gap arms below one best arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteredSpec {
    pub best_mean: f64,
    /// `(gap, count)` pairs.
    pub groups: Vec<(f64, usize)>,
    /// Allowed number of distinct dyadic gap groups.
    pub max_groups: usize,
}

impl ClusteredSpec {
    pub fn build(&self, family: Family) -> Result<Instance> {
        let mut classes = BTreeSet::new();
        let mut means = vec![self.best_mean];
        for &(gap, count) in &self.groups {
            if !(gap > 0.0 && gap <= 1.0) {
                return Err(Error::Spec(format!("gap {gap} outside (0, 1]")));
            }
            classes.insert(gap_group(gap));
            means.extend(std::iter::repeat_n(self.best_mean - gap, count));
        }
        if classes.len() > self.max_groups {
            return Err(Error::Spec(format!(
                "{} dyadic groups exceed the declared bound {}",
                classes.len(),
                self.max_groups
            )));
        }
        make_instance(&means, family, 1.0, None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundFamilySpec {
    pub m: u32,
    pub n: usize,
    pub xi: f64,
    /// Levels `k` in `[0, m]` that get one extra arm at `xi - 2^-k`.
    #[serde(default)]
    pub s: BTreeSet<u32>,
}

impl LowerBoundFamilySpec {
    pub fn new(m: u32, n: usize, xi: f64) -> Self {
        LowerBoundFamilySpec {
            m,
            n,
            xi,
            s: BTreeSet::new(),
        }
    }

    pub fn with_levels(mut self, levels: impl IntoIterator<Item = u32>) -> Self {
        self.s.extend(levels);
        self
    }

    /// `sum_{k=0}^{m} 4^k`.
    pub fn ladder_size(&self) -> u128 {
        (0..=self.m).map(|k| 4u128.pow(k)).sum()
    }

    /// Number of arms at `xi - 2` before and after applying `s`.
    fn filler(&self) -> Result<(usize, usize)> {
        if self.m < 2 || !self.m.is_multiple_of(2) {
            return Err(Error::Spec(format!("m must be even and >= 2, got {}", self.m)));
        }
        if self.m > 60 {
            return Err(Error::Spec(format!("m = {} is too large to materialize", self.m)));
        }
        if let Some(&k) = self.s.iter().find(|&&k| k > self.m) {
            return Err(Error::Spec(format!("level {k} outside [0, {}]", self.m)));
        }
        let used = self.ladder_size() + 1;
        if (self.n as u128) < used {
            return Err(Error::Spec(format!(
                "n = {} is smaller than the {used} arms of the ladder",
                self.n
            )));
        }
        let base = (self.n as u128 - used) as usize;
        let after = base.checked_sub(self.s.len()).ok_or_else(|| {
            Error::Spec(format!(
                "|S| = {} exceeds the {base} available filler arms",
                self.s.len()
            ))
        })?;
        Ok((base, after))
    }

    /// `(mean, count)` pairs of the instance in recipe order.
    pub fn recipe(&self) -> Result<Vec<(f64, usize)>> {
        let (_, filler) = self.filler()?;
        let mut out = vec![(self.xi, 1)];
        for k in 0..=self.m {
            let extra = usize::from(self.s.contains(&k));
            out.push((self.xi - 2f64.powi(-(k as i32)), 4usize.pow(self.m - k) + extra));
        }
        out.push((self.xi - 2.0, filler));
        Ok(out)
    }

    pub fn build(&self) -> Result<Instance> {
        let means: Vec<f64> = self
            .recipe()?
            .into_iter()
            .flat_map(|(mean, count)| std::iter::repeat_n(mean, count))
            .collect();
        make_instance(&means, Family::Gaussian, 1.0, None)
    }
}

/// The base instance: one arm at `xi`, `4^(m-k)` arms at `xi - 2^-k` for
/// `k in [0, m]`, and the remaining arms at `xi - 2`.
pub fn lower_bound_base(m: u32, n: usize, xi: f64) -> Result<Instance> {
    LowerBoundFamilySpec::new(m, n, xi).build()
}

/// The base instance with one extra arm at `xi - 2^-k` for every `k` in the
/// spec's level set, each replacing an arm at `xi - 2`.
pub fn lower_bound_variant(spec: &LowerBoundFamilySpec) -> Result<Instance> {
    spec.build()
}

/// Arms at `xi + gap` and `xi - gap`.
pub fn sign_pair(xi: f64, gap: f64, family: Family, sigma: f64) -> Result<(Arm, Arm)> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::domain(format!("gap must be > 0, got {gap}")));
    }
    if family == Family::Bernoulli {
        for m in [xi + gap, xi - gap] {
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::domain(format!("bernoulli mean {m} outside (0, 1)")));
            }
        }
    }
    Ok((
        Arm::new(0, family, xi + gap, sigma)?,
        Arm::new(1, family, xi - gap, sigma)?,
    ))
}

/// A one-arm sign instance at `xi + gap` (`above`) or `xi - gap`.
pub fn sign_instance(xi: f64, gap: f64, family: Family, sigma: f64, above: bool) -> Result<Instance> {
    let (hi, lo) = sign_pair(xi, gap, family, sigma)?;
    let arm = if above { hi } else { lo };
    Instance::from_arms(vec![arm], Some(xi))
}
