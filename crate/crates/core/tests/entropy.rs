use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pure_explore::instances::lower_bound_base;
use pure_explore::model::{make_instance, Family, Instance};
use pure_explore::stats::gap_profile;

/// Frozen after a brute-force calibration sweep (worst observed ratio 1.66).
const ENTROPY_BOUND_C: f64 = 2.0;

/// Gap entropy straight from the definition: group `i` holds the gaps with
/// `2^-i <= gap < 2^-i+1`, found by scanning `i` upwards.
fn brute_entropy(gaps: &[f64]) -> (f64, usize) {
    let mut weights: Vec<(i32, f64)> = Vec::new();
    for &g in gaps {
        let i = if g >= 1.0 {
            0
        } else {
            (1..2000).find(|&i| 2f64.powi(-i) <= g && g < 2f64.powi(-i + 1)).unwrap()
        };
        match weights.iter_mut().find(|(j, _)| *j == i) {
            Some((_, w)) => *w += 1.0 / (g * g),
            None => weights.push((i, 1.0 / (g * g))),
        }
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let ent = weights.iter().map(|(_, w)| w / total).map(|p| -p * p.log2()).sum();
    (ent, weights.len())
}

fn gaps_of(inst: &Instance) -> Vec<f64> {
    let best = inst.best_mean();
    let mut first = true;
    inst.means()
        .into_iter()
        .filter(|&m| {
            if m == best && first {
                first = false;
                false
            } else {
                true
            }
        })
        .map(|m| best - m)
        .collect()
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = 2f64.powf(rng.random_range(1.0..12.0)).round() as usize;
    let spread: f64 = rng.random_range(0.0..12.0);
    let mut means = vec![1.0];
    means.extend((1..n).map(|_| 1.0 - 2f64.powf(-rng.random_range(0.0..spread.max(1e-9)))));
    make_instance(&means, Family::Gaussian, 1.0, None).unwrap()
}

#[test]
fn worked_example() {
    let inst = make_instance(&[1.0, 0.5, 0.75], Family::Gaussian, 1.0, None).unwrap();
    let p = gap_profile(&inst).unwrap();
    let oracle = 0.2 * 5f64.log2() + 0.8 * 1.25f64.log2();
    assert!((p.entropy - oracle).abs() < 1e-12);
    assert!((p.entropy - 0.7219).abs() < 1e-4);
    assert_eq!(p.hardness, 20.0);
}

#[test]
fn lower_bound_instance_matches_brute_force() {
    for (m, n) in [(2, 32), (4, 400), (6, 5500)] {
        let inst = lower_bound_base(m, n, 0.0).unwrap();
        let p = gap_profile(&inst).unwrap();
        let (oracle, groups) = brute_entropy(&gaps_of(&inst));
        assert!((p.entropy - oracle).abs() < 1e-6, "m={m}: {} vs {oracle}", p.entropy);
        assert_eq!(p.n_groups(), groups);
    }
}

#[test]
fn random_instances_match_brute_force_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let p = gap_profile(&inst).unwrap();
        let (oracle, groups) = brute_entropy(&gaps_of(&inst));
        assert!((p.entropy - oracle).abs() < 1e-9);
        assert_eq!(p.n_groups(), groups);
        assert!(p.entropy <= (groups as f64).log2());
        let rhs = p.entropy_upper_reference(inst.len());
        assert!(p.hardness * p.entropy <= ENTROPY_BOUND_C * rhs);
    }
}

#[test]
fn equal_weight_ladder_within_constant() {
    for m in 1..=5u32 {
        let mut means = vec![1.0];
        for k in 0..=m {
            means.extend(std::iter::repeat_n(1.0 - 0.999 * 2f64.powi(-(k as i32)), 4usize.pow(m - k)));
        }
        let inst = make_instance(&means, Family::Gaussian, 1.0, None).unwrap();
        let p = gap_profile(&inst).unwrap();
        assert!(p.hardness * p.entropy <= ENTROPY_BOUND_C * p.entropy_upper_reference(inst.len()));
    }
}
