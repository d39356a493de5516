mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rbm_annihilation::kernel::{eval_kernel, KernelParams};
use rbm_annihilation::particles::{
    brute_force_pair_rates, fold, neighbor_pair_rates, HeatKernelRate, InitialProfile, PairRate, SimConfig, Simulator,
};

#[test]
fn folded_gaussian_has_the_neumann_transition_law() {
    let (x0, t, samples, bins): (f64, f64, usize, usize) = (0.05, 0.1, 100_000, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = vec![0usize; bins];
    for _ in 0..samples {
        let xi: f64 = rng.sample(StandardNormal);
        let y = fold(x0 + t.sqrt() * xi);
        counts[((y * bins as f64) as usize).min(bins - 1)] += 1;
    }
    // bin probabilities by Simpson's rule on the kernel
    let params = KernelParams::default();
    let sub = 64;
    let probs: Vec<f64> = (0..bins)
        .map(|a| {
            let (lo, w) = (a as f64 / bins as f64, 1.0 / (bins * sub) as f64);
            (0..=sub)
                .map(|i| {
                    let c = if i == 0 || i == sub { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    c * eval_kernel(t, x0, lo + i as f64 * w, &params).unwrap()
                })
                .sum::<f64>()
                * w
                / 3.0
        })
        .collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| (c as f64 - samples as f64 * p).powi(2) / (samples as f64 * p))
        .sum();
    let p_value = common::chi_square_upper_tail(stat, bins - 1);
    assert!(p_value > 1e-3, "chi2 = {stat}, p = {p_value}");
}

#[test]
fn initial_positions_follow_the_density() {
    // u0 = 2x has CDF x²
    let profile = InitialProfile::Linear(0.0, 2.0);
    let config = SimConfig::new(5000, profile.sample(401).unwrap());
    let state = Simulator::new(&config).unwrap().init(0).unwrap();
    assert_eq!(state.alive(), 5000);
    let n = state.alive() as f64;
    let d = state
        .positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x * x;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at the 1% level
    assert!(d < 1.63 / n.sqrt(), "D = {d}");
}

#[test]
fn pruned_tail_is_negligible() {
    for n in [50, 400, 1600] {
        let rate = HeatKernelRate::new(n);
        let peak = rate.rate(0.5, 0.5);
        let edge = rate.rate(0.5, 0.5 + SimConfig::uniform(n, 1.0).cutoff_radius);
        assert!(edge <= (-16.0f64).exp() * peak * 1.0001, "N={n}: {edge} vs {peak}");
    }
}

#[test]
fn pure_diffusion_conserves_particles_and_uniformity() {
    let mut c = SimConfig::uniform(2000, 1.0).with_horizon(0.5, vec![0.0, 0.5]);
    c.annihilation = false;
    c.dt = 0.01;
    let snaps = Simulator::new(&c).unwrap().run(3).unwrap();
    assert_eq!(snaps[1].alive(), 2000);
    let n = 2000.0;
    let d = snaps[1]
        .positions
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(d < 1.63 / n.sqrt(), "D = {d}");
}

#[test]
fn particles_disappear_in_pairs() {
    let c = SimConfig::uniform(300, 1.0).with_horizon(0.5, vec![0.0, 0.1, 0.25, 0.5]);
    let sim = Simulator::new(&c).unwrap();
    for r in 0..5 {
        let snaps = sim.run(r).unwrap();
        let counts: Vec<usize> = snaps.iter().map(|s| s.alive()).collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]));
        assert!(counts.iter().all(|c| (300 - c) % 2 == 0), "{counts:?}");
        assert!(snaps.iter().all(|s| s.positions.windows(2).all(|w| w[0] <= w[1])));
        assert!(snaps.iter().all(|s| s.positions.iter().all(|x| (0.0..=1.0).contains(x))));
    }
}

proptest! {
    #[test]
    fn neighbour_scan_matches_brute_force(
        mut xs in prop::collection::vec(0.0f64..=1.0, 0..300),
        n in 10usize..2000,
    ) {
        xs.sort_by(f64::total_cmp);
        let rate = HeatKernelRate::new(n);
        let cutoff = SimConfig::uniform(n, 1.0).cutoff_radius;
        let fast = neighbor_pair_rates(&xs, cutoff, &rate);
        let slow = brute_force_pair_rates(&xs, cutoff, &rate);
        prop_assert_eq!(fast.len(), slow.len());
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert_eq!((a.0, a.1), (b.0, b.1));
            prop_assert!((a.2 - b.2).abs() <= 1e-12);
        }
    }

    #[test]
    fn fold_lands_in_the_interval(x in -100.0f64..100.0) {
        let y = fold(x);
        prop_assert!((0.0..=1.0).contains(&y));
        prop_assert!((fold(-x) - y).abs() < 1e-12);
        prop_assert!((fold(x + 2.0) - y).abs() < 1e-9);
    }
}
