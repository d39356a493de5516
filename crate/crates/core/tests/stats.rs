use proptest::prelude::*;
use rbm_annihilation::particles::{ParticleState, SimConfig};
use rbm_annihilation::stats::{
    correlation_from_states, estimate_correlation, fluctuation_variance, martingale_check_streaming,
    moment_identity_check, tuple_counts, Execution, Normalizer, ReplicaEnsemble,
};
use rbm_annihilation::GridFunction;
use std::f64::consts::{PI, SQRT_2};

fn ensemble(n: usize, replicas: usize, t: f64) -> ReplicaEnsemble {
    let mut c = SimConfig::uniform(n, 1.0).with_horizon(t, vec![0.0, t]);
    c.dt = 0.005;
    c.seed = 11;
    ReplicaEnsemble::run(&c, replicas, Execution::Parallel).unwrap()
}

#[test]
fn first_order_histogram_integrates_to_the_mass() {
    let ens = ensemble(200, 12, 0.5);
    let f1 = estimate_correlation(&ens, 1, 0.5, 20).unwrap();
    let mass = ens.states_at(0.5).unwrap().iter().map(|s| s.alive() as f64 / 200.0).sum::<f64>() / 12.0;
    assert!((f1.total() - mass).abs() < 1e-12, "{} vs {mass}", f1.total());
}

#[test]
fn pair_histogram_is_symmetric_and_counts_ordered_pairs() {
    let ens = ensemble(200, 6, 0.5);
    let f2 = estimate_correlation(&ens, 2, 0.5, 10).unwrap();
    for a in 0..10 {
        for b in 0..10 {
            assert_eq!(f2.values[a * 10 + b], f2.values[b * 10 + a]);
        }
    }
    // total = mean m(m−1) / (N(N−1))
    let expect = ens
        .states_at(0.5)
        .unwrap()
        .iter()
        .map(|s| (s.alive() * s.alive().saturating_sub(1)) as f64 / (200.0 * 199.0))
        .sum::<f64>()
        / 6.0;
    assert!((f2.total() - expect).abs() < 1e-12);
}

#[test]
fn power_normaliser_differs_by_the_falling_factorial_ratio() {
    let ens = ensemble(50, 4, 0.2);
    let a = estimate_correlation(&ens, 2, 0.2, 5).unwrap();
    let states = ens.states_at(0.2).unwrap();
    let b = correlation_from_states(&states, 50, 2, 0.2, 5, Normalizer::Power).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x * 49.0 / 50.0 - y).abs() < 1e-12);
    }
}

#[test]
fn initial_fluctuation_of_a_unit_mode_is_one() {
    // i.i.d. uniform start: N · Var⟨𝒳₀, √2 cos πx⟩ = ∫ 2cos² πx = 1
    let ens = ensemble(100, 3000, 0.01);
    let phi = GridFunction::from_fn(801, |x| SQRT_2 * (PI * x).cos()).unwrap();
    let v = fluctuation_variance(&ens, &phi, 0.0).unwrap();
    assert!((v.variance - 1.0).abs() < 3.0 * v.standard_error, "{} ± {}", v.variance, v.standard_error);
    let one = GridFunction::constant(11, 1.0).unwrap();
    assert_eq!(fluctuation_variance(&ens, &one, 0.0).unwrap().variance, 0.0);
}

#[test]
fn moment_identity_holds_for_a_smooth_function() {
    let ens = ensemble(100, 200, 0.3);
    let phi = GridFunction::from_fn(401, |x| 1.0 + x * x).unwrap();
    let m = moment_identity_check(&ens, &phi, 0.3, 40).unwrap();
    // binning error of φ is second order in the bin width
    assert!(m.zscore.abs() < 4.0 || (m.lhs - m.rhs).abs() < 1e-3, "{m:?}");
}

#[test]
fn pure_diffusion_martingale_variance() {
    // no annihilation: Var M_t = t ∫ |∇φ|² / N = t π² / (2N) for cos πx, uniform density
    let (n, t, r) = (200, 0.2, 600);
    let mut c = SimConfig::uniform(n, 1.0).with_horizon(t, vec![0.0, t]);
    c.annihilation = false;
    c.dt = 0.005;
    let phi = GridFunction::from_fn(801, |x| (PI * x).cos()).unwrap();
    let rep = martingale_check_streaming(&c, r, &phi, t, Execution::Parallel).unwrap();
    let exact = t * PI * PI / (2.0 * n as f64);
    assert!((rep.qv_mean - exact).abs() < 0.05 * exact, "{} vs {exact}", rep.qv_mean);
    let se = rep.var_m * (2.0 / (r as f64 - 1.0)).sqrt();
    assert!((rep.var_m - exact).abs() < 4.0 * se, "{} vs {exact}", rep.var_m);
    assert!(rep.mean_z.abs() < 4.0);
}

#[test]
fn extinct_replicas_give_zero_estimates() {
    let c = SimConfig::uniform(10, 1.0).with_horizon(1.0, vec![0.0, 1.0]);
    let empty = ParticleState { positions: vec![], time: 1.0, initial_count: 10 };
    let start = ParticleState { positions: (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect(), time: 0.0, initial_count: 10 };
    let ens = ReplicaEnsemble::from_replicas(c, vec![vec![start.clone(), empty.clone()]; 3]).unwrap();
    let f2 = estimate_correlation(&ens, 2, 1.0, 4).unwrap();
    assert!(f2.values.iter().all(|&v| v == 0.0));
    let one = GridFunction::constant(11, 1.0).unwrap();
    let m = moment_identity_check(&ens, &one, 1.0, 4).unwrap();
    assert_eq!((m.lhs, m.rhs, m.zscore), (0.0, 0.0, 0.0));
    assert_eq!(fluctuation_variance(&ens, &one, 1.0).unwrap().variance, 0.0);
    assert!(estimate_correlation(&ens, 3, 1.0, 4).is_err());
    assert!(estimate_correlation(&ens, 1, 0.5, 4).is_err());
}

proptest! {
    #[test]
    fn tuple_counts_are_permutation_invariant(
        xs in prop::collection::vec(0.0f64..=1.0, 0..60),
        seed in any::<u64>(),
        bins in 1usize..8,
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for k in 1..=2 {
            prop_assert_eq!(tuple_counts(&xs, k, bins).unwrap(), tuple_counts(&shuffled, k, bins).unwrap());
        }
        let m = xs.len() as f64;
        prop_assert_eq!(tuple_counts(&xs, 2, bins).unwrap().iter().sum::<f64>(), m * (m - 1.0));
    }
}
