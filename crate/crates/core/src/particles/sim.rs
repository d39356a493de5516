use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::config::SimConfig;
use super::neighbors::{for_each_close_pair, HeatKernelRate, NoInteraction, PairRate};
use crate::error::{domain, Result};
use crate::grid::GridFunction;
use crate::rng::{StreamKey, STEP_INIT, SUBSTREAM_DIFFUSION, SUBSTREAM_INIT, SUBSTREAM_MARKING, SUBSTREAM_ORDER};

/// Alive particles of one realisation, positions sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    pub positions: Vec<f64>,
    pub time: f64,
    pub initial_count: usize,
}

impl ParticleState {
    pub fn alive(&self) -> usize {
        self.positions.len()
    }

    pub fn is_extinct(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Map the real line onto `[0,1]` by the period-2 triangle wave. Applied to
/// `x + √t ξ` it samples the reflected Brownian transition exactly.
#[inline]
pub fn fold(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

/// Inverse-CDF sampler for a density given by linear interpolation of grid
/// values.
#[derive(Clone, Debug)]
pub struct DensitySampler {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    h: f64,
}

impl DensitySampler {
    pub fn new(density: &GridFunction) -> Result<Self> {
        if density.dim() != 1 || density.min_value() < 0.0 {
            return domain("sampling density must be a nonnegative 1-d function");
        }
        let h = density.spacing();
        let values = density.values().to_vec();
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return domain("initial density is identically zero");
        }
        Ok(Self { values, cumulative, h })
    }

    pub fn mass(&self) -> f64 {
        *self.cumulative.last().expect("nonempty")
    }

    /// Position with CDF value `q ∈ [0,1)`.
    pub fn quantile(&self, q: f64) -> f64 {
        let target = q * self.mass();
        let cell = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.values.len() - 1) - 1;
        let rem = target - self.cumulative[cell];
        let (a, b) = (self.values[cell], self.values[cell + 1]);
        // solve a s + (b - a) s² / (2h) = rem for s in [0, h]
        let slope = (b - a) / (2.0 * self.h);
        let disc = (a * a + 4.0 * slope * rem).max(0.0);
        let denom = a + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
        (cell as f64 * self.h + s.clamp(0.0, self.h)).clamp(0.0, 1.0)
    }
}

/// Receives the configurations around every step: before the step, after
/// diffusion (sorted, the configuration the annihilation decisions use),
/// and after annihilation.
pub trait StepObserver {
    fn observe(&mut self, step: usize, before: &[f64], diffused: &[f64], after: &[f64]);
}

/// Diffusion plus pairwise annihilation, discretised in time: every step
/// moves each particle by an exact reflected Brownian increment, then marks
/// each close pair with probability `1 - exp(-rate·dt)` and fires the marked
/// pairs in random order, skipping pairs with an already removed member.
pub struct Simulator<'a, R: PairRate = HeatKernelRate> {
    config: &'a SimConfig,
    rate: R,
    dt: f64,
}

impl<'a> Simulator<'a, HeatKernelRate> {
    pub fn new(config: &'a SimConfig) -> Result<Simulator<'a, HeatKernelRate>> {
        config.validate()?;
        Ok(Simulator { config, rate: HeatKernelRate::new(config.n), dt: config.step_size() })
    }
}

impl<'a, R: PairRate> Simulator<'a, R> {
    /// Simulator with an injected pair rate. The rate must follow the
    /// `(1/N)`-scaled contract of [`HeatKernelRate`].
    pub fn with_rate(config: &'a SimConfig, rate: R) -> Result<Self> {
        config.validate()?;
        Ok(Simulator { config, rate, dt: config.step_size() })
    }

    pub fn config(&self) -> &SimConfig {
        self.config
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn key(&self, replica: u64) -> StreamKey {
        StreamKey::new(self.config.seed, replica)
    }

    /// `round(N ∫u0)` particles drawn i.i.d. from `u0 / ∫u0`.
    pub fn init(&self, replica: u64) -> Result<ParticleState> {
        let sampler = DensitySampler::new(&self.config.u0)?;
        let count = (self.config.n as f64 * sampler.mass()).round() as usize;
        let mut rng = self.key(replica).stream(STEP_INIT, SUBSTREAM_INIT);
        let mut positions: Vec<f64> = (0..count).map(|_| sampler.quantile(rng.gen::<f64>())).collect();
        positions.sort_unstable_by(f64::total_cmp);
        Ok(ParticleState { positions, time: 0.0, initial_count: count })
    }

    fn diffuse(&self, positions: &mut [f64], replica: u64, step: u64) {
        let mut rng = self.key(replica).stream(step, SUBSTREAM_DIFFUSION);
        let sd = self.dt.sqrt();
        for x in positions.iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *x = fold(*x + sd * xi);
        }
        positions.sort_unstable_by(f64::total_cmp);
    }

    /// Pairs marked this step, as indices into the sorted `positions`.
    fn mark_pairs(&self, positions: &[f64], replica: u64, step: u64) -> Vec<(usize, usize)> {
        let mut rng = self.key(replica).stream(step, SUBSTREAM_MARKING);
        let dt = self.dt;
        let mut marked = Vec::new();
        // Independent marks with P = 1 - exp(-a) are drawn by accumulating
        // hazards a against Exp(1) thresholds, one draw per mark.
        let mut threshold: f64 = rng.sample(Exp1);
        let mut hazard = 0.0;
        for_each_close_pair(positions, self.config.cutoff_radius, |i, j| {
            hazard += self.rate.rate(positions[i], positions[j]) * dt;
            if hazard >= threshold {
                marked.push((i, j));
                hazard = 0.0;
                threshold = rng.sample(Exp1);
            }
        });
        marked
    }

    fn annihilate(&self, positions: &mut Vec<f64>, replica: u64, step: u64) {
        if !self.config.annihilation || positions.len() < 2 {
            return;
        }
        let mut marked = self.mark_pairs(positions, replica, step);
        if marked.is_empty() {
            return;
        }
        let mut rng = self.key(replica).stream(step, SUBSTREAM_ORDER);
        marked.shuffle(&mut rng);
        let mut alive = vec![true; positions.len()];
        for (i, j) in marked {
            if alive[i] && alive[j] {
                alive[i] = false;
                alive[j] = false;
            }
        }
        let mut idx = 0;
        positions.retain(|_| {
            idx += 1;
            alive[idx - 1]
        });
    }

    /// Advance by one step; `step` is the index of the step being taken.
    pub fn step(&self, state: &mut ParticleState, replica: u64, step: usize) {
        self.step_observed(state, replica, step, None::<&mut NullObserver>);
    }

    fn step_observed<O: StepObserver>(
        &self,
        state: &mut ParticleState,
        replica: u64,
        step: usize,
        observer: Option<&mut O>,
    ) {
        let before = observer.as_ref().map(|_| state.positions.clone());
        self.diffuse(&mut state.positions, replica, step as u64);
        let diffused = observer.as_ref().map(|_| state.positions.clone());
        self.annihilate(&mut state.positions, replica, step as u64);
        state.time = (step + 1) as f64 * self.dt;
        if let (Some(obs), Some(b), Some(d)) = (observer, before, diffused) {
            obs.observe(step, &b, &d, &state.positions);
        }
    }

    /// Snapshots at the configured record times (aligned to step boundaries).
    pub fn run(&self, replica: u64) -> Result<Vec<ParticleState>> {
        self.run_inner(replica, None::<&mut NullObserver>)
    }

    /// As [`Self::run`], reporting every step to `observer`.
    pub fn run_observed<O: StepObserver>(&self, replica: u64, observer: &mut O) -> Result<Vec<ParticleState>> {
        self.run_inner(replica, Some(observer))
    }

    fn run_inner<O: StepObserver>(&self, replica: u64, mut observer: Option<&mut O>) -> Result<Vec<ParticleState>> {
        let record_steps: Vec<usize> = self.config.record_times.iter().map(|&t| self.config.step_index(t)).collect();
        let mut snapshots = Vec::with_capacity(record_steps.len());
        let mut state = self.init(replica)?;
        let mut next = 0;
        let mut take = |k: usize, state: &ParticleState, snapshots: &mut Vec<ParticleState>| {
            while next < record_steps.len() && record_steps[next] == k {
                let mut s = state.clone();
                s.time = self.config.record_times[next];
                snapshots.push(s);
                next += 1;
            }
        };
        take(0, &state, &mut snapshots);
        let last = record_steps.last().copied().unwrap_or(0);
        for k in 0..last {
            self.step_observed(&mut state, replica, k, observer.as_deref_mut());
            take(k + 1, &state, &mut snapshots);
        }
        Ok(snapshots)
    }
}

struct NullObserver;

impl StepObserver for NullObserver {
    fn observe(&mut self, _: usize, _: &[f64], _: &[f64], _: &[f64]) {}
}

/// Configurations of every step of one replica.
#[derive(Clone, Debug, Default)]
pub struct DensePath {
    pub initial: Vec<f64>,
    /// Sorted positions after the diffusion part of each step.
    pub diffused: Vec<Vec<f64>>,
    /// Positions at the end of each step.
    pub after: Vec<Vec<f64>>,
}

impl StepObserver for DensePath {
    fn observe(&mut self, step: usize, before: &[f64], diffused: &[f64], after: &[f64]) {
        if step == 0 {
            self.initial = before.to_vec();
        }
        self.diffused.push(diffused.to_vec());
        self.after.push(after.to_vec());
    }
}

impl DensePath {
    pub fn steps(&self) -> usize {
        self.after.len()
    }

    /// Configuration at the start of step `k`.
    pub fn before(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.initial
        } else {
            &self.after[k - 1]
        }
    }
}

pub fn init_particles(config: &SimConfig, replica: u64) -> Result<ParticleState> {
    Simulator::new(config)?.init(replica)
}

pub fn step(state: &mut ParticleState, config: &SimConfig, replica: u64, step_index: usize) -> Result<()> {
    Simulator::new(config)?.step(state, replica, step_index);
    Ok(())
}

pub fn run(config: &SimConfig, replica: u64) -> Result<Vec<ParticleState>> {
    Simulator::new(config)?.run(replica)
}

/// Dense path of one replica; annihilation follows `config.annihilation`.
pub fn run_dense(config: &SimConfig, replica: u64) -> Result<(Vec<ParticleState>, DensePath)> {
    let mut path = DensePath::default();
    let snaps = if config.annihilation {
        Simulator::new(config)?.run_observed(replica, &mut path)?
    } else {
        Simulator::with_rate(config, NoInteraction)?.run_observed(replica, &mut path)?
    };
    Ok((snaps, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_a_reflection() {
        assert_eq!(fold(0.3), 0.3);
        assert!((fold(-0.3) - 0.3).abs() < 1e-15);
        assert!((fold(1.3) - 0.7).abs() < 1e-15);
        assert!((fold(2.3) - 0.3).abs() < 1e-15);
        assert!((fold(-1.7) - 0.3).abs() < 1e-15);
        assert_eq!(fold(1.0), 1.0);
    }

    #[test]
    fn initial_counts() {
        let c = SimConfig::uniform(100, 1.0);
        let s = init_particles(&c, 0).unwrap();
        assert_eq!(s.alive(), 100);
        assert!(s.positions.iter().all(|x| (0.0..=1.0).contains(x)));
        let c = SimConfig::uniform(100, 2.0);
        assert_eq!(init_particles(&c, 0).unwrap().alive(), 200);
        let c = SimConfig::uniform(100, 0.0);
        assert!(init_particles(&c, 0).is_err());
    }

    #[test]
    fn quantiles_of_linear_density() {
        let g = GridFunction::from_fn(11, |x| 2.0 * x).unwrap();
        let s = DensitySampler::new(&g).unwrap();
        for &q in &[0.0, 0.01, 0.25, 0.5, 0.81, 0.999] {
            // CDF x² ⇒ quantile √q
            assert!((s.quantile(q) - f64::sqrt(q)).abs() < 1e-12, "{q}");
        }
    }

    #[test]
    fn single_particle_never_annihilates() {
        let mut c = SimConfig::uniform(2, 0.5);
        c.t_end = 0.2;
        c.record_times = vec![0.0, 0.2];
        c.dt = 1e-3;
        let snaps = run(&c, 3).unwrap();
        assert_eq!(snaps[0].alive(), 1);
        assert_eq!(snaps[1].alive(), 1);
        assert!((0.0..=1.0).contains(&snaps[1].positions[0]));
    }

    #[test]
    fn parity_and_monotonicity() {
        let mut c = SimConfig::uniform(60, 1.0);
        c.t_end = 0.5;
        c.record_times = (0..=10).map(|i| i as f64 * 0.05).collect();
        for replica in 0..5 {
            let snaps = run(&c, replica).unwrap();
            for w in snaps.windows(2) {
                assert!(w[1].alive() <= w[0].alive());
            }
            for s in &snaps {
                assert_eq!((s.initial_count - s.alive()) % 2, 0);
                assert!(s.positions.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let c = SimConfig::uniform(50, 1.0);
        assert_eq!(run(&c, 7).unwrap(), run(&c, 7).unwrap());
        assert_ne!(run(&c, 7).unwrap(), run(&c, 8).unwrap());
    }

    #[test]
    fn dense_path_is_consistent_with_snapshots() {
        let mut c = SimConfig::uniform(40, 1.0).with_horizon(0.05, vec![0.0, 0.05]);
        c.dt = 0.01;
        let (snaps, path) = run_dense(&c, 1).unwrap();
        assert_eq!(path.steps(), 5);
        assert_eq!(path.before(0), snaps[0].positions.as_slice());
        assert_eq!(path.after.last().unwrap(), &snaps[1].positions);
        assert_eq!(snaps, run(&c, 1).unwrap());
    }
}
