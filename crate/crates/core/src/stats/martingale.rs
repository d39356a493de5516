//! Dynkin martingale of `⟨𝒳^N_t, φ⟩` and its predictable quadratic
//! variation, accumulated step by step along a path.
//!
//! For one step of length `dt` starting from the configuration `S` with
//! post-diffusion configuration `D`, the compensator increment is
//!
//! ```text
//! dt · ( ⟨S, ½Δφ⟩ − (1/N) Σ_{i<j in D} r(xⁱ,xʲ) (φ(xⁱ) + φ(xʲ)) )
//! ```
//!
//! with `r = (1/N) p(2/N², ·, ·)`, and the quadratic variation increment is
//!
//! ```text
//! dt · ( (1/N²) Σ_{i in S} |∇φ(xⁱ)|² + (1/N²) Σ_{i<j in D} r(xⁱ,xʲ) (φ(xⁱ) + φ(xʲ))² ).
//! ```
//!
//! The pair sum runs over the pairs the simulator considers, i.e. within
//! the cutoff radius.

use super::ensemble::{map_replicas, Execution};
use super::{mean_and_se, zscore};
use crate::error::{domain, Result};
use crate::grid::GridFunction;
use crate::particles::{for_each_close_pair, DensePath, HeatKernelRate, PairRate, SimConfig, Simulator, StepObserver};
use crate::report::ReportRow;

/// `M_t` and `⟨M⟩_t` of one replica.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MartingaleSample {
    pub m: f64,
    pub qv: f64,
}

pub struct MartingaleAccumulator<'a> {
    phi: &'a GridFunction,
    half_laplacian: GridFunction,
    grad_sq: GridFunction,
    n: f64,
    dt: f64,
    cutoff: f64,
    annihilation: bool,
    rate: HeatKernelRate,
    steps: usize,
    initial: Option<f64>,
    current: f64,
    compensator: f64,
    qv: f64,
    scratch: Vec<f64>,
}

impl<'a> MartingaleAccumulator<'a> {
    /// Accumulate over the steps that end at or before `t`.
    pub fn new(config: &SimConfig, phi: &'a GridFunction, t: f64) -> Result<Self> {
        if phi.dim() != 1 || phi.resolution() < 3 {
            return domain("test function must be 1-d with at least 3 grid points");
        }
        let grad = phi.gradient();
        Ok(Self {
            phi,
            half_laplacian: phi.neumann_laplacian().map(|v| 0.5 * v),
            grad_sq: grad.map(|v| v * v),
            n: config.n as f64,
            dt: config.step_size(),
            cutoff: config.cutoff_radius,
            annihilation: config.annihilation,
            rate: HeatKernelRate::new(config.n),
            steps: config.step_index(t),
            initial: None,
            current: 0.0,
            compensator: 0.0,
            qv: 0.0,
            scratch: Vec::new(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn finish(&self) -> MartingaleSample {
        match self.initial {
            Some(x0) => MartingaleSample { m: self.current - x0 - self.compensator, qv: self.qv },
            None => MartingaleSample { m: 0.0, qv: 0.0 },
        }
    }
}

impl StepObserver for MartingaleAccumulator<'_> {
    fn observe(&mut self, step: usize, before: &[f64], diffused: &[f64], after: &[f64]) {
        if step >= self.steps {
            return;
        }
        let n = self.n;
        if step == 0 {
            self.initial = Some(before.iter().map(|&x| self.phi.interpolate(x)).sum::<f64>() / n);
        }
        let drift = before.iter().map(|&x| self.half_laplacian.interpolate(x)).sum::<f64>() / n;
        let diffusion_qv = before.iter().map(|&x| self.grad_sq.interpolate(x)).sum::<f64>() / (n * n);
        let (mut loss, mut jump_qv) = (0.0, 0.0);
        if self.annihilation {
            self.scratch.clear();
            self.scratch.extend(diffused.iter().map(|&x| self.phi.interpolate(x)));
            let phis = &self.scratch;
            let rate = &self.rate;
            for_each_close_pair(diffused, self.cutoff, |i, j| {
                let r = rate.rate(diffused[i], diffused[j]);
                let s = phis[i] + phis[j];
                loss += r * s;
                jump_qv += r * s * s;
            });
        }
        self.compensator += self.dt * (drift - loss / n);
        self.qv += self.dt * (diffusion_qv + jump_qv / (n * n));
        self.current = after.iter().map(|&x| self.phi.interpolate(x)).sum::<f64>() / n;
    }
}

/// Replica statistics of `M_t` against its quadratic variation.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleReport {
    pub t: f64,
    pub replicas: usize,
    pub mean_m: f64,
    pub mean_m_se: f64,
    /// Unbiased sample variance of `M_t`.
    pub var_m: f64,
    pub qv_mean: f64,
    /// Mean of `M_t² − ⟨M⟩_t`, zero for a martingale.
    pub qv_gap: f64,
    pub qv_gap_se: f64,
    pub mean_z: f64,
    pub qv_z: f64,
    pub samples: Vec<MartingaleSample>,
}

impl MartingaleReport {
    pub fn from_samples(samples: Vec<MartingaleSample>, t: f64) -> Result<Self> {
        if samples.len() < 2 {
            return domain("need at least 2 replicas");
        }
        let ms: Vec<f64> = samples.iter().map(|s| s.m).collect();
        let qvs: Vec<f64> = samples.iter().map(|s| s.qv).collect();
        let gaps: Vec<f64> = samples.iter().map(|s| s.m * s.m - s.qv).collect();
        let (mean_m, mean_m_se) = mean_and_se(&ms);
        let (qv_mean, _) = mean_and_se(&qvs);
        let (qv_gap, qv_gap_se) = mean_and_se(&gaps);
        let r = ms.len() as f64;
        let var_m = ms.iter().map(|m| (m - mean_m).powi(2)).sum::<f64>() / (r - 1.0);
        Ok(Self {
            t,
            replicas: samples.len(),
            mean_m,
            mean_m_se,
            var_m,
            qv_mean,
            qv_gap,
            qv_gap_se,
            mean_z: zscore(mean_m, mean_m_se),
            qv_z: zscore(qv_gap, qv_gap_se),
            samples,
        })
    }

    pub fn rows(&self, name: &str) -> Vec<ReportRow> {
        let t = Some(self.t);
        vec![
            ReportRow::scalar(format!("{name}_mean"), t, self.mean_m).with_error(self.mean_m_se, self.mean_z),
            ReportRow::scalar(format!("{name}_var"), t, self.var_m),
            ReportRow::scalar(format!("{name}_qv_mean"), t, self.qv_mean),
            ReportRow::scalar(format!("{name}_qv_gap"), t, self.qv_gap).with_error(self.qv_gap_se, self.qv_z),
        ]
    }
}

/// Martingale check on recorded dense paths.
pub fn martingale_check(paths: &[DensePath], config: &SimConfig, phi: &GridFunction, t: f64) -> Result<MartingaleReport> {
    if paths.is_empty() {
        return domain("martingale check needs dense paths; none were recorded");
    }
    let samples = paths
        .iter()
        .map(|p| {
            let mut acc = MartingaleAccumulator::new(config, phi, t)?;
            if p.steps() < acc.steps() {
                return domain(format!("dense path has {} steps, need {}", p.steps(), acc.steps()));
            }
            for k in 0..acc.steps() {
                acc.observe(k, p.before(k), &p.diffused[k], &p.after[k]);
            }
            Ok(acc.finish())
        })
        .collect::<Result<Vec<_>>>()?;
    MartingaleReport::from_samples(samples, t)
}

impl<O: StepObserver> StepObserver for Vec<O> {
    fn observe(&mut self, step: usize, before: &[f64], diffused: &[f64], after: &[f64]) {
        for o in self.iter_mut() {
            o.observe(step, before, diffused, after);
        }
    }
}

/// Martingale check computed while simulating, without storing paths.
/// Gives the same result as [`martingale_check`] on the same replicas.
pub fn martingale_check_streaming(
    config: &SimConfig,
    replicas: usize,
    phi: &GridFunction,
    t: f64,
    execution: Execution,
) -> Result<MartingaleReport> {
    let mut reports = martingale_check_streaming_many(config, replicas, &[phi], t, execution)?;
    Ok(reports.remove(0))
}

/// As [`martingale_check_streaming`] for several test functions on the
/// same simulated paths.
pub fn martingale_check_streaming_many(
    config: &SimConfig,
    replicas: usize,
    phis: &[&GridFunction],
    t: f64,
    execution: Execution,
) -> Result<Vec<MartingaleReport>> {
    let mut cfg = config.clone();
    cfg.record_times = vec![0.0, t];
    let sim = Simulator::new(&cfg)?;
    let per_replica = map_replicas(replicas, execution, |r| {
        let mut accs = phis
            .iter()
            .map(|phi| MartingaleAccumulator::new(&cfg, phi, t))
            .collect::<Result<Vec<_>>>()?;
        sim.run_observed(r, &mut accs)?;
        Ok(accs.iter().map(MartingaleAccumulator::finish).collect::<Vec<_>>())
    })?;
    (0..phis.len())
        .map(|i| MartingaleReport::from_samples(per_replica.iter().map(|s| s[i]).collect(), t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::run_dense;

    #[test]
    fn vanishes_without_annihilation_for_constant() {
        let mut c = SimConfig::uniform(50, 1.0).with_horizon(0.1, vec![0.0, 0.1]);
        c.dt = 0.01;
        c.annihilation = false;
        let one = GridFunction::constant(21, 1.0).unwrap();
        let rep = martingale_check_streaming(&c, 4, &one, 0.1, Execution::Serial).unwrap();
        assert!(rep.samples.iter().all(|s| s.m.abs() < 1e-14));
    }

    #[test]
    fn dense_and_streaming_agree() {
        let mut c = SimConfig::uniform(40, 1.0).with_horizon(0.05, vec![0.0, 0.05]);
        c.dt = 0.005;
        c.seed = 3;
        let phi = GridFunction::from_fn(101, |x| (std::f64::consts::PI * x).cos()).unwrap();
        let paths: Vec<DensePath> = (0..3).map(|r| run_dense(&c, r).unwrap().1).collect();
        let a = martingale_check(&paths, &c, &phi, 0.05).unwrap();
        let b = martingale_check_streaming(&c, 3, &phi, 0.05, Execution::Serial).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(martingale_check(&[], &c, &phi, 0.05).is_err());
    }
}
