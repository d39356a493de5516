//! Deterministic limits: the reaction-diffusion equation `∂ₜu = ½Δu − u²`
//! with Neumann boundary, its kernel-smoothed finite-`N` variant, and the
//! covariance of the linear fluctuation SPDE.

mod covariance;

use std::io::Write;

pub use covariance::{
    basis_coefficients, solve_fluctuation_covariance, solve_fluctuation_covariance_with, CovarianceOptions,
    CovarianceState,
};

use crate::error::{domain, Result};
use crate::grid::GridFunction;
use crate::kernel::{KernelParams, SemigroupOperator};
use crate::report::SCHEMA_HEADER;

/// A solution sampled at `times[i]`, one grid slice per time.
#[derive(Clone, Debug)]
pub struct PdeSolution {
    pub times: Vec<f64>,
    pub slices: Vec<GridFunction>,
    pub resolution: usize,
    pub dt: f64,
}

impl PdeSolution {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("solution has at least the initial slice")
    }

    pub fn last(&self) -> &GridFunction {
        self.slices.last().expect("solution has at least the initial slice")
    }

    /// Index of the slice whose time is closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.times.len() - 1)
    }

    /// The slice recorded closest to `t`, or an error if `t` is off the grid
    /// by more than a rounding tolerance.
    pub fn slice_at(&self, t: f64) -> Result<&GridFunction> {
        let i = self.index_near(t);
        if (self.times[i] - t).abs() > 1e-9 * self.dt.max(1.0) {
            return domain(format!("time {t} is not on the solution grid"));
        }
        Ok(&self.slices[i])
    }

    /// Linear interpolation in time between neighbouring slices.
    pub fn interpolate_time(&self, t: f64) -> GridFunction {
        let pos = (t / self.dt).clamp(0.0, (self.times.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.times.len().saturating_sub(2));
        if self.times.len() == 1 {
            return self.slices[0].clone();
        }
        let frac = pos - i as f64;
        self.slices[i]
            .zip_with(&self.slices[i + 1], |a, b| a * (1.0 - frac) + b * frac)
            .expect("slices share a grid")
    }

    /// `∫u(t,x)dx` for every recorded time.
    pub fn masses(&self) -> Vec<f64> {
        self.slices.iter().map(GridFunction::integral).collect()
    }

    /// Write `t,x,u` rows for every `stride`-th time slice.
    pub fn write_csv<W: Write>(&self, out: &mut W, stride: usize) -> Result<()> {
        writeln!(out, "{SCHEMA_HEADER}")?;
        writeln!(out, "t,x,u")?;
        let stride = stride.max(1);
        for (i, (t, u)) in self.times.iter().zip(&self.slices).enumerate() {
            if i % stride != 0 && i + 1 != self.times.len() {
                continue;
            }
            for (x, v) in u.points().zip(u.values()) {
                writeln!(out, "{t},{x},{v}")?;
            }
        }
        Ok(())
    }
}

fn check_inputs(u0: &GridFunction, t_end: f64, dt: f64) -> Result<usize> {
    if u0.dim() != 1 {
        return domain("initial condition must be one-dimensional");
    }
    if u0.min_value() < 0.0 {
        return domain("initial condition must be nonnegative");
    }
    if !(dt > 0.0) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    if !(t_end > 0.0) {
        return domain(format!("horizon must be positive, got {t_end}"));
    }
    if dt > t_end * (1.0 + 1e-12) {
        return domain(format!("time step {dt} exceeds horizon {t_end}"));
    }
    Ok(((t_end / dt) - 1e-9).ceil() as usize)
}

/// Exact flow of `u' = -c u` with the rate `c` frozen over time `s`, written
/// in the rational form `u / (1 + c s)`, which is the exact flow of `u' = -u²`
/// when `c = u`.
#[inline]
fn react(u: f64, rate: f64, s: f64) -> f64 {
    u / (1.0 + rate * s)
}

fn strang<F>(u0: &GridFunction, t_end: f64, dt: f64, params: &KernelParams, mut reaction: F) -> Result<PdeSolution>
where
    F: FnMut(&GridFunction, f64) -> Result<GridFunction>,
{
    let steps = check_inputs(u0, t_end, dt)?;
    let step = t_end / steps as f64;
    let diffusion = SemigroupOperator::new(step, u0.resolution(), params)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut slices = Vec::with_capacity(steps + 1);
    times.push(0.0);
    slices.push(u0.clone());
    let mut u = u0.clone();
    for k in 1..=steps {
        u = reaction(&u, 0.5 * step)?;
        u = diffusion.apply(&u)?;
        u = reaction(&u, 0.5 * step)?;
        times.push(k as f64 * step);
        slices.push(u.clone());
    }
    Ok(PdeSolution { times, slices, resolution: u0.resolution(), dt: step })
}

/// Mild solution of `∂ₜu = ½Δu − u²` (Neumann) by Strang splitting: half a
/// step of the exact reaction flow, a full step of `P_dt`, half a reaction
/// step. The step is shrunk, if needed, so that it divides `t_end`.
pub fn solve_mild(u0: &GridFunction, t_end: f64, dt: f64, params: &KernelParams) -> Result<PdeSolution> {
    strang(u0, t_end, dt, params, |u, s| Ok(u.map(|v| react(v, v, s))))
}

/// Solution `u_N` of `∂ₜu = ½Δu − u·(K_N u)` with the smoothing
/// `(K_N f)(x) = ∫ p(2/N², x, z) f(z) dz`. The products `∏ u_N(t, xᵢ)` solve
/// the correlation hierarchy without the `1/N` pair term.
///
/// The reaction sub-step freezes the smoothed field `K_N u` at the start of
/// each half step.
pub fn solve_smoothed(
    u0: &GridFunction,
    t_end: f64,
    dt: f64,
    n: usize,
    params: &KernelParams,
) -> Result<PdeSolution> {
    if n < 2 {
        return domain(format!("N must be at least 2, got {n}"));
    }
    let scale = 2.0 / (n as f64).powi(2);
    let smoothing = SemigroupOperator::new(scale, u0.resolution(), params)?;
    strang(u0, t_end, dt, params, |u, s| {
        let field = smoothing.apply(u)?;
        u.zip_with(&field, |v, c| react(v, c, s))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> KernelParams {
        KernelParams::default()
    }

    #[test]
    fn homogeneous_decay_matches_closed_form() {
        let u0 = GridFunction::constant(401, 1.0).unwrap();
        let sol = solve_mild(&u0, 1.0, 1e-3, &params()).unwrap();
        assert!(sol.last().values().iter().all(|v| (v - 0.5).abs() < 1e-5));
        assert_eq!(sol.times.len(), 1001);
        assert_eq!(sol.times.len(), sol.slices.len());

        let eps = 1e-4;
        let u0 = GridFunction::constant(401, eps).unwrap();
        let sol = solve_mild(&u0, 1.0, 1e-3, &params()).unwrap();
        let exact = eps / (1.0 + eps);
        assert!(sol.last().values().iter().all(|v| (v - exact).abs() < 1e-9));
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let u0 = GridFunction::constant(51, 0.0).unwrap();
        for sol in [
            solve_mild(&u0, 0.5, 0.01, &params()).unwrap(),
            solve_smoothed(&u0, 0.5, 0.01, 50, &params()).unwrap(),
        ] {
            assert!(sol.slices.iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let neg = GridFunction::from_fn(11, |x| x - 0.5).unwrap();
        assert!(solve_mild(&neg, 1.0, 0.1, &params()).is_err());
        let u0 = GridFunction::constant(11, 1.0).unwrap();
        assert!(solve_mild(&u0, 1.0, 0.0, &params()).is_err());
        assert!(solve_mild(&u0, 1.0, -0.1, &params()).is_err());
        assert!(solve_mild(&u0, 0.1, 0.2, &params()).is_err());
        assert!(solve_smoothed(&u0, 1.0, 0.1, 1, &params()).is_err());
    }

    #[test]
    fn smoothed_constant_tracks_mild() {
        let u0 = GridFunction::constant(401, 1.0).unwrap();
        let sol = solve_smoothed(&u0, 1.0, 1e-3, 200, &params()).unwrap();
        assert!(sol.last().values().iter().all(|v| (v - 0.5).abs() <= 0.01));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let u0 = GridFunction::constant(3, 1.0).unwrap();
        let sol = solve_mild(&u0, 0.2, 0.1, &params()).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SCHEMA_HEADER);
        assert_eq!(lines[1], "t,x,u");
        assert_eq!(lines.len(), 2 + 3 * 3);
    }
}
