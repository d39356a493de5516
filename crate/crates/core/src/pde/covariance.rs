//! Galerkin covariance of the fluctuation field.
//!
//! The limit field solves `dY = (½Δ − 2u) Y dt + dM` with Gaussian noise of
//! covariance rate `⟨∇φ·∇ψ, u⟩ + ⟨φψ, u²⟩`. Projected on the Neumann cosine
//! basis `e₀ = 1`, `eₙ = √2 cos(nπx)`, the covariance `C` of the
//! coefficients obeys `C' = AC + CAᵀ + Q` with `A = −Λ − 2U`.
//!
//! Each step of length `h` maps `C ↦ Φ C Φᵀ + (h/2)(Φ Q(t) Φᵀ + Q(t+h))`,
//! where `Φ = E (I + hB + h²B²/2) E`, `E = exp(−Λh/2)` and `B = −2U(t+h/2)`.
//! This is explicit, second order, and a congruence plus a sum of
//! congruences of positive semidefinite matrices, so `C` stays PSD.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;

use super::PdeSolution;
use crate::error::{domain, Result};
use crate::grid::{trapezoid_weights, GridFunction};

/// Covariance of the basis coefficients of `Y_t`.
#[derive(Clone, Debug)]
pub struct CovarianceState {
    pub basis_size: usize,
    pub cov: DMatrix<f64>,
    pub time: f64,
}

impl CovarianceState {
    /// `Var(Y_t(φ)) = φ̂ᵀ C φ̂` for basis coefficients `φ̂`.
    pub fn variance_of(&self, coefficients: &[f64]) -> f64 {
        let n = self.basis_size.min(coefficients.len());
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += coefficients[i] * self.cov[(i, j)] * coefficients[j];
            }
        }
        total
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.cov.clone().symmetric_eigen().eigenvalues.min()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.cov - self.cov.transpose()).amax()
    }
}

#[derive(Clone, Debug)]
pub struct CovarianceOptions {
    /// Covariance of `Y₀`; zero when `None`.
    pub initial: Option<DMatrix<f64>>,
    /// Weight of the reaction noise `⟨φψ, u²⟩`. The default 1 is the Gaussian
    /// limit as usually stated; each annihilation removes two particles, and
    /// the jump noise of the particle system itself has weight 2.
    pub reaction_noise: f64,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self { initial: None, reaction_noise: 1.0 }
    }
}

/// Basis coefficients `⟨φ, eₙ⟩` of a grid function (trapezoid rule).
pub fn basis_coefficients(phi: &GridFunction, basis_size: usize) -> Vec<f64> {
    let basis = Basis::new(phi.resolution(), basis_size);
    (0..basis_size)
        .map(|n| basis.weights.iter().zip(phi.values()).zip(&basis.values[n]).map(|((w, f), e)| w * f * e).sum())
        .collect()
}

struct Basis {
    weights: Vec<f64>,
    values: Vec<Vec<f64>>,
    gradients: Vec<Vec<f64>>,
}

impl Basis {
    fn new(resolution: usize, size: usize) -> Self {
        let xs: Vec<f64> = crate::grid::grid_points(resolution).collect();
        let values = (0..size)
            .map(|n| {
                xs.iter()
                    .map(|&x| if n == 0 { 1.0 } else { SQRT_2 * (n as f64 * PI * x).cos() })
                    .collect()
            })
            .collect();
        let gradients = (0..size)
            .map(|n| {
                let k = n as f64 * PI;
                xs.iter().map(|&x| -SQRT_2 * k * (k * x).sin()).collect()
            })
            .collect();
        Self { weights: trapezoid_weights(resolution), values, gradients }
    }

    fn size(&self) -> usize {
        self.values.len()
    }

    // ⟨a_m b_n, density⟩ for all (m, n)
    fn gram(&self, a: &[Vec<f64>], b: &[Vec<f64>], density: &[f64]) -> DMatrix<f64> {
        let n = self.size();
        let wd: Vec<f64> = self.weights.iter().zip(density).map(|(w, d)| w * d).collect();
        DMatrix::from_fn(n, n, |i, j| {
            a[i].iter().zip(&b[j]).zip(&wd).map(|((x, y), w)| x * y * w).sum()
        })
    }

    fn multiplication(&self, u: &GridFunction) -> DMatrix<f64> {
        self.gram(&self.values, &self.values, u.values())
    }

    fn noise(&self, u: &GridFunction, reaction_noise: f64) -> DMatrix<f64> {
        let u2: Vec<f64> = u.values().iter().map(|v| v * v).collect();
        let diffusive = self.gram(&self.gradients, &self.gradients, u.values());
        let reactive = self.gram(&self.values, &self.values, &u2);
        let q = diffusive + reactive * reaction_noise;
        (&q + q.transpose()) * 0.5
    }
}

pub fn solve_fluctuation_covariance(
    u: &PdeSolution,
    basis_size: usize,
    dt: f64,
) -> Result<Vec<CovarianceState>> {
    solve_fluctuation_covariance_with(u, basis_size, dt, &CovarianceOptions::default())
}

/// Evolve the coefficient covariance along the recorded solution `u` from
/// time 0 to its final time. Returns the state after every step, starting
/// with the initial one.
pub fn solve_fluctuation_covariance_with(
    u: &PdeSolution,
    basis_size: usize,
    dt: f64,
    options: &CovarianceOptions,
) -> Result<Vec<CovarianceState>> {
    if basis_size < 1 {
        return domain("basis size must be at least 1");
    }
    if !(dt > 0.0) {
        return domain(format!("time step must be positive, got {dt}"));
    }
    let t_end = u.final_time();
    let mut cov = match &options.initial {
        Some(c) if c.nrows() == basis_size && c.ncols() == basis_size => c.clone(),
        Some(_) => return domain("initial covariance has the wrong shape"),
        None => DMatrix::zeros(basis_size, basis_size),
    };
    let basis = Basis::new(u.resolution, basis_size);
    let mut out = vec![CovarianceState { basis_size, cov: cov.clone(), time: 0.0 }];
    if t_end <= 0.0 {
        return Ok(out);
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let lambda: Vec<f64> = (0..basis_size).map(|n| 0.5 * (n as f64 * PI).powi(2)).collect();
    let half_decay = DMatrix::from_fn(basis_size, basis_size, |i, j| {
        if i == j {
            (-lambda[i] * h / 2.0).exp()
        } else {
            0.0
        }
    });
    let identity = DMatrix::<f64>::identity(basis_size, basis_size);
    let mut q_prev = basis.noise(&u.interpolate_time(0.0), options.reaction_noise);
    for k in 0..steps {
        let t0 = k as f64 * h;
        let b = basis.multiplication(&u.interpolate_time(t0 + 0.5 * h)) * -2.0;
        let taylor = &identity + &b * h + (&b * &b) * (0.5 * h * h);
        let phi = &half_decay * taylor * &half_decay;
        let q_next = basis.noise(&u.interpolate_time(t0 + h), options.reaction_noise);
        let phi_t = phi.transpose();
        let mut next = &phi * &cov * &phi_t + (&phi * &q_prev * &phi_t + &q_next) * (0.5 * h);
        next = (&next + next.transpose()) * 0.5;
        cov = next;
        q_prev = q_next;
        out.push(CovarianceState { basis_size, cov: cov.clone(), time: t0 + h });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelParams;
    use crate::pde::solve_mild;

    fn homogeneous(c: f64, t_end: f64) -> PdeSolution {
        let u0 = GridFunction::constant(101, c).unwrap();
        solve_mild(&u0, t_end, 1e-3, &KernelParams::default()).unwrap()
    }

    // v' = -4uv + u², v(0) = 0, u = 1/(1+t)  ⇒  v = ((1+t)³ - 1) / (3(1+t)⁴)
    fn mass_variance(t: f64) -> f64 {
        ((1.0 + t).powi(3) - 1.0) / (3.0 * (1.0 + t).powi(4))
    }

    #[test]
    fn mass_variance_closed_form() {
        let sol = homogeneous(1.0, 1.0);
        let traj = solve_fluctuation_covariance(&sol, 8, 1e-3).unwrap();
        let last = traj.last().unwrap();
        assert!((last.time - 1.0).abs() < 1e-12);
        assert!((last.cov[(0, 0)] - 7.0 / 48.0).abs() < 1e-4, "{}", last.cov[(0, 0)]);
        let mid = &traj[500];
        assert!((mid.cov[(0, 0)] - mass_variance(0.5)).abs() < 1e-5);
    }

    #[test]
    fn doubled_reaction_noise_doubles_mass_variance() {
        let sol = homogeneous(1.0, 1.0);
        let options = CovarianceOptions { reaction_noise: 2.0, ..Default::default() };
        let traj = solve_fluctuation_covariance_with(&sol, 4, 1e-3, &options).unwrap();
        assert!((traj.last().unwrap().cov[(0, 0)] - 7.0 / 24.0).abs() < 1e-4);
    }

    #[test]
    fn zero_density_keeps_pure_decay() {
        let sol = homogeneous(0.0, 0.5);
        let traj = solve_fluctuation_covariance(&sol, 6, 1e-2).unwrap();
        assert!(traj.iter().all(|s| s.cov.amax() == 0.0));

        let c0 = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.2 });
        let options = CovarianceOptions { initial: Some(c0.clone()), ..Default::default() };
        let traj = solve_fluctuation_covariance_with(&sol, 3, 1e-2, &options).unwrap();
        let last = traj.last().unwrap();
        let l = |n: usize| 0.5 * (n as f64 * PI).powi(2);
        for i in 0..3 {
            for j in 0..3 {
                let expected = c0[(i, j)] * (-(l(i) + l(j)) * 0.5).exp();
                assert!((last.cov[(i, j)] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stays_symmetric_psd() {
        let u0 = GridFunction::from_fn(101, |x| 1.0 + 0.8 * (PI * x).cos()).unwrap();
        let sol = solve_mild(&u0, 0.5, 1e-3, &KernelParams::default()).unwrap();
        let traj = solve_fluctuation_covariance(&sol, 10, 1e-3).unwrap();
        for s in traj.iter().step_by(25) {
            assert!(s.asymmetry() == 0.0);
            assert!(s.min_eigenvalue() >= -1e-10, "t={} λmin={}", s.time, s.min_eigenvalue());
        }
    }

    #[test]
    fn basis_size_does_not_change_homogeneous_mass_variance() {
        let sol = homogeneous(1.0, 1.0);
        let a = solve_fluctuation_covariance(&sol, 16, 1e-3).unwrap();
        let b = solve_fluctuation_covariance(&sol, 32, 1e-3).unwrap();
        let va = a.last().unwrap().cov[(0, 0)];
        let vb = b.last().unwrap().cov[(0, 0)];
        assert!((va - vb).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        let sol = homogeneous(1.0, 0.1);
        assert!(solve_fluctuation_covariance(&sol, 0, 1e-3).is_err());
        assert!(solve_fluctuation_covariance(&sol, 4, 0.0).is_err());
    }

    #[test]
    fn coefficients_of_basis_functions() {
        let phi = GridFunction::from_fn(401, |x| SQRT_2 * (PI * x).cos()).unwrap();
        let c = basis_coefficients(&phi, 3);
        assert!(c[0].abs() < 1e-12);
        assert!((c[1] - 1.0).abs() < 1e-5);
        assert!(c[2].abs() < 1e-12);
    }
}
