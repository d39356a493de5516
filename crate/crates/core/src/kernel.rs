//! Transition density of reflected Brownian motion on `[0,1]`.
//!
//! The generator is `½Δ` with Neumann boundary conditions, so the free
//! Gaussian has variance `t` and the cosine modes decay as `exp(-n²π²t/2)`.
//! Short times use the method of images, long times the cosine series.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::error::{domain, Result};
use crate::grid::{trapezoid_weights, GridFunction};

/// Truncation and method-selection settings for the Neumann heat kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    /// Images `n` with `|n| <= image_terms` are summed.
    pub image_terms: usize,
    /// Cosine modes `1..=spectral_terms` are summed.
    pub spectral_terms: usize,
    /// Below this time the image sum is used, above it the cosine series.
    pub crossover_time: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { image_terms: 8, spectral_terms: 400, crossover_time: 0.1 }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if self.image_terms < 1 || self.spectral_terms < 1 {
            return domain("kernel truncation orders must be at least 1");
        }
        if !(self.crossover_time > 0.0) {
            return domain(format!("crossover time must be positive, got {}", self.crossover_time));
        }
        Ok(())
    }

    fn uses_images(&self, t: f64) -> bool {
        t < self.crossover_time
    }
}

// exp(-746) is exactly zero in f64; skipping such terms changes nothing.
const UNDERFLOW_EXPONENT: f64 = 746.0;

/// Centered Gaussian density of variance `t` at `z`.
#[inline]
pub fn gaussian(z: f64, t: f64) -> f64 {
    let e = z * z / (2.0 * t);
    if e > UNDERFLOW_EXPONENT {
        0.0
    } else {
        (-e).exp() / (2.0 * PI * t).sqrt()
    }
}

/// Method-of-images sum `Σ_{|n|<=terms} [g_t(x-y-2n) + g_t(x+y-2n)]`.
pub fn image_sum(t: f64, x: f64, y: f64, terms: usize) -> f64 {
    let d = x - y;
    let s = x + y;
    let mut total = gaussian(d, t) + gaussian(s, t);
    for n in 1..=terms {
        let shift = 2.0 * n as f64;
        total += gaussian(d - shift, t) + gaussian(d + shift, t);
        total += gaussian(s - shift, t) + gaussian(s + shift, t);
    }
    total
}

fn mode_decay(n: usize, t: f64) -> f64 {
    let k = n as f64 * PI;
    (-0.5 * k * k * t).exp()
}

// Once a mode's decay factor drops below this, the remaining tail is below
// f64 resolution of the leading term 1.
const SPECTRAL_TAIL: f64 = 1e-20;

/// Cosine series `1 + 2 Σ_{n=1}^{terms} exp(-n²π²t/2) cos(nπx) cos(nπy)`.
pub fn spectral_sum(t: f64, x: f64, y: f64, terms: usize) -> f64 {
    let mut total = 1.0;
    for n in 1..=terms {
        let decay = mode_decay(n, t);
        if decay < SPECTRAL_TAIL {
            break;
        }
        let k = n as f64 * PI;
        total += 2.0 * decay * (k * x).cos() * (k * y).cos();
    }
    total
}

/// `p(t,x,y)` for reflected Brownian motion on `[0,1]`.
pub fn eval_kernel(t: f64, x: f64, y: f64, params: &KernelParams) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("kernel time must be positive, got {t}"));
    }
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return domain(format!("kernel arguments must lie in [0,1], got ({x}, {y})"));
    }
    Ok(if params.uses_images(t) {
        image_sum(t, x, y, params.image_terms)
    } else {
        spectral_sum(t, x, y, params.spectral_terms)
    })
}

/// `p(t,x,y) = G(x-y) + G(x+y)` for an even, 2-periodic profile `G`.
/// Evaluates `G` at `z` with the method chosen for `t`.
fn profile(t: f64, z: f64, params: &KernelParams) -> f64 {
    if params.uses_images(t) {
        let mut total = gaussian(z, t);
        for n in 1..=params.image_terms {
            let shift = 2.0 * n as f64;
            total += gaussian(z - shift, t) + gaussian(z + shift, t);
        }
        total
    } else {
        let mut total = 0.5;
        for n in 1..=params.spectral_terms {
            let decay = mode_decay(n, t);
            if decay < SPECTRAL_TAIL {
                break;
            }
            total += decay * (n as f64 * PI * z).cos();
        }
        total
    }
}

/// Quadrature matrix of `P_t` on a uniform grid: `(P_t f)(x_i) ≈ Σ_j K_ij f_j`
/// with `K_ij = p(t, x_i, x_j) w_j` and `w` the trapezoid weights.
#[derive(Clone, Debug)]
pub struct SemigroupOperator {
    time: f64,
    resolution: usize,
    // None encodes the identity (t = 0)
    matrix: Option<DMatrix<f64>>,
}

impl SemigroupOperator {
    pub fn new(t: f64, resolution: usize, params: &KernelParams) -> Result<Self> {
        params.validate()?;
        if !(t >= 0.0) {
            return domain(format!("semigroup time must be nonnegative, got {t}"));
        }
        if resolution < 2 {
            return domain("semigroup grid needs at least 2 points");
        }
        if t == 0.0 {
            return Ok(Self { time: t, resolution, matrix: None });
        }
        let r = resolution;
        let h = 1.0 / (r - 1) as f64;
        // offsets k = i - j in [-(r-1), r-1] and k = i + j in [0, 2(r-1)]
        let g: Vec<f64> = (0..=2 * (r - 1)).map(|k| profile(t, k as f64 * h, params)).collect();
        let w = trapezoid_weights(r);
        let matrix = DMatrix::from_fn(r, r, |i, j| {
            let d = i.abs_diff(j);
            (g[d] + g[i + j]) * w[j]
        });
        Ok(Self { time: t, resolution, matrix: Some(matrix) })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Apply to a 1-d function or, as the tensor kernel `p ⊗ p`, to a 2-d one.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.resolution() != self.resolution {
            return domain(format!(
                "operator built for resolution {}, function has {}",
                self.resolution,
                f.resolution()
            ));
        }
        let Some(k) = &self.matrix else {
            return Ok(f.clone());
        };
        let r = self.resolution;
        let values = match f.dim() {
            1 => (k * DVector::from_column_slice(f.values())).as_slice().to_vec(),
            _ => {
                let fv = DMatrix::from_row_slice(r, r, f.values());
                // column-major storage of the transpose is the row-major layout
                (k * fv * k.transpose()).transpose().as_slice().to_vec()
            }
        };
        GridFunction::new(f.dim(), r, values)
    }
}

/// `(P_t f)(x) = ∫ p(t,x,y) f(y) dy` on the grid of `f` (trapezoid rule).
/// Two-dimensional inputs get the tensor kernel `p(t,x₁,y₁) p(t,x₂,y₂)`.
pub fn apply_semigroup(t: f64, f: &GridFunction, params: &KernelParams) -> Result<GridFunction> {
    if !(t >= 0.0) {
        return domain(format!("semigroup time must be nonnegative, got {t}"));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    SemigroupOperator::new(t, f.resolution(), params)?.apply(f)
}

fn std_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

// Second antiderivative of the centered Gaussian density with standard deviation `sd`.
fn gaussian_h(z: f64, sd: f64) -> f64 {
    let u = z / sd;
    z * std_normal_cdf(u) + sd * (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

// ∫_{a0}^{a1} ∫_{b0}^{b1} g_t(x - y - c) dy dx
fn gaussian_cell(a: (f64, f64), b: (f64, f64), c: f64, sd: f64) -> f64 {
    let gap = (a.0 - b.1 - c).max(b.0 + c - a.1);
    if gap > 40.0 * sd {
        return 0.0;
    }
    gaussian_h(a.1 - b.0 - c, sd) - gaussian_h(a.0 - b.0 - c, sd) - gaussian_h(a.1 - b.1 - c, sd)
        + gaussian_h(a.0 - b.1 - c, sd)
}

/// Bin-to-bin transfer matrix of `P_t` for `bins` equal cells of `[0,1]`:
/// entry `[a * bins + b]` is `(1/|A|) ∫_A ∫_B p(t,x,y) dy dx`, evaluated in
/// closed form (Gaussian cell integrals for images, sine integrals for the
/// cosine series). Row sums are 1.
pub fn bin_transfer_matrix(t: f64, bins: usize, params: &KernelParams) -> Result<Vec<f64>> {
    params.validate()?;
    if !(t >= 0.0) {
        return domain(format!("transfer time must be nonnegative, got {t}"));
    }
    if bins == 0 {
        return domain("need at least one bin");
    }
    let width = 1.0 / bins as f64;
    let edge = |a: usize| (a as f64 * width, (a + 1) as f64 * width);
    let mut out = vec![0.0; bins * bins];
    if t == 0.0 {
        for a in 0..bins {
            out[a * bins + a] = 1.0;
        }
        return Ok(out);
    }
    for a in 0..bins {
        let ea = edge(a);
        for b in 0..bins {
            let eb = edge(b);
            let cell = if params.uses_images(t) {
                let sd = t.sqrt();
                let mirrored = (-eb.1, -eb.0);
                let n_max = params.image_terms as i64;
                (-n_max..=n_max)
                    .map(|n| {
                        let c = 2.0 * n as f64;
                        gaussian_cell(ea, eb, c, sd) + gaussian_cell(ea, mirrored, c, sd)
                    })
                    .sum::<f64>()
            } else {
                let mut total = width * width;
                for n in 1..=params.spectral_terms {
                    let decay = mode_decay(n, t);
                    if decay < SPECTRAL_TAIL {
                        break;
                    }
                    let k = n as f64 * PI;
                    let sa = (k * ea.1).sin() - (k * ea.0).sin();
                    let sb = (k * eb.1).sin() - (k * eb.0).sin();
                    total += 2.0 * decay * sa * sb / (k * k);
                }
                total
            };
            out[a * bins + b] = cell / width;
        }
    }
    Ok(out)
}
