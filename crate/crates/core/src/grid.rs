//! Functions sampled on uniform grids of `[0,1]` and `[0,1]^2`.

use crate::error::{domain, Result};

/// A real function sampled on the uniform grid `x_i = i/(resolution-1)` of
/// `[0,1]^dim`, endpoints included. Two-dimensional values are row-major:
/// `values[i * resolution + j]` is the sample at `(x_i, x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dim: usize,
    resolution: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dim: usize, resolution: usize, values: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return domain(format!("grid dimension must be 1 or 2, got {dim}"));
        }
        if resolution < 2 {
            return domain(format!("grid resolution must be at least 2, got {resolution}"));
        }
        if values.len() != resolution.pow(dim as u32) {
            return domain(format!(
                "expected {} grid values, got {}",
                resolution.pow(dim as u32),
                values.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return domain(format!("grid values must be finite, found {v}"));
        }
        Ok(Self { dim, resolution, values })
    }

    pub fn from_fn(resolution: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid_points(resolution.max(2)).map(f).collect();
        Self::new(1, resolution, values)
    }

    pub fn from_fn_2d(resolution: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let pts: Vec<f64> = grid_points(resolution.max(2)).collect();
        let mut values = Vec::with_capacity(pts.len() * pts.len());
        for &x in &pts {
            for &y in &pts {
                values.push(f(x, y));
            }
        }
        Self::new(2, resolution, values)
    }

    pub fn constant(resolution: usize, c: f64) -> Result<Self> {
        Self::from_fn(resolution, |_| c)
    }

    /// Tensor product `f(x) g(y)` of two one-dimensional functions.
    pub fn outer(f: &GridFunction, g: &GridFunction) -> Result<Self> {
        if f.dim != 1 || g.dim != 1 || f.resolution != g.resolution {
            return domain("outer product needs two 1-d functions on the same grid");
        }
        let mut values = Vec::with_capacity(f.values.len() * g.values.len());
        for &a in &f.values {
            values.extend(g.values.iter().map(|&b| a * b));
        }
        Self::new(2, f.resolution, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.resolution - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> {
        grid_points(self.resolution)
    }

    /// Same grid, values transformed pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            resolution: self.resolution,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two functions on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            dim: self.dim,
            resolution: self.resolution,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Composite trapezoid integral over `[0,1]^dim`.
    pub fn integral(&self) -> f64 {
        let w = trapezoid_weights(self.resolution);
        match self.dim {
            1 => self.values.iter().zip(&w).map(|(v, w)| v * w).sum(),
            _ => {
                let r = self.resolution;
                (0..r)
                    .map(|i| {
                        let row = &self.values[i * r..(i + 1) * r];
                        w[i] * row.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>()
                    })
                    .sum()
            }
        }
    }

    /// Linear interpolation of a 1-d function; `x` is clamped to `[0,1]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let cells = (self.resolution - 1) as f64;
        let s = (x.clamp(0.0, 1.0)) * cells;
        let i = (s.floor() as usize).min(self.resolution - 2);
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Discrete Neumann Laplacian (centered differences, reflected ghost
    /// points at the endpoints).
    pub fn neumann_laplacian(&self) -> Self {
        debug_assert_eq!(self.dim, 1);
        let h2 = self.spacing().powi(2);
        let v = &self.values;
        let r = self.resolution;
        let values = (0..r)
            .map(|i| {
                let left = if i == 0 { v[1] } else { v[i - 1] };
                let right = if i == r - 1 { v[r - 2] } else { v[i + 1] };
                (left - 2.0 * v[i] + right) / h2
            })
            .collect();
        Self { dim: 1, resolution: r, values }
    }

    /// Centered-difference derivative, one-sided at the endpoints.
    pub fn gradient(&self) -> Self {
        debug_assert_eq!(self.dim, 1);
        let h = self.spacing();
        let v = &self.values;
        let r = self.resolution;
        let values = (0..r)
            .map(|i| match i {
                0 => (v[1] - v[0]) / h,
                _ if i == r - 1 => (v[r - 1] - v[r - 2]) / h,
                _ => (v[i + 1] - v[i - 1]) / (2.0 * h),
            })
            .collect();
        Self { dim: 1, resolution: r, values }
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.resolution != other.resolution {
            return domain("grid functions live on different grids");
        }
        Ok(())
    }
}

/// The points `i/(resolution-1)`, `i = 0..resolution`.
pub fn grid_points(resolution: usize) -> impl Iterator<Item = f64> {
    let cells = (resolution.max(2) - 1) as f64;
    (0..resolution).map(move |i| i as f64 / cells)
}

/// Composite trapezoid weights on the uniform grid.
pub fn trapezoid_weights(resolution: usize) -> Vec<f64> {
    let h = 1.0 / (resolution - 1) as f64;
    let mut w = vec![h; resolution];
    w[0] = 0.5 * h;
    w[resolution - 1] = 0.5 * h;
    w
}
