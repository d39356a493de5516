#![allow(dead_code)]

use rbm_annihilation::kernel::{KernelParams, SemigroupOperator};
use rbm_annihilation::GridFunction;

/// Picard iteration for `u = P_t u0 − ∫₀ᵗ P_{t−s}(u_s²) ds` on the time grid
/// `j·h`, Duhamel integral by the trapezoid rule. Independent of the
/// splitting solver; shares only the semigroup quadrature.
pub fn picard(u0: &GridFunction, t_end: f64, h: f64, iterations: usize) -> Vec<GridFunction> {
    let steps = (t_end / h).round() as usize;
    let params = KernelParams::default();
    let ops: Vec<SemigroupOperator> =
        (0..=steps).map(|j| SemigroupOperator::new(j as f64 * h, u0.resolution(), &params).unwrap()).collect();
    let free: Vec<GridFunction> = ops.iter().map(|op| op.apply(u0).unwrap()).collect();
    let mut u = free.clone();
    for _ in 0..iterations {
        let sq: Vec<GridFunction> = u.iter().map(|s| s.map(|v| v * v)).collect();
        let mut next = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let mut acc = free[i].clone();
            for j in 0..=i {
                if i == 0 {
                    break;
                }
                let w = if j == 0 || j == i { 0.5 * h } else { h };
                let term = ops[i - j].apply(&sq[j]).unwrap();
                acc = acc.zip_with(&term, |a, b| a - w * b).unwrap();
            }
            next.push(acc);
        }
        u = next;
    }
    u
}

pub fn chi_square_upper_tail(stat: f64, dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
}
