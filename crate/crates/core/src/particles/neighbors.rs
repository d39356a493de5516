//! Pair enumeration for the short-range annihilation rate.
//!
//! The rate `(1/N) p(2/N², x, y)` is a Gaussian of width `√2/N`, so at the
//! default cutoff `8/N` the pruned tail is below `e^{-16}` of the peak. With
//! positions kept sorted, the pairs within the cutoff are found by sliding a
//! window, `O(m·k)` work for `k` neighbours per particle.

use crate::kernel::image_sum;

/// Annihilation rate of an unordered pair.
pub trait PairRate: Sync {
    fn rate(&self, x: f64, y: f64) -> f64;
}

/// `(1/N) p(2/N², x, y)` with the image sum truncated to `|n| <= 1`, which
/// is converged to f64 precision for `N >= 10`.
#[derive(Clone, Copy, Debug)]
pub struct HeatKernelRate {
    inv_n: f64,
    time: f64,
}

impl HeatKernelRate {
    pub fn new(n: usize) -> Self {
        let n = n as f64;
        Self { inv_n: 1.0 / n, time: 2.0 / (n * n) }
    }

    /// Kernel time `2/N²`.
    pub fn time(&self) -> f64 {
        self.time
    }
}

impl PairRate for HeatKernelRate {
    #[inline]
    fn rate(&self, x: f64, y: f64) -> f64 {
        self.inv_n * image_sum(self.time, x, y, 1)
    }
}

/// Pure diffusion.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoInteraction;

impl PairRate for NoInteraction {
    fn rate(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }
}

/// Visit every pair `i < j` of a sorted slice with `x_j - x_i <= cutoff`,
/// in lexicographic order.
#[inline]
pub fn for_each_close_pair(sorted: &[f64], cutoff: f64, mut f: impl FnMut(usize, usize)) {
    for i in 0..sorted.len() {
        let xi = sorted[i];
        for (j, &xj) in sorted.iter().enumerate().skip(i + 1) {
            if xj - xi > cutoff {
                break;
            }
            f(i, j);
        }
    }
}

/// Pairs within `cutoff` and their rates, via the sorted window scan.
pub fn neighbor_pair_rates(sorted: &[f64], cutoff: f64, rate: &impl PairRate) -> Vec<(usize, usize, f64)> {
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let mut out = Vec::new();
    for_each_close_pair(sorted, cutoff, |i, j| out.push((i, j, rate.rate(sorted[i], sorted[j]))));
    out
}

/// Reference `O(m²)` scan over all pairs; same output contract as
/// [`neighbor_pair_rates`].
pub fn brute_force_pair_rates(positions: &[f64], cutoff: f64, rate: &impl PairRate) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if (positions[j] - positions[i]).abs() <= cutoff {
                out.push((i, j, rate.rate(positions[i], positions[j])));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{eval_kernel, KernelParams};

    #[test]
    fn coincident_pair_rate() {
        // (1/N) p(2/N², ½, ½) = (1/N) · N / (2√π) = 1/(2√π)
        let r = HeatKernelRate::new(100).rate(0.5, 0.5);
        assert!((r - 0.282_094_791_773_878_1).abs() < 1e-12);
        let q = 1.0 - (-r * 1e-4).exp();
        assert!((q - 2.8209e-5).abs() < 1e-9);
    }

    #[test]
    fn truncated_images_match_full_kernel() {
        let params = KernelParams::default();
        for n in [10, 50, 400] {
            let rate = HeatKernelRate::new(n);
            for &(x, y) in &[(0.0, 0.0), (0.001, 0.02), (0.5, 0.51), (0.999, 1.0), (0.3, 0.7)] {
                let full = eval_kernel(rate.time(), x, y, &params).unwrap() / n as f64;
                let r = rate.rate(x, y);
                assert!((r - full).abs() <= 1e-15 * full.max(1e-300) + 1e-300, "N={n} ({x},{y}): {r} vs {full}");
            }
        }
    }

    #[test]
    fn rate_is_symmetric() {
        let rate = HeatKernelRate::new(64);
        for &(x, y) in &[(0.1, 0.13), (0.0, 0.05), (0.97, 0.99)] {
            assert_eq!(rate.rate(x, y), rate.rate(y, x));
        }
    }

    #[test]
    fn scans_agree_on_sorted_input() {
        let xs = [0.0, 0.01, 0.011, 0.2, 0.205, 0.5, 0.99, 1.0];
        let rate = HeatKernelRate::new(100);
        assert_eq!(neighbor_pair_rates(&xs, 0.08, &rate), brute_force_pair_rates(&xs, 0.08, &rate));
        assert_eq!(neighbor_pair_rates(&xs, 1.0, &rate).len(), xs.len() * (xs.len() - 1) / 2);
    }
}
