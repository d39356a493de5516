use super::ensemble::ReplicaEnsemble;
use super::{mean_and_se, zscore};
use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::particles::ParticleState;

/// Normaliser of the `k`-tuple sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalizer {
    /// `N(N-1)…(N-k+1)`
    #[default]
    FallingFactorial,
    /// `N^k`
    Power,
}

impl Normalizer {
    pub fn value(self, n: usize, k: usize) -> f64 {
        let n = n as f64;
        match self {
            Self::FallingFactorial => (0..k).map(|i| n - i as f64).product(),
            Self::Power => n.powi(k as i32),
        }
    }
}

/// Histogram estimate of the `k`-point correlation function on `bins`
/// equal cells per axis. `values` and `standard_errors` are row-major
/// (`[a * bins + b]` for `k = 2`); bin `a` is centred at `(a + ½)/bins`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub k: usize,
    pub t: f64,
    pub bins: usize,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub replicas: usize,
}

impl CorrelationEstimate {
    pub fn width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    pub fn midpoints(&self) -> Vec<f64> {
        bin_midpoints(self.bins)
    }

    /// `Σ_bins value · bin volume`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.width().powi(self.k as i32)
    }

    /// `Σ |value - target| · bin volume`.
    pub fn l1_distance(&self, target: &[f64]) -> f64 {
        assert_eq!(target.len(), self.values.len());
        let vol = self.width().powi(self.k as i32);
        self.values.iter().zip(target).map(|(v, t)| (v - t).abs()).sum::<f64>() * vol
    }

    pub fn sup_distance(&self, target: &[f64]) -> f64 {
        assert_eq!(target.len(), self.values.len());
        self.values.iter().zip(target).fold(0.0, |m, (v, t)| m.max((v - t).abs()))
    }

    /// Bin-wise `(value - target) / SE`.
    pub fn zscores(&self, target: &[f64]) -> Vec<f64> {
        assert_eq!(target.len(), self.values.len());
        self.values
            .iter()
            .zip(target)
            .zip(&self.standard_errors)
            .map(|((v, t), se)| zscore(v - t, *se))
            .collect()
    }
}

pub fn bin_midpoints(bins: usize) -> Vec<f64> {
    (0..bins).map(|a| (a as f64 + 0.5) / bins as f64).collect()
}

#[inline]
pub fn bin_index(x: f64, bins: usize) -> usize {
    ((x * bins as f64) as usize).min(bins - 1)
}

/// Particle counts per bin.
pub fn bin_counts(positions: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &x in positions {
        counts[bin_index(x, bins)] += 1.0;
    }
    counts
}

/// Number of ordered `k`-tuples of distinct particles per bin cell.
pub fn tuple_counts(positions: &[f64], k: usize, bins: usize) -> Result<Vec<f64>> {
    let c = bin_counts(positions, bins);
    match k {
        1 => Ok(c),
        2 => {
            let mut out = vec![0.0; bins * bins];
            for a in 0..bins {
                for b in 0..bins {
                    out[a * bins + b] = c[a] * c[b] - if a == b { c[a] } else { 0.0 };
                }
            }
            Ok(out)
        }
        _ => Err(Error::Unsupported(format!("correlation order {k} (only 1 and 2)"))),
    }
}

/// `∫_{bin} f dx` for each bin, exact for the linear interpolant of `f`.
pub fn bin_integrals(f: &GridFunction, bins: usize) -> Vec<f64> {
    let cells = (f.resolution() - 1) as f64;
    (0..bins)
        .map(|a| {
            let lo = a as f64 / bins as f64;
            let hi = (a + 1) as f64 / bins as f64;
            // breakpoints: the bin edges and every grid node strictly inside
            let mut xs = vec![lo];
            let first = (lo * cells).floor() as usize + 1;
            let mut i = first;
            while (i as f64) < hi * cells {
                xs.push(i as f64 / cells);
                i += 1;
            }
            xs.push(hi);
            xs.windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * (f.interpolate(w[0]) + f.interpolate(w[1])))
                .sum()
        })
        .collect()
}

/// Bin averages of the linear interpolant of `f`.
pub fn bin_averages(f: &GridFunction, bins: usize) -> Vec<f64> {
    bin_integrals(f, bins).into_iter().map(|v| v * bins as f64).collect()
}

/// Bin averages of `f(x₁) f(x₂)`, row-major.
pub fn product_bin_averages(f: &GridFunction, bins: usize) -> Vec<f64> {
    let avg = bin_averages(f, bins);
    avg.iter().flat_map(|a| avg.iter().map(move |b| a * b)).collect()
}

/// Estimate from one state per replica; `n` is the scaling parameter.
pub fn correlation_from_states(
    states: &[&ParticleState],
    n: usize,
    k: usize,
    t: f64,
    bins: usize,
    normalizer: Normalizer,
) -> Result<CorrelationEstimate> {
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!("correlation order {k} (only 1 and 2)")));
    }
    if bins == 0 {
        return domain("need at least one bin");
    }
    if states.is_empty() {
        return domain("no replicas to average over");
    }
    let cells = bins.pow(k as u32);
    let scale = (bins as f64).powi(k as i32) / normalizer.value(n, k);
    let per_replica: Vec<Vec<f64>> = states
        .iter()
        .map(|s| tuple_counts(&s.positions, k, bins).map(|c| c.into_iter().map(|v| v * scale).collect()))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(cells);
    let mut standard_errors = Vec::with_capacity(cells);
    let mut column = vec![0.0; states.len()];
    for cell in 0..cells {
        for (slot, r) in column.iter_mut().zip(&per_replica) {
            *slot = r[cell];
        }
        let (m, se) = mean_and_se(&column);
        values.push(m);
        standard_errors.push(se);
    }
    Ok(CorrelationEstimate { k, t, bins, values, standard_errors, replicas: states.len() })
}

/// Histogram estimate of `F^(k)_t`: each ordered `k`-tuple of distinct
/// alive particles adds `1/(N^(k) · bin volume)` to its cell; values are
/// replica means and errors replica standard errors.
pub fn estimate_correlation(ensemble: &ReplicaEnsemble, k: usize, t: f64, bins: usize) -> Result<CorrelationEstimate> {
    estimate_correlation_with(ensemble, k, t, bins, Normalizer::default())
}

pub fn estimate_correlation_with(
    ensemble: &ReplicaEnsemble,
    k: usize,
    t: f64,
    bins: usize,
    normalizer: Normalizer,
) -> Result<CorrelationEstimate> {
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!("correlation order {k} (only 1 and 2)")));
    }
    let states = ensemble.states_at(t)?;
    correlation_from_states(&states, ensemble.config.n, k, t, bins, normalizer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(xs: &[f64]) -> ParticleState {
        ParticleState { positions: xs.to_vec(), time: 0.0, initial_count: xs.len() }
    }

    #[test]
    fn pair_counts_exclude_diagonal() {
        let c = tuple_counts(&[0.1, 0.15, 0.9], 2, 2).unwrap();
        // bin 0 holds 2 particles, bin 1 holds 1
        assert_eq!(c, vec![2.0, 2.0, 2.0, 0.0]);
        assert!(tuple_counts(&[0.1], 3, 2).is_err());
    }

    #[test]
    fn first_order_integrates_to_mass() {
        let a = state(&[0.1, 0.4, 0.41, 1.0]);
        let b = state(&[0.7]);
        let est = correlation_from_states(&[&a, &b], 10, 1, 0.0, 5, Normalizer::FallingFactorial).unwrap();
        assert!((est.total() - 0.25).abs() < 1e-12);
        // x = 1 falls in the last bin
        assert_eq!(est.values[4], 0.5 * 5.0 / 10.0);
    }

    #[test]
    fn second_order_is_symmetric() {
        let a = state(&[0.05, 0.3, 0.31, 0.62, 0.9, 0.95]);
        let b = state(&[0.2, 0.21, 0.5]);
        let est = correlation_from_states(&[&a, &b], 8, 2, 0.0, 4, Normalizer::FallingFactorial).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(est.values[i * 4 + j], est.values[j * 4 + i]);
            }
        }
        // ordered pairs: 6·5 + 3·2 = 36, normalised by 8·7 and averaged
        assert!((est.total() - 0.5 * 36.0 / 56.0).abs() < 1e-12);
    }

    #[test]
    fn extinct_gives_zero() {
        let a = state(&[]);
        let est = correlation_from_states(&[&a, &a], 10, 2, 1.0, 3, Normalizer::Power).unwrap();
        assert!(est.values.iter().all(|&v| v == 0.0));
        assert!(est.zscores(&[0.0; 9]).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn bin_integrals_are_exact_for_linear_interpolant() {
        let f = GridFunction::from_fn(7, |x| x * x).unwrap();
        let total: f64 = bin_integrals(&f, 5).iter().sum();
        assert!((total - f.integral()).abs() < 1e-14);
        let lin = GridFunction::from_fn(11, |x| 2.0 * x).unwrap();
        let avg = bin_averages(&lin, 4);
        for (a, m) in avg.iter().zip(bin_midpoints(4)) {
            assert!((a - 2.0 * m).abs() < 1e-14);
        }
    }

    #[test]
    fn normalizers() {
        assert_eq!(Normalizer::FallingFactorial.value(10, 2), 90.0);
        assert_eq!(Normalizer::Power.value(10, 2), 100.0);
        assert_eq!(Normalizer::FallingFactorial.value(10, 1), 10.0);
    }
}
