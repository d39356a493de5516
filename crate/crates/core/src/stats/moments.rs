use super::correlation::{bin_integrals, tuple_counts};
use super::ensemble::ReplicaEnsemble;
use super::{mean_and_se, zscore};
use crate::error::{domain, Result};
use crate::grid::GridFunction;
use crate::particles::ParticleState;
use crate::report::ReportRow;

/// `⟨𝒳^N, φ⟩ = (1/N) Σᵢ φ(xⁱ)`, `φ` linearly interpolated.
pub fn empirical_pairing(state: &ParticleState, phi: &GridFunction, n: usize) -> f64 {
    if state.positions.is_empty() {
        return 0.0;
    }
    state.positions.iter().map(|&x| phi.interpolate(x)).sum::<f64>() / n as f64
}

/// Both sides of `E⟨𝒳,φ⟩² = (1/N)∫φ²F^(1) + ((N-1)/N)∫∫φ⊗φ F^(2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentIdentity {
    pub t: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `(lhs - rhs) / sqrt(lhs_se² + rhs_se²)`
    pub zscore: f64,
}

impl MomentIdentity {
    pub fn rows(&self, name: &str) -> Vec<ReportRow> {
        let se = self.lhs_se.hypot(self.rhs_se);
        vec![
            ReportRow::scalar(format!("{name}_lhs"), Some(self.t), self.lhs).with_error(self.lhs_se, self.zscore),
            ReportRow::scalar(format!("{name}_rhs"), Some(self.t), self.rhs).with_error(self.rhs_se, self.zscore),
            ReportRow::scalar(format!("{name}_diff"), Some(self.t), self.lhs - self.rhs).with_error(se, self.zscore),
        ]
    }
}

/// The right side is assembled per replica from the bin counts, so its
/// mean is exactly the quadrature of the two histogram estimates, with
/// the integrals of `φ` and `φ²` over each bin taken exactly.
pub fn moment_identity_from_states(
    states: &[&ParticleState],
    n: usize,
    phi: &GridFunction,
    t: f64,
    bins: usize,
) -> Result<MomentIdentity> {
    if states.is_empty() {
        return domain("no replicas to average over");
    }
    if bins == 0 {
        return domain("need at least one bin");
    }
    let nf = n as f64;
    let b = bins as f64;
    let phi_int = bin_integrals(phi, bins);
    let phi2_int = bin_integrals(&phi.map(|v| v * v), bins);
    let mut lhs = Vec::with_capacity(states.len());
    let mut rhs = Vec::with_capacity(states.len());
    for s in states {
        lhs.push(empirical_pairing(s, phi, n).powi(2));
        let c1 = tuple_counts(&s.positions, 1, bins)?;
        // (1/N) Σ_a F1_a ∫_a φ², F1_a = c_a B / N
        let first: f64 = c1.iter().zip(&phi2_int).map(|(c, w)| c * b / nf * w).sum::<f64>() / nf;
        let second = if n > 1 {
            let c2 = tuple_counts(&s.positions, 2, bins)?;
            let f2_scale = b * b / (nf * (nf - 1.0));
            let mut acc = 0.0;
            for i in 0..bins {
                for j in 0..bins {
                    acc += c2[i * bins + j] * f2_scale * phi_int[i] * phi_int[j];
                }
            }
            (nf - 1.0) / nf * acc
        } else {
            0.0
        };
        rhs.push(first + second);
    }
    let (l, lse) = mean_and_se(&lhs);
    let (r, rse) = mean_and_se(&rhs);
    Ok(MomentIdentity { t, lhs: l, lhs_se: lse, rhs: r, rhs_se: rse, zscore: zscore(l - r, lse.hypot(rse)) })
}

pub fn moment_identity_check(
    ensemble: &ReplicaEnsemble,
    phi: &GridFunction,
    t: f64,
    bins: usize,
) -> Result<MomentIdentity> {
    let states = ensemble.states_at(t)?;
    moment_identity_from_states(&states, ensemble.config.n, phi, t, bins)
}

/// `N · Var⟨𝒳^N_t, φ⟩` with a standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationVariance {
    pub t: f64,
    pub variance: f64,
    pub standard_error: f64,
    /// Mean of `⟨𝒳,φ⟩` that was subtracted.
    pub mean: f64,
    pub replicas: usize,
}

/// Variance of `√N a_r` over samples `a_r = ⟨𝒳,φ⟩`. Without a known mean
/// this is `N` times the unbiased sample variance, whose error comes from
/// the fourth central moment; with `exact_mean` it is `N · mean (a - μ)²`
/// with the plain standard error of that mean.
pub fn fluctuation_variance_of(samples: &[f64], n: usize, exact_mean: Option<f64>, t: f64) -> Result<FluctuationVariance> {
    let r = samples.len();
    if r < 2 {
        return domain(format!("need at least 2 replicas for a variance, got {r}"));
    }
    let nf = n as f64;
    let rf = r as f64;
    if let Some(mu) = exact_mean {
        let sq: Vec<f64> = samples.iter().map(|a| (a - mu).powi(2)).collect();
        let (m, se) = mean_and_se(&sq);
        return Ok(FluctuationVariance { t, variance: nf * m, standard_error: nf * se, mean: mu, replicas: r });
    }
    let mean = samples.iter().sum::<f64>() / rf;
    let m2 = samples.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / rf;
    let m4 = samples.iter().map(|a| (a - mean).powi(4)).sum::<f64>() / rf;
    let s2 = m2 * rf / (rf - 1.0);
    let var_s2 = (m4 / rf - s2 * s2 * (rf - 3.0) / (rf * (rf - 1.0))).max(0.0);
    Ok(FluctuationVariance { t, variance: nf * s2, standard_error: nf * var_s2.sqrt(), mean, replicas: r })
}

pub fn fluctuation_variance(ensemble: &ReplicaEnsemble, phi: &GridFunction, t: f64) -> Result<FluctuationVariance> {
    fluctuation_variance_with(ensemble, phi, t, None)
}

pub fn fluctuation_variance_with(
    ensemble: &ReplicaEnsemble,
    phi: &GridFunction,
    t: f64,
    exact_mean: Option<f64>,
) -> Result<FluctuationVariance> {
    let n = ensemble.config.n;
    let samples: Vec<f64> = ensemble.states_at(t)?.iter().map(|s| empirical_pairing(s, phi, n)).collect();
    fluctuation_variance_of(&samples, n, exact_mean, t)
}
