//! Estimators over replica ensembles: correlation functions, moment
//! identities, fluctuation variances and martingale checks.

mod correlation;
mod ensemble;
mod martingale;
mod moments;

pub use correlation::{
    bin_averages, bin_counts, bin_index, bin_integrals, bin_midpoints, correlation_from_states, estimate_correlation,
    estimate_correlation_with, product_bin_averages, tuple_counts, CorrelationEstimate, Normalizer,
};
pub use ensemble::{map_replicas, Execution, ReplicaEnsemble};
pub use martingale::{
    martingale_check, martingale_check_streaming, martingale_check_streaming_many, MartingaleAccumulator, MartingaleReport, MartingaleSample,
};
pub use moments::{
    empirical_pairing, fluctuation_variance, fluctuation_variance_of, fluctuation_variance_with,
    moment_identity_check, moment_identity_from_states, FluctuationVariance, MomentIdentity,
};

/// Sample mean and its standard error (`sd / √n`, unbiased `sd`).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `diff / se`. With no spread, a difference below rounding level
/// (`1e-12`) gives 0 and anything larger `±∞`.
pub fn zscore(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}
