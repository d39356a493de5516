//! Residuals of the correlation hierarchy.
//!
//! The finite-`N` hierarchy for the first correlation function reads
//!
//! ```text
//! F¹_t = P_t F¹_0 − ((N−1)/N) ∫₀ᵗ P_{t−s} (R F²_s) ds,   (R F²)(x) = ∫ F²(x,z) p(2/N², x, z) dz.
//! ```
//!
//! For general `k` the factor is `(N−k)/N` and a term `Q F^(k)/N` from the
//! `k(k−1)/2` interacting pairs inside the tuple appears; it is empty for `k = 1`.
//! In the limit the hierarchy is solved by products `γ^(k) = ∏ u(t, xᵢ)` with
//! `u` the mild solution of `∂ₜu = ½Δu − u²`:
//!
//! ```text
//! γ^(k)_t = P^(k)_t γ^(k)_0 − Σᵢ ∫₀ᵗ P^(k)_{t−s} γ^(k+1)_s(z₁,…,z_k,zᵢ) ds.
//! ```

use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::kernel::{bin_transfer_matrix, KernelParams, SemigroupOperator};
use crate::pde::PdeSolution;
use crate::stats::{mean_and_se, tuple_counts, zscore, ReplicaEnsemble};

/// Interacting pairs inside a `k`-tuple, the number of summands of `Q`.
pub fn q_pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyResidual {
    pub k: usize,
    pub t: f64,
    /// Grid resolution (limiting residual) or bins per axis (finite residual).
    pub resolution: usize,
    /// Time step of the quadrature.
    pub dt: f64,
    pub sup_residual: f64,
    /// Residual on the grid or per bin.
    pub values: Vec<f64>,
    /// Replica standard errors per bin, finite residual only.
    pub standard_errors: Option<Vec<f64>>,
    pub zscores: Option<Vec<f64>>,
}

impl HierarchyResidual {
    pub fn max_abs_z(&self) -> Option<f64> {
        self.zscores.as_ref().map(|z| z.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
    }
}

fn trapezoid(j: usize, last: usize) -> f64 {
    if j == 0 || j == last {
        0.5
    } else {
        1.0
    }
}

/// Residual of the limiting hierarchy at order `k ∈ {1,2}` for product
/// input built from `u`, evaluated on the solution grid with the Duhamel
/// integral by the trapezoid rule over the solution's time steps.
pub fn limiting_residual(u: &PdeSolution, k: usize, t: f64, params: &KernelParams) -> Result<HierarchyResidual> {
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!("limiting residual of order {k} (only 1 and 2)")));
    }
    u.slice_at(t)?;
    let last = u.index_near(t);
    let r = u.resolution;
    let gamma = |i: usize| -> Result<GridFunction> {
        let s = &u.slices[i];
        if k == 1 {
            Ok(s.clone())
        } else {
            GridFunction::outer(s, s)
        }
    };
    // Σᵢ γ^(k+1)(z, zᵢ): u² for k = 1, u₁u₂(u₁ + u₂) for k = 2
    let source = |i: usize| -> Result<GridFunction> {
        let s = &u.slices[i];
        if k == 1 {
            Ok(s.map(|v| v * v))
        } else {
            let v = s.values();
            let mut out = Vec::with_capacity(r * r);
            for a in 0..r {
                for b in 0..r {
                    out.push(v[a] * v[b] * (v[a] + v[b]));
                }
            }
            GridFunction::new(2, r, out)
        }
    };
    let h = if last == 0 { 0.0 } else { u.times[last] / last as f64 };
    let transported = SemigroupOperator::new(u.times[last], r, params)?.apply(&gamma(0)?)?;
    let mut total = gamma(last)?.zip_with(&transported, |a, b| a - b)?;
    for j in (0..=last).filter(|_| last > 0) {
        let lag = u.times[last] - u.times[j];
        let w = trapezoid(j, last) * h;
        let term = SemigroupOperator::new(lag.max(0.0), r, params)?.apply(&source(j)?)?;
        total = total.zip_with(&term, |a, b| a + w * b)?;
    }
    Ok(HierarchyResidual {
        k,
        t,
        resolution: r,
        dt: h,
        sup_residual: total.sup_norm(),
        values: total.into_values(),
        standard_errors: None,
        zscores: None,
    })
}

/// Precomputed transfer matrices for the binned first-order residual on the
/// quadrature times `0 = s_0 < … < s_J = t`.
#[derive(Clone, Debug)]
pub struct BinnedHierarchy {
    bins: usize,
    n: usize,
    annihilation: bool,
    times: Vec<f64>,
    weights: Vec<f64>,
    /// `P_{t − s_j}` bin to bin, one per node.
    transfer: Vec<Vec<f64>>,
    /// `(1/|A|) ∫_A ∫_B p(2/N², x, z) dz dx`.
    spike: Vec<f64>,
}

impl BinnedHierarchy {
    /// `times` must start at 0 and be uniformly spaced.
    pub fn new(times: &[f64], n: usize, bins: usize, annihilation: bool, params: &KernelParams) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 {
            return domain("quadrature times must start at 0");
        }
        if n < 2 {
            return domain("N must be at least 2");
        }
        let last = times.len() - 1;
        let t = times[last];
        let h = if last == 0 { 0.0 } else { t / last as f64 };
        if times.iter().enumerate().any(|(j, &s)| (s - j as f64 * h).abs() > 1e-9 * t.max(1.0)) {
            return domain("quadrature times must be uniformly spaced");
        }
        let weights = (0..=last).map(|j| if last == 0 { 0.0 } else { trapezoid(j, last) * h }).collect();
        let transfer = times
            .iter()
            .map(|&s| bin_transfer_matrix((t - s).max(0.0), bins, params))
            .collect::<Result<_>>()?;
        let spike = bin_transfer_matrix(2.0 / (n as f64).powi(2), bins, params)?;
        Ok(Self { bins, n, annihilation, times: times.to_vec(), weights, transfer, spike })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn apply(matrix: &[f64], f: &[f64], bins: usize) -> Vec<f64> {
        (0..bins).map(|a| (0..bins).map(|b| matrix[a * bins + b] * f[b]).sum()).collect()
    }

    /// `(R F²)` per bin for a binned `F²` (row-major).
    pub fn pair_loss(&self, f2: &[f64]) -> Vec<f64> {
        let b = self.bins;
        (0..b).map(|a| (0..b).map(|c| f2[a * b + c] * self.spike[a * b + c]).sum()).collect()
    }

    /// `F¹_t − P_t F¹_0 + ((N−1)/N) Σ_j w_j P_{t−s_j} (R F²_{s_j})` per bin,
    /// for binned values `f1[j]`, `f2[j]` at the quadrature nodes.
    pub fn residual(&self, f1: &[Vec<f64>], f2: &[Vec<f64>]) -> Result<Vec<f64>> {
        let nodes = self.times.len();
        if f1.len() != nodes || (self.annihilation && f2.len() != nodes) {
            return domain(format!("need estimates at all {nodes} quadrature times"));
        }
        debug_assert_eq!(q_pair_count(1), 0);
        let b = self.bins;
        let last = nodes - 1;
        let transported = Self::apply(&self.transfer[0], &f1[0], b);
        let mut out: Vec<f64> = f1[last].iter().zip(&transported).map(|(a, p)| a - p).collect();
        if self.annihilation {
            let factor = (self.n as f64 - 1.0) / self.n as f64;
            for j in 0..nodes {
                let w = self.weights[j];
                if w == 0.0 {
                    continue;
                }
                let term = Self::apply(&self.transfer[j], &self.pair_loss(&f2[j]), b);
                for (o, v) in out.iter_mut().zip(term) {
                    *o += factor * w * v;
                }
            }
        }
        Ok(out)
    }
}

/// Record times of the ensemble that serve as quadrature nodes on `[0, t]`;
/// an error if they are not a uniform grid of spacing at most `max_step`.
fn quadrature_nodes(ensemble: &ReplicaEnsemble, t: f64, max_step: f64) -> Result<Vec<usize>> {
    let tol = 1e-9 * ensemble.config.t_end.max(1.0);
    let idx: Vec<usize> = (0..ensemble.record_times().len())
        .filter(|&i| ensemble.record_times()[i] <= t + tol)
        .collect();
    let times: Vec<f64> = idx.iter().map(|&i| ensemble.record_times()[i]).collect();
    if times.first().map_or(true, |&s| s.abs() > tol) || times.last().map_or(true, |&s| (s - t).abs() > tol) {
        return domain(format!("ensemble must record times 0 and {t}"));
    }
    let gaps = times.windows(2).map(|w| w[1] - w[0]);
    if gaps.clone().any(|g| g > max_step + tol) {
        return domain(format!("missing intermediate record times: spacing must not exceed {max_step}"));
    }
    let h = if times.len() > 1 { t / (times.len() - 1) as f64 } else { 0.0 };
    if gaps.into_iter().any(|g| (g - h).abs() > 1e-6 * h.max(1e-12)) {
        return domain("record times on [0, t] must be uniformly spaced");
    }
    Ok(idx)
}

/// Default bound on the spacing of the quadrature nodes.
pub const DEFAULT_MAX_QUADRATURE_STEP: f64 = 0.05;

/// Bin-wise residual of the first-order finite hierarchy from histogram
/// estimates, with z-scores from the replica spread of the per-replica
/// residuals. Pairs interact through `p(2/N², x, z)` integrated exactly
/// over bin cells; `Q` contributes nothing at `k = 1`.
pub fn finite_residual(
    ensemble: &ReplicaEnsemble,
    k: usize,
    t: f64,
    bins: usize,
    max_step: f64,
    params: &KernelParams,
) -> Result<HierarchyResidual> {
    if k != 1 {
        return Err(Error::Unsupported(format!("finite residual of order {k} (only 1)")));
    }
    if ensemble.replica_count() < 2 {
        return domain("need at least 2 replicas");
    }
    let idx = quadrature_nodes(ensemble, t, max_step)?;
    let times: Vec<f64> = idx.iter().map(|&i| ensemble.record_times()[i]).collect();
    let n = ensemble.config.n;
    let annihilation = ensemble.config.annihilation;
    let quad = BinnedHierarchy::new(&times, n, bins, annihilation, params)?;
    let nf = n as f64;
    let b = bins as f64;
    let per_replica: Vec<Vec<f64>> = ensemble
        .replicas
        .iter()
        .map(|rep| {
            let mut f1 = Vec::with_capacity(idx.len());
            let mut f2 = Vec::with_capacity(idx.len());
            for &i in &idx {
                let pos = &rep[i].positions;
                f1.push(tuple_counts(pos, 1, bins)?.into_iter().map(|c| c * b / nf).collect());
                if annihilation {
                    let scale = b * b / (nf * (nf - 1.0));
                    f2.push(tuple_counts(pos, 2, bins)?.into_iter().map(|c| c * scale).collect());
                }
            }
            quad.residual(&f1, &f2)
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(bins);
    let mut ses = Vec::with_capacity(bins);
    let mut column = vec![0.0; per_replica.len()];
    for a in 0..bins {
        for (c, r) in column.iter_mut().zip(&per_replica) {
            *c = r[a];
        }
        let (m, se) = mean_and_se(&column);
        values.push(m);
        ses.push(se);
    }
    let zscores: Vec<f64> = values.iter().zip(&ses).map(|(v, s)| zscore(*v, *s)).collect();
    let h = if times.len() > 1 { t / (times.len() - 1) as f64 } else { 0.0 };
    Ok(HierarchyResidual {
        k,
        t,
        resolution: bins,
        dt: h,
        sup_residual: values.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        values,
        standard_errors: Some(ses),
        zscores: Some(zscores),
    })
}
