//! Annihilating reflected Brownian particles on `[0,1]`.
//!
//! Particles perform independent reflected Brownian motions and every pair
//! `{x, y}` disappears at rate `(1/N) p(2/N², x, y)`, with `p` the Neumann
//! heat kernel. As `N → ∞` the rescaled empirical measure follows
//! `∂ₜu = ½Δu − u²`. The crate provides the kernel, the deterministic
//! solvers, the particle simulator, ensemble estimators for correlation
//! functions and fluctuations, and residual checks of the correlation
//! hierarchy.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod hierarchy;
pub mod kernel;
pub mod particles;
pub mod pde;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use grid::GridFunction;
pub use kernel::KernelParams;
