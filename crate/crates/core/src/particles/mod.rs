//! The particle system: independent reflected Brownian motions on `[0,1]`
//! with soft pairwise annihilation at rate `(1/N) p(2/N², xⁱ, xʲ)`.

mod config;
mod neighbors;
mod sim;

pub use config::{
    parse_field, parse_key_values, parse_list, InitialProfile, SimConfig, DEFAULT_CUTOFF_WIDTHS, DEFAULT_DT,
    DEFAULT_U0_RESOLUTION,
};
pub use neighbors::{
    brute_force_pair_rates, for_each_close_pair, neighbor_pair_rates, HeatKernelRate, NoInteraction, PairRate,
};
pub use sim::{
    fold, init_particles, run, run_dense, step, DensePath, DensitySampler, ParticleState, Simulator, StepObserver,
};
