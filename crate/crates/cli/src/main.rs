use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbm_annihilation::experiment::{exit_status, run_experiment, ExperimentSpec, Study};
use rbm_annihilation::particles::{InitialProfile, DEFAULT_U0_RESOLUTION};
use rbm_annihilation::stats::Execution;
use rbm_annihilation::{Error, Result};

/// Annihilating reflected Brownian particles on [0,1] and their
/// reaction-diffusion limit.
///
/// Each subcommand runs one study, writes CSV reports plus manifest.txt to
/// the output directory and exits with 0 (all checks pass), 1 (a check
/// failed) or 2 (invalid arguments).
#[derive(Parser, Debug)]
#[command(name = "rbm-annihilation", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Heat kernel checks: symmetry, mass, image vs cosine series, Chapman-Kolmogorov.
    KernelCheck(Common),
    /// Solve the limit equation; checks the closed form for constant u0.
    Pde(Common),
    /// Simulate and dump particle positions (replica,t,particle_index,x).
    Simulate(Common),
    /// One-point density vs the PDE along the N-ladder.
    Lln(Common),
    /// Two-point correlation vs the product of PDE solutions.
    Poc(Common),
    /// N times the variance of the particle mass vs the covariance equation.
    Fluct(Common),
    /// Martingale and quadratic-variation checks for 1 and cos(pi x).
    Martingale(Common),
    /// Residuals of the limiting and finite correlation hierarchies.
    Hierarchy(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Strictly increasing comma-separated list of N [default: 100].
    #[arg(long, value_delimiter = ',')]
    n_ladder: Option<Vec<usize>>,
    /// Independent replicas per N [default: 200].
    #[arg(long)]
    replicas: Option<usize>,
    /// Master seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Time step of simulation and solvers [default: 0.001].
    #[arg(long)]
    dt: Option<f64>,
    /// Final time [default: 1].
    #[arg(long)]
    t_end: Option<f64>,
    /// Initial density: const:c, linear:a:b (a+bx) or cos:a:b (a+b cos(pi x)) [default: const:1].
    #[arg(long, value_parser = parse_profile)]
    u0: Option<InitialProfile>,
    /// Pair cutoff radius [default: min(8/N, 1)].
    #[arg(long)]
    cutoff: Option<f64>,
    /// Histogram bins per axis [default: 20].
    #[arg(long)]
    bins: Option<usize>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest |z| accepted by statistical checks [default: 4].
    #[arg(long)]
    z_threshold: Option<f64>,
    /// Record every step of every replica (martingale study; memory heavy).
    #[arg(long)]
    dense_paths: bool,
    /// Run replicas one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Reaction noise coefficient of the fluctuation covariance target [default: 1].
    #[arg(long)]
    reaction_noise: Option<f64>,
}

fn parse_profile(s: &str) -> std::result::Result<InitialProfile, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn build_spec(study: Study, args: &Common) -> Result<ExperimentSpec> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut spec = ExperimentSpec::from_key_values(study, &text)?;
    if let Some(l) = &args.n_ladder {
        spec.n_ladder = l.clone();
    }
    if let Some(&n) = spec.n_ladder.first() {
        spec.config = spec.config_for(n);
    }
    if let Some(r) = args.replicas {
        spec.replicas = r;
    }
    if let Some(s) = args.seed {
        spec.config.seed = s;
    }
    if let Some(dt) = args.dt {
        spec.config.dt = dt;
    }
    if let Some(t) = args.t_end {
        spec.config.t_end = t;
        spec.config.record_times = vec![0.0, t];
    }
    if let Some(p) = args.u0 {
        let res = spec.config.u0.resolution().max(DEFAULT_U0_RESOLUTION);
        spec.config.u0 = p.sample(res)?;
    }
    if let Some(c) = args.cutoff {
        spec.config.cutoff_radius = c;
    }
    if let Some(b) = args.bins {
        spec.bins = b;
    }
    if let Some(o) = &args.out {
        spec.out_dir = o.clone();
    }
    if let Some(z) = args.z_threshold {
        spec.z_threshold = z;
    }
    if args.dense_paths {
        spec.dense_paths = true;
    }
    if args.serial {
        spec.execution = Execution::Serial;
    }
    if let Some(c) = args.reaction_noise {
        spec.reaction_noise = c;
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, args) = match &cli.command {
        Command::KernelCheck(a) => (Study::Kernel, a),
        Command::Pde(a) => (Study::Pde, a),
        Command::Simulate(a) => (Study::Simulate, a),
        Command::Lln(a) => (Study::Lln, a),
        Command::Poc(a) => (Study::Poc, a),
        Command::Fluct(a) => (Study::Fluct, a),
        Command::Martingale(a) => (Study::Martingale, a),
        Command::Hierarchy(a) => (Study::Hierarchy, a),
    };
    let result = build_spec(study, args).and_then(|spec| run_experiment(&spec));
    match &result {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_status(&result) as u8)
}
