//! Canned studies that write CSV reports and a pass/fail manifest.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::hierarchy::{finite_residual, limiting_residual, DEFAULT_MAX_QUADRATURE_STEP};
use crate::kernel::{eval_kernel, image_sum, spectral_sum, KernelParams, SemigroupOperator};
use crate::particles::{parse_field, parse_list, run_dense, SimConfig};
use crate::pde::{basis_coefficients, solve_fluctuation_covariance_with, solve_mild, CovarianceOptions, PdeSolution};
use crate::report::{render_csv, ReportRow, SCHEMA_HEADER};
use crate::stats::{
    bin_averages, empirical_pairing, estimate_correlation, fluctuation_variance, martingale_check,
    martingale_check_streaming_many, mean_and_se, product_bin_averages, zscore, Execution, MartingaleReport,
    ReplicaEnsemble,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    Kernel,
    Pde,
    Simulate,
    Lln,
    Poc,
    Fluct,
    Martingale,
    Hierarchy,
}

impl Study {
    pub const ALL: [Study; 8] = [
        Study::Kernel,
        Study::Pde,
        Study::Simulate,
        Study::Lln,
        Study::Poc,
        Study::Fluct,
        Study::Martingale,
        Study::Hierarchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::Kernel => "kernel",
            Study::Pde => "pde",
            Study::Simulate => "simulate",
            Study::Lln => "lln",
            Study::Poc => "poc",
            Study::Fluct => "fluct",
            Study::Martingale => "martingale",
            Study::Hierarchy => "hierarchy",
        }
    }

    pub fn is_statistical(self) -> bool {
        !matches!(self, Study::Kernel | Study::Pde)
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "kernel-check" {
            return Ok(Study::Kernel);
        }
        Study::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown study `{s}`")))
    }
}

/// Everything a study needs. `config.n` is replaced by each entry of
/// `n_ladder` in turn.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub study: Study,
    pub config: SimConfig,
    pub n_ladder: Vec<usize>,
    pub replicas: usize,
    pub bins: usize,
    pub out_dir: PathBuf,
    pub z_threshold: f64,
    pub execution: Execution,
    pub dense_paths: bool,
    /// Noise coefficient of the reaction term in the fluctuation covariance
    /// target (see [`CovarianceOptions::reaction_noise`]).
    pub reaction_noise: f64,
    pub kernel: KernelParams,
}

pub const DEFAULT_REPLICAS: usize = 200;
pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

impl ExperimentSpec {
    pub fn new(study: Study, config: SimConfig) -> Self {
        Self {
            study,
            n_ladder: vec![config.n],
            config,
            replicas: DEFAULT_REPLICAS,
            bins: DEFAULT_BINS,
            out_dir: PathBuf::from("out"),
            z_threshold: DEFAULT_Z_THRESHOLD,
            execution: Execution::Parallel,
            dense_paths: false,
            reaction_noise: 1.0,
            kernel: KernelParams::default(),
        }
    }

    /// Build from a key=value file: the simulation keys of
    /// [`SimConfig::from_key_values`] plus `n_ladder`, `replicas`, `bins`,
    /// `out`, `z_threshold`, `dense_paths`, `serial`, `reaction_noise`.
    pub fn from_key_values(study: Study, text: &str) -> Result<Self> {
        let (config, mut rest) = SimConfig::from_key_values(text)?;
        let mut spec = Self::new(study, config);
        let mut take = |k: &str| rest.remove(k);
        if let Some(l) = take("n_ladder") {
            spec.n_ladder = parse_list(&l)?;
        }
        if let Some(r) = parse_field("replicas", take("replicas"))? {
            spec.replicas = r;
        }
        if let Some(b) = parse_field("bins", take("bins"))? {
            spec.bins = b;
        }
        if let Some(o) = take("out") {
            spec.out_dir = PathBuf::from(o);
        }
        if let Some(z) = parse_field("z_threshold", take("z_threshold"))? {
            spec.z_threshold = z;
        }
        if let Some(d) = parse_field("dense_paths", take("dense_paths"))? {
            spec.dense_paths = d;
        }
        if let Some(true) = parse_field::<bool>("serial", take("serial"))? {
            spec.execution = Execution::Serial;
        }
        if let Some(c) = parse_field("reaction_noise", take("reaction_noise"))? {
            spec.reaction_noise = c;
        }
        if let Some(k) = rest.keys().next() {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_ladder.is_empty() {
            return bad("N-ladder is empty".into());
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("N-ladder must be strictly increasing, got {:?}", self.n_ladder));
        }
        if self.study.is_statistical() && self.study != Study::Simulate && self.replicas < 2 {
            return bad(format!("statistical studies need at least 2 replicas, got {}", self.replicas));
        }
        if self.replicas == 0 {
            return bad("need at least one replica".into());
        }
        if self.bins == 0 {
            return bad("need at least one bin".into());
        }
        if !(self.z_threshold > 0.0) {
            return bad(format!("z-threshold must be positive, got {}", self.z_threshold));
        }
        self.kernel.validate().map_err(|e| Error::Config(e.to_string()))?;
        for &n in &self.n_ladder {
            self.config_for(n).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The simulation config at scaling `n`. The cutoff follows `n` unless
    /// it was set away from its default.
    pub fn config_for(&self, n: usize) -> SimConfig {
        let mut c = self.config.clone();
        let default_cutoff = SimConfig::new(self.config.n, self.config.u0.clone()).cutoff_radius;
        c.n = n;
        if self.config.cutoff_radius == default_cutoff {
            c.cutoff_radius = SimConfig::new(n, self.config.u0.clone()).cutoff_radius;
        }
        c
    }
}

/// One named pass/fail decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Exit status for a finished or failed run: 0 pass, 1 check failure,
/// 2 invalid specification.
pub fn exit_status(result: &Result<ExperimentOutcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(Error::Config(_)) | Err(Error::Domain(_)) | Err(Error::Unsupported(_)) => 2,
        Err(_) => 1,
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

/// Run a study. The spec is validated before anything is written.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let mut w = Writer { dir: spec.out_dir.clone(), files: Vec::new() };
    let checks = match spec.study {
        Study::Kernel => kernel_study(spec, &mut w)?,
        Study::Pde => pde_study(spec, &mut w)?,
        Study::Simulate => simulate_study(spec, &mut w)?,
        Study::Lln => density_study(spec, &mut w, 1)?,
        Study::Poc => density_study(spec, &mut w, 2)?,
        Study::Fluct => fluct_study(spec, &mut w)?,
        Study::Martingale => martingale_study(spec, &mut w)?,
        Study::Hierarchy => hierarchy_study(spec, &mut w)?,
    };
    write_manifest(spec, &checks, &mut w)?;
    Ok(ExperimentOutcome { checks, files: w.files })
}

fn write_manifest(spec: &ExperimentSpec, checks: &[Check], w: &mut Writer) -> Result<()> {
    let mut m = String::new();
    let ladder: Vec<String> = spec.n_ladder.iter().map(|n| n.to_string()).collect();
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(m, "study={}", spec.study);
    let _ = writeln!(m, "seed={}", spec.config.seed);
    let _ = writeln!(m, "n_ladder={}", ladder.join(","));
    let _ = writeln!(m, "replicas={}", spec.replicas);
    let _ = writeln!(m, "dt={}", spec.config.dt);
    let _ = writeln!(m, "t_end={}", spec.config.t_end);
    let _ = writeln!(m, "u0_integral={}", spec.config.u0.integral());
    let _ = writeln!(m, "bins={}", spec.bins);
    let _ = writeln!(m, "z_threshold={}", spec.z_threshold);
    let _ = writeln!(m, "created_unix={created}");
    for c in checks {
        let _ = writeln!(m, "check.{}={} # {}", c.name, if c.passed { "pass" } else { "fail" }, c.detail);
    }
    let _ = writeln!(m, "status={}", if checks.iter().all(|c| c.passed) { "pass" } else { "fail" });
    w.write("manifest.txt", &m)
}

/// Kernel validation: symmetry, conservation, agreement of the image and
/// cosine representations, Chapman–Kolmogorov.
pub fn kernel_checks(params: &KernelParams) -> Result<Vec<(String, f64, f64)>> {
    let xs = [0.0, 0.13, 0.5, 0.77, 1.0];
    let times = [0.01, 0.03, 0.1, 0.3, 1.0];
    let mut sym: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for &t in &times {
        for &x in &xs {
            for &y in &xs {
                let a = eval_kernel(t, x, y, params)?;
                sym = sym.max((a - eval_kernel(t, y, x, params)?).abs());
                cross = cross.max((image_sum(t, x, y, 40) - spectral_sum(t, x, y, 2000)).abs());
            }
        }
    }
    let mut mass: f64 = 0.0;
    let one = GridFunction::constant(2001, 1.0)?;
    for &t in &times {
        let p = SemigroupOperator::new(t, 2001, params)?.apply(&one)?;
        mass = mass.max(p.values().iter().fold(0.0, |m: f64, v| m.max((v - 1.0).abs())));
    }
    let mut ck: f64 = 0.0;
    let res = 1001;
    for &(s, t) in &[(0.02, 0.03), (0.1, 0.2), (0.05, 0.5)] {
        let op_s = SemigroupOperator::new(s, res, params)?;
        for &y in &[0.1, 0.5, 0.9] {
            let f = GridFunction::from_fn(res, |z| eval_kernel(t, z, y, params).unwrap_or(f64::NAN))?;
            let composed = op_s.apply(&f)?;
            for &xi in &[0usize, 250, 500, 750, 1000] {
                let x = xi as f64 / (res - 1) as f64;
                ck = ck.max((composed.values()[xi] - eval_kernel(s + t, x, y, params)?).abs());
            }
        }
    }
    Ok(vec![
        ("kernel_symmetry".into(), sym, 1e-12),
        ("kernel_conservation".into(), mass, 1e-8),
        ("kernel_image_vs_spectral".into(), cross, 1e-8),
        ("kernel_chapman_kolmogorov".into(), ck, 1e-6),
    ])
}

fn tolerance_checks(rows: &mut Vec<ReportRow>, results: Vec<(String, f64, f64)>) -> Vec<Check> {
    results
        .into_iter()
        .map(|(name, value, tol)| {
            rows.push(ReportRow::scalar(name.clone(), None, value));
            Check::new(name, value <= tol, format!("{value:.3e} <= {tol:.0e}"))
        })
        .collect()
}

fn kernel_study(spec: &ExperimentSpec, w: &mut Writer) -> Result<Vec<Check>> {
    let mut rows = Vec::new();
    let checks = tolerance_checks(&mut rows, kernel_checks(&spec.kernel)?);
    w.write("kernel.csv", &render_csv(&rows))?;
    Ok(checks)
}

fn constant_value(f: &GridFunction) -> Option<f64> {
    let v = f.values()[0];
    f.values().iter().all(|&x| x == v).then_some(v)
}

fn pde_study(spec: &ExperimentSpec, w: &mut Writer) -> Result<Vec<Check>> {
    let c = &spec.config;
    let sol = solve_mild(&c.u0, c.t_end, c.dt, &spec.kernel)?;
    let mut body = Vec::new();
    sol.write_csv(&mut body, (sol.times.len() / 100).max(1))?;
    w.write("pde_solution.csv", &String::from_utf8_lossy(&body))?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let masses = sol.masses();
    let monotone = masses.windows(2).all(|m| m[1] <= m[0] + 1e-14);
    rows.push(ReportRow::scalar("mass", Some(sol.final_time()), *masses.last().unwrap_or(&0.0)));
    checks.push(Check::new("pde_mass_nonincreasing", monotone, "mass is nonincreasing in time"));
    if let Some(v0) = constant_value(&c.u0) {
        let exact = v0 / (1.0 + v0 * sol.final_time());
        let err = sol.last().values().iter().fold(0.0, |m: f64, v| m.max((v - exact).abs()));
        rows.push(ReportRow::scalar("sup_error_closed_form", Some(sol.final_time()), err));
        checks.push(Check::new("pde_closed_form", err <= 1e-5, format!("{err:.3e} <= 1e-5")));
    }
    w.write("pde.csv", &render_csv(&rows))?;
    Ok(checks)
}

fn ensemble_for(spec: &ExperimentSpec, n: usize, record_times: Vec<f64>) -> Result<ReplicaEnsemble> {
    let mut c = spec.config_for(n);
    c.record_times = record_times;
    ReplicaEnsemble::run(&c, spec.replicas, spec.execution)
}

fn simulate_study(spec: &ExperimentSpec, w: &mut Writer) -> Result<Vec<Check>> {
    for &n in &spec.n_ladder {
        let ens = ReplicaEnsemble::run(&spec.config_for(n), spec.replicas, spec.execution)?;
        w.write(&format!("simulate_{n}.csv"), &snapshot_csv(&ens))?;
    }
    Ok(Vec::new())
}

/// Particle positions of every replica at every record time.
pub fn snapshot_csv(ens: &ReplicaEnsemble) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SCHEMA_HEADER}");
    let _ = writeln!(out, "replica,t,particle_index,x");
    for (r, rep) in ens.replicas.iter().enumerate() {
        for s in rep {
            for (i, x) in s.positions.iter().enumerate() {
                let _ = writeln!(out, "{r},{},{i},{x}", s.time);
            }
        }
    }
    out
}

fn replica_csv(columns: &str, values: &[Vec<f64>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SCHEMA_HEADER}");
    let _ = writeln!(out, "replica,{columns}");
    for (r, v) in values.iter().enumerate() {
        let cells: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{r},{}", cells.join(","));
    }
    out
}

fn limit_solution(spec: &ExperimentSpec) -> Result<PdeSolution> {
    let c = &spec.config;
    solve_mild(&c.u0, c.t_end, c.dt.min(1e-3), &spec.kernel)
}

fn density_study(spec: &ExperimentSpec, w: &mut Writer, k: usize) -> Result<Vec<Check>> {
    let t = spec.config.t_end;
    let u = limit_solution(spec)?;
    let target = if k == 1 { bin_averages(u.last(), spec.bins) } else { product_bin_averages(u.last(), spec.bins) };
    let study = spec.study.name();
    let mut distances = Vec::new();
    let mut checks = Vec::new();
    for (pos, &n) in spec.n_ladder.iter().enumerate() {
        let ens = ensemble_for(spec, n, vec![0.0, t])?;
        let est = estimate_correlation(&ens, k, t, spec.bins)?;
        let z = est.zscores(&target);
        let mut rows = Vec::new();
        let b = spec.bins;
        for (cell, ((v, se), zc)) in est.values.iter().zip(&est.standard_errors).zip(&z).enumerate() {
            let row = ReportRow::scalar(format!("F{k}"), Some(t), *v).with_error(*se, *zc);
            rows.push(if k == 1 { row.with_bins(cell, None) } else { row.with_bins(cell / b, Some(cell % b)) });
        }
        let l1 = est.l1_distance(&target);
        let sup = est.sup_distance(&target);
        rows.push(ReportRow::scalar("l1_distance", Some(t), l1));
        rows.push(ReportRow::scalar("sup_distance", Some(t), sup));
        let masses: Vec<f64> = ens.states_at(t)?.iter().map(|s| s.alive() as f64 / n as f64).collect();
        let (mm, mse) = mean_and_se(&masses);
        let u_mass = u.last().integral();
        let mz = zscore(mm - u_mass, mse);
        rows.push(ReportRow::scalar("mass", Some(t), mm).with_error(mse, mz));
        w.write(&format!("{study}_{n}.csv"), &render_csv(&rows))?;
        w.write(
            &format!("{study}_{n}_replicas.csv"),
            &replica_csv("mass", &masses.iter().map(|m| vec![*m]).collect::<Vec<_>>()),
        )?;
        distances.push(if k == 1 { l1 } else { sup });
        if pos + 1 == spec.n_ladder.len() {
            let within = z.iter().filter(|z| z.abs() <= spec.z_threshold).count();
            let frac = within as f64 / z.len() as f64;
            if k == 1 {
                checks.push(Check::new(
                    format!("{study}_bins_within_threshold"),
                    within == z.len(),
                    format!("{within}/{} bins at N={n}", z.len()),
                ));
                checks.push(Check::new(
                    format!("{study}_mass"),
                    mz.abs() <= spec.z_threshold,
                    format!("mean m/N {mm:.5} vs {u_mass:.5}, z={mz:.2}"),
                ));
            } else {
                checks.push(Check::new(
                    format!("{study}_bins_within_threshold"),
                    frac >= 0.99,
                    format!("{:.2}% of bins at N={n}", 100.0 * frac),
                ));
            }
        }
    }
    if distances.len() > 1 {
        let decreasing = distances.windows(2).all(|d| d[1] < d[0]);
        let label = if k == 1 { "l1" } else { "sup" };
        checks.push(Check::new(
            format!("{study}_{label}_decreasing"),
            decreasing,
            format!("{distances:.4?} along N={:?}", spec.n_ladder),
        ));
    }
    Ok(checks)
}

/// Variance target for `φ ≡ 1` from the covariance of the linearised
/// fluctuation equation.
pub fn fluctuation_target(spec: &ExperimentSpec) -> Result<f64> {
    let u = limit_solution(spec)?;
    let options = CovarianceOptions { reaction_noise: spec.reaction_noise, ..CovarianceOptions::default() };
    let states = solve_fluctuation_covariance_with(&u, 16, u.dt, &options)?;
    let one = GridFunction::constant(u.resolution, 1.0)?;
    let last = states.last().expect("covariance trajectory includes the initial state");
    Ok(last.variance_of(&basis_coefficients(&one, 16)))
}

fn fluct_study(spec: &ExperimentSpec, w: &mut Writer) -> Result<Vec<Check>> {
    let t = spec.config.t_end;
    let target = fluctuation_target(spec)?;
    let one = GridFunction::constant(spec.config.u0.resolution(), 1.0)?;
    let mut checks = Vec::new();
    for &n in &spec.n_ladder {
        let ens = ensemble_for(spec, n, vec![0.0, t])?;
        let v = fluctuation_variance(&ens, &one, t)?;
        let z = zscore(v.variance - target, v.standard_error);
        let rows = vec![
            ReportRow::scalar("n_var_mass", Some(t), v.variance).with_error(v.standard_error, z),
            ReportRow::scalar("target", Some(t), target),
        ];
        w.write(&format!("fluct_{n}.csv"), &render_csv(&rows))?;
        let samples: Vec<Vec<f64>> =
            ens.states_at(t)?.iter().map(|s| vec![empirical_pairing(s, &one, n)]).collect();
        w.write(&format!("fluct_{n}_replicas.csv"), &replica_csv("pairing", &samples))?;
        checks.push(Check::new(
            format!("fluct_variance_n{n}"),
            z.abs() <= spec.z_threshold,
            format!("N·Var {:.4} ± {:.4} vs {target:.4}, z={z:.2}", v.variance, v.standard_error),
        ));
    }
    Ok(checks)
}

fn martingale_study(spec: &ExperimentSpec, w: &mut Writer) -> Result<Vec<Check>> {
    let t = spec.config.t_end;
    let res = spec.config.u0.resolution();
    let one = GridFunction::constant(res, 1.0)?;
    let cos = GridFunction::from_fn(res, |x| (std::f64::consts::PI * x).cos())?;
    let phis = [("one", &one), ("cos", &cos)];
    let mut checks = Vec::new();
    for &n in &spec.n_ladder {
        let cfg = spec.config_for(n);
        let reports: Vec<MartingaleReport> = if spec.dense_paths {
            let mut c = cfg.clone();
            c.record_times = vec![0.0, t];
            let paths = crate::stats::map_replicas(spec.replicas, spec.execution, |r| Ok(run_dense(&c, r)?.1))?;
            phis.iter().map(|(_, p)| martingale_check(&paths, &c, p, t)).collect::<Result<_>>()?
        } else {
            let refs: Vec<&GridFunction> = phis.iter().map(|(_, p)| *p).collect();
            martingale_check_streaming_many(&cfg, spec.replicas, &refs, t, spec.execution)?
        };
        let mut rows = Vec::new();
        let mut raw = vec![Vec::new(); spec.replicas];
        for ((name, _), rep) in phis.iter().zip(&reports) {
            rows.extend(rep.rows(&format!("martingale_{name}")));
            for (r, s) in rep.samples.iter().enumerate() {
                raw[r].extend([s.m, s.qv]);
            }
            checks.push(Check::new(
                format!("martingale_{name}_mean_n{n}"),
                rep.mean_z.abs() <= spec.z_threshold,
                format!("mean M {:.3e}, z={:.2}", rep.mean_m, rep.mean_z),
            ));
            checks.push(Check::new(
                format!("martingale_{name}_qv_n{n}"),
                rep.qv_z.abs() <= spec.z_threshold,
                format!("Var M {:.4e} vs mean QV {:.4e}, z={:.2}", rep.var_m, rep.qv_mean, rep.qv_z),
            ));
        }
        w.write(&format!("martingale_{n}.csv"), &render_csv(&rows))?;
        w.write(&format!("martingale_{n}_replicas.csv"), &replica_csv("m_one,qv_one,m_cos,qv_cos", &raw))?;
    }
    Ok(checks)
}

fn hierarchy_study(spec: &ExperimentSpec, w: &mut Writer) -> Result<Vec<Check>> {
    let t = spec.config.t_end;
    let mut checks = Vec::new();
    let coarse = GridFunction::from_fn(201, |x| spec.config.u0.interpolate(x))?;
    let u = solve_mild(&coarse, t, spec.config.dt.min(1e-3), &spec.kernel)?;
    let mut rows = Vec::new();
    for k in [1, 2] {
        let r = limiting_residual(&u, k, t, &spec.kernel)?;
        rows.push(ReportRow::scalar(format!("limiting_residual_k{k}"), Some(t), r.sup_residual));
        checks.push(Check::new(
            format!("hierarchy_limiting_k{k}"),
            r.sup_residual <= 1e-3,
            format!("{:.3e} <= 1e-3", r.sup_residual),
        ));
    }
    w.write("hierarchy.csv", &render_csv(&rows))?;
    let nodes = (t / 0.025).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=nodes).map(|j| t * j as f64 / nodes as f64).collect();
    for &n in &spec.n_ladder {
        let ens = ensemble_for(spec, n, times.clone())?;
        let r = finite_residual(&ens, 1, t, spec.bins, DEFAULT_MAX_QUADRATURE_STEP, &spec.kernel)?;
        let zs = r.zscores.clone().unwrap_or_default();
        let ses = r.standard_errors.clone().unwrap_or_default();
        let rows: Vec<ReportRow> = r
            .values
            .iter()
            .enumerate()
            .map(|(a, v)| ReportRow::scalar("finite_residual_k1", Some(t), *v).with_bins(a, None).with_error(ses[a], zs[a]))
            .collect();
        w.write(&format!("hierarchy_{n}.csv"), &render_csv(&rows))?;
        let max_z = r.max_abs_z().unwrap_or(0.0);
        checks.push(Check::new(
            format!("hierarchy_finite_k1_n{n}"),
            max_z <= spec.z_threshold,
            format!("max |z| {max_z:.2}"),
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_names_round_trip() {
        for s in Study::ALL {
            assert_eq!(s.name().parse::<Study>().unwrap(), s);
        }
        assert_eq!("kernel-check".parse::<Study>().unwrap(), Study::Kernel);
        assert!("nope".parse::<Study>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(Study::Lln, SimConfig::uniform(100, 1.0));
        spec.n_ladder = vec![100, 400, 400];
        assert!(spec.validate().is_err());
        spec.n_ladder = vec![100, 400];
        spec.replicas = 1;
        assert!(spec.validate().is_err());
        spec.replicas = 10;
        assert!(spec.validate().is_ok());
        assert_eq!(spec.config_for(400).cutoff_radius, 0.02);
        assert!(ExperimentSpec::from_key_values(Study::Lln, "bogus = 1").is_err());
        let s = ExperimentSpec::from_key_values(Study::Lln, "n_ladder = 10, 20\nreplicas = 7\nserial = true").unwrap();
        assert_eq!((s.n_ladder.clone(), s.replicas, s.execution), (vec![10, 20], 7, Execution::Serial));
    }

    #[test]
    fn invalid_spec_maps_to_usage_error() {
        let mut spec = ExperimentSpec::new(Study::Lln, SimConfig::uniform(100, 1.0));
        spec.n_ladder.clear();
        assert_eq!(exit_status(&run_experiment(&spec)), 2);
    }
}
