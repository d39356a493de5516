use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Initial density profiles that can be named in a config file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialProfile {
    /// `c`
    Constant(f64),
    /// `a + b x`
    Linear(f64, f64),
    /// `a + b cos(πx)`
    Cosine(f64, f64),
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::Linear(a, b) => a + b * x,
            Self::Cosine(a, b) => a + b * (PI * x).cos(),
        }
    }

    pub fn sample(&self, resolution: usize) -> Result<GridFunction> {
        GridFunction::from_fn(resolution, |x| self.eval(x))
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "const:{c}"),
            Self::Linear(a, b) => write!(f, "linear:{a}:{b}"),
            Self::Cosine(a, b) => write!(f, "cos:{a}:{b}"),
        }
    }
}

impl FromStr for InitialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Config(format!("profile `{s}` is missing a coefficient")))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("profile `{s}`: {e}")))
        };
        match (parts[0], parts.len()) {
            ("const", 2) => Ok(Self::Constant(num(1)?)),
            ("linear", 3) => Ok(Self::Linear(num(1)?, num(2)?)),
            ("cos", 3) => Ok(Self::Cosine(num(1)?, num(2)?)),
            _ => Err(Error::Config(format!(
                "unknown profile `{s}` (expected const:c, linear:a:b or cos:a:b)"
            ))),
        }
    }
}

/// Parameters of one simulation of the particle system.
#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Scaling parameter `N`.
    pub n: usize,
    pub u0: GridFunction,
    pub t_end: f64,
    /// Requested step; the effective step divides `t_end` (see [`Self::steps`]).
    pub dt: f64,
    /// Pairs farther apart than this are never considered for annihilation.
    pub cutoff_radius: f64,
    pub seed: u64,
    pub record_times: Vec<f64>,
    /// When false the particles only diffuse.
    pub annihilation: bool,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_CUTOFF_WIDTHS: f64 = 8.0;
pub const DEFAULT_U0_RESOLUTION: usize = 401;

impl SimConfig {
    /// Defaults: horizon 1, `dt = 1e-3`, cutoff `min(8/N, 1)`, seed 0, snapshots at
    /// 0 and the horizon, annihilation on.
    pub fn new(n: usize, u0: GridFunction) -> Self {
        Self {
            n,
            u0,
            t_end: 1.0,
            dt: DEFAULT_DT,
            cutoff_radius: (DEFAULT_CUTOFF_WIDTHS / n.max(1) as f64).min(1.0),
            seed: 0,
            record_times: vec![0.0, 1.0],
            annihilation: true,
        }
    }

    pub fn uniform(n: usize, density: f64) -> Self {
        Self::new(n, GridFunction::constant(DEFAULT_U0_RESOLUTION, density).expect("valid grid"))
    }

    pub fn with_horizon(mut self, t_end: f64, record_times: Vec<f64>) -> Self {
        self.t_end = t_end;
        self.record_times = record_times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.n < 2 {
            return bad(format!("N must be at least 2, got {}", self.n));
        }
        if self.u0.dim() != 1 {
            return bad("initial density must be one-dimensional".into());
        }
        if self.u0.min_value() < 0.0 {
            return bad("initial density must be nonnegative".into());
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || self.dt > self.t_end * (1.0 + 1e-12) {
            return bad(format!("need 0 < dt <= T, got dt={} T={}", self.dt, self.t_end));
        }
        if !(self.cutoff_radius > 0.0 && self.cutoff_radius <= 1.0) {
            return bad(format!("cutoff radius must lie in (0,1], got {}", self.cutoff_radius));
        }
        if self.record_times.windows(2).any(|w| w[0] > w[1]) {
            return bad("record times must be sorted".into());
        }
        if self.record_times.iter().any(|&t| !(0.0..=self.t_end * (1.0 + 1e-12)).contains(&t)) {
            return bad("record times must lie in [0, T]".into());
        }
        Ok(())
    }

    /// Number of steps; the effective step `t_end / steps` is at most `dt`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn step_size(&self) -> f64 {
        self.t_end / self.steps() as f64
    }

    /// Step index after which the snapshot for `t` is taken.
    pub fn step_index(&self, t: f64) -> usize {
        ((t / self.step_size()).round() as usize).min(self.steps())
    }

    /// Parse a flat `key = value` file. Blank lines and `#` comments are
    /// ignored. Keys: `n`, `u0` (profile), `u0_resolution`, `t_end`, `dt`,
    /// `cutoff_radius`, `seed`, `record_times` (comma separated),
    /// `annihilation`. Unknown keys are returned for the caller to consume.
    pub fn from_key_values(text: &str) -> Result<(Self, BTreeMap<String, String>)> {
        let mut map = parse_key_values(text)?;
        let mut take = |k: &str| map.remove(k);
        let n: usize = parse_field("n", take("n"))?.unwrap_or(100);
        let profile: InitialProfile = parse_field("u0", take("u0"))?.unwrap_or(InitialProfile::Constant(1.0));
        let resolution: usize = parse_field("u0_resolution", take("u0_resolution"))?.unwrap_or(DEFAULT_U0_RESOLUTION);
        let mut config = Self::new(n, profile.sample(resolution)?);
        if let Some(t) = parse_field("t_end", take("t_end"))? {
            config.t_end = t;
            config.record_times = vec![0.0, t];
        }
        if let Some(dt) = parse_field("dt", take("dt"))? {
            config.dt = dt;
        }
        if let Some(c) = parse_field("cutoff_radius", take("cutoff_radius"))? {
            config.cutoff_radius = c;
        }
        if let Some(s) = parse_field("seed", take("seed"))? {
            config.seed = s;
        }
        if let Some(list) = take("record_times") {
            config.record_times = parse_list(&list)?;
        }
        if let Some(a) = parse_field("annihilation", take("annihilation"))? {
            config.annihilation = a;
        }
        Ok((config, map))
    }
}

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn parse_field<T: FromStr>(key: &str, value: Option<String>) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    value
        .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}"))))
        .transpose()
}

pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("`{s}`: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_n() {
        let c = SimConfig::uniform(400, 1.0);
        assert_eq!(c.cutoff_radius, 0.02);
        assert_eq!(c.steps(), 1000);
        assert!(c.validate().is_ok());
        assert_eq!(c.step_index(0.5), 500);
    }

    #[test]
    fn parses_key_values() {
        let text = "\
# comment
n = 200
u0 = cos:1:0.5
t_end = 0.5
dt = 0.001
seed = 42
record_times = 0, 0.25, 0.5
annihilation = false
replicas = 10
";
        let (c, rest) = SimConfig::from_key_values(text).unwrap();
        assert_eq!(c.n, 200);
        assert_eq!(c.seed, 42);
        assert_eq!(c.record_times, vec![0.0, 0.25, 0.5]);
        assert!(!c.annihilation);
        assert_eq!(c.cutoff_radius, 0.04);
        assert!((c.u0.values()[0] - 1.5).abs() < 1e-15);
        assert_eq!(rest.get("replicas").map(String::as_str), Some("10"));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SimConfig::from_key_values("n 3").is_err());
        assert!(SimConfig::from_key_values("n = x").is_err());
        assert!(SimConfig::from_key_values("u0 = gauss:1").is_err());
        let mut c = SimConfig::uniform(100, 1.0);
        c.cutoff_radius = 1.5;
        assert!(c.validate().is_err());
        let mut c = SimConfig::uniform(100, 1.0);
        c.record_times = vec![0.5, 0.2];
        assert!(c.validate().is_err());
        let c = SimConfig::uniform(1, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn profile_round_trip() {
        for p in [InitialProfile::Constant(2.0), InitialProfile::Linear(0.0, 2.0), InitialProfile::Cosine(1.0, -0.5)] {
            assert_eq!(p.to_string().parse::<InitialProfile>().unwrap(), p);
        }
    }
}
