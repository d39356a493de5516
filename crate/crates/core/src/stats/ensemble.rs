use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::particles::{ParticleState, SimConfig, Simulator};

/// How replicas are scheduled. Both modes give identical results because
/// every replica draws from its own random streams.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Evaluate `f` for replicas `0..count`, results in replica order.
pub fn map_replicas<T, F>(count: usize, execution: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    match execution {
        Execution::Serial => (0..count as u64).map(f).collect(),
        Execution::Parallel => (0..count as u64).into_par_iter().map(f).collect(),
    }
}

/// Independent realisations of one configuration, each recorded at the
/// configuration's record times.
#[derive(Clone, Debug)]
pub struct ReplicaEnsemble {
    pub config: SimConfig,
    /// `replicas[r][i]` is replica `r` at `config.record_times[i]`.
    pub replicas: Vec<Vec<ParticleState>>,
}

impl ReplicaEnsemble {
    pub fn run(config: &SimConfig, count: usize, execution: Execution) -> Result<Self> {
        let sim = Simulator::new(config)?;
        let replicas = map_replicas(count, execution, |r| sim.run(r))?;
        Ok(Self { config: config.clone(), replicas })
    }

    /// Wrap externally produced snapshots; every replica must carry one
    /// state per record time.
    pub fn from_replicas(config: SimConfig, replicas: Vec<Vec<ParticleState>>) -> Result<Self> {
        let expected = config.record_times.len();
        if let Some(bad) = replicas.iter().position(|r| r.len() != expected) {
            return domain(format!(
                "replica {bad} has {} snapshots, expected {expected}",
                replicas[bad].len()
            ));
        }
        Ok(Self { config, replicas })
    }

    pub fn replica_count(&self) -> usize {
        self.replicas.len()
    }

    pub fn record_times(&self) -> &[f64] {
        &self.config.record_times
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.config.t_end.max(1.0);
        match self.record_times().iter().position(|&s| (s - t).abs() <= tol) {
            Some(i) => Ok(i),
            None => domain(format!("time {t} is not a record time of the ensemble")),
        }
    }

    /// One state per replica at record time `t`.
    pub fn states_at(&self, t: f64) -> Result<Vec<&ParticleState>> {
        let i = self.time_index(t)?;
        Ok(self.replicas.iter().map(|r| &r[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_equals_serial() {
        let mut c = SimConfig::uniform(60, 1.0).with_horizon(0.1, vec![0.0, 0.05, 0.1]);
        c.dt = 0.01;
        c.seed = 5;
        let a = ReplicaEnsemble::run(&c, 6, Execution::Parallel).unwrap();
        let b = ReplicaEnsemble::run(&c, 6, Execution::Serial).unwrap();
        assert_eq!(a.replicas, b.replicas);
        assert_eq!(a.states_at(0.05).unwrap().len(), 6);
        assert!(a.states_at(0.07).is_err());
    }

    #[test]
    fn rejects_ragged_replicas() {
        let c = SimConfig::uniform(10, 1.0);
        let s = ParticleState { positions: vec![0.5], time: 0.0, initial_count: 1 };
        assert!(ReplicaEnsemble::from_replicas(c, vec![vec![s]]).is_err());
    }
}
