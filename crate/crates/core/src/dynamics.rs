//! Sweeps, checkpoints and seeded replica ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_topology, ModelError, ModelState, Spin, Topology};
use crate::rng::{derive_seed, RandomSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sweeps must be positive")]
    NoSweeps,
    #[error("replicas must be positive")]
    NoReplicas,
    #[error("checkpoints must be strictly increasing: {0:?}")]
    CheckpointOrder(Vec<u64>),
    #[error("checkpoint {checkpoint} is past the last sweep {sweeps}")]
    CheckpointPastEnd { checkpoint: u64, sweeps: u64 },
    #[error("{given} explicit offsets given but {expected} long-range neighbors requested")]
    OffsetCountMismatch { given: usize, expected: usize },
    #[error("dimension {0} cannot be written as 1 + q*m/2 with q in [0, 1] on this ring")]
    UnrepresentableDimension(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Parameters of one ensemble run. One sweep is `n_nodes` pair interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub m_extra: usize,
    pub q: f64,
    /// Explicit long-range offsets; `None` uses the geometric hierarchy.
    pub offsets: Option<Vec<usize>>,
    pub sweeps: u64,
    pub seed: u64,
    pub replicas: usize,
    pub checkpoints: Vec<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 1024,
            m_extra: 0,
            q: 0.0,
            offsets: None,
            sweeps: 10_000,
            seed: 1,
            replicas: 16,
            checkpoints: log_checkpoints(10_000, 2),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sweeps == 0 {
            return Err(ConfigError::NoSweeps);
        }
        if self.replicas == 0 {
            return Err(ConfigError::NoReplicas);
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::CheckpointOrder(self.checkpoints.clone()));
        }
        if let Some(&last) = self.checkpoints.last() {
            if last > self.sweeps {
                return Err(ConfigError::CheckpointPastEnd {
                    checkpoint: last,
                    sweeps: self.sweeps,
                });
            }
        }
        self.topology().map(|_| ())
    }

    pub fn topology(&self) -> Result<Topology, ConfigError> {
        match &self.offsets {
            Some(offsets) => {
                if offsets.len() != self.m_extra {
                    return Err(ConfigError::OffsetCountMismatch {
                        given: offsets.len(),
                        expected: self.m_extra,
                    });
                }
                Ok(Topology::with_offsets(self.n_nodes, offsets.clone(), self.q)?)
            }
            None => Ok(build_topology(self.n_nodes, self.m_extra, self.q)?),
        }
    }

    pub fn effective_dimension(&self) -> f64 {
        1.0 + self.q * self.m_extra as f64 / 2.0
    }

    /// Copy of this config retuned to dimension `d` with the hierarchy offsets.
    pub fn with_dimension(&self, d: f64) -> Result<SimConfig, ConfigError> {
        let (m, q) = factorize_dimension(d, self.n_nodes)?;
        Ok(SimConfig {
            m_extra: m,
            q,
            offsets: None,
            ..self.clone()
        })
    }

    /// Copy with a new ring size; explicit offsets are dropped.
    pub fn with_nodes(&self, n_nodes: usize) -> SimConfig {
        SimConfig {
            n_nodes,
            offsets: None,
            ..self.clone()
        }
    }
}

/// Splits a target dimension into the fewest long-range links `m` and the
/// weight `q = 2(d-1)/m`.
pub fn factorize_dimension(d: f64, n_nodes: usize) -> Result<(usize, f64), ConfigError> {
    if !d.is_finite() || d < 1.0 {
        return Err(ConfigError::UnrepresentableDimension(d));
    }
    let links = 2.0 * (d - 1.0);
    if links == 0.0 {
        return Ok((0, 0.0));
    }
    let m = (links - 1e-9).ceil().max(1.0) as usize;
    if m > crate::model::offset_capacity(n_nodes) {
        return Err(ConfigError::UnrepresentableDimension(d));
    }
    let q = (links / m as f64).min(1.0);
    Ok((m, q))
}

/// `0` followed by `round(10^(1 + k/per_decade))` up to `sweeps`, always
/// ending at `sweeps`.
pub fn log_checkpoints(sweeps: u64, per_decade: u32) -> Vec<u64> {
    let mut out = vec![0];
    let per_decade = per_decade.max(1);
    for k in 0.. {
        let c = 10f64.powf(1.0 + f64::from(k) / f64::from(per_decade)).round() as u64;
        if c >= sweeps {
            break;
        }
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    if out.last() != Some(&sweeps) {
        out.push(sweeps);
    }
    out
}

/// Node prices and spins at a sweep boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub sweep: u64,
    pub prices: Vec<i64>,
    pub spins: Vec<Spin>,
}

impl Snapshot {
    pub fn of<R>(state: &ModelState<R>) -> Self {
        let n = state.nodes().len() as u64;
        Snapshot {
            sweep: state.interactions_done() / n,
            prices: state.nodes().iter().map(|x| x.price).collect(),
            spins: state.nodes().iter().map(|x| x.spin).collect(),
        }
    }
}

/// Advances `state` by `n_sweeps` sweeps, calling `recorder` after every sweep
/// count in `checkpoints` that falls in `(start, start + n_sweeps]`.
///
/// A recorder error stops the run at that sweep boundary and is returned.
pub fn run_sweeps<R, E, F>(
    state: &mut ModelState<R>,
    n_sweeps: u64,
    checkpoints: &[u64],
    mut recorder: F,
) -> Result<(), E>
where
    R: RandomSource,
    F: FnMut(Snapshot) -> Result<(), E>,
{
    let n = state.topology().n_nodes() as u64;
    let start = state.interactions_done() / n;
    let end = start + n_sweeps;
    let mut pending = checkpoints
        .iter()
        .copied()
        .filter(|&c| c > start && c <= end)
        .peekable();
    let mut sweep = start;
    while sweep < end {
        let stop = pending.peek().copied().unwrap_or(end);
        for _ in 0..(stop - sweep) * n {
            state.apply_step();
        }
        sweep = stop;
        if pending.next_if_eq(&stop).is_some() {
            recorder(Snapshot::of(state))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Snapshots of one replica at every configured checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaTrace {
    pub replica: usize,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
}

impl ReplicaTrace {
    pub fn at(&self, sweep: u64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.sweep == sweep)
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("replica without snapshots")
    }
}

/// Runs replica `replica` of `config`. The topology must be `config.topology()`.
pub fn run_replica(config: &SimConfig, topology: Topology, replica: usize) -> ReplicaTrace {
    let seed = derive_seed(config.seed, replica as u64);
    let mut state = ModelState::new(topology, seed);
    let mut snapshots = Vec::with_capacity(config.checkpoints.len());
    if config.checkpoints.first() == Some(&0) {
        snapshots.push(Snapshot::of(&state));
    }
    let _ = run_sweeps(&mut state, config.sweeps, &config.checkpoints, |s| {
        snapshots.push(s);
        Ok::<_, std::convert::Infallible>(())
    });
    ReplicaTrace {
        replica,
        seed,
        snapshots,
    }
}

/// Runs every replica of `config`, ordered by replica index. The result does
/// not depend on `execution`.
pub fn run_ensemble(config: &SimConfig, execution: Execution) -> Result<Vec<ReplicaTrace>, ConfigError> {
    config.validate()?;
    let topology = config.topology()?;
    let run = |r: usize| run_replica(config, topology.clone(), r);
    Ok(match execution {
        Execution::Serial => (0..config.replicas).map(run).collect(),
        Execution::Parallel => (0..config.replicas).into_par_iter().map(run).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_topology;

    fn small(n: usize) -> SimConfig {
        SimConfig {
            n_nodes: n,
            sweeps: 50,
            replicas: 4,
            checkpoints: vec![0, 10, 25, 50],
            seed: 9,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_sweeps_do_nothing() {
        let mut state = ModelState::new(build_topology(20, 0, 0.0).unwrap(), 1);
        let mut calls = 0;
        run_sweeps(&mut state, 0, &[0, 1, 2], |_| {
            calls += 1;
            Ok::<_, ()>(())
        })
        .unwrap();
        assert_eq!(calls, 0);
        assert_eq!(state.interactions_done(), 0);
    }

    #[test]
    fn sweep_accounting() {
        let mut state = ModelState::new(build_topology(100, 0, 0.0).unwrap(), 1);
        run_sweeps(&mut state, 5, &[], |_| Ok::<_, ()>(())).unwrap();
        assert_eq!(state.interactions_done(), 500);
        let mut seen = Vec::new();
        run_sweeps(&mut state, 5, &[5, 6, 9, 10, 11], |s| {
            assert_eq!(s.prices.len(), 100);
            seen.push(s.sweep);
            Ok::<_, ()>(())
        })
        .unwrap();
        assert_eq!(seen, vec![6, 9, 10]);
        assert_eq!(state.interactions_done(), 1000);
    }

    #[test]
    fn recorder_errors_stop_at_a_sweep_boundary() {
        let mut state = ModelState::new(build_topology(30, 1, 0.5).unwrap(), 4);
        let err = run_sweeps(&mut state, 10, &[2, 4, 6], |s| {
            if s.sweep == 4 {
                Err("disk full")
            } else {
                Ok(())
            }
        });
        assert_eq!(err, Err("disk full"));
        assert_eq!(state.interactions_done(), 4 * 30);
    }

    #[test]
    fn identical_seeds_give_identical_snapshots() {
        let run = || {
            let mut state = ModelState::new(build_topology(64, 0, 0.0).unwrap(), 31);
            let mut snaps = Vec::new();
            run_sweeps(&mut state, 20, &[5, 10, 20], |s| {
                snaps.push(s);
                Ok::<_, ()>(())
            })
            .unwrap();
            snaps
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_replica_matches_direct_run() {
        let config = SimConfig {
            replicas: 1,
            ..small(40)
        };
        let traces = run_ensemble(&config, Execution::Serial).unwrap();
        let mut state = ModelState::new(config.topology().unwrap(), derive_seed(config.seed, 0));
        let mut direct = vec![Snapshot::of(&state)];
        run_sweeps(&mut state, config.sweeps, &config.checkpoints, |s| {
            direct.push(s);
            Ok::<_, ()>(())
        })
        .unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].snapshots, direct);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let config = SimConfig {
            m_extra: 2,
            q: 0.5,
            ..small(64)
        };
        let a = run_ensemble(&config, Execution::Serial).unwrap();
        let b = run_ensemble(&config, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, t)| t.replica == i));
    }

    #[test]
    fn replicas_differ() {
        let traces = run_ensemble(&small(64), Execution::Serial).unwrap();
        assert_ne!(traces[0].seed, traces[1].seed);
        assert_ne!(traces[0].last(), traces[1].last());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = small(40);
        let bad = [
            SimConfig {
                sweeps: 0,
                ..base.clone()
            },
            SimConfig {
                replicas: 0,
                ..base.clone()
            },
            SimConfig {
                checkpoints: vec![5, 5],
                ..base.clone()
            },
            SimConfig {
                checkpoints: vec![60],
                ..base.clone()
            },
            SimConfig { q: 2.0, ..base.clone() },
            SimConfig {
                n_nodes: 2,
                ..base.clone()
            },
            SimConfig {
                offsets: Some(vec![3, 7]),
                m_extra: 1,
                ..base.clone()
            },
        ];
        for config in bad {
            assert!(run_ensemble(&config, Execution::Serial).is_err(), "{config:?}");
        }
    }

    #[test]
    fn dimension_factorization() {
        assert_eq!(factorize_dimension(1.0, 1024).unwrap(), (0, 0.0));
        let (m, q) = factorize_dimension(2.2, 1024).unwrap();
        assert_eq!(m, 3);
        assert!((q - 0.8).abs() < 1e-12);
        assert_eq!(factorize_dimension(2.0, 1024).unwrap(), (2, 1.0));
        assert_eq!(factorize_dimension(3.0, 1024).unwrap(), (4, 1.0));
        assert_eq!(factorize_dimension(1.5, 1024).unwrap(), (1, 1.0));
        let (m, q) = factorize_dimension(1.2, 1024).unwrap();
        assert_eq!(m, 1);
        assert!((q - 0.4).abs() < 1e-12);
        assert!(factorize_dimension(0.9, 1024).is_err());
        assert!(factorize_dimension(f64::NAN, 1024).is_err());
        // a ring of 10 holds at most 4 offsets, i.e. d <= 3
        assert!(factorize_dimension(3.5, 10).is_err());
        for k in 0..=200 {
            let d = 1.0 + f64::from(k) * 0.01;
            let (m, q) = factorize_dimension(d, 1024).unwrap();
            assert!((0.0..=1.0).contains(&q));
            assert!((1.0 + q * m as f64 / 2.0 - d).abs() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn checkpoint_ladder() {
        assert_eq!(
            log_checkpoints(10_000, 2),
            vec![0, 10, 32, 100, 316, 1000, 3162, 10_000]
        );
        assert_eq!(log_checkpoints(50, 1), vec![0, 10, 50]);
        assert_eq!(log_checkpoints(5, 2), vec![0, 5]);
    }
}
