//! Solver variants and trajectory ensembles.
//!
//! The hierarchical method and its references share one engine. A
//! single-level run pins every species to one level and disables transfers;
//! the well-mixed run is the single-level run on level 0.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{trajectory_rng, EngineError, Kinetics, Simulation};
use crate::mesh::MAX_LEVEL;
use crate::model::{LevelWarning, Model, ModelError};
use crate::stats::{ensemble_mean, sample_grid, EnsembleSeries, RunMetrics, StatsError, TimeSeries, TimeSeriesRecorder};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("unrecognised solver '{0}' (expected hrdme, wellmixed or single-level:<L>)")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Automatic per-species levels with transfers to coarser levels.
    Hierarchical,
    /// Every species on one level, transfers disabled.
    SingleLevel(u8),
    WellMixed,
}

impl FromStr for Solver {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hrdme" => Ok(Solver::Hierarchical),
            "wellmixed" => Ok(Solver::WellMixed),
            _ => s
                .strip_prefix("single-level:")
                .and_then(|l| l.parse::<u8>().ok())
                .filter(|&l| l <= MAX_LEVEL)
                .map(Solver::SingleLevel)
                .ok_or_else(|| SolverError::Parse(s.to_string())),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Solver::Hierarchical => write!(f, "hrdme"),
            Solver::SingleLevel(l) => write!(f, "single-level:{l}"),
            Solver::WellMixed => write!(f, "wellmixed"),
        }
    }
}

impl Solver {
    /// Copy of `model` with target levels (and, for reference solvers, the
    /// hierarchy depth and transfer constant) set for this solver.
    pub fn configure(&self, model: &Model) -> Result<(Model, Vec<LevelWarning>), SolverError> {
        let mut m = model.clone();
        let level = match self {
            Solver::Hierarchical => {
                for s in &mut m.species {
                    s.target_level = None;
                }
                let w = m.assign_target_levels()?;
                return Ok((m, w));
            }
            Solver::SingleLevel(l) => *l,
            Solver::WellMixed => 0,
        };
        m.lmax = level;
        m.transfer_c = f64::INFINITY;
        for s in &mut m.species {
            s.override_level = Some(level);
            s.target_level = Some(level);
        }
        Ok((m, Vec::new()))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub t_final: f64,
    pub samples: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Verify index coherence after every event.
    pub audit: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { t_final: 5.0, samples: 100, trajectories: 200, seed: 0, workers: 1, audit: false }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub series: Vec<TimeSeries>,
    pub metrics: Vec<RunMetrics>,
    pub ensemble: EnsembleSeries,
    pub warnings: Vec<LevelWarning>,
}

impl EnsembleOutput {
    pub fn total_metrics(&self) -> RunMetrics {
        let mut m = RunMetrics::default();
        for r in &self.metrics {
            m.merge(r);
        }
        m
    }
}

/// One trajectory from a fresh initial state, sampled on `grid`.
pub fn run_trajectory(
    kin: &Arc<Kinetics>,
    seed: u64,
    index: u64,
    t_final: f64,
    grid: &[f64],
    audit: bool,
) -> Result<(TimeSeries, RunMetrics), EngineError> {
    let start = Instant::now();
    let mut sim = Simulation::initialized(Arc::clone(kin), trajectory_rng(seed, index));
    sim.set_audit(audit);
    let mut rec = TimeSeriesRecorder::for_model(kin.model(), grid.to_vec());
    sim.run(t_final, &mut [&mut rec])?;
    let metrics = RunMetrics { events: sim.metrics().clone(), wall: start.elapsed() };
    Ok((rec.finish(), metrics))
}

/// Independent trajectories of `model` under `solver`, seeded by
/// `(seed, trajectory index)` and merged in index order.
pub fn run_timeseries(model: &Model, solver: Solver, cfg: &EnsembleConfig) -> Result<EnsembleOutput, SolverError> {
    if cfg.samples < 2 {
        return Err(SolverError::Config("at least two sample points are required".into()));
    }
    if cfg.trajectories < 1 {
        return Err(SolverError::Config("at least one trajectory is required".into()));
    }
    let (configured, warnings) = solver.configure(model)?;
    let kin = Arc::new(Kinetics::new(&configured)?);
    let grid = sample_grid(cfg.t_final, cfg.samples);
    let job = || {
        (0..cfg.trajectories as u64)
            .into_par_iter()
            .map(|i| run_trajectory(&kin, cfg.seed, i, cfg.t_final, &grid, cfg.audit))
            .collect::<Result<Vec<_>, _>>()
    };
    let runs = in_pool(cfg.workers, job)??;
    let (series, metrics): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let ensemble = ensemble_mean(&series)?;
    Ok(EnsembleOutput { series, metrics, ensemble, warnings })
}

/// Runs `job` on a dedicated pool of `workers` threads (global pool for 0).
pub fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, SolverError> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SolverError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ReactionChannel, Species};

    fn chain() -> Model {
        Model::new(1.0, 6)
            .with_species(Species::new("S1", 1.0, 0.0025).count(20))
            .with_species(Species::new("S11", 1.0, 0.0025))
            .with_species(Species::new("S12", 1.0, 0.0025))
            .with_species(Species::new("S2", 1.0, 0.0025))
            .with_reaction(ReactionChannel::new(1.0, &["S1"], &["S11", "S12"]))
            .with_reaction(ReactionChannel::new(1.0, &["S11", "S12"], &["S2"]))
    }

    #[test]
    fn solver_names_round_trip() {
        for s in ["hrdme", "wellmixed", "single-level:0", "single-level:6"] {
            assert_eq!(s.parse::<Solver>().unwrap().to_string(), s);
        }
        assert!("single-level:x".parse::<Solver>().is_err());
        assert!("single-level:99".parse::<Solver>().is_err());
        assert!("nsm".parse::<Solver>().is_err());
    }

    #[test]
    fn single_level_pins_everything() {
        let (m, _) = Solver::SingleLevel(3).configure(&chain()).unwrap();
        assert_eq!(m.lmax, 3);
        assert!(m.transfer_c.is_infinite());
        assert!(m.species.iter().all(|s| s.target_level == Some(3)));
        let (m, _) = Solver::Hierarchical.configure(&chain()).unwrap();
        let lv: Vec<_> = m.species.iter().map(|s| s.target_level.unwrap()).collect();
        assert_eq!(lv, vec![0, 6, 6, 0]);
    }

    #[test]
    fn ensemble_is_worker_count_invariant() {
        let cfg = EnsembleConfig { t_final: 1.0, samples: 11, trajectories: 6, seed: 9, workers: 1, audit: true };
        let a = run_timeseries(&chain(), Solver::Hierarchical, &cfg).unwrap();
        let b = run_timeseries(&chain(), Solver::Hierarchical, &EnsembleConfig { workers: 3, ..cfg.clone() }).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.series.len(), 6);
        assert_eq!(a.ensemble.mean.times.len(), 11);
    }

    #[test]
    fn rejects_degenerate_configs() {
        let cfg = EnsembleConfig { samples: 1, ..Default::default() };
        assert!(run_timeseries(&chain(), Solver::Hierarchical, &cfg).is_err());
        let cfg = EnsembleConfig { trajectories: 0, ..Default::default() };
        assert!(run_timeseries(&chain(), Solver::Hierarchical, &cfg).is_err());
    }
}
