//! Ensemble observables and comparison metrics.

use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{
    trajectory_rng, EngineError, EventCounts, Executed, Kinetics, MoleculeId, Observer, ReactionRecord,
    Simulation,
};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("time series have mismatched sample grids or species")]
    MismatchedGrid,
    #[error("no trajectories to average")]
    NoSeries,
    #[error("empty sample")]
    EmptySample,
    #[error("reference series of '{0}' is identically zero; relative error undefined")]
    ZeroReference(String),
    #[error("species index {0} out of range")]
    BadSpecies(usize),
    #[error("rebinding harness misconfigured: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Species counts sampled on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub species: Vec<String>,
    pub times: Vec<f64>,
    /// One row per sample time, one column per species.
    pub values: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn column(&self, species: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |row| row[species])
    }

    fn same_grid(&self, other: &TimeSeries) -> bool {
        self.species == other.species && self.times == other.times
    }
}

/// `n` equidistant times from 0 to `t_final` inclusive.
pub fn sample_grid(t_final: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Observer recording species counts on a fixed grid.
#[derive(Debug, Clone)]
pub struct TimeSeriesRecorder {
    species: Vec<String>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TimeSeriesRecorder {
    pub fn new(species: Vec<String>, times: Vec<f64>) -> Self {
        TimeSeriesRecorder { species, values: Vec::with_capacity(times.len()), times }
    }

    pub fn for_model(model: &Model, times: Vec<f64>) -> Self {
        Self::new(model.species.iter().map(|s| s.name.clone()).collect(), times)
    }

    pub fn finish(self) -> TimeSeries {
        let n = self.values.len();
        TimeSeries { species: self.species, times: self.times[..n].to_vec(), values: self.values }
    }
}

impl Observer for TimeSeriesRecorder {
    fn next_sample_time(&self) -> Option<f64> {
        self.times.get(self.values.len()).copied()
    }

    fn sample(&mut self, _time: f64, counts: &[u64]) {
        self.values.push(counts.iter().map(|&c| c as f64).collect());
    }
}

/// Pointwise ensemble mean with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub mean: TimeSeries,
    pub std_err: Vec<Vec<f64>>,
    pub trajectories: usize,
}

pub fn ensemble_mean(series: &[TimeSeries]) -> Result<EnsembleSeries, StatsError> {
    let first = series.first().ok_or(StatsError::NoSeries)?;
    if series.iter().any(|s| !s.same_grid(first) || s.values.len() != first.times.len()) {
        return Err(StatsError::MismatchedGrid);
    }
    let n = series.len() as f64;
    let rows = first.times.len();
    let cols = first.species.len();
    let mut mean = vec![vec![0.0; cols]; rows];
    let mut se = vec![vec![0.0; cols]; rows];
    for r in 0..rows {
        for c in 0..cols {
            let m = series.iter().map(|s| s.values[r][c]).sum::<f64>() / n;
            mean[r][c] = m;
            if series.len() > 1 {
                let var = series.iter().map(|s| (s.values[r][c] - m).powi(2)).sum::<f64>() / (n - 1.0);
                se[r][c] = (var / n).sqrt();
            }
        }
    }
    Ok(EnsembleSeries {
        mean: TimeSeries { species: first.species.clone(), times: first.times.clone(), values: mean },
        std_err: se,
        trajectories: series.len(),
    })
}

/// Summed absolute difference between two series of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesError {
    /// `sum |test - ref|`
    pub raw: f64,
    /// `sum |test - ref| / sum ref`
    pub normalized: f64,
}

pub fn time_series_error(test: &TimeSeries, reference: &TimeSeries, species: usize) -> Result<SeriesError, StatsError> {
    if !test.same_grid(reference) || test.values.len() != reference.values.len() {
        return Err(StatsError::MismatchedGrid);
    }
    if species >= reference.species.len() {
        return Err(StatsError::BadSpecies(species));
    }
    let raw: f64 = test.column(species).zip(reference.column(species)).map(|(a, b)| (a - b).abs()).sum();
    let total: f64 = reference.column(species).map(f64::abs).sum();
    if total == 0.0 {
        return Err(StatsError::ZeroReference(reference.species[species].clone()));
    }
    Ok(SeriesError { raw, normalized: raw / total })
}

/// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the
/// empirical CDFs. Infinite values (censored observations) sort last.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

/// Rebinding durations. Episodes cut off before rebinding are stored as
/// `f64::INFINITY`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RebindSample {
    pub durations: Vec<f64>,
}

impl RebindSample {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn censored(&self) -> usize {
        self.durations.iter().filter(|d| d.is_infinite()).count()
    }

    /// Mean and standard error over uncensored durations.
    pub fn mean_se(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.durations.iter().copied().filter(|d| d.is_finite()).collect();
        mean_se(&xs)
    }
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// One dissociation followed by re-association of the same two molecules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebindEvent {
    pub dissociation_time: f64,
    pub rebind_time: f64,
    /// Index of the dissociation in the order observed.
    pub pair_id: u64,
}

/// Observer pairing each dissociation with the later association of exactly
/// the same two product molecules.
#[derive(Debug, Clone, Default)]
pub struct RebindTracker {
    open: Vec<(MoleculeId, MoleculeId, f64, u64)>,
    next_id: u64,
    pub events: Vec<RebindEvent>,
}

impl RebindTracker {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Observer for RebindTracker {
    fn reaction(&mut self, r: &ReactionRecord<'_>) {
        if let [a, b] = r.reactants {
            if let Some(i) = self
                .open
                .iter()
                .position(|(x, y, _, _)| (x == a && y == b) || (x == b && y == a))
            {
                let (_, _, t0, id) = self.open.swap_remove(i);
                self.events.push(RebindEvent { dissociation_time: t0, rebind_time: r.time, pair_id: id });
            }
        }
        // A consumed molecule can no longer rebind.
        self.open.retain(|(x, y, _, _)| !r.reactants.iter().any(|m| m == x || m == y));
        if r.reactants.len() == 1 && r.products.len() == 2 {
            self.open.push((r.products[0], r.products[1], r.time, self.next_id));
            self.next_id += 1;
        }
    }
}

/// Rebinding episodes: one molecule of each of the two species starts in a
/// common uniformly chosen voxel of the finest level (each on its own target
/// level along that voxel's lineage) and the engine runs until their
/// association fires. `horizon` optionally cuts episodes off; cut episodes are
/// recorded as censored.
///
/// `model` is used as given; configure it for the desired solver first.
pub fn rebind_harness(
    model: &Model,
    pair: (&str, &str),
    episodes: usize,
    seed: u64,
    horizon: Option<f64>,
) -> Result<RebindSample, StatsError> {
    let ia = model
        .species_index(pair.0)
        .ok_or_else(|| StatsError::Config(format!("unknown species '{}'", pair.0)))?;
    let ib = model
        .species_index(pair.1)
        .ok_or_else(|| StatsError::Config(format!("unknown species '{}'", pair.1)))?;
    let assoc: Vec<usize> = model
        .channels
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.k > 0.0
                && c.order() == 2
                && ((c.reactants[0] == pair.0 && c.reactants[1] == pair.1)
                    || (c.reactants[0] == pair.1 && c.reactants[1] == pair.0))
        })
        .map(|(i, _)| i)
        .collect();
    if assoc.is_empty() {
        return Err(StatsError::Config(format!("no association channel {} + {}", pair.0, pair.1)));
    }
    if ia == ib {
        return Err(StatsError::Config("pair species must differ".into()));
    }
    let kin = Arc::new(Kinetics::new(model)?);
    let horizon = horizon.unwrap_or(f64::INFINITY);
    let durations = (0..episodes as u64)
        .into_par_iter()
        .map(|i| rebind_episode(&kin, ia, ib, &assoc, seed, i, horizon))
        .collect::<Result<Vec<f64>, EngineError>>()?;
    Ok(RebindSample { durations })
}

fn rebind_episode(
    kin: &Arc<Kinetics>,
    ia: usize,
    ib: usize,
    assoc: &[usize],
    seed: u64,
    index: u64,
    horizon: f64,
) -> Result<f64, EngineError> {
    let mut sim = Simulation::new(Arc::clone(kin), trajectory_rng(seed, index));
    let lmax = kin.hierarchy().lmax();
    let v = kin.hierarchy().uniform_voxel(lmax, sim.rng_mut()).expect("finest level");
    let at = |s: usize| v.ancestor_at(kin.target_level(s)).expect("coarser or equal level");
    let a = sim.insert_molecule(ia, at(ia))?;
    let b = sim.insert_molecule(ib, at(ib))?;
    while let Some(ex) = sim.step(horizon)? {
        if let Executed::Reaction { channel, reactants, .. } = ex {
            let ours = |m: &MoleculeId| *m == a || *m == b;
            if reactants.len() == 2 && reactants.iter().all(ours) && assoc.contains(&channel) {
                return Ok(sim.time());
            }
            if reactants.iter().any(ours) {
                break;
            }
        }
    }
    Ok(f64::INFINITY)
}

/// Cost of one trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub events: EventCounts,
    pub wall: Duration,
}

impl RunMetrics {
    pub fn merge(&mut self, other: &RunMetrics) {
        self.events.merge(&other.events);
        self.wall += other.wall;
    }
}

/// Speedup of `fast` relative to `reference`, as (wall-clock ratio, event-count ratio).
pub fn speedup(reference: &RunMetrics, fast: &RunMetrics) -> (f64, f64) {
    (
        reference.wall.as_secs_f64() / fast.wall.as_secs_f64(),
        reference.events.total() as f64 / fast.events.total() as f64,
    )
}
