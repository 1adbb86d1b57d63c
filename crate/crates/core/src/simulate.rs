//! Trajectory simulation with aggregate offspring sampling.
//!
//! Populations up to `exact_cap` are sampled exactly through the aggregate
//! law of a sum of iid offspring (multinomial cells, Poisson, negative
//! binomial). Between `exact_cap` and `aggregate_cap` the same aggregate laws
//! are used but cells whose mean exceeds `normal_approx_min_mean` are drawn
//! from a rounded Gaussian with matched mean and variance. Above
//! `aggregate_cap` the state switches to log scale and each generation adds
//! `log A + log Delta`, with `log Delta` Gaussian of mean `-v/(2Z)` and
//! variance `v/Z`, `v = Var(xi / A)`. Extinction from such populations has
//! probability below `1e-100` and is not modelled.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envmodel::{EnvRecord, EnvironmentModel, OffspringLaw};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Regime thresholds and the survival margin of the S-proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimPolicy {
    pub exact_cap: u64,
    pub aggregate_cap: f64,
    pub survival_margin: usize,
    pub normal_approx_min_mean: f64,
}

impl Default for SimPolicy {
    fn default() -> Self {
        Self {
            exact_cap: 10_000,
            aggregate_cap: 1e12,
            survival_margin: 20,
            normal_approx_min_mean: 1e6,
        }
    }
}

impl SimPolicy {
    /// Same thresholds, conditioning on `{Z_n > 0}` only.
    pub fn with_margin(self, survival_margin: usize) -> Self {
        Self {
            survival_margin,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !((self.exact_cap as f64) < self.aggregate_cap) {
            return Err(Error::InvalidArgument(format!(
                "exact_cap {} must be below aggregate_cap {}",
                self.exact_cap, self.aggregate_cap
            )));
        }
        if !(self.normal_approx_min_mean > 0.0) {
            return Err(Error::InvalidArgument("normal_approx_min_mean must be positive".into()));
        }
        Ok(())
    }
}

/// Population size, exact or on log scale once it exceeds `aggregate_cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationState {
    Exact(u64),
    LogScale { log_z: f64, approximate: bool },
}

impl PopulationState {
    pub fn is_alive(&self) -> bool {
        !matches!(self, PopulationState::Exact(0))
    }

    /// `log Z`, `-inf` for an extinct population.
    pub fn log_z(&self) -> f64 {
        match *self {
            PopulationState::Exact(0) => f64::NEG_INFINITY,
            PopulationState::Exact(c) => (c as f64).ln(),
            PopulationState::LogScale { log_z, .. } => log_z,
        }
    }

    pub fn count(&self) -> Option<u64> {
        match *self {
            PopulationState::Exact(c) => Some(c),
            PopulationState::LogScale { .. } => None,
        }
    }

    /// `Z` as a float (may be huge).
    pub fn size(&self) -> f64 {
        match *self {
            PopulationState::Exact(c) => c as f64,
            PopulationState::LogScale { log_z, .. } => log_z.exp(),
        }
    }
}

fn rounded_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (mean + var.sqrt() * z).round().max(0.0)
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64, gaussian_cells: bool, policy: &SimPolicy) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    let mean = n as f64 * p;
    if gaussian_cells && mean > policy.normal_approx_min_mean && n as f64 - mean > policy.normal_approx_min_mean {
        return (rounded_gaussian(rng, mean, mean * (1.0 - p)) as u64).min(n);
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64, gaussian_cells: bool, policy: &SimPolicy) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    if gaussian_cells && mean > policy.normal_approx_min_mean {
        return rounded_gaussian(rng, mean, mean);
    }
    Poisson::new(mean).expect("valid Poisson").sample(rng)
}

/// Total offspring of `count` individuals; `None` on `u64` overflow.
fn aggregate<R: Rng + ?Sized>(
    count: u64,
    law: &OffspringLaw,
    rng: &mut R,
    gaussian_cells: bool,
    policy: &SimPolicy,
) -> Option<u64> {
    match law {
        OffspringLaw::Dirac(m) => count.checked_mul(*m),
        OffspringLaw::Explicit(pmf) => {
            let mut remaining = count;
            let mut mass_left = 1.0;
            let mut total: u64 = 0;
            for (j, &q) in pmf.iter().enumerate().skip(1).rev() {
                if remaining == 0 {
                    break;
                }
                let cell = if mass_left <= q {
                    remaining
                } else {
                    binomial(rng, remaining, q / mass_left, gaussian_cells, policy)
                };
                mass_left -= q;
                remaining -= cell;
                total = total.checked_add(cell.checked_mul(j as u64)?)?;
            }
            Some(total)
        }
        OffspringLaw::Poisson(a) => {
            let x = poisson(rng, count as f64 * a, gaussian_cells, policy);
            (x < u64::MAX as f64).then_some(x as u64)
        }
        OffspringLaw::Geometric(p) => {
            let n = count as f64;
            let mean = n * (1.0 - p) / p;
            let x = if gaussian_cells && mean > policy.normal_approx_min_mean {
                rounded_gaussian(rng, mean, mean / p)
            } else {
                // negative binomial as a gamma-mixed Poisson
                let rate: f64 = Gamma::new(n, (1.0 - p) / p).expect("valid gamma").sample(rng);
                Poisson::new(rate.max(f64::MIN_POSITIVE))
                    .map(|d| d.sample(rng))
                    .unwrap_or(0.0)
            };
            (x < u64::MAX as f64).then_some(x as u64)
        }
    }
}

/// One generation of reproduction under `law`.
pub fn step<R: Rng + ?Sized>(
    state: PopulationState,
    law: &OffspringLaw,
    rng: &mut R,
    policy: &SimPolicy,
) -> Result<PopulationState> {
    match state {
        PopulationState::Exact(0) => Ok(state),
        PopulationState::Exact(count) => {
            let gaussian_cells = count > policy.exact_cap;
            match aggregate(count, law, rng, gaussian_cells, policy) {
                Some(next) if (next as f64) <= policy.aggregate_cap => Ok(PopulationState::Exact(next)),
                Some(next) => Ok(PopulationState::LogScale {
                    log_z: (next as f64).ln(),
                    approximate: false,
                }),
                None => log_scale_step((count as f64).ln(), law, rng, false),
            }
        }
        PopulationState::LogScale { log_z, approximate } => log_scale_step(log_z, law, rng, approximate),
    }
}

fn log_scale_step<R: Rng + ?Sized>(
    log_z: f64,
    law: &OffspringLaw,
    rng: &mut R,
    approximate: bool,
) -> Result<PopulationState> {
    let a = law.mean();
    let v = law.variance() / (a * a);
    if v == 0.0 {
        return Ok(PopulationState::LogScale {
            log_z: log_z + a.ln(),
            approximate,
        });
    }
    let inv_z = (-log_z).exp();
    let z: f64 = StandardNormal.sample(rng);
    let log_delta = -0.5 * v * inv_z + (v * inv_z).sqrt() * z;
    Ok(PopulationState::LogScale {
        log_z: log_z + a.ln() + log_delta,
        approximate: true,
    })
}

/// Generation-by-generation simulator for one stream.
pub struct TrajectoryWalker<'a> {
    model: &'a EnvironmentModel,
    policy: SimPolicy,
    base: ChaCha8Rng,
    generation: u64,
    state: PopulationState,
    log_pi: f64,
}

impl<'a> TrajectoryWalker<'a> {
    pub fn new(model: &'a EnvironmentModel, policy: SimPolicy, seed: u64, stream_id: u64) -> Self {
        Self {
            model,
            policy,
            base: stream_rng(seed, stream_id, 0),
            generation: 0,
            state: PopulationState::Exact(1),
            log_pi: 0.0,
        }
    }

    pub fn generation(&self) -> usize {
        self.generation as usize
    }

    pub fn state(&self) -> PopulationState {
        self.state
    }

    /// `log Pi_n = sum_{k<n} log A_k`.
    pub fn log_pi(&self) -> f64 {
        self.log_pi
    }

    /// Draw the environment of the current generation and reproduce.
    pub fn advance(&mut self) -> Result<EnvRecord> {
        let mut rng = self.base.clone();
        rng.set_stream(self.generation);
        let (record, law) = self.model.sample_law(&mut rng);
        self.state = step(self.state, &law, &mut rng, &self.policy)?;
        self.log_pi += law.mean().ln();
        self.generation += 1;
        Ok(record)
    }
}

/// Full record of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub stream_id: u64,
    /// Law drawn at generations `0..n`.
    pub env_record: Vec<EnvRecord>,
    /// `Z_0..Z_n`.
    pub states: Vec<PopulationState>,
    /// `log Pi_0..log Pi_n`.
    pub log_pi: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn alive(&self, n: usize) -> bool {
        self.states[n].is_alive()
    }

    pub fn log_z(&self, n: usize) -> Option<f64> {
        self.alive(n).then(|| self.states[n].log_z())
    }
}

pub fn simulate_trajectory(
    model: &EnvironmentModel,
    n_max: usize,
    stream_id: u64,
    seed: u64,
    policy: &SimPolicy,
) -> Result<Trajectory> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let mut walker = TrajectoryWalker::new(model, *policy, seed, stream_id);
    let mut env_record = Vec::with_capacity(n_max);
    let mut states = Vec::with_capacity(n_max + 1);
    let mut log_pi = Vec::with_capacity(n_max + 1);
    states.push(walker.state());
    log_pi.push(0.0);
    for _ in 0..n_max {
        env_record.push(walker.advance()?);
        states.push(walker.state());
        log_pi.push(walker.log_pi());
    }
    Ok(Trajectory {
        stream_id,
        env_record,
        states,
        log_pi,
    })
}

/// Attempt bookkeeping of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EnsembleCounts {
    pub attempted: u64,
    pub survived_to_n: u64,
    pub survived_to_n_plus_m: u64,
}

/// Column-major store of many paths, recorded at a set of checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub horizon: usize,
    /// Survival margin used by the filter (`0` means conditioning on `U_n`).
    pub margin: usize,
    /// True when only paths with `Z_{n+m} > 0` were kept.
    pub survivor_filtered: bool,
    pub checkpoints: Vec<usize>,
    pub counts: EnsembleCounts,
    stream_ids: Vec<u64>,
    states: Vec<PopulationState>,
    log_pi: Vec<f64>,
}

struct PathSummary {
    states: Vec<PopulationState>,
    log_pi: Vec<f64>,
    alive_n: bool,
    alive_end: bool,
}

fn run_path(
    model: &EnvironmentModel,
    policy: &SimPolicy,
    seed: u64,
    stream_id: u64,
    horizon: usize,
    margin: usize,
    checkpoints: &[usize],
    stop_when_dead: bool,
) -> Result<PathSummary> {
    let mut walker = TrajectoryWalker::new(model, *policy, seed, stream_id);
    let mut states = Vec::with_capacity(checkpoints.len());
    let mut log_pi = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    let mut alive_n = true;
    for g in 0..=horizon + margin {
        if g > 0 {
            walker.advance()?;
        }
        while next_cp < checkpoints.len() && checkpoints[next_cp] == g {
            states.push(walker.state());
            log_pi.push(walker.log_pi());
            next_cp += 1;
        }
        if g == horizon {
            alive_n = walker.state().is_alive();
        }
        if stop_when_dead && !walker.state().is_alive() {
            return Ok(PathSummary {
                states,
                log_pi,
                alive_n: alive_n && g > horizon,
                alive_end: false,
            });
        }
    }
    Ok(PathSummary {
        states,
        log_pi,
        alive_n,
        alive_end: walker.state().is_alive(),
    })
}

fn normalize_checkpoints(horizon: usize, checkpoints: Option<&[usize]>) -> Result<Vec<usize>> {
    let mut cps: Vec<usize> = match checkpoints {
        Some(c) => c.to_vec(),
        None => (0..=horizon).collect(),
    };
    cps.sort_unstable();
    cps.dedup();
    if cps.last().is_some_and(|&c| c > horizon) {
        return Err(Error::InvalidArgument("checkpoint beyond horizon".into()));
    }
    Ok(cps)
}

const BATCH: u64 = 8192;

/// Request for [`survivor_ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub horizon: usize,
    pub target: usize,
    pub seed: u64,
    /// Generations to record; all of `0..=horizon` when `None`.
    pub checkpoints: Option<Vec<usize>>,
}

impl EnsembleSpec {
    pub fn new(horizon: usize, target: usize, seed: u64) -> Self {
        Self {
            horizon,
            target,
            seed,
            checkpoints: None,
        }
    }

    pub fn checkpoints(mut self, cps: Vec<usize>) -> Self {
        self.checkpoints = Some(cps);
        self
    }
}

/// Simulate consecutive streams until `target` paths satisfy
/// `Z_{n + margin} > 0`.
///
/// The result depends only on the inputs: streams are simulated in parallel
/// batches but accepted strictly in stream order.
pub fn survivor_ensemble(model: &EnvironmentModel, spec: &EnsembleSpec, policy: &SimPolicy) -> Result<Ensemble> {
    policy.validate()?;
    let checkpoints = normalize_checkpoints(spec.horizon, spec.checkpoints.as_deref())?;
    let margin = policy.survival_margin;
    let budget = 1000 * spec.target as u64;
    let mut ens = Ensemble::empty(spec.horizon, margin, true, checkpoints.clone());
    let mut next_stream = 0u64;
    while ens.len() < spec.target {
        if next_stream >= budget {
            return Err(Error::BudgetExceeded {
                attempted: ens.counts.attempted,
                survivors: ens.len(),
                target: spec.target,
            });
        }
        let end = (next_stream + BATCH).min(budget);
        let batch: Vec<Result<PathSummary>> = (next_stream..end)
            .into_par_iter()
            .map(|sid| run_path(model, policy, spec.seed, sid, spec.horizon, margin, &checkpoints, true))
            .collect();
        for (sid, path) in (next_stream..end).zip(batch) {
            let path = path?;
            ens.counts.attempted += 1;
            ens.counts.survived_to_n += path.alive_n as u64;
            if path.alive_end {
                ens.counts.survived_to_n_plus_m += 1;
                ens.push(sid, path);
                if ens.len() == spec.target {
                    break;
                }
            }
        }
        next_stream = end;
    }
    Ok(ens)
}

/// Simulate streams `0..count` without any conditioning.
pub fn raw_ensemble(
    model: &EnvironmentModel,
    horizon: usize,
    count: usize,
    seed: u64,
    policy: &SimPolicy,
    checkpoints: Option<&[usize]>,
) -> Result<Ensemble> {
    policy.validate()?;
    let checkpoints = normalize_checkpoints(horizon, checkpoints)?;
    let paths: Vec<Result<PathSummary>> = (0..count as u64)
        .into_par_iter()
        .map(|sid| run_path(model, policy, seed, sid, horizon, 0, &checkpoints, false))
        .collect();
    let mut ens = Ensemble::empty(horizon, 0, false, checkpoints);
    for (sid, path) in paths.into_iter().enumerate() {
        let path = path?;
        ens.counts.attempted += 1;
        ens.counts.survived_to_n += path.alive_n as u64;
        ens.counts.survived_to_n_plus_m += path.alive_end as u64;
        ens.push(sid as u64, path);
    }
    Ok(ens)
}

impl Ensemble {
    fn empty(horizon: usize, margin: usize, survivor_filtered: bool, checkpoints: Vec<usize>) -> Self {
        Self {
            horizon,
            margin,
            survivor_filtered,
            checkpoints,
            counts: EnsembleCounts::default(),
            stream_ids: Vec::new(),
            states: Vec::new(),
            log_pi: Vec::new(),
        }
    }

    fn push(&mut self, stream_id: u64, path: PathSummary) {
        self.stream_ids.push(stream_id);
        self.states.extend(path.states);
        self.log_pi.extend(path.log_pi);
    }

    pub fn len(&self) -> usize {
        self.stream_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stream_ids.is_empty()
    }

    pub fn stream_ids(&self) -> &[u64] {
        &self.stream_ids
    }

    fn column(&self, n: usize) -> Result<usize> {
        self.checkpoints
            .binary_search(&n)
            .map_err(|_| Error::InvalidArgument(format!("generation {n} was not recorded")))
    }

    /// States of every path at generation `n`.
    pub fn states_at(&self, n: usize) -> Result<Vec<PopulationState>> {
        let c = self.column(n)?;
        let w = self.checkpoints.len();
        Ok((0..self.len()).map(|i| self.states[i * w + c]).collect())
    }

    /// `log Z_n` per path (`-inf` for extinct paths).
    pub fn log_z_at(&self, n: usize) -> Result<Vec<f64>> {
        Ok(self.states_at(n)?.iter().map(PopulationState::log_z).collect())
    }

    pub fn log_pi_at(&self, n: usize) -> Result<Vec<f64>> {
        let c = self.column(n)?;
        let w = self.checkpoints.len();
        Ok((0..self.len()).map(|i| self.log_pi[i * w + c]).collect())
    }

    /// `(log Z_n, log Pi_n)` for paths alive at `n`.
    pub fn alive_pairs_at(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        let z = self.log_z_at(n)?;
        let p = self.log_pi_at(n)?;
        Ok(z.into_iter().zip(p).filter(|(z, _)| z.is_finite()).collect())
    }

    /// Fraction of attempts that met the survival filter.
    pub fn survival_ratio(&self) -> f64 {
        self.counts.survived_to_n_plus_m as f64 / self.counts.attempted as f64
    }

    /// One CSV row per path: `stream_id, alive_n, logZ_<k>...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "stream_id,alive_n")?;
        for cp in &self.checkpoints {
            write!(out, ",logZ_{cp}")?;
        }
        writeln!(out)?;
        let w = self.checkpoints.len();
        let last = self.column(self.horizon).ok();
        for i in 0..self.len() {
            let alive = match last {
                Some(c) => self.states[i * w + c].is_alive(),
                None => self.survivor_filtered,
            };
            write!(out, "{},{}", self.stream_ids[i], alive as u8)?;
            for c in 0..w {
                write!(out, ",{}", self.states[i * w + c].log_z())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
