//! Empirical checks of the limit theorems: normal fluctuations of
//! `log Z_n`, the renewal measure of `log Z_n`, and the decay bounds.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::edgeworth::{standardized_log_z, sup_distance};
use crate::envmodel::EnvironmentModel;
use crate::error::{Error, Result};
use crate::numeric::{dkw_bound, fit_line, normal_cdf, pairwise_sum, MeanEstimate};
use crate::simulate::{Ensemble, SimPolicy, TrajectoryWalker};

const BATCH: u64 = 1 << 14;

/// Kolmogorov distance of the standardized survivors to `Phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltStatistic {
    pub n: usize,
    pub ks: f64,
    /// 99% DKW half-width.
    pub dkw: f64,
    pub sample_size: usize,
}

pub fn clt_statistic(ensemble: &Ensemble, model: &EnvironmentModel, n: usize) -> Result<CltStatistic> {
    let xs = standardized_log_z(ensemble, model, n)?;
    Ok(ks_to_normal(&xs, n))
}

/// KS distance of a sorted sample to `Phi`.
pub fn ks_to_normal(sorted: &[f64], n: usize) -> CltStatistic {
    CltStatistic {
        n,
        ks: sup_distance(sorted, normal_cdf),
        dkw: dkw_bound(sorted.len(), 0.01),
        sample_size: sorted.len(),
    }
}

/// Mean number of generations with `log Z_n` in `[y + b, y + c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalEstimate {
    pub y: f64,
    pub b: f64,
    pub c: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `(c - b) / mu`.
    pub target: f64,
    pub sample_size: usize,
    pub attempted: u64,
}

impl RenewalEstimate {
    /// Normal 95% interval.
    pub fn interval95(&self) -> (f64, f64) {
        let h = 1.959_963_984_540_054 * self.std_error;
        (self.estimate - h, self.estimate + h)
    }

    pub fn relative_error(&self) -> f64 {
        (self.estimate - self.target).abs() / self.target
    }
}

/// Rows `y,B,C,estimate,stderr,target`.
pub fn write_renewal_csv<W: Write>(mut out: W, rows: &[RenewalEstimate]) -> Result<()> {
    writeln!(out, "y,B,C,estimate,stderr,target")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.y, r.b, r.c, r.estimate, r.std_error, r.target)?;
    }
    Ok(())
}

/// Visit count of one stream, or `None` if it died before escaping.
fn renewal_visits(
    model: &EnvironmentModel,
    policy: &SimPolicy,
    seed: u64,
    stream_id: u64,
    window: (f64, f64),
    cutoff: f64,
    min_generations: usize,
) -> Result<Option<u32>> {
    let mut walker = TrajectoryWalker::new(model, *policy, seed, stream_id);
    let mut visits = 0u32;
    loop {
        let z = walker.state().log_z();
        if z == f64::NEG_INFINITY {
            return Ok(None);
        }
        if z >= window.0 && z < window.1 {
            visits += 1;
        }
        if z > cutoff && walker.generation() >= min_generations {
            return Ok(Some(visits));
        }
        walker.advance()?;
    }
}

/// Expected number of visits of `log Z_n` to `y + [b, c)` on survival,
/// estimated from the first `count` paths that escape to
/// `log Z > y + c + 5 sigma sqrt(horizon)` and live past
/// `horizon + margin` generations, `horizon = ceil((y + c) / mu)`.
pub fn renewal_estimate(
    model: &EnvironmentModel,
    b: f64,
    c: f64,
    y: f64,
    count: usize,
    seed: u64,
    policy: &SimPolicy,
) -> Result<RenewalEstimate> {
    if model.is_lattice() {
        return Err(Error::LatticeEnvironment);
    }
    if !(0.0 <= b && b < c) || !(y > 0.0) || count == 0 {
        return Err(Error::InvalidArgument(format!("need 0 <= B < C, y > 0 (got B={b}, C={c}, y={y})")));
    }
    policy.validate()?;
    let horizon = ((y + c) / model.mu()).ceil() as usize;
    let cutoff = y + c + 5.0 * model.sigma() * (horizon as f64).sqrt();
    let min_generations = horizon + policy.survival_margin;
    let budget = 1000 * count as u64;
    let mut visits: Vec<f64> = Vec::with_capacity(count);
    let mut next = 0u64;
    while visits.len() < count {
        if next >= budget {
            return Err(Error::BudgetExceeded {
                attempted: next,
                survivors: visits.len(),
                target: count,
            });
        }
        let end = (next + BATCH).min(budget);
        let batch: Vec<Result<Option<u32>>> = (next..end)
            .into_par_iter()
            .map(|sid| renewal_visits(model, policy, seed, sid, (y + b, y + c), cutoff, min_generations))
            .collect();
        for (sid, v) in (next..end).zip(batch) {
            if let Some(v) = v? {
                visits.push(v as f64);
                if visits.len() == count {
                    next = sid + 1;
                    break;
                }
            }
            next = sid + 1;
        }
    }
    let est = MeanEstimate::from_values(&visits);
    Ok(RenewalEstimate {
        y,
        b,
        c,
        estimate: est.mean,
        std_error: est.std_error,
        target: (c - b) / model.mu(),
        sample_size: count,
        attempted: next,
    })
}

/// Quantity tracked by [`decay_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKind {
    /// `P[1 <= Z_n <= e^{theta n}]`.
    SmallPop { theta: f64 },
    /// `E[Z_n^{-delta}; Z_n > 0]`.
    NegMoment { delta: f64 },
    /// `P[Z_n > 0] - P[Z_{n+m} > 0]`.
    SurvivalGap { m: usize },
    /// `E[(log Z_n)^k; Z_n > 0]`.
    LogMoment { k: u32 },
}

impl DecayKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecayKind::SmallPop { .. } => "small_pop",
            DecayKind::NegMoment { .. } => "neg_moment",
            DecayKind::SurvivalGap { .. } => "survival_gap",
            DecayKind::LogMoment { .. } => "log_moment",
        }
    }

    fn sample(&self, n: usize, z: f64, z_later: f64) -> f64 {
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        match *self {
            DecayKind::SmallPop { theta } => (z <= theta * n as f64) as u8 as f64,
            DecayKind::NegMoment { delta } => (-delta * z).exp(),
            DecayKind::SurvivalGap { .. } => (z_later == f64::NEG_INFINITY) as u8 as f64,
            DecayKind::LogMoment { k } => z.powi(k as i32),
        }
    }

    fn lag(&self) -> usize {
        match *self {
            DecayKind::SurvivalGap { m } => m,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScanResult {
    pub kind: DecayKind,
    pub n_list: Vec<usize>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub sample_size: usize,
    /// `-slope` of `log value` against `n` over the points above noise.
    pub beta_hat: Option<f64>,
    pub r_squared: Option<f64>,
    /// Every value is within two standard errors of 0.
    pub below_noise: bool,
    /// `max_n values[n] / n^k` and its argument, for `LogMoment`.
    pub log_moment_max: Option<(usize, f64)>,
}

impl DecayScanResult {
    /// Rows `n,value,stderr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,value,stderr")?;
        for ((n, v), se) in self.n_list.iter().zip(&self.values).zip(&self.std_errors) {
            writeln!(out, "{n},{v},{se}")?;
        }
        Ok(())
    }

    /// Exponential decay was observed, or nothing could be distinguished from 0.
    pub fn decays(&self) -> bool {
        self.below_noise || self.beta_hat.is_some_and(|b| b > 0.0)
    }
}

/// Monte Carlo scan of a decay quantity over `n_list` from `count`
/// unconditioned paths.
pub fn decay_scan(
    model: &EnvironmentModel,
    kind: DecayKind,
    n_list: &[usize],
    count: usize,
    seed: u64,
    policy: &SimPolicy,
) -> Result<DecayScanResult> {
    match kind {
        DecayKind::SmallPop { theta } if !(theta < model.mu()) => {
            return Err(Error::InvalidArgument(format!("theta = {theta} must be below mu")));
        }
        DecayKind::NegMoment { delta } if !(delta > 0.0) => {
            return Err(Error::InvalidArgument(format!("delta = {delta} must be positive")));
        }
        DecayKind::LogMoment { k: 0 } => return Err(Error::InvalidArgument("k must be positive".into())),
        _ => {}
    }
    if n_list.is_empty() || count < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("need increasing n values and at least 2 paths".into()));
    }
    policy.validate()?;
    let lag = kind.lag();
    let horizon = n_list.last().unwrap() + lag;
    let width = n_list.len();
    let mut sums = vec![Vec::new(); width];
    let mut squares = vec![Vec::new(); width];
    let mut start = 0u64;
    while start < count as u64 {
        let end = (start + BATCH).min(count as u64);
        let rows: Vec<Result<Vec<f64>>> = (start..end)
            .into_par_iter()
            .map(|sid| {
                let mut walker = TrajectoryWalker::new(model, *policy, seed, sid);
                let mut log_z = Vec::with_capacity(horizon + 1);
                log_z.push(0.0);
                for _ in 0..horizon {
                    if walker.state().is_alive() {
                        walker.advance()?;
                    }
                    log_z.push(walker.state().log_z());
                }
                Ok(n_list.iter().map(|&n| kind.sample(n, log_z[n], log_z[n + lag])).collect())
            })
            .collect();
        let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
        for i in 0..width {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            sums[i].push(pairwise_sum(&col));
            squares[i].push(pairwise_sum(&col.iter().map(|x| x * x).collect::<Vec<_>>()));
        }
        start = end;
    }
    let total = count as f64;
    let mut values = Vec::with_capacity(width);
    let mut std_errors = Vec::with_capacity(width);
    for i in 0..width {
        let mean = pairwise_sum(&sums[i]) / total;
        let second = pairwise_sum(&squares[i]) / total;
        let var = ((second - mean * mean) * total / (total - 1.0)).max(0.0);
        values.push(mean);
        std_errors.push((var / total).sqrt());
    }
    Ok(finish_scan(kind, n_list.to_vec(), values, std_errors, count))
}

/// Fit and summarize a scan from given values.
pub fn finish_scan(
    kind: DecayKind,
    n_list: Vec<usize>,
    values: Vec<f64>,
    std_errors: Vec<f64>,
    sample_size: usize,
) -> DecayScanResult {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for ((n, v), se) in n_list.iter().zip(&values).zip(&std_errors) {
        if *v > 2.0 * se && *v > 0.0 {
            xs.push(*n as f64);
            ys.push(v.ln());
        }
    }
    let below_noise = xs.is_empty();
    let fit = if xs.len() >= 2 { fit_line(&xs, &ys) } else { None };
    let log_moment_max = match kind {
        DecayKind::LogMoment { k } => n_list
            .iter()
            .zip(&values)
            .map(|(n, v)| (*n, v / (*n as f64).powi(k as i32)))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            }),
        _ => None,
    };
    let exponential = !matches!(kind, DecayKind::LogMoment { .. });
    DecayScanResult {
        kind,
        n_list,
        values,
        std_errors,
        sample_size,
        beta_hat: fit.filter(|_| exponential).map(|f| -f.slope),
        r_squared: fit.filter(|_| exponential).map(|f| f.r_squared),
        below_noise: below_noise && exponential,
        log_moment_max,
    }
}
