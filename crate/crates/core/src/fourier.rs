//! Estimation of the Fourier ratio `phi_n(s) = E_S[Z_n^{is}] / lambda(s)^n`,
//! its derivatives at the origin, and geometric convergence in `n`.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::envmodel::EnvironmentModel;
use crate::error::{Error, Result};
use crate::numeric::{binomial, fit_line, pairwise_sum, pairwise_sum_by};
use crate::simulate::Ensemble;

/// Below this `n log |lambda(s)|` the denominator is treated as underflowed.
const UNDERFLOW_LOG: f64 = -600.0;
/// Increments of derivative sequences below this are rounding noise.
const DERIV_NOISE_FLOOR: f64 = 1e-10;

/// Symmetric evaluation grid that contains 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SGrid {
    points: Vec<f64>,
}

impl SGrid {
    /// `count` equally spaced points on `[-s_max, s_max]`; `count` must be odd.
    pub fn symmetric(s_max: f64, count: usize) -> Result<Self> {
        if count % 2 == 0 || !(s_max > 0.0) && count > 1 {
            return Err(Error::InvalidArgument(format!(
                "grid needs an odd point count and s_max > 0 (got {count}, {s_max})"
            )));
        }
        let half = (count / 2) as i64;
        let points = (-half..=half)
            .map(|k| if half == 0 { 0.0 } else { s_max * k as f64 / half as f64 })
            .collect();
        Ok(Self { points })
    }

    /// Mirror the given non-negative points (0 is added if missing).
    pub fn from_nonnegative(pos: &[f64]) -> Result<Self> {
        let mut p: Vec<f64> = pos.to_vec();
        if p.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("grid points must be non-negative".into()));
        }
        p.push(0.0);
        p.sort_by(f64::total_cmp);
        p.dedup();
        let mut points: Vec<f64> = p.iter().skip(1).rev().map(|s| -s).collect();
        points.extend(p);
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Points with `s >= 0`, ascending.
    pub fn nonnegative(&self) -> &[f64] {
        let mid = self.points.len() / 2;
        &self.points[mid..]
    }
}

impl Default for SGrid {
    fn default() -> Self {
        Self::symmetric(0.5, 41).unwrap()
    }
}

/// Continuous branch of `log lambda` along ascending non-negative points,
/// anchored at `log lambda(0) = 0`.
pub fn log_lambda_branch(model: &EnvironmentModel, points: &[f64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev_s = 0.0;
    let mut prev_lambda = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for &s in points {
        let lambda = model.lambda(s)?;
        if lambda.norm() == 0.0 {
            return Err(Error::BranchTracking { from: prev_s, to: s });
        }
        let step = (lambda / prev_lambda).ln();
        if step.im.abs() >= FRAC_PI_4 {
            return Err(Error::BranchTracking { from: prev_s, to: s });
        }
        acc += step;
        out.push(acc);
        prev_s = s;
        prev_lambda = lambda;
    }
    Ok(out)
}

/// One grid point of [`CharFnEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPoint {
    pub s: f64,
    pub re: f64,
    pub im: f64,
    pub std_error: f64,
    /// False when `|lambda(s)|^n` underflows.
    pub usable: bool,
}

impl PhiPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharFnEstimate {
    pub n: usize,
    pub sample_size: usize,
    pub points: Vec<PhiPoint>,
}

impl CharFnEstimate {
    pub fn at(&self, s: f64) -> Option<&PhiPoint> {
        self.points.iter().find(|p| p.s == s)
    }

    /// Rows `n,s,re,im,stderr`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "n,s,re,im,stderr")?;
        }
        for p in &self.points {
            if p.usable {
                writeln!(out, "{},{},{},{},{}", self.n, p.s, p.re, p.im, p.std_error)?;
            } else {
                writeln!(out, "{},{},NaN,NaN,NaN", self.n, p.s)?;
            }
        }
        Ok(())
    }
}

/// Estimate `phi_n(s)` on the grid from the paths of `ensemble` alive at `n`.
pub fn estimate_phi_at(
    ensemble: &Ensemble,
    model: &EnvironmentModel,
    grid: &SGrid,
    n: usize,
) -> Result<CharFnEstimate> {
    let log_z: Vec<f64> = ensemble.log_z_at(n)?.into_iter().filter(|z| z.is_finite()).collect();
    estimate_phi_from_logs(&log_z, model, grid, n)
}

/// [`estimate_phi_at`] at the ensemble horizon.
pub fn estimate_phi(ensemble: &Ensemble, model: &EnvironmentModel, grid: &SGrid) -> Result<CharFnEstimate> {
    estimate_phi_at(ensemble, model, grid, ensemble.horizon)
}

/// Estimate from a sample of `log Z_n` values of surviving paths.
pub fn estimate_phi_from_logs(
    log_z: &[f64],
    model: &EnvironmentModel,
    grid: &SGrid,
    n: usize,
) -> Result<CharFnEstimate> {
    if log_z.is_empty() {
        return Err(Error::EmptySample);
    }
    let pos = grid.nonnegative();
    let branch = log_lambda_branch(model, pos)?;
    let count = log_z.len() as f64;
    let half: Vec<PhiPoint> = pos
        .par_iter()
        .zip(branch.par_iter())
        .map(|(&s, &log_lambda)| {
            if s == 0.0 {
                return PhiPoint {
                    s,
                    re: 1.0,
                    im: 0.0,
                    std_error: 0.0,
                    usable: true,
                };
            }
            let log_den = log_lambda * n as f64;
            if log_den.re < UNDERFLOW_LOG {
                return PhiPoint {
                    s,
                    re: f64::NAN,
                    im: f64::NAN,
                    std_error: f64::NAN,
                    usable: false,
                };
            }
            let re = pairwise_sum_by(log_z, |z| (s * z).cos()) / count;
            let im = pairwise_sum_by(log_z, |z| (s * z).sin()) / count;
            let var = pairwise_sum_by(log_z, |z| {
                let (dc, ds) = ((s * z).cos() - re, (s * z).sin() - im);
                dc * dc + ds * ds
            }) / (count - 1.0).max(1.0);
            let inv = (-log_den).exp();
            let value = Complex64::new(re, im) * inv;
            PhiPoint {
                s,
                re: value.re,
                im: value.im,
                std_error: (var / count).sqrt() * inv.norm(),
                usable: true,
            }
        })
        .collect();
    let mut points: Vec<PhiPoint> = half
        .iter()
        .skip(1)
        .rev()
        .map(|p| PhiPoint {
            s: -p.s,
            im: -p.im,
            ..*p
        })
        .collect();
    points.extend(half);
    Ok(CharFnEstimate {
        n,
        sample_size: log_z.len(),
        points,
    })
}

/// Geometric fit of the increments `|v_{n+1} - v_n|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub c: f64,
    pub rho: f64,
    pub r_squared: f64,
    /// Increments that entered the fit.
    pub used: usize,
    /// Set when fewer than two increments clear the noise floor; `rho` is then 0.
    pub at_noise_floor: bool,
}

impl ConvergenceFit {
    fn floor() -> Self {
        Self {
            c: 0.0,
            rho: 0.0,
            r_squared: 1.0,
            used: 0,
            at_noise_floor: true,
        }
    }

    /// Looks like geometric decay.
    pub fn is_geometric(&self) -> bool {
        self.at_noise_floor || (self.rho < 1.0 && self.r_squared > 0.5)
    }
}

/// Least-squares line through `(n, log |v_{n+1} - v_n|)`, where `values[i]`
/// is `v_{first_n + i}`; increments at or below `floor[i]` are skipped.
pub fn convergence_fit_with_floor(values: &[Complex64], first_n: usize, floor: &[f64]) -> Result<ConvergenceFit> {
    if values.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "convergence fit needs at least 5 values, got {}",
            values.len()
        )));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, w) in values.windows(2).enumerate() {
        let inc = (w[1] - w[0]).norm();
        if inc > floor.get(i).copied().unwrap_or(0.0) && inc > 0.0 {
            xs.push((first_n + i) as f64);
            ys.push(inc.ln());
        }
    }
    if xs.len() < 2 {
        return Ok(ConvergenceFit {
            used: xs.len(),
            ..ConvergenceFit::floor()
        });
    }
    let line = fit_line(&xs, &ys).expect("distinct abscissae");
    Ok(ConvergenceFit {
        c: line.intercept.exp(),
        rho: line.slope.exp(),
        r_squared: line.r_squared,
        used: xs.len(),
        at_noise_floor: false,
    })
}

/// [`convergence_fit_with_floor`] with a relative floating-point noise floor.
pub fn convergence_fit(values: &[Complex64], first_n: usize) -> Result<ConvergenceFit> {
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = vec![64.0 * f64::EPSILON * scale; values.len()];
    convergence_fit_with_floor(values, first_n, &floor)
}

/// Real-valued convenience wrapper.
pub fn convergence_fit_real(values: &[f64], first_n: usize) -> Result<ConvergenceFit> {
    let v: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    convergence_fit(&v, first_n)
}

/// Rows `s,C,rho,R2`.
pub fn write_fit_csv<W: Write>(mut out: W, rows: &[(f64, ConvergenceFit)]) -> Result<()> {
    writeln!(out, "s,C,rho,R2,noise_floor")?;
    for (s, f) in rows {
        writeln!(out, "{s},{},{},{},{}", f.c, f.rho, f.r_squared, f.at_noise_floor as u8)?;
    }
    Ok(())
}

/// `c^{(0..=jmax)}(0)` for `c(s) = exp(n (Lambda(s) - i mu s))`, the
/// characteristic function of `S_n - n mu`.
pub fn centered_walk_derivs(cumulants: &[f64], n: usize, jmax: usize) -> Vec<Complex64> {
    // g^{(k)}(0) = n i^k kappa_k for k >= 2, and 0 for k = 1
    let g: Vec<Complex64> = (0..=jmax)
        .map(|k| {
            if k < 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 1.0).powu(k as u32) * (n as f64 * cumulants[k - 1])
            }
        })
        .collect();
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for j in 1..=jmax {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=j {
            acc += g[k] * c[j - k] * binomial(j - 1, k - 1);
        }
        c.push(acc);
    }
    c
}

/// One term of the `phi_n^{(j)}(0)` sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivPoint {
    pub n: usize,
    pub re: f64,
    pub im: f64,
    pub std_error: f64,
    pub sample_size: usize,
}

impl DerivPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivSequence {
    pub j: usize,
    pub points: Vec<DerivPoint>,
    pub fit: Option<ConvergenceFit>,
    /// Extrapolated `phi^{(j)}(0)`; absent when the increments are not geometric.
    pub limit: Option<(f64, f64)>,
    pub limit_uncertainty: f64,
    /// The estimator subtracted the exactly known walk moments.
    pub control_variate: bool,
}

impl DerivSequence {
    pub fn limit_value(&self) -> Option<Complex64> {
        self.limit.map(|(re, im)| Complex64::new(re, im))
    }

    /// The limit, or the last term when extrapolation was refused.
    pub fn best_value(&self) -> Complex64 {
        self.limit_value()
            .unwrap_or_else(|| self.points.last().map_or(Complex64::new(0.0, 0.0), |p| p.value()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,j,re,im,stderr,sample_size")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{},{},{}", p.n, self.j, p.re, p.im, p.std_error, p.sample_size)?;
        }
        Ok(())
    }
}

/// `phi_n^{(0..=jmax)}(0)` from `(log Z_n, log Pi_n)` of surviving paths.
///
/// Solves `E_S[(iD)^j] = sum_m C(j,m) phi_n^{(m)}(0) c^{(j-m)}(0)` with
/// `D = log Z_n - n mu`. When extinction is impossible, `E[(iT)^j] = c^{(j)}(0)`
/// for `T = log Pi_n - n mu` is known exactly and `(iD)^j - (iT)^j` is
/// averaged instead of `(iD)^j`.
pub fn phi_derivs_at(
    pairs: &[(f64, f64)],
    model: &EnvironmentModel,
    n: usize,
    jmax: usize,
) -> Result<Vec<(Complex64, f64)>> {
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    let cumulants = model.cumulants(jmax.max(2))?;
    let c = centered_walk_derivs(&cumulants, n, jmax);
    let shift = n as f64 * model.mu();
    let control = model.extinction_impossible();
    let count = pairs.len() as f64;
    let mut out: Vec<(Complex64, f64)> = vec![(Complex64::new(1.0, 0.0), 0.0)];
    for j in 1..=jmax {
        let samples: Vec<f64> = pairs
            .iter()
            .map(|(z, p)| {
                let d = (z - shift).powi(j as i32);
                if control {
                    d - (p - shift).powi(j as i32)
                } else {
                    d
                }
            })
            .collect();
        let mean = pairwise_sum(&samples) / count;
        let var = pairwise_sum_by(&samples, |x| (x - mean) * (x - mean)) / (count - 1.0).max(1.0);
        let ij = Complex64::new(0.0, 1.0).powu(j as u32);
        let mut moment = ij * mean;
        if control {
            moment += c[j];
        }
        let mut value = moment;
        let mut se = (var / count).sqrt();
        for m in 0..j {
            let w = binomial(j, m);
            value -= out[m].0 * c[j - m] * w;
            se += w * c[j - m].norm() * out[m].1;
        }
        out.push((value, se));
    }
    Ok(out)
}

/// `phi_n^{(j)}(0)` for each `(n, ensemble)` input, plus the extrapolated limit.
pub fn phi_deriv0(inputs: &[(usize, &Ensemble)], model: &EnvironmentModel, j: usize) -> Result<DerivSequence> {
    let mut points = Vec::with_capacity(inputs.len());
    for &(n, ens) in inputs {
        let pairs = ens.alive_pairs_at(n)?;
        let d = phi_derivs_at(&pairs, model, n, j)?;
        let (v, se) = d[j];
        points.push(DerivPoint {
            n,
            re: v.re,
            im: v.im,
            std_error: se,
            sample_size: pairs.len(),
        });
    }
    Ok(extrapolate(j, points, model.extinction_impossible()))
}

/// Attach the geometric-tail extrapolation to a sequence of estimates
/// indexed by consecutive `n`.
pub fn extrapolate(j: usize, points: Vec<DerivPoint>, control_variate: bool) -> DerivSequence {
    let consecutive = points.windows(2).all(|w| w[1].n == w[0].n + 1);
    let mut seq = DerivSequence {
        j,
        fit: None,
        limit: None,
        limit_uncertainty: f64::NAN,
        control_variate,
        points,
    };
    if j == 0 {
        seq.limit = Some((1.0, 0.0));
        seq.limit_uncertainty = 0.0;
        return seq;
    }
    if !consecutive || seq.points.len() < 5 {
        return seq;
    }
    let values: Vec<Complex64> = seq.points.iter().map(|p| p.value()).collect();
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor: Vec<f64> = seq
        .points
        .windows(2)
        .map(|w| {
            (2.0 * w[0].std_error.hypot(w[1].std_error))
                .max(64.0 * f64::EPSILON * scale)
                .max(DERIV_NOISE_FLOOR)
        })
        .collect();
    let Ok(fit) = convergence_fit_with_floor(&values, seq.points[0].n, &floor) else {
        return seq;
    };
    seq.fit = Some(fit);
    if !fit.is_geometric() {
        return seq;
    }
    let last = *seq.points.last().unwrap();
    let tail = if fit.at_noise_floor {
        Complex64::new(0.0, 0.0)
    } else {
        let k = values.len();
        (values[k - 1] - values[k - 2]) * (fit.rho / (1.0 - fit.rho))
    };
    let limit = last.value() + tail;
    seq.limit = Some((limit.re, limit.im));
    seq.limit_uncertainty = last.std_error + tail.norm();
    seq
}

/// `sup |lambda(s)|` over `[s_lo, s_hi]`: a uniform scan refined by golden
/// section around each local maximum.
pub fn lambda_band_sup(model: &EnvironmentModel, s_lo: f64, s_hi: f64, resolution: usize) -> Result<f64> {
    if !(s_lo > 0.0 && s_hi >= s_lo) || resolution < 2 {
        return Err(Error::InvalidArgument(format!("bad band [{s_lo}, {s_hi}] / resolution {resolution}")));
    }
    let h = (s_hi - s_lo) / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|k| s_lo + h * k as f64).collect();
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|s| model.lambda(*s).map(|l| l.norm()))
        .collect::<Result<_>>()?;
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    let abs = |s: f64| model.lambda(s).map(|l| l.norm());
    for k in 0..resolution {
        let left = if k == 0 { f64::NEG_INFINITY } else { vals[k - 1] };
        let right = if k + 1 == resolution { f64::NEG_INFINITY } else { vals[k + 1] };
        if vals[k] >= left && vals[k] >= right {
            let (mut a, mut b) = ((grid[k] - h).max(s_lo), (grid[k] + h).min(s_hi));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
            let (mut f1, mut f2) = (abs(x1)?, abs(x2)?);
            for _ in 0..80 {
                if f1 > f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = abs(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = abs(x2)?;
                }
            }
            best = best.max(f1).max(f2);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::reference::*;
    use crate::oracle::{exact_distribution, exact_phi};
    use crate::simulate::{raw_ensemble, survivor_ensemble, EnsembleSpec, SimPolicy};

    #[test]
    fn default_grid_shape() {
        let g = SGrid::default();
        assert_eq!(g.points().len(), 41);
        assert_eq!(g.points()[20], 0.0);
        assert_eq!(g.points()[0], -0.5);
        assert_eq!(g.nonnegative().len(), 21);
        for (a, b) in g.points().iter().zip(g.points().iter().rev()) {
            assert_eq!(*a, -*b);
        }
        assert!(SGrid::symmetric(0.5, 40).is_err());
        let g = SGrid::from_nonnegative(&[0.3, 0.1]).unwrap();
        assert_eq!(g.points(), &[-0.3, -0.1, 0.0, 0.1, 0.3]);
    }

    #[test]
    fn branch_follows_winding_phase() {
        // lambda(s) = 2^{is} has log = i s log 2 with no wrap at s log 2 > pi
        let pts: Vec<f64> = (0..=200).map(|k| 0.1 * k as f64).collect();
        let b = log_lambda_branch(&dirac2(), &pts).unwrap();
        for (s, l) in pts.iter().zip(&b) {
            assert!((l.im - s * 2f64.ln()).abs() < 1e-10);
            assert!(l.re.abs() < 1e-12);
        }
        let err = log_lambda_branch(&dirac2(), &[0.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::BranchTracking { .. }));
    }

    #[test]
    fn dirac_ensemble_gives_one() {
        let m = dirac23(0.5);
        let ens = survivor_ensemble(&m, &EnsembleSpec::new(8, 2000, 1), &SimPolicy::default()).unwrap();
        let est = estimate_phi(&ens, &m, &SGrid::default()).unwrap();
        assert_eq!(est.at(0.0).unwrap().value(), Complex64::new(1.0, 0.0));
        for p in &est.points {
            // every path has log Z_n = log Pi_n; the ratio is 1 up to rounding
            assert!(p.usable);
        }
        let single = survivor_ensemble(&dirac2(), &EnsembleSpec::new(8, 50, 1), &SimPolicy::default()).unwrap();
        let est = estimate_phi(&single, &dirac2(), &SGrid::default()).unwrap();
        for p in &est.points {
            assert!((p.value() - 1.0).norm() < 1e-12, "s={}", p.s);
            assert!(p.std_error < 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        let m = m0();
        let ens = survivor_ensemble(&m, &EnsembleSpec::new(4, 3000, 9), &SimPolicy::default().with_margin(0)).unwrap();
        let est = estimate_phi(&ens, &m, &SGrid::default()).unwrap();
        let k = est.points.len();
        for i in 0..k {
            let (a, b) = (est.points[i], est.points[k - 1 - i]);
            assert_eq!(a.value(), b.value().conj());
            assert_eq!(a.std_error, b.std_error);
        }
    }

    #[test]
    fn underflow_is_flagged() {
        let m = dirac23(0.5);
        let logs = vec![1.0; 10];
        let grid = SGrid::from_nonnegative(&[0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0]).unwrap();
        // |lambda(s)| = |cos(0.2027 s)| is 0.5 near s = 5.17; n = 5000 underflows
        let est = estimate_phi_from_logs(&logs, &m, &grid, 5000).unwrap();
        assert!(est.points.iter().any(|p| !p.usable));
        assert!(est.at(0.0).unwrap().usable);
        let mut buf = Vec::new();
        est.write_csv(&mut buf, true).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("NaN"));
    }

    #[test]
    fn m0_estimate_matches_oracle() {
        let m = m0();
        let policy = SimPolicy::default().with_margin(0);
        let ens = survivor_ensemble(&m, &EnsembleSpec::new(6, 100_000, 21), &policy).unwrap();
        let grid = SGrid::from_nonnegative(&[0.1, 0.2, 0.3]).unwrap();
        let est = estimate_phi(&ens, &m, &grid).unwrap();
        for s in [0.1, 0.2, 0.3] {
            let p = est.at(s).unwrap();
            let exact = exact_phi(&m, 6, s, 4096).unwrap();
            assert!((p.value() - exact).norm() < 4.0 * p.std_error, "s={s}");
        }
    }

    #[test]
    fn convergence_fit_examples() {
        let constant = vec![Complex64::new(0.7, 0.1); 8];
        let f = convergence_fit(&constant, 1).unwrap();
        assert!(f.at_noise_floor && f.rho == 0.0);
        let geometric: Vec<f64> = (1..=12).map(|n| 0.5f64.powi(n)).collect();
        let f = convergence_fit_real(&geometric, 1).unwrap();
        assert!((f.rho - 0.5).abs() < 1e-12);
        assert!((f.c - 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(convergence_fit_real(&geometric[..4], 1).is_err());
    }

    #[test]
    fn oracle_phi_converges_geometrically() {
        let m = m0();
        let dists: Vec<_> = (1..=11).map(|n| exact_distribution(&m, n, 1 << 14).unwrap()).collect();
        let values: Vec<Complex64> = dists
            .iter()
            .map(|d| crate::oracle::phi_from_distribution(&m, d, 0.3).unwrap())
            .collect();
        let f = convergence_fit(&values, 1).unwrap();
        assert!(f.rho < 1.0, "{f:?}");
        // increments grow between n = 2 and 4 before settling into decay
        assert!((f.rho - 0.836_098).abs() < 1e-5, "{f:?}");
        assert!((f.r_squared - 0.887_283).abs() < 1e-5, "{f:?}");
        let tail = convergence_fit(&values[3..], 4).unwrap();
        assert!(tail.rho < 0.85 && tail.r_squared > 0.97, "{tail:?}");
    }

    #[test]
    fn walk_derivs_match_closed_forms() {
        let kappa = [0.3, 0.04, 0.002, 0.0005];
        let c = centered_walk_derivs(&kappa, 7, 4);
        assert_eq!(c[0], Complex64::new(1.0, 0.0));
        assert_eq!(c[1], Complex64::new(0.0, 0.0));
        assert!((c[2] - Complex64::new(-7.0 * 0.04, 0.0)).norm() < 1e-15);
        assert!((c[3] - Complex64::new(0.0, -7.0 * 0.002)).norm() < 1e-15);
        // fourth moment of the centred walk: n k4 + 3 n^2 k2^2
        let m4 = 7.0 * 0.0005 + 3.0 * 49.0 * 0.04 * 0.04;
        assert!((c[4] - Complex64::new(m4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dirac_mixture_derivatives_vanish() {
        let m = dirac23(0.75);
        let ens = raw_ensemble(&m, 10, 3000, 5, &SimPolicy::default(), None).unwrap();
        for j in 0..=2 {
            let inputs: Vec<(usize, &Ensemble)> = (1..=10).map(|n| (n, &ens)).collect();
            let seq = phi_deriv0(&inputs, &m, j).unwrap();
            assert!(seq.control_variate);
            for p in &seq.points {
                let expected = if j == 0 { 1.0 } else { 0.0 };
                assert!((p.value() - expected).norm() < 1e-10, "j={j} n={}", p.n);
            }
            let limit = seq.limit_value().unwrap();
            assert!((limit - if j == 0 { 1.0 } else { 0.0 }).norm() < 1e-10);
        }
    }

    #[test]
    fn m0_first_derivative_matches_oracle_moments() {
        let m = m0();
        let ens = raw_ensemble(&m, 10, 60_000, 77, &SimPolicy::default(), None).unwrap();
        let inputs: Vec<(usize, &Ensemble)> = (2..=10).map(|n| (n, &ens)).collect();
        let seq = phi_deriv0(&inputs, &m, 1).unwrap();
        for p in &seq.points {
            let d = exact_distribution(&m, p.n, 1 << 14).unwrap();
            let expected = d.conditional_log_moment(1) - p.n as f64 * m.mu();
            assert!(p.re.abs() < 1e-15);
            assert!((p.im - expected).abs() < 4.0 * p.std_error, "n={}", p.n);
        }
    }

    #[test]
    fn extrapolation_of_exact_geometric_sequence() {
        let points: Vec<DerivPoint> = (1..=12)
            .map(|n| DerivPoint {
                n,
                re: 0.0,
                im: 1.0 - 0.5f64.powi(n as i32),
                std_error: 0.0,
                sample_size: 1,
            })
            .collect();
        let seq = extrapolate(1, points, false);
        let l = seq.limit_value().unwrap();
        assert!((l - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        let noisy: Vec<DerivPoint> = (1..=8)
            .map(|n| DerivPoint {
                n,
                re: 0.0,
                im: n as f64,
                std_error: 0.0,
                sample_size: 1,
            })
            .collect();
        let seq = extrapolate(1, noisy, false);
        assert!(seq.limit.is_none());
        assert_eq!(seq.points.len(), 8);
    }

    #[test]
    fn band_sup_examples() {
        assert!((lambda_band_sup(&dirac2(), 3.0, 12.0, 200).unwrap() - 1.0).abs() < 1e-15);
        // |lambda| = |cos(s log(1.5) / 2)| touches 1 at s = 2 pi / log 1.5
        let v = lambda_band_sup(&dirac23(0.5), 0.5, 20.0, 400).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = lambda_band_sup(&dirac23(0.5), 0.5, 15.0, 400).unwrap();
        let expected = (15.0 * 0.5 * 1.5f64.ln()).cos().abs();
        assert!((v - expected).abs() < 1e-12, "{v}");
        assert!(v < 1.0);
        let ln = crate::envmodel::EnvironmentModel::new(crate::envmodel::EnvironmentKind::PoissonLogNormalTrunc {
            m: 1.0,
            v: 0.25,
            a_min: 1.5,
            a_max: 8.0,
        })
        .unwrap();
        let near = lambda_band_sup(&ln, 1.0, 10.0, 200).unwrap();
        let far = lambda_band_sup(&ln, 10.0, 50.0, 400).unwrap();
        assert!(near < 1.0 && far < near);
        assert!(lambda_band_sup(&dirac2(), 0.0, 1.0, 10).is_err());
    }
}
