//! Offspring laws and random-environment models.
//!
//! An [`EnvironmentModel`] is the law of the random reproduction law `Q`.
//! Every supported family has an exact characteristic function of `log A`,
//! exact cumulants and exact evaluation of the moment hypotheses, so all
//! downstream checks have an analytic anchor.

use std::borrow::Cow;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, cumulants_from_moments, integrate};

const PMF_SUM_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-12;
/// Largest denominator accepted by the arithmetic-span test.
pub const LATTICE_MAX_DENOMINATOR: u64 = 1_000_000;
/// Relative tolerance of the arithmetic-span test.
pub const LATTICE_TOLERANCE: f64 = 1e-13;
pub const MAX_CUMULANT_ORDER: usize = 8;

/// One reproduction law on the non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringLaw {
    /// Probabilities of `0..pmf.len()` offspring.
    Explicit(Vec<f64>),
    Dirac(u64),
    Poisson(f64),
    /// `Q(j) = p (1 - p)^j`.
    Geometric(f64),
}

impl OffspringLaw {
    pub fn explicit(pmf: Vec<f64>) -> Result<Self> {
        let law = OffspringLaw::Explicit(pmf);
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::Explicit(pmf) => {
                if pmf.is_empty() {
                    return Err(Error::InvalidLaw("empty pmf".into()));
                }
                if let Some(x) = pmf.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return Err(Error::InvalidLaw(format!("negative or non-finite probability {x}")));
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > PMF_SUM_TOL {
                    return Err(Error::InvalidLaw(format!("pmf sums to {total}")));
                }
                if self.mean() <= 0.0 {
                    return Err(Error::InvalidLaw("mean offspring number is zero".into()));
                }
            }
            OffspringLaw::Dirac(m) => {
                if *m == 0 {
                    return Err(Error::InvalidLaw("Dirac law needs m >= 1".into()));
                }
            }
            OffspringLaw::Poisson(a) => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::InvalidLaw(format!("Poisson mean {a} must be positive")));
                }
            }
            OffspringLaw::Geometric(p) => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidLaw(format!("geometric parameter {p} outside (0,1)")));
                }
            }
        }
        Ok(())
    }

    /// Mean offspring number `A`.
    pub fn mean(&self) -> f64 {
        match self {
            OffspringLaw::Explicit(pmf) => pmf.iter().enumerate().map(|(j, q)| j as f64 * q).sum(),
            OffspringLaw::Dirac(m) => *m as f64,
            OffspringLaw::Poisson(a) => *a,
            OffspringLaw::Geometric(p) => (1.0 - p) / p,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            OffspringLaw::Explicit(pmf) => {
                let a = self.mean();
                pmf.iter()
                    .enumerate()
                    .map(|(j, q)| (j as f64 - a).powi(2) * q)
                    .sum()
            }
            OffspringLaw::Dirac(_) => 0.0,
            OffspringLaw::Poisson(a) => *a,
            OffspringLaw::Geometric(p) => (1.0 - p) / (p * p),
        }
    }

    /// `Q(0)`.
    pub fn zero_mass(&self) -> f64 {
        match self {
            OffspringLaw::Explicit(pmf) => pmf[0],
            OffspringLaw::Dirac(_) => 0.0,
            OffspringLaw::Poisson(a) => (-a).exp(),
            OffspringLaw::Geometric(p) => *p,
        }
    }

    /// Probability vector for finite-support laws.
    pub fn finite_pmf(&self) -> Option<Cow<'_, [f64]>> {
        match self {
            OffspringLaw::Explicit(pmf) => Some(Cow::Borrowed(pmf)),
            OffspringLaw::Dirac(m) => {
                let mut v = vec![0.0; *m as usize + 1];
                v[*m as usize] = 1.0;
                Some(Cow::Owned(v))
            }
            _ => None,
        }
    }

    /// `E[(X / A)^p]` for one offspring `X` of this law.
    pub fn normalized_moment(&self, p: f64) -> f64 {
        let a = self.mean();
        match self {
            OffspringLaw::Explicit(pmf) => pmf
                .iter()
                .enumerate()
                .map(|(j, q)| q * (j as f64 / a).powf(p))
                .sum(),
            OffspringLaw::Dirac(_) => 1.0,
            OffspringLaw::Poisson(lam) => {
                let upper = (lam + 40.0 * lam.sqrt() + 60.0).ceil() as u64;
                let mut log_pmf = -lam;
                let mut acc = 0.0;
                for k in 1..=upper {
                    log_pmf += lam.ln() - (k as f64).ln();
                    acc += (log_pmf + p * (k as f64 / a).ln()).exp();
                }
                acc
            }
            OffspringLaw::Geometric(prob) => {
                let mut acc = 0.0;
                let mut k = 1u64;
                loop {
                    let term = prob * (1.0 - prob).powi(k as i32) * (k as f64 / a).powf(p);
                    acc += term;
                    if k as f64 > 2.0 * a + 10.0 && term < 1e-18 * acc {
                        break;
                    }
                    k += 1;
                }
                acc
            }
        }
    }
}

/// Which family the random law is drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentKind {
    FiniteMixture {
        laws: Vec<OffspringLaw>,
        weights: Vec<f64>,
    },
    /// Poisson reproduction whose mean `a` has `log a ~ N(m, v)` truncated to
    /// `[log a_min, log a_max]`.
    PoissonLogNormalTrunc { m: f64, v: f64, a_min: f64, a_max: f64 },
    /// Poisson reproduction whose mean has `log a` uniform on `[log a_min, log a_max]`.
    PoissonLogUniform { a_min: f64, a_max: f64 },
}

/// A validated environment law with its derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    kind: EnvironmentKind,
    mu: f64,
    sigma2: f64,
    gamma: f64,
    lattice: bool,
    shifted_lattice: bool,
}

/// Identifies the law drawn for one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvRecord {
    /// Index into the mixture components.
    Component(usize),
    /// Sampled Poisson mean.
    PoissonMean(f64),
}

impl EnvironmentModel {
    pub fn new(kind: EnvironmentKind) -> Result<Self> {
        match &kind {
            EnvironmentKind::FiniteMixture { laws, weights } => {
                if laws.is_empty() || laws.len() != weights.len() {
                    return Err(Error::InvalidModel(format!(
                        "{} laws but {} weights",
                        laws.len(),
                        weights.len()
                    )));
                }
                for law in laws {
                    law.validate()?;
                }
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                    return Err(Error::InvalidModel(format!("negative weight {w}")));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > PMF_SUM_TOL {
                    return Err(Error::InvalidModel(format!("weights sum to {total}")));
                }
            }
            EnvironmentKind::PoissonLogNormalTrunc { m, v, a_min, a_max } => {
                check_window(*a_min, *a_max)?;
                if !(m.is_finite() && v.is_finite() && *v > 0.0) {
                    return Err(Error::InvalidModel(format!("log-normal parameters m={m}, v={v}")));
                }
            }
            EnvironmentKind::PoissonLogUniform { a_min, a_max } => check_window(*a_min, *a_max)?,
        }
        let mut model = Self {
            kind,
            mu: 0.0,
            sigma2: 0.0,
            gamma: 0.0,
            lattice: false,
            shifted_lattice: false,
        };
        let kappa = model.cumulants(2)?;
        model.mu = kappa[0];
        model.sigma2 = kappa[1].max(0.0);
        model.gamma = model.compute_gamma();
        model.lattice = model.compute_lattice();
        model.shifted_lattice = model.compute_shifted_lattice();
        if !(model.mu > 0.0) {
            return Err(Error::NotSupercritical { mu: model.mu });
        }
        if model.gamma >= 1.0 {
            return Err(Error::H2Violated { gamma: model.gamma });
        }
        Ok(model)
    }

    /// Mixture of laws with the given weights.
    pub fn mixture(laws: Vec<OffspringLaw>, weights: Vec<f64>) -> Result<Self> {
        Self::new(EnvironmentKind::FiniteMixture { laws, weights })
    }

    pub fn kind(&self) -> &EnvironmentKind {
        &self.kind
    }

    /// `E log A`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `Var log A`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Essential supremum of `Q(0)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when `log A` lives on `h Z` for some span `h`.
    pub fn is_lattice(&self) -> bool {
        self.lattice
    }

    /// True when `log A` lives on some `a + hZ`, equivalently
    /// `|lambda(s)| = 1` for some `s != 0`.
    pub fn is_shifted_lattice(&self) -> bool {
        self.shifted_lattice
    }

    /// True when every law has `Q(0) = 0`, so the process never dies out.
    pub fn extinction_impossible(&self) -> bool {
        self.gamma == 0.0
    }

    /// True when every component is a finite-support law.
    pub fn is_finite_support(&self) -> bool {
        match &self.kind {
            EnvironmentKind::FiniteMixture { laws, .. } => laws.iter().all(|l| l.finite_pmf().is_some()),
            _ => false,
        }
    }

    /// `(weight, log A)` atoms of a finite mixture.
    pub fn log_mean_atoms(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            EnvironmentKind::FiniteMixture { laws, weights } => Some(
                weights
                    .iter()
                    .zip(laws)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, l)| (*w, l.mean().ln()))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// `E A`.
    pub fn mean_of_mean(&self) -> Result<f64> {
        match &self.kind {
            EnvironmentKind::FiniteMixture { laws, weights } => {
                Ok(weights.iter().zip(laws).map(|(w, l)| w * l.mean()).sum())
            }
            _ => self.expect_over_log_mean(|l| l.exp()),
        }
    }

    fn log_window(&self) -> Option<(f64, f64)> {
        match self.kind {
            EnvironmentKind::PoissonLogNormalTrunc { a_min, a_max, .. }
            | EnvironmentKind::PoissonLogUniform { a_min, a_max } => Some((a_min.ln(), a_max.ln())),
            EnvironmentKind::FiniteMixture { .. } => None,
        }
    }

    /// Density of `log A` for the continuous families.
    fn log_mean_density(&self, l: f64) -> f64 {
        match self.kind {
            EnvironmentKind::PoissonLogNormalTrunc { m, v, a_min, a_max } => {
                let sd = v.sqrt();
                let (lo, hi) = ((a_min.ln() - m) / sd, (a_max.ln() - m) / sd);
                let z = numeric::normal_cdf(hi) - numeric::normal_cdf(lo);
                numeric::normal_pdf((l - m) / sd) / (sd * z)
            }
            EnvironmentKind::PoissonLogUniform { a_min, a_max } => 1.0 / (a_max.ln() - a_min.ln()),
            EnvironmentKind::FiniteMixture { .. } => unreachable!("finite mixtures have no density"),
        }
    }

    /// `E g(log A)` for the continuous families.
    fn expect_over_log_mean<V: numeric::QuadValue, G: Fn(f64) -> V>(&self, g: G) -> Result<V> {
        let (lo, hi) = self.log_window().expect("continuous family");
        let f = |l: f64| g(l) * self.log_mean_density(l);
        match self.kind {
            EnvironmentKind::PoissonLogNormalTrunc { m, .. } if m > lo && m < hi => {
                Ok(integrate(&f, lo, m, QUAD_TOL / 2.0)? + integrate(&f, m, hi, QUAD_TOL / 2.0)?)
            }
            _ => integrate(f, lo, hi, QUAD_TOL),
        }
    }

    /// Characteristic function of `log A`, `lambda(s) = E A^{is}`.
    pub fn lambda(&self, s: f64) -> Result<Complex64> {
        if s == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        match self.kind {
            EnvironmentKind::FiniteMixture { .. } => {
                let atoms = self.log_mean_atoms().unwrap();
                let (mut re, mut im) = (0.0, 0.0);
                for (w, l) in atoms {
                    re += w * (s * l).cos();
                    im += w * (s * l).sin();
                }
                Ok(Complex64::new(re, im))
            }
            EnvironmentKind::PoissonLogUniform { a_min, a_max } => {
                let (lo, hi) = (a_min.ln(), a_max.ln());
                let center = 0.5 * (lo + hi);
                let x = 0.5 * s * (hi - lo);
                let sinc = if x.abs() < 1e-4 {
                    1.0 - x * x / 6.0 + x.powi(4) / 120.0
                } else {
                    x.sin() / x
                };
                Ok(Complex64::from_polar(sinc, s * center))
            }
            EnvironmentKind::PoissonLogNormalTrunc { .. } => {
                self.expect_over_log_mean(|l| Complex64::from_polar(1.0, s * l))
            }
        }
    }

    /// Cumulants `kappa_1..kappa_r` of `log A`.
    pub fn cumulants(&self, r: usize) -> Result<Vec<f64>> {
        if r > MAX_CUMULANT_ORDER {
            return Err(Error::Unsupported(format!("cumulant order {r} > {MAX_CUMULANT_ORDER}")));
        }
        if r == 0 {
            return Ok(Vec::new());
        }
        let (shift, central) = match &self.kind {
            EnvironmentKind::FiniteMixture { .. } => {
                let atoms = self.log_mean_atoms().unwrap();
                let mean: f64 = atoms.iter().map(|(w, l)| w * l).sum();
                let central: Vec<f64> = (1..=r)
                    .map(|j| atoms.iter().map(|(w, l)| w * (l - mean).powi(j as i32)).sum())
                    .collect();
                (mean, central)
            }
            _ => {
                let mean = self.expect_over_log_mean(|l| l)?;
                let mut central = Vec::with_capacity(r);
                for j in 1..=r {
                    central.push(self.expect_over_log_mean(|l| (l - mean).powi(j as i32))?);
                }
                (mean, central)
            }
        };
        Ok(cumulants_from_moments(shift, &central))
    }

    fn compute_gamma(&self) -> f64 {
        match &self.kind {
            EnvironmentKind::FiniteMixture { laws, weights } => laws
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(l, _)| l.zero_mass())
                .fold(0.0, f64::max),
            EnvironmentKind::PoissonLogNormalTrunc { a_min, .. }
            | EnvironmentKind::PoissonLogUniform { a_min, .. } => (-a_min).exp(),
        }
    }

    fn compute_shifted_lattice(&self) -> bool {
        let Some(atoms) = self.log_mean_atoms() else {
            return false;
        };
        let base = atoms[0].1;
        let mut diffs: Vec<f64> = atoms.iter().map(|a| a.1 - base).filter(|d| *d != 0.0).collect();
        diffs.dedup();
        let Some(&first) = diffs.first() else {
            return true;
        };
        diffs
            .iter()
            .all(|d| numeric::is_nearly_rational(d / first, LATTICE_MAX_DENOMINATOR, LATTICE_TOLERANCE))
    }

    fn compute_lattice(&self) -> bool {
        let Some(atoms) = self.log_mean_atoms() else {
            return false;
        };
        let mut values: Vec<f64> = atoms.iter().map(|a| a.1).filter(|l| *l != 0.0).collect();
        values.dedup();
        let Some(&base) = values.first() else {
            return true;
        };
        values
            .iter()
            .all(|l| numeric::is_nearly_rational(l / base, LATTICE_MAX_DENOMINATOR, LATTICE_TOLERANCE))
    }

    /// Draw one generation's reproduction law.
    pub fn sample_law<R: Rng + ?Sized>(&self, rng: &mut R) -> (EnvRecord, Cow<'_, OffspringLaw>) {
        match &self.kind {
            EnvironmentKind::FiniteMixture { laws, weights } => {
                let idx = if laws.len() == 1 {
                    0
                } else {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = laws.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            chosen = i;
                            break;
                        }
                    }
                    chosen
                };
                (EnvRecord::Component(idx), Cow::Borrowed(&laws[idx]))
            }
            EnvironmentKind::PoissonLogNormalTrunc { m, v, a_min, a_max } => {
                let sd = v.sqrt();
                let (lo, hi) = ((a_min.ln() - m) / sd, (a_max.ln() - m) / sd);
                let (plo, phi) = (numeric::normal_cdf(lo), numeric::normal_cdf(hi));
                let u: f64 = rng.random();
                let z = numeric::normal_quantile(plo + u * (phi - plo)).clamp(lo, hi);
                let a = (m + sd * z).exp().clamp(*a_min, *a_max);
                (EnvRecord::PoissonMean(a), Cow::Owned(OffspringLaw::Poisson(a)))
            }
            EnvironmentKind::PoissonLogUniform { a_min, a_max } => {
                let u: f64 = rng.random();
                let a = (a_min.ln() + u * (a_max.ln() - a_min.ln())).exp();
                (EnvRecord::PoissonMean(a), Cow::Owned(OffspringLaw::Poisson(a)))
            }
        }
    }

    /// The law a record refers to.
    pub fn law_for(&self, record: EnvRecord) -> Cow<'_, OffspringLaw> {
        match (&self.kind, record) {
            (EnvironmentKind::FiniteMixture { laws, .. }, EnvRecord::Component(i)) => Cow::Borrowed(&laws[i]),
            (_, EnvRecord::PoissonMean(a)) => Cow::Owned(OffspringLaw::Poisson(a)),
            _ => panic!("record does not belong to this model"),
        }
    }
}

fn check_window(a_min: f64, a_max: f64) -> Result<()> {
    if !(a_min > 0.0 && a_max > a_min && a_max.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "truncation window [{a_min}, {a_max}] needs 0 < a_min < a_max"
        )));
    }
    Ok(())
}

/// Machine check of the standing hypotheses for a model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub mu: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub q: f64,
    pub p: f64,
    /// `E[(1 + |log A|^q)((Z_1/A)^p + 1)]`, `+inf` when it diverges.
    pub h1_value: f64,
    /// `log A` is not concentrated on any `hZ`.
    pub nonlattice: bool,
    /// `log A` is not concentrated on any `a + hZ`, so `|lambda(s)| < 1` for `s != 0`.
    pub strongly_nonlattice: bool,
    /// `limsup |lambda(s)| < 1` as `|s| -> inf`.
    pub cramer: bool,
    pub supercritical: bool,
}

impl HypothesisReport {
    pub fn h1_holds(&self) -> bool {
        self.h1_value.is_finite()
    }

    pub fn h2_holds(&self) -> bool {
        self.gamma < 1.0
    }
}

/// Evaluate the moment hypothesis for `(q, p)` and the structural flags.
pub fn check_hypotheses(model: &EnvironmentModel, q: f64, p: f64) -> Result<HypothesisReport> {
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} must exceed 1")));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in (1, 2]")));
    }
    let h1_value = match model.kind() {
        EnvironmentKind::FiniteMixture { laws, weights } => laws
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(law, w)| w * (1.0 + law.mean().ln().abs().powf(q)) * (law.normalized_moment(p) + 1.0))
            .sum(),
        _ => model.expect_over_log_mean(|l| {
            (1.0 + l.abs().powf(q)) * (OffspringLaw::Poisson(l.exp()).normalized_moment(p) + 1.0)
        })?,
    };
    let continuous = !matches!(model.kind(), EnvironmentKind::FiniteMixture { .. });
    Ok(HypothesisReport {
        mu: model.mu(),
        sigma2: model.sigma2(),
        gamma: model.gamma(),
        q,
        p,
        h1_value,
        nonlattice: !model.is_lattice(),
        strongly_nonlattice: !model.is_shifted_lattice(),
        cramer: continuous,
        supercritical: model.mu() > 0.0,
    })
}

/// Offspring law as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Explicit { pmf: Vec<f64> },
    Dirac { m: u64 },
    Poisson { a: f64 },
    Geometric { p: f64 },
}

impl From<&LawSpec> for OffspringLaw {
    fn from(spec: &LawSpec) -> Self {
        match spec {
            LawSpec::Explicit { pmf } => OffspringLaw::Explicit(pmf.clone()),
            LawSpec::Dirac { m } => OffspringLaw::Dirac(*m),
            LawSpec::Poisson { a } => OffspringLaw::Poisson(*a),
            LawSpec::Geometric { p } => OffspringLaw::Geometric(*p),
        }
    }
}

/// Model block of a run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `finite_mixture`, `poisson_lognormal_trunc` or `poisson_loguniform`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laws: Option<Vec<LawSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_max: Option<f64>,
}

fn required(value: Option<f64>, key: &str) -> Result<f64> {
    value.ok_or_else(|| Error::InvalidModel(format!("missing key `{key}`")))
}

/// Build and validate a model from its configuration block.
pub fn build_model(spec: &ModelSpec) -> Result<EnvironmentModel> {
    let kind = match spec.kind.as_str() {
        "finite_mixture" => {
            let laws: Vec<OffspringLaw> = spec
                .laws
                .as_ref()
                .ok_or_else(|| Error::InvalidModel("missing key `laws`".into()))?
                .iter()
                .map(OffspringLaw::from)
                .collect();
            let weights = match &spec.weights {
                Some(w) => w.clone(),
                None if laws.len() == 1 => vec![1.0],
                None => return Err(Error::InvalidModel("missing key `weights`".into())),
            };
            EnvironmentKind::FiniteMixture { laws, weights }
        }
        "poisson_lognormal_trunc" => EnvironmentKind::PoissonLogNormalTrunc {
            m: required(spec.m, "m")?,
            v: required(spec.v, "v")?,
            a_min: required(spec.a_min, "a_min")?,
            a_max: required(spec.a_max, "a_max")?,
        },
        "poisson_loguniform" => EnvironmentKind::PoissonLogUniform {
            a_min: required(spec.a_min, "a_min")?,
            a_max: required(spec.a_max, "a_max")?,
        },
        other => return Err(Error::InvalidModel(format!("unknown model kind `{other}`"))),
    };
    EnvironmentModel::new(kind)
}

/// Reference models used throughout the tests, examples and acceptance suite.
pub mod reference {
    use super::*;

    /// Deterministic binary splitting.
    pub fn dirac2() -> EnvironmentModel {
        EnvironmentModel::mixture(vec![OffspringLaw::Dirac(2)], vec![1.0]).unwrap()
    }

    /// Two three-point laws with means 1.3 and 1.6, equally likely.
    pub fn m0() -> EnvironmentModel {
        EnvironmentModel::mixture(
            vec![
                OffspringLaw::Explicit(vec![0.2, 0.3, 0.5]),
                OffspringLaw::Explicit(vec![0.1, 0.2, 0.7]),
            ],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    /// Each generation doubles or triples, with the given weight on doubling.
    pub fn dirac23(weight_two: f64) -> EnvironmentModel {
        EnvironmentModel::mixture(
            vec![OffspringLaw::Dirac(2), OffspringLaw::Dirac(3)],
            vec![weight_two, 1.0 - weight_two],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::reference::*;
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn dirac_model_constants() {
        let m = dirac2();
        assert_eq!(m.mu(), 2f64.ln());
        assert_eq!(m.sigma2(), 0.0);
        assert_eq!(m.gamma(), 0.0);
        assert!(m.is_lattice());
    }

    #[test]
    fn m0_constants() {
        let m = m0();
        let expected = (1.3f64.ln() + 1.6f64.ln()) / 2.0;
        assert!((m.mu() - expected).abs() < 1e-15);
        assert!((m.mu() - 0.36618).abs() < 1e-5);
        assert_eq!(m.gamma(), 0.2);
        assert!(!m.is_lattice());
    }

    #[test]
    fn critical_and_invalid_models_are_rejected() {
        let err = EnvironmentModel::mixture(vec![OffspringLaw::Dirac(1)], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::NotSupercritical { .. }));
        let err = OffspringLaw::explicit(vec![-0.1, 0.6, 0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidLaw(_)));
        let err = EnvironmentModel::mixture(
            vec![OffspringLaw::Dirac(2), OffspringLaw::Dirac(3)],
            vec![0.5, 0.6],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
        // Q(0) = 1 would break H2 but such a law has mean zero; a law with
        // gamma >= 1 cannot be built from valid components.
        let err = OffspringLaw::explicit(vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidLaw(_)));
    }

    #[test]
    fn lambda_examples() {
        let d = dirac2();
        assert_eq!(d.lambda(0.0).unwrap(), Complex64::new(1.0, 0.0));
        let l = d.lambda(0.5).unwrap();
        assert!((l.re - 0.940_542).abs() < 1e-6 && (l.im - 0.339_677).abs() < 1e-5);
        let expected = Complex64::new(0.0, 1.3f64.ln()).exp() * 0.5 + Complex64::new(0.0, 1.6f64.ln()).exp() * 0.5;
        assert!((m0().lambda(1.0).unwrap() - expected).norm() < 1e-15);
    }

    #[test]
    fn two_point_cumulants() {
        let k = dirac23(0.5).cumulants(3).unwrap();
        assert!(k[2].abs() < 1e-16);
        let k = dirac23(0.75).cumulants(3).unwrap();
        // independent: two-point law on {log 2, log 3} with P(log 3) = 1/4
        let (a, b, p) = (2f64.ln(), 3f64.ln(), 0.25);
        let d = b - a;
        assert!((k[0] - (a + p * d)).abs() < 1e-15);
        assert!((k[1] - p * (1.0 - p) * d * d).abs() < 1e-15);
        assert!((k[2] - p * (1.0 - p) * (1.0 - 2.0 * p) * d.powi(3)).abs() < 1e-16);
        assert!((k[0] - 0.794_513).abs() < 1e-6);
        assert!((k[1] - 0.03083).abs() < 1e-5);
        assert!((k[2] - 0.006249).abs() < 1e-6);
        assert_eq!(dirac2().cumulants(3).unwrap(), vec![2f64.ln(), 0.0, 0.0]);
        assert!(matches!(dirac2().cumulants(9), Err(Error::Unsupported(_))));
    }

    #[test]
    fn hypothesis_examples() {
        let r = check_hypotheses(&dirac2(), 4.0, 2.0).unwrap();
        assert!(!r.nonlattice && !r.cramer && r.h1_holds());
        let r = check_hypotheses(&dirac23(0.5), 4.0, 2.0).unwrap();
        assert!(r.nonlattice && !r.cramer);
        // two atoms always sit on log 2 + (log 1.5) Z
        assert!(!r.strongly_nonlattice && r.h2_holds());
        let three = EnvironmentModel::mixture(
            vec![OffspringLaw::Dirac(2), OffspringLaw::Dirac(3), OffspringLaw::Dirac(5)],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        assert!(!three.is_lattice() && !three.is_shifted_lattice());
        let on_grid = EnvironmentModel::mixture(
            vec![OffspringLaw::Dirac(2), OffspringLaw::Dirac(4), OffspringLaw::Dirac(8)],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        assert!(on_grid.is_lattice() && on_grid.is_shifted_lattice());
        let lu = EnvironmentModel::new(EnvironmentKind::PoissonLogUniform { a_min: 1.2, a_max: 3.0 }).unwrap();
        let r = check_hypotheses(&lu, 4.0, 2.0).unwrap();
        assert!((r.gamma - (-1.2f64).exp()).abs() < 1e-15);
        assert!((r.gamma - 0.3012).abs() < 1e-4);
        assert!(r.cramer && r.nonlattice && r.h1_holds());
        assert!(check_hypotheses(&dirac2(), 1.0, 2.0).is_err());
    }

    #[test]
    fn h1_value_for_explicit_law_is_finite_sum() {
        let m = m0();
        let r = check_hypotheses(&m, 2.0, 2.0).unwrap();
        let term = |pmf: &[f64], a: f64| {
            let mom: f64 = pmf.iter().enumerate().map(|(j, q)| q * (j as f64 / a).powi(2)).sum();
            (1.0 + a.ln().powi(2)) * (mom + 1.0)
        };
        let expected = 0.5 * term(&[0.2, 0.3, 0.5], 1.3) + 0.5 * term(&[0.1, 0.2, 0.7], 1.6);
        assert!((r.h1_value - expected).abs() < 1e-14);
    }

    #[test]
    fn poisson_normalized_moment_integer_p() {
        // E[X^2] = a + a^2 for Poisson(a)
        let a = 2.5;
        let v = OffspringLaw::Poisson(a).normalized_moment(2.0);
        assert!((v - (a + a * a) / (a * a)).abs() < 1e-12);
        // Geometric: E[X^2] = (1-p)(2-p)/p^2
        let p = 0.4;
        let g = OffspringLaw::Geometric(p);
        let mean = g.mean();
        let v = g.normalized_moment(2.0);
        assert!((v - (1.0 - p) * (2.0 - p) / (p * p) / (mean * mean)).abs() < 1e-12);
    }

    #[test]
    fn continuous_families_agree_with_closed_forms() {
        let lu = EnvironmentModel::new(EnvironmentKind::PoissonLogUniform { a_min: 1.2, a_max: 3.0 }).unwrap();
        let (lo, hi) = (1.2f64.ln(), 3f64.ln());
        assert!((lu.mu() - 0.5 * (lo + hi)).abs() < 1e-12);
        assert!((lu.sigma2() - (hi - lo).powi(2) / 12.0).abs() < 1e-12);
        let quad = lu.expect_over_log_mean(|l| Complex64::from_polar(1.0, 3.0 * l)).unwrap();
        assert!((quad - lu.lambda(3.0).unwrap()).norm() < 1e-10);

        let ln = EnvironmentModel::new(EnvironmentKind::PoissonLogNormalTrunc {
            m: 0.5,
            v: 0.04,
            a_min: 1.05,
            a_max: 6.0,
        })
        .unwrap();
        // Window covers m +- 4.5 sd on the upper side and about 2.2 sd below.
        let sd = 0.2;
        let (alpha, beta) = ((1.05f64.ln() - 0.5) / sd, (6f64.ln() - 0.5) / sd);
        let z = numeric::normal_cdf(beta) - numeric::normal_cdf(alpha);
        let mean = 0.5 + sd * (numeric::normal_pdf(alpha) - numeric::normal_pdf(beta)) / z;
        assert!((ln.mu() - mean).abs() < 1e-10);
        assert!(ln.lambda(0.0).unwrap() == Complex64::new(1.0, 0.0));
    }

    #[test]
    fn lambda_is_hermitian_and_bounded() {
        let models = [m0(), dirac23(0.3)];
        for m in &models {
            for i in 0..50 {
                let s = 0.37 * i as f64;
                let a = m.lambda(s).unwrap();
                let b = m.lambda(-s).unwrap();
                assert!((a - b.conj()).norm() < 1e-15);
                assert!(a.norm() <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn cumulants_match_stored_moments() {
        for m in [m0(), dirac23(0.75)] {
            let k = m.cumulants(2).unwrap();
            assert!((k[0] - m.mu()).abs() < 1e-10);
            assert!((k[1] - m.sigma2()).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_matches_sampled_log_means() {
        let m = dirac23(0.3);
        let n = 1_000_000u64;
        let s = 2.0;
        let mut rng = stream_rng(11, 0, 0);
        let (mut re, mut im, mut re2, mut im2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let (_, law) = m.sample_law(&mut rng);
            let l = law.mean().ln();
            let (c, si) = ((s * l).cos(), (s * l).sin());
            re += c;
            im += si;
            re2 += c * c;
            im2 += si * si;
        }
        let nf = n as f64;
        let (re, im) = (re / nf, im / nf);
        let se_re = ((re2 / nf - re * re) / nf).sqrt();
        let se_im = ((im2 / nf - im * im) / nf).sqrt();
        let exact = m.lambda(s).unwrap();
        assert!((re - exact.re).abs() < 4.0 * se_re);
        assert!((im - exact.im).abs() < 4.0 * se_im);
    }

    #[test]
    fn model_spec_parses_and_rejects_unknown_keys() {
        let spec: ModelSpec = toml::from_str(
            r#"
kind = "finite_mixture"
weights = [0.5, 0.5]
laws = [{ kind = "explicit", pmf = [0.2, 0.3, 0.5] }, { kind = "explicit", pmf = [0.1, 0.2, 0.7] }]
"#,
        )
        .unwrap();
        assert_eq!(build_model(&spec).unwrap(), m0());
        assert!(toml::from_str::<ModelSpec>("kind = \"finite_mixture\"\nwieghts = [1.0]").is_err());
    }
}
