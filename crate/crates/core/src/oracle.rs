//! Exact annealed law of `Z_n` for finite mixtures of finite-support laws.
//!
//! One generation maps `P_t` to `P_{t+1}(j) = sum_e w_e sum_k P_t(k) p_e^{*k}(j)`.
//! Convolution powers are built incrementally inside the sweep over `k`, so
//! only one power per law is alive at a time. Mass pushed beyond `k_max` is
//! accumulated in `tail_mass` and never reenters the window, which makes the
//! atoms lower bounds and `tail_mass` an upper bound on `P[Z_n > k_max]`.

use std::io::Write;

use num_complex::Complex64;

use crate::envmodel::{EnvironmentKind, EnvironmentModel};
use crate::error::{Error, Result};
use crate::numeric::{normal_cdf, normal_pdf};

/// Tail mass above which a result carries a warning.
pub const TAIL_WARNING: f64 = 0.01;
/// Tail mass above which Fourier quantities are refused.
pub const PHI_TAIL_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDist {
    pub n: usize,
    /// `P[Z_n = k]` for `k = 0..=k_max`.
    pub atoms: Vec<f64>,
    pub tail_mass: f64,
    pub tail_warning: bool,
}

impl ExactDist {
    fn new(n: usize, atoms: Vec<f64>, tail_mass: f64) -> Self {
        Self {
            n,
            atoms,
            tail_mass,
            tail_warning: tail_mass > TAIL_WARNING,
        }
    }

    pub fn k_max(&self) -> usize {
        self.atoms.len() - 1
    }

    /// `P[Z_n > 0]`, counting the tail as alive.
    pub fn prob_alive(&self) -> f64 {
        1.0 - self.atoms[0]
    }

    /// `sum_{k >= 1} P[Z_n = k] f(k)` over the window.
    pub fn expect_alive<F: Fn(u64) -> f64>(&self, f: F) -> f64 {
        self.atoms
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| p * f(k as u64))
            .sum()
    }

    /// `E[(log Z_n)^j | Z_n > 0]`.
    pub fn conditional_log_moment(&self, j: i32) -> f64 {
        self.expect_alive(|k| (k as f64).ln().powi(j)) / self.prob_alive()
    }

    /// Rows `k,probability`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,probability")?;
        for (k, p) in self.atoms.iter().enumerate() {
            writeln!(out, "{k},{p}")?;
        }
        Ok(())
    }
}

fn finite_components(model: &EnvironmentModel) -> Result<Vec<(f64, Vec<f64>)>> {
    match model.kind() {
        EnvironmentKind::FiniteMixture { laws, weights } => laws
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(law, w)| {
                law.finite_pmf()
                    .map(|p| (*w, p.into_owned()))
                    .ok_or_else(|| Error::Unsupported("oracle needs finite-support laws".into()))
            })
            .collect(),
        _ => Err(Error::Unsupported("oracle needs a finite mixture".into())),
    }
}

/// Convolve `cur` with `pmf` in place of `out`, keeping indices `<= k_max`;
/// returns the mass that fell outside.
fn convolve_truncated(cur: &[f64], pmf: &[f64], k_max: usize, out: &mut Vec<f64>) -> f64 {
    let len = (cur.len() + pmf.len() - 1).min(k_max + 1);
    out.clear();
    out.resize(len, 0.0);
    let mut overflow = 0.0;
    for (i, &a) in cur.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (j, &b) in pmf.iter().enumerate() {
            if i + j < len {
                out[i + j] += a * b;
            } else {
                overflow += a * b;
            }
        }
    }
    overflow
}

fn one_generation(prev: &ExactDist, components: &[(f64, Vec<f64>)], k_max: usize) -> ExactDist {
    let mut next = vec![0.0; k_max + 1];
    let mut tail = prev.tail_mass;
    let top = prev.atoms.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    let mut cur = Vec::with_capacity(k_max + 1);
    let mut scratch = Vec::with_capacity(k_max + 1);
    for (w, pmf) in components {
        next[0] += w * prev.atoms[0];
        cur.clear();
        cur.push(1.0);
        let mut dropped = 0.0;
        for k in 1..=top {
            dropped += convolve_truncated(&cur, pmf, k_max, &mut scratch);
            std::mem::swap(&mut cur, &mut scratch);
            let pk = prev.atoms[k];
            if pk == 0.0 {
                continue;
            }
            let scale = w * pk;
            for (slot, c) in next.iter_mut().zip(&cur) {
                *slot += scale * c;
            }
            tail += scale * dropped;
        }
    }
    ExactDist::new(prev.n + 1, next, tail)
}

/// Laws of `Z_0, ..., Z_n`.
pub fn exact_distributions(model: &EnvironmentModel, n: usize, k_max: usize) -> Result<Vec<ExactDist>> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let components = finite_components(model)?;
    let mut atoms = vec![0.0; k_max + 1];
    atoms[1] = 1.0;
    let mut out = vec![ExactDist::new(0, atoms, 0.0)];
    for _ in 0..n {
        let next = one_generation(out.last().unwrap(), &components, k_max);
        out.push(next);
    }
    Ok(out)
}

/// Law of `Z_n` truncated at `k_max`.
pub fn exact_distribution(model: &EnvironmentModel, n: usize, k_max: usize) -> Result<ExactDist> {
    Ok(exact_distributions(model, n, k_max)?.pop().unwrap())
}

/// Annealed survival probabilities `P[Z_t > 0]` for `t = 1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub survival: Vec<f64>,
    /// `P[U_t] - P[U_{t+1}]` for `t = 1..n_max`.
    pub decrements: Vec<f64>,
    pub tail_mass: f64,
}

impl SurvivalCurve {
    /// `P[Z_t > 0]`.
    pub fn at(&self, t: usize) -> f64 {
        self.survival[t - 1]
    }

    /// Rows `t,survival`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,survival")?;
        for (i, s) in self.survival.iter().enumerate() {
            writeln!(out, "{},{s}", i + 1)?;
        }
        Ok(())
    }
}

pub fn exact_survival_curve(model: &EnvironmentModel, n_max: usize, k_max: usize) -> Result<SurvivalCurve> {
    let dists = exact_distributions(model, n_max, k_max)?;
    let survival: Vec<f64> = dists[1..].iter().map(ExactDist::prob_alive).collect();
    let decrements = survival.windows(2).map(|w| w[0] - w[1]).collect();
    Ok(SurvivalCurve {
        survival,
        decrements,
        tail_mass: dists.last().unwrap().tail_mass,
    })
}

/// `E[Z_n^{is} | Z_n > 0] / lambda(s)^n` from a precomputed law.
pub fn phi_from_distribution(model: &EnvironmentModel, dist: &ExactDist, s: f64) -> Result<Complex64> {
    if dist.tail_mass > PHI_TAIL_LIMIT {
        return Err(Error::TailTooHeavy {
            tail_mass: dist.tail_mass,
        });
    }
    if s == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &p) in dist.atoms.iter().enumerate().skip(1) {
        if p > 0.0 {
            let arg = s * (k as f64).ln();
            re += p * arg.cos();
            im += p * arg.sin();
        }
    }
    let lambda_n = model.lambda(s)?.powi(dist.n as i32);
    Ok(Complex64::new(re, im) / (lambda_n * dist.prob_alive()))
}

/// `phi_n(s)` with conditioning on `{Z_n > 0}`.
pub fn exact_phi(model: &EnvironmentModel, n: usize, s: f64, k_max: usize) -> Result<Complex64> {
    phi_from_distribution(model, &exact_distribution(model, n, k_max)?, s)
}

/// First-order Edgeworth CDF of a standardized sum of `n` iid variables
/// with cumulants `kappa_1..kappa_3`.
pub fn iid_edgeworth_reference(cumulants: &[f64], n: usize, x: f64) -> Result<f64> {
    let (k2, k3) = (cumulants[1], cumulants[2]);
    if !(k2 > 0.0) {
        return Err(Error::Degenerate("kappa_2 must be positive".into()));
    }
    let skew = k3 / (6.0 * k2.powf(1.5) * (n as f64).sqrt());
    Ok(normal_cdf(x) - normal_pdf(x) * skew * (x * x - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::reference::*;
    use crate::envmodel::OffspringLaw;

    #[test]
    fn dirac_mass_moves_deterministically() {
        let d = exact_distribution(&dirac2(), 4, 16).unwrap();
        assert_eq!(d.atoms[16], 1.0);
        assert_eq!(d.atoms.iter().sum::<f64>(), 1.0);
        assert_eq!(d.tail_mass, 0.0);
    }

    #[test]
    fn m0_first_generation() {
        let d = exact_distribution(&m0(), 1, 8).unwrap();
        let expected = [0.15, 0.25, 0.60];
        for (k, e) in expected.iter().enumerate() {
            assert!((d.atoms[k] - e).abs() < 1e-15);
        }
    }

    /// Independent route: enumerate environment pairs and every offspring tuple.
    fn enumerate_two_generations() -> Vec<f64> {
        let laws = [[0.2, 0.3, 0.5], [0.1, 0.2, 0.7]];
        let mut pmf = vec![0.0; 5];
        for e0 in 0..2 {
            for z1 in 0..3usize {
                let p1 = 0.5 * laws[e0][z1];
                for e1 in 0..2 {
                    let p_env = p1 * 0.5;
                    // all offspring tuples of the z1 individuals
                    let tuples = 3usize.pow(z1 as u32);
                    for code in 0..tuples {
                        let mut c = code;
                        let mut prob = p_env;
                        let mut total = 0;
                        for _ in 0..z1 {
                            let x = c % 3;
                            c /= 3;
                            prob *= laws[e1][x];
                            total += x;
                        }
                        pmf[total] += prob;
                    }
                }
            }
        }
        pmf
    }

    #[test]
    fn m0_second_generation_matches_enumeration() {
        let d = exact_distribution(&m0(), 2, 4).unwrap();
        let e = enumerate_two_generations();
        for k in 0..5 {
            assert!((d.atoms[k] - e[k]).abs() < 1e-15, "k={k}");
        }
        assert!(d.tail_mass.abs() < 1e-15);
    }

    #[test]
    fn dirac_mixture_matches_sequence_enumeration() {
        let model = dirac23(0.3);
        for n in 1..=6 {
            let k_max = 3usize.pow(n as u32);
            let d = exact_distribution(&model, n, k_max).unwrap();
            let mut expected = vec![0.0; k_max + 1];
            for code in 0..(1u32 << n) {
                let mut z = 1usize;
                let mut p = 1.0;
                for g in 0..n {
                    if code >> g & 1 == 1 {
                        z *= 3;
                        p *= 0.7;
                    } else {
                        z *= 2;
                        p *= 0.3;
                    }
                }
                expected[z] += p;
            }
            for k in 0..=k_max {
                assert!((d.atoms[k] - expected[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_is_conserved_with_truncation() {
        let dists = exact_distributions(&m0(), 10, 64).unwrap();
        for d in &dists {
            let total: f64 = d.atoms.iter().sum::<f64>() + d.tail_mass;
            assert!((total - 1.0).abs() < 1e-12, "n={} total={total}", d.n);
        }
        assert!(dists[10].tail_mass > 0.0);
        assert!(dists[10].tail_warning);
    }

    #[test]
    fn survival_curve() {
        let s = exact_survival_curve(&dirac2(), 6, 64).unwrap();
        assert!(s.survival.iter().all(|&p| p == 1.0));
        let s = exact_survival_curve(&m0(), 12, 4096).unwrap();
        assert!((s.at(1) - 0.85).abs() < 1e-15);
        assert!(s.survival.windows(2).all(|w| w[1] <= w[0]));
        let xs: Vec<f64> = (1..s.decrements.len() + 1).map(|t| t as f64).collect();
        let ys: Vec<f64> = s.decrements.iter().map(|d| d.ln()).collect();
        let fit = crate::numeric::fit_line(&xs, &ys).unwrap();
        assert!(fit.slope < 0.0);
    }

    #[test]
    fn phi_examples() {
        for n in 1..=5 {
            let v = exact_phi(&dirac2(), n, 0.7, 64).unwrap();
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
        assert_eq!(exact_phi(&m0(), 5, 0.0, 64).unwrap(), Complex64::new(1.0, 0.0));
        let a = exact_phi(&m0(), 6, 0.3, 128).unwrap();
        let b = exact_phi(&m0(), 6, -0.3, 128).unwrap();
        assert_eq!(a, b.conj());
        assert!(matches!(
            exact_phi(&m0(), 10, 0.3, 64),
            Err(Error::TailTooHeavy { .. })
        ));
    }

    #[test]
    fn non_finite_models_are_refused() {
        let model = EnvironmentModel::mixture(vec![OffspringLaw::Poisson(2.0)], vec![1.0]).unwrap();
        assert!(matches!(exact_distribution(&model, 2, 10), Err(Error::Unsupported(_))));
    }

    #[test]
    fn iid_reference_examples() {
        for &x in &[-2.0, 0.0, 0.5, 3.0] {
            assert_eq!(iid_edgeworth_reference(&[0.0, 1.0, 0.0], 10, x).unwrap(), normal_cdf(x));
        }
        for &x in &[-1.0, 1.0] {
            assert_eq!(iid_edgeworth_reference(&[0.0, 0.5, 0.3], 10, x).unwrap(), normal_cdf(x));
        }
        let k = dirac23(0.75).cumulants(3).unwrap();
        let v = iid_edgeworth_reference(&k, 25, 0.0).unwrap();
        let expected = 0.5 + normal_pdf(0.0) * k[2] / (6.0 * k[1].powf(1.5) * 5.0);
        assert!((v - expected).abs() < 1e-15);
        assert!(iid_edgeworth_reference(&[1.0, 0.0, 0.0], 10, 0.0).is_err());
    }
}
