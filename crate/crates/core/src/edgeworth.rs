//! Edgeworth expansion of the survival-conditioned law of `log Z_n`.
//!
//! The characteristic function of `(log Z_n - n mu) / (sigma sqrt n)` is
//! `phi_n(t / (sigma sqrt n)) exp(n Lambda(t / (sigma sqrt n)) - i t mu sqrt n / sigma)`.
//! Expanding both factors in `u = n^{-1/2}` gives
//! `e^{-t^2/2} (1 + sum_k p_k(t) u^{k-2})`, see [`expand_pk`].
//!
//! Sign convention. With the characteristic-function convention
//! `f^(t) = int e^{itx} f(x) dx` one has `(psi H_j)^ = (it)^j e^{-t^2/2}`, so
//! `a t^j e^{-t^2/2}` is the transform of `(-i)^j a H_j psi`. Integrating
//! with `(H_{j-1} psi)' = -H_j psi` gives
//! `G_r = Phi - psi sum_k n^{1-k/2} Q_k` with
//! `Q_k = + sum_j (-i)^j a_{j,k} H_{j-1}`.
//! For `k = 3` this is
//! `Q_3 = kappa_3 / (6 sigma^3) (x^2 - 1) + c / sigma` when `phi'(0) = i c`,
//! which is the classical iid Edgeworth term plus a location shift. The
//! tests pin this against [`crate::oracle::iid_edgeworth_reference`].

use std::io::Write;

use num_complex::{Complex, Complex64};
use num_traits::{Num, Zero};

use crate::envmodel::EnvironmentModel;
use crate::error::{Error, Result};
use crate::numeric::{dkw_bound, normal_cdf, normal_pdf};
use crate::series::{factorial, FormalSeries};
use crate::simulate::Ensemble;

pub const MAX_HERMITE: usize = 32;
pub const MAX_ORDER: usize = 8;
/// Largest tolerated imaginary part of a `Q_k` coefficient.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Probabilists' Hermite polynomials `H_0..H_jmax` with integer coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    coeffs: Vec<Vec<i128>>,
}

impl HermiteBasis {
    pub fn jmax(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Ascending coefficients of `H_j`.
    pub fn coefficients(&self, j: usize) -> &[i128] {
        &self.coeffs[j]
    }

    pub fn eval(&self, j: usize, x: f64) -> f64 {
        self.coeffs[j].iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }
}

/// `H_{j+1}(x) = x H_j(x) - j H_{j-1}(x)`.
pub fn hermite(jmax: usize) -> Result<HermiteBasis> {
    if jmax > MAX_HERMITE {
        return Err(Error::Unsupported(format!("Hermite degree {jmax} > {MAX_HERMITE}")));
    }
    let mut coeffs: Vec<Vec<i128>> = vec![vec![1]];
    if jmax >= 1 {
        coeffs.push(vec![0, 1]);
    }
    for j in 1..jmax {
        let mut next = vec![0i128; j + 2];
        for (d, &c) in coeffs[j].iter().enumerate() {
            next[d + 1] += c;
        }
        for (d, &c) in coeffs[j - 1].iter().enumerate() {
            next[d] -= j as i128 * c;
        }
        coeffs.push(next);
    }
    Ok(HermiteBasis { coeffs })
}

/// The series `exp(W_r) (1 + sum_k phi_k t^k u^k / k!)` with
/// `W_r = sum_{k=3}^r lambda_k t^k u^{k-2} / k!`.
///
/// Inputs are already divided by `sigma^k`: `lambda_std[k] = Lambda^{(k)}(0) / sigma^k`
/// (entries below 3 ignored) and `phi_std[k] = phi^{(k)}(0) / sigma^k`
/// (entry 0 ignored, missing entries are zero).
pub fn expand_pk_standardized<T: Num + Clone>(lambda_std: &[T], phi_std: &[T], r: usize) -> FormalSeries<T> {
    let max_u = r - 2;
    let max_t = r * (r + 1);
    let mut w = FormalSeries::zero(max_t, max_u);
    for k in 3..=r {
        if let Some(l) = lambda_std.get(k) {
            w.add_term(k, k - 2, l.clone() / factorial::<T>(k));
        }
    }
    let mut phi = FormalSeries::one(max_t, max_u);
    for k in 1..=max_u.min(r - 1) {
        if let Some(p) = phi_std.get(k) {
            phi.add_term(k, k, p.clone() / factorial::<T>(k));
        }
    }
    w.exp_nilpotent().mul(&phi)
}

/// `p_3..p_r` as ascending coefficient vectors in `t`.
pub fn extract_pk<T: Num + Clone>(series: &FormalSeries<T>, r: usize) -> Vec<Vec<T>> {
    (3..=r).map(|k| series.u_slice(k - 2)).collect()
}

/// Output of [`expand_pk`].
#[derive(Debug, Clone, PartialEq)]
pub struct PkExpansion {
    pub r: usize,
    pub sigma: f64,
    pub series: FormalSeries<Complex64>,
    /// `pk[k - 3]` holds `p_k`.
    pub pk: Vec<Vec<Complex64>>,
}

fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Expand from cumulants `kappa_1..kappa_r` of `log A` and the derivatives
/// `phi^{(1)}(0), phi^{(2)}(0), ...`, using `Lambda^{(k)}(0) = i^k kappa_k`.
pub fn expand_pk(cumulants: &[f64], phi_derivs: &[Complex64], r: usize) -> Result<PkExpansion> {
    if !(3..=MAX_ORDER).contains(&r) {
        return Err(Error::Unsupported(format!("order r = {r} outside [3, {MAX_ORDER}]")));
    }
    if cumulants.len() < r {
        return Err(Error::InvalidArgument(format!("need {r} cumulants, got {}", cumulants.len())));
    }
    let sigma = cumulants[1].sqrt();
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("sigma = 0".into()));
    }
    let lambda_std: Vec<Complex64> = (0..=r)
        .map(|k| {
            if k >= 3 {
                i_pow(k) * cumulants[k - 1] / sigma.powi(k as i32)
            } else {
                Complex64::zero()
            }
        })
        .collect();
    let mut phi_std = vec![Complex64::zero()];
    phi_std.extend(
        phi_derivs
            .iter()
            .enumerate()
            .map(|(i, d)| d / sigma.powi(i as i32 + 1)),
    );
    let series = expand_pk_standardized(&lambda_std, &phi_std, r);
    let pk = extract_pk(&series, r);
    Ok(PkExpansion { r, sigma, series, pk })
}

/// `Q_k = sum_j (-i)^j a_{j,k} H_{j-1}` in the monomial basis, complex.
pub fn pk_to_qk_complex<S: Num + Clone + std::ops::Neg<Output = S>>(
    pk: &[Vec<Complex<S>>],
    basis: &HermiteBasis,
) -> Vec<Vec<Complex<S>>> {
    let minus_i_pow = |j: usize| -> Complex<S> {
        let (zero, one) = (S::zero(), S::one());
        match j % 4 {
            0 => Complex::new(one, zero),
            1 => Complex::new(zero, -one),
            2 => Complex::new(-one, zero),
            _ => Complex::new(zero, one),
        }
    };
    let to_s = |c: i128| -> S {
        let mut acc = S::zero();
        let step = if c < 0 { -S::one() } else { S::one() };
        for _ in 0..c.unsigned_abs() {
            acc = acc + step.clone();
        }
        acc
    };
    pk.iter()
        .map(|p| {
            let deg = p.len().saturating_sub(2);
            let mut q = vec![Complex::<S>::zero(); deg + 1];
            for (j, a) in p.iter().enumerate().skip(1) {
                if a.is_zero() {
                    continue;
                }
                let factor = minus_i_pow(j) * a.clone();
                for (d, &h) in basis.coefficients(j - 1).iter().enumerate() {
                    if h != 0 {
                        q[d] = q[d].clone() + factor.clone() * Complex::new(to_s(h), S::zero());
                    }
                }
            }
            q
        })
        .collect()
}

/// Real polynomials `Q_3..Q_r`; fails if an imaginary part survives.
pub fn pk_to_qk(pk: &[Vec<Complex64>], basis: &HermiteBasis) -> Result<Vec<Vec<f64>>> {
    let complex = pk_to_qk_complex(pk, basis);
    complex
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            let residue = q.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
            if residue > IMAGINARY_TOLERANCE {
                return Err(Error::ImaginaryResidue { k: i + 3, residue });
            }
            let mut re: Vec<f64> = q.iter().map(|c| c.re).collect();
            while re.len() > 1 && re.last() == Some(&0.0) {
                re.pop();
            }
            Ok(re)
        })
        .collect()
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn g_from_qk(qk: &[Vec<f64>], n: usize, x: f64) -> f64 {
    let nf = n as f64;
    let correction: f64 = qk
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let k = (i + 3) as f64;
            nf.powf(1.0 - k / 2.0) * horner(q, x)
        })
        .sum();
    normal_cdf(x) - normal_pdf(x) * correction
}

/// `G_r` with its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeworthSeries {
    pub r: usize,
    pub sigma: f64,
    /// `kappa_3..kappa_r`.
    pub cumulants: Vec<f64>,
    pub phi_derivs: Vec<Complex64>,
    pub pk: Vec<Vec<Complex64>>,
    /// `qk[k - 3]` holds the ascending coefficients of `Q_k`.
    pub qk: Vec<Vec<f64>>,
    /// `Q_k` sets for `phi^{(j)}` shifted by plus and minus one standard error.
    sensitivity: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

impl EdgeworthSeries {
    /// Build `G_r` from cumulants `kappa_1..kappa_r` and `phi^{(1)}(0)..`.
    pub fn new(cumulants: &[f64], phi_derivs: &[Complex64], r: usize) -> Result<Self> {
        let expansion = expand_pk(cumulants, phi_derivs, r)?;
        let basis = hermite(3 * (r - 2))?;
        let qk = pk_to_qk(&expansion.pk, &basis)?;
        Ok(Self {
            r,
            sigma: expansion.sigma,
            cumulants: cumulants[2..r].to_vec(),
            phi_derivs: phi_derivs.to_vec(),
            pk: expansion.pk,
            qk,
            sensitivity: Vec::new(),
        })
    }

    /// Build from a model's exact cumulants.
    pub fn for_model(model: &EnvironmentModel, phi_derivs: &[Complex64], r: usize) -> Result<Self> {
        let cumulants = model.cumulants(r)?;
        Self::new(&cumulants, phi_derivs, r)
    }

    /// Attach standard errors of the magnitudes of `phi^{(j)}(0)`; each
    /// derivative is perturbed along its own phase `i^j`.
    pub fn with_phi_uncertainty(mut self, std_errors: &[f64]) -> Result<Self> {
        let mut kappa = vec![0.0, self.sigma * self.sigma];
        kappa.extend_from_slice(&self.cumulants);
        let basis = hermite(3 * (self.r - 2))?;
        self.sensitivity = std_errors
            .iter()
            .enumerate()
            .map(|(j, &se)| {
                let shifted = |sign: f64| -> Result<Vec<Vec<f64>>> {
                    let mut d = self.phi_derivs.clone();
                    d[j] += i_pow(j + 1) * (sign * se);
                    pk_to_qk(&expand_pk(&kappa, &d, self.r)?.pk, &basis)
                };
                Ok((shifted(1.0)?, shifted(-1.0)?))
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    /// `G_r(x) = Phi(x) - psi(x) sum_k n^{1-k/2} Q_k(x)`.
    pub fn evaluate(&self, n: usize, x: f64) -> f64 {
        g_from_qk(&self.qk, n, x)
    }

    /// First-order half-width of `G_r(x)` induced by the `phi` uncertainty.
    pub fn band(&self, n: usize, x: f64) -> f64 {
        self.sensitivity
            .iter()
            .map(|(plus, minus)| 0.5 * (g_from_qk(plus, n, x) - g_from_qk(minus, n, x)).abs())
            .sum()
    }
}

/// `G_r(x)` for a series at sample size `n`.
pub fn evaluate_gr(series: &EdgeworthSeries, n: usize, x: f64) -> f64 {
    series.evaluate(n, x)
}

/// Sup-distance between the empirical CDF of `sorted` and `cdf`, checking
/// both sides of every jump (ties collapse into one jump).
pub fn sup_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let g = cdf(x);
        worst = worst.max((i as f64 / n - g).abs()).max((j as f64 / n - g).abs());
        i = j;
    }
    worst
}

/// `(log Z_n - n mu) / (sigma sqrt n)` over the paths alive at `n`, sorted.
pub fn standardized_log_z(ensemble: &Ensemble, model: &EnvironmentModel, n: usize) -> Result<Vec<f64>> {
    let sigma = model.sigma();
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("sigma = 0".into()));
    }
    let scale = sigma * (n as f64).sqrt();
    let shift = n as f64 * model.mu();
    let mut xs: Vec<f64> = ensemble
        .log_z_at(n)?
        .into_iter()
        .filter(|z| z.is_finite())
        .map(|z| (z - shift) / scale)
        .collect();
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// Distances of the empirical CDF to `Phi` and to `G_r`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CdfComparison {
    pub n: usize,
    pub r: usize,
    pub sample_size: usize,
    pub sup_phi: f64,
    pub sup_gr: f64,
    /// 99% DKW half-width.
    pub dkw: f64,
}

impl CdfComparison {
    /// Compare a sorted standardized sample.
    pub fn from_sorted(sorted: &[f64], series: &EdgeworthSeries, n: usize) -> Result<Self> {
        if sorted.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self {
            n,
            r: series.r,
            sample_size: sorted.len(),
            sup_phi: sup_distance(sorted, normal_cdf),
            sup_gr: sup_distance(sorted, |x| series.evaluate(n, x)),
            dkw: dkw_bound(sorted.len(), 0.01),
        })
    }

    /// Summary row `n,r,sup_phi,sup_gr,dkw`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,r,sup_phi,sup_gr,dkw")?;
        writeln!(out, "{},{},{},{},{}", self.n, self.r, self.sup_phi, self.sup_gr, self.dkw)?;
        Ok(())
    }
}

pub fn cdf_compare(
    ensemble: &Ensemble,
    model: &EnvironmentModel,
    series: &EdgeworthSeries,
    n: usize,
) -> Result<CdfComparison> {
    let xs = standardized_log_z(ensemble, model, n)?;
    CdfComparison::from_sorted(&xs, series, n)
}

/// Rows `x,ecdf,G_r,Phi` on a grid of `x` values.
pub fn write_cdf_table<W: Write>(
    mut out: W,
    sorted: &[f64],
    series: &EdgeworthSeries,
    n: usize,
    grid: &[f64],
) -> Result<()> {
    writeln!(out, "x,ecdf,G_r,Phi")?;
    for &x in grid {
        let below = sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64;
        writeln!(out, "{x},{below},{},{}", series.evaluate(n, x), normal_cdf(x))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::reference::*;
    use crate::oracle::iid_edgeworth_reference;
    use num_rational::Ratio;

    type Q = Ratio<i64>;
    type CQ = Complex<Q>;

    fn cq(re: (i64, i64), im: (i64, i64)) -> CQ {
        Complex::new(Q::new(re.0, re.1), Q::new(im.0, im.1))
    }

    #[test]
    fn hermite_low_orders() {
        let h = hermite(4).unwrap();
        assert_eq!(h.coefficients(0), &[1]);
        assert_eq!(h.coefficients(1), &[0, 1]);
        assert_eq!(h.coefficients(2), &[-1, 0, 1]);
        assert_eq!(h.coefficients(3), &[0, -3, 0, 1]);
        assert_eq!(h.coefficients(4), &[3, 0, -6, 0, 1]);
        assert!(hermite(33).is_err());
        // H_32 constant term is 31!!
        let h = hermite(32).unwrap();
        let double_factorial: i128 = (1..=31).step_by(2).product();
        assert_eq!(h.coefficients(32)[0], double_factorial);
    }

    #[test]
    fn hermite_matches_derivative_definition() {
        // H_j psi = (-1)^j psi^{(j)}; check via finite recurrence on values
        let h = hermite(10).unwrap();
        for &x in &[-1.3, 0.0, 0.4, 2.2] {
            for j in 1..10 {
                let lhs = h.eval(j + 1, x);
                let rhs = x * h.eval(j, x) - j as f64 * h.eval(j - 1, x);
                assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            }
        }
    }

    #[test]
    fn p3_matches_closed_form_exactly() {
        // Standardized inputs (sigma = 1): Lambda''' = -i k3, phi' = i c.
        let l3 = cq((0, 1), (-3, 7));
        let phi1 = cq((0, 1), (2, 5));
        let lambda_std = vec![CQ::zero(), CQ::zero(), CQ::zero(), l3];
        let phi_std = vec![CQ::zero(), phi1];
        let series = expand_pk_standardized(&lambda_std, &phi_std, 3);
        let p3 = &extract_pk(&series, 3)[0];
        assert_eq!(p3.len(), 4);
        assert_eq!(p3[0], CQ::zero());
        assert_eq!(p3[1], phi1);
        assert_eq!(p3[2], CQ::zero());
        assert_eq!(p3[3], l3 / CQ::from(Q::from_integer(6)));
    }

    #[test]
    fn p4_iid_matches_hand_expansion() {
        // exp(a t^3 u + b t^4 u^2) = 1 + a t^3 u + (b t^4 + a^2 t^6 / 2) u^2 + ...
        let l3 = cq((0, 1), (-2, 3));
        let l4 = cq((5, 4), (0, 1));
        let lambda_std = vec![CQ::zero(), CQ::zero(), CQ::zero(), l3, l4];
        let series = expand_pk_standardized::<CQ>(&lambda_std, &[], 4);
        let pk = extract_pk(&series, 4);
        let a = l3 / CQ::from(Q::from_integer(6));
        let b = l4 / CQ::from(Q::from_integer(24));
        let p4 = &pk[1];
        assert_eq!(p4.len(), 7);
        for (j, c) in p4.iter().enumerate() {
            let expected = match j {
                4 => b,
                6 => a * a / CQ::from(Q::from_integer(2)),
                _ => CQ::zero(),
            };
            assert_eq!(*c, expected, "t^{j}");
        }
        // Q_4 = (kappa_4/24) H_3 + (kappa_3^2/72) H_5 with kappa_3 = 2/3, kappa_4 = 5/4
        let basis = hermite(6).unwrap();
        let q = pk_to_qk_complex(&pk, &basis);
        let (k3, k4) = (Q::new(2, 3), Q::new(5, 4));
        let h3 = basis.coefficients(3);
        let h5 = basis.coefficients(5);
        for d in 0..=5 {
            let c3 = h3.get(d).map_or(0, |v| *v as i64);
            let c5 = h5.get(d).map_or(0, |v| *v as i64);
            let expected = k4 / Q::from_integer(24) * Q::from_integer(c3) + k3 * k3 / Q::from_integer(72) * Q::from_integer(c5);
            assert_eq!(q[1][d], Complex::new(expected, Q::from_integer(0)), "x^{d}");
        }
    }

    #[test]
    fn gaussian_inputs_give_zero_corrections() {
        let e = expand_pk(&[0.3, 1.0, 0.0, 0.0, 0.0], &[Complex64::zero(); 4], 5).unwrap();
        assert!(e.pk.iter().all(|p| p.iter().all(|c| c.is_zero())));
        let s = EdgeworthSeries::new(&[0.3, 1.0, 0.0], &[], 3).unwrap();
        assert!(s.qk.iter().all(|q| q.iter().all(|c| *c == 0.0)));
        assert_eq!(s.evaluate(10, 0.0), 0.5);
    }

    #[test]
    fn q3_iid_and_location_cases() {
        let kappa = dirac23(0.75).cumulants(3).unwrap();
        let sigma = kappa[1].sqrt();
        let s = EdgeworthSeries::new(&kappa, &[Complex64::zero()], 3).unwrap();
        let c = kappa[2] / (6.0 * sigma.powi(3));
        assert!((s.qk[0][0] + c).abs() < 1e-14);
        assert!(s.qk[0][1].abs() < 1e-14);
        assert!((s.qk[0][2] - c).abs() < 1e-14);

        let shift = 0.37;
        let s = EdgeworthSeries::new(&[0.1, 0.04, 0.0], &[Complex64::new(0.0, shift)], 3).unwrap();
        assert!((s.qk[0][0] - shift / 0.2).abs() < 1e-14);
        assert_eq!(s.qk[0].len(), 1);
    }

    #[test]
    fn g3_equals_iid_reference() {
        let kappa = dirac23(0.75).cumulants(3).unwrap();
        let s = EdgeworthSeries::new(&kappa, &[Complex64::zero()], 3).unwrap();
        for i in 0..=1000 {
            let x = -5.0 + 0.01 * i as f64;
            for n in [1, 25, 100] {
                let a = s.evaluate(n, x);
                let b = iid_edgeworth_reference(&kappa, n, x).unwrap();
                assert!((a - b).abs() < 1e-12, "x={x} n={n}");
            }
        }
        for x in [-1.0, 1.0] {
            assert_eq!(s.evaluate(25, x), normal_cdf(x));
        }
    }

    #[test]
    fn inconsistent_phi_phase_is_rejected() {
        // phi'(0) must be purely imaginary
        let err = EdgeworthSeries::new(&[0.1, 0.04, 0.0], &[Complex64::new(0.3, 0.0)], 3).unwrap_err();
        assert!(matches!(err, Error::ImaginaryResidue { k: 3, .. }));
        assert!(matches!(
            EdgeworthSeries::new(&[0.1, 0.0, 0.0], &[], 3),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn higher_orders_stay_real_and_bounded_in_degree() {
        let kappa = [0.5, 0.09, 0.004, -0.002, 0.0007, 0.0001, -0.00005, 0.00001];
        for r in 3..=8 {
            let phi: Vec<Complex64> = (1..r).map(|j| i_pow(j) * (0.1 / j as f64)).collect();
            let s = EdgeworthSeries::new(&kappa, &phi, r).unwrap();
            for (i, q) in s.qk.iter().enumerate() {
                let k = i + 3;
                let s_k = s.pk[i].len() - 1;
                assert!(s_k <= r * (r - 1));
                assert!(q.len() <= s_k);
                assert!(s_k <= 3 * (k - 2));
            }
            assert!(s.evaluate(30, -8.0).abs() < 1e-10);
            assert!((s.evaluate(30, 8.0) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sup_distance_handles_ties() {
        let xs = [0.0, 0.0, 1.0, 1.0];
        // empirical jumps 0 -> 0.5 at 0 and 0.5 -> 1 at 1
        let d = sup_distance(&xs, |x| if x < 0.5 { 0.25 } else { 0.75 });
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gaussian_sample_is_within_dkw() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::stream_rng(3, 0, 0);
        let mut xs: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let s = EdgeworthSeries::new(&[0.0, 1.0, 0.0], &[], 3).unwrap();
        let c = CdfComparison::from_sorted(&xs, &s, 10).unwrap();
        assert!(c.sup_phi < c.dkw);
    }

    #[test]
    fn uncertainty_band_scales_with_error() {
        let s = EdgeworthSeries::new(&[0.1, 0.04, 0.001], &[Complex64::new(0.0, -0.2)], 3).unwrap();
        let narrow = s.clone().with_phi_uncertainty(&[0.01]).unwrap();
        let wide = s.with_phi_uncertainty(&[0.02]).unwrap();
        // dG/dc = -psi(x) / (sigma sqrt n)
        let expected = normal_pdf(0.0) * 0.01 / (0.2 * 5.0);
        assert!((narrow.band(25, 0.0) - expected).abs() < 1e-12);
        assert!((wide.band(25, 0.0) - 2.0 * expected).abs() < 1e-12);
    }
}
