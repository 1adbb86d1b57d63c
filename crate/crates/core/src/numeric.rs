//! Numerical building blocks shared by every module: a fixed-tree pairwise
//! summation, normal distribution functions, adaptive Gauss-Kronrod
//! quadrature, log-linear fits and the DKW band.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use statrs::function::erf;

use crate::error::{Error, Result};

const PAIRWISE_BLOCK: usize = 8;

/// Sum with a fixed pairwise tree.
///
/// The tree depends only on the slice length, so the result is identical
/// no matter how the inputs were produced (serially or by a parallel map).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f` applied to each element, same tree as [`pairwise_sum`].
pub fn pairwise_sum_by<T, F: Fn(&T) -> f64 + Copy>(xs: &[T], f: F) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for x in xs {
            acc += f(x);
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Two-pass mean/variance with pairwise sums.
    pub fn from_values(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                count: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let std_error = if n > 1 {
            let ss = pairwise_sum_by(xs, |&x| (x - mean) * (x - mean));
            (ss / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            count: n,
        }
    }

    /// True when `target` lies within `k` standard errors (plus an absolute slack).
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + 1e-12
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Dvoretzky-Kiefer-Wolfowitz half-width: `P(sup|F_N - F| > eps) <= alpha`.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Values that the adaptive integrator can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).magnitude())
}

/// Adaptive Gauss-Kronrod (7/15) integration on a finite interval with a
/// global absolute error target.
pub fn integrate<V: QuadValue, F: Fn(f64) -> V>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<V> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(V::zero());
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if total_err <= abs_tol {
            break;
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                achieved: total_err,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut acc = V::zero();
    for iv in &intervals {
        acc = acc + iv.2;
    }
    Ok(acc)
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = pairwise_sum(xs) / n as f64;
    let my = pairwise_sum(ys) / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (1.0 - sse / syy).max(0.0)
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Continued-fraction test: is `x` within `tol` of a rational with
/// denominator at most `max_den`?
pub fn is_nearly_rational(x: f64, max_den: u64, tol: f64) -> bool {
    let (mut h_prev, mut h) = (1.0_f64, x.floor());
    let (mut k_prev, mut k) = (0.0_f64, 1.0_f64);
    let mut frac = x - x.floor();
    let scale = 1.0 + x.abs();
    loop {
        if (x - h / k).abs() <= tol * scale {
            return true;
        }
        if frac.abs() < 1e-300 {
            return false;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let h_next = a * h + h_prev;
        let k_next = a * k + k_prev;
        if k_next > max_den as f64 {
            return false;
        }
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
}

/// Binomial coefficient as f64 (small arguments).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Cumulants `kappa_1..kappa_r` from raw moments `m_1..m_r` of a variable
/// centered at `shift` (so `m_1` is small); `kappa_1` gets the shift back.
pub fn cumulants_from_moments(shift: f64, moments: &[f64]) -> Vec<f64> {
    let r = moments.len();
    let m = |j: usize| if j == 0 { 1.0 } else { moments[j - 1] };
    let mut kappa = vec![0.0; r + 1];
    for n in 1..=r {
        let mut acc = m(n);
        for k in 1..n {
            acc -= binomial(n - 1, k - 1) * kappa[k] * m(n - k);
        }
        kappa[n] = acc;
    }
    kappa.remove(0);
    if let Some(first) = kappa.first_mut() {
        *first += shift;
    }
    kappa
}
