//! Bivariate polynomials in `(t, u)` truncated at fixed degrees.
//!
//! `u` stands for `n^{-1/2}`. Coefficients are any [`num_traits::Num`]
//! type, so the same code runs on `Complex<f64>` in production and on exact
//! complex rationals in tests.

use num_traits::Num;

#[derive(Debug, Clone, PartialEq)]
pub struct FormalSeries<T> {
    max_t: usize,
    max_u: usize,
    coeffs: Vec<T>,
}

fn from_count<T: Num + Clone>(n: usize) -> T {
    let mut acc = T::zero();
    for _ in 0..n {
        acc = acc + T::one();
    }
    acc
}

impl<T: Num + Clone> FormalSeries<T> {
    pub fn zero(max_t: usize, max_u: usize) -> Self {
        Self {
            max_t,
            max_u,
            coeffs: vec![T::zero(); (max_t + 1) * (max_u + 1)],
        }
    }

    pub fn one(max_t: usize, max_u: usize) -> Self {
        let mut s = Self::zero(max_t, max_u);
        s.set(0, 0, T::one());
        s
    }

    pub fn max_t(&self) -> usize {
        self.max_t
    }

    pub fn max_u(&self) -> usize {
        self.max_u
    }

    fn index(&self, t: usize, u: usize) -> usize {
        u * (self.max_t + 1) + t
    }

    /// Coefficient of `t^t u^u`; zero outside the declared degrees.
    pub fn coeff(&self, t: usize, u: usize) -> T {
        if t > self.max_t || u > self.max_u {
            return T::zero();
        }
        self.coeffs[self.index(t, u)].clone()
    }

    /// Panics if `(t, u)` is outside the declared degrees.
    pub fn set(&mut self, t: usize, u: usize, value: T) {
        assert!(t <= self.max_t && u <= self.max_u, "term t^{t} u^{u} exceeds declared degrees");
        let i = self.index(t, u);
        self.coeffs[i] = value;
    }

    pub fn add_term(&mut self, t: usize, u: usize, value: T) {
        let cur = self.coeff(t, u);
        self.set(t, u, cur + value);
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.max_t, self.max_u), (other.max_t, other.max_u));
        Self {
            max_t: self.max_t,
            max_u: self.max_u,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        Self {
            max_t: self.max_t,
            max_u: self.max_u,
            coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// Product truncated at `u^max_u`. Panics if a surviving term would need
    /// a `t` degree above `max_t`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!((self.max_t, self.max_u), (other.max_t, other.max_u));
        let mut out = Self::zero(self.max_t, self.max_u);
        for u1 in 0..=self.max_u {
            for t1 in 0..=self.max_t {
                let a = &self.coeffs[self.index(t1, u1)];
                if a.is_zero() {
                    continue;
                }
                for u2 in 0..=self.max_u - u1 {
                    for t2 in 0..=self.max_t {
                        let b = &other.coeffs[other.index(t2, u2)];
                        if b.is_zero() {
                            continue;
                        }
                        out.add_term(t1 + t2, u1 + u2, a.clone() * b.clone());
                    }
                }
            }
        }
        out
    }

    /// `exp(self)` for a series without `u^0` terms, where the exponential
    /// terminates at order `max_u`.
    pub fn exp_nilpotent(&self) -> Self {
        assert!(
            (0..=self.max_t).all(|t| self.coeff(t, 0).is_zero()),
            "exp_nilpotent needs a series divisible by u"
        );
        let mut result = Self::one(self.max_t, self.max_u);
        let mut power = Self::one(self.max_t, self.max_u);
        for l in 1..=self.max_u {
            power = power.mul(self).scale(&(T::one() / from_count::<T>(l)));
            result = result.add(&power);
        }
        result
    }

    /// Coefficients of `u^u` as a polynomial in `t` (ascending).
    pub fn u_slice(&self, u: usize) -> Vec<T> {
        let mut v: Vec<T> = (0..=self.max_t).map(|t| self.coeff(t, u)).collect();
        while v.len() > 1 && v.last().is_some_and(|c| c.is_zero()) {
            v.pop();
        }
        v
    }
}

pub(crate) fn factorial<T: Num + Clone>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * from_count::<T>(k))
}
