//! Forward-mode automatic differentiation with first-order dual numbers.
//!
//! Field evaluators are written once against [`Real`] and instantiated with
//! `f64` for values and [`Dual`] for exact directional derivatives.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic shared by `f64` and [`Dual`].
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn cst(x: f64) -> Self;
    /// Primal value.
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    #[inline]
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    #[inline]
    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }

    #[inline]
    pub const fn variable(re: f64) -> Self {
        Self { re, eps: 1.0 }
    }
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ε", self.re, self.eps)
    }
}

impl Add for Dual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl Real for Dual {
    #[inline]
    fn cst(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (2.0 * s))
    }
    #[inline]
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.eps * self.re.sin())
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x² + y²)
        let r2 = x.re * x.re + self.re * self.re;
        Dual::new(
            self.re.atan2(x.re),
            (x.re * self.eps - self.re * x.eps) / r2,
        )
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::constant(1.0),
            _ => Dual::new(
                self.re.powi(n),
                f64::from(n) * self.re.powi(n - 1) * self.eps,
            ),
        }
    }
}

/// Generic 4-vector helpers used by field evaluators.
pub mod v4 {
    use super::Real;

    pub type V4<T> = [T; 4];

    #[inline]
    pub fn dot<T: Real>(a: &V4<T>, b: &V4<T>) -> T {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    }

    #[inline]
    pub fn add<T: Real>(a: &V4<T>, b: &V4<T>) -> V4<T> {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
    }

    #[inline]
    pub fn sub<T: Real>(a: &V4<T>, b: &V4<T>) -> V4<T> {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
    }

    #[inline]
    pub fn scale<T: Real>(k: T, a: &V4<T>) -> V4<T> {
        [k * a[0], k * a[1], k * a[2], k * a[3]]
    }

    #[inline]
    pub fn norm<T: Real>(a: &V4<T>) -> T {
        dot(a, a).sqrt()
    }

    #[inline]
    pub fn normalize<T: Real>(a: &V4<T>) -> V4<T> {
        let n = norm(a);
        [a[0] / n, a[1] / n, a[2] / n, a[3] / n]
    }

    #[inline]
    pub fn lift<T: Real>(a: &[f64; 4]) -> V4<T> {
        [T::cst(a[0]), T::cst(a[1]), T::cst(a[2]), T::cst(a[3])]
    }

    /// `a·x + b·y`
    #[inline]
    pub fn lincomb<T: Real>(a: T, x: &V4<T>, b: T, y: &V4<T>) -> V4<T> {
        [
            a * x[0] + b * y[0],
            a * x[1] + b * y[1],
            a * x[2] + b * y[2],
            a * x[3] + b * y[3],
        ]
    }

    /// Hamilton product with components ordered (w, i, j, k).
    #[inline]
    pub fn qmul<T: Real>(p: &V4<T>, q: &V4<T>) -> V4<T> {
        [
            p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
            p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
            p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
            p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
        ]
    }

    #[inline]
    pub fn conj<T: Real>(q: &V4<T>) -> V4<T> {
        [q[0], -q[1], -q[2], -q[3]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_derivatives_match_central_differences() {
        let x = 0.7;
        let d = Dual::variable(x);
        let cases: Vec<(Dual, f64)> = vec![
            (d.sin(), fd(f64::sin, x)),
            (d.cos(), fd(f64::cos, x)),
            (d.sqrt(), fd(f64::sqrt, x)),
            (d.powi(3), fd(|t| t.powi(3), x)),
            (d * d / (d + Dual::constant(2.0)), fd(|t| t * t / (t + 2.0), x)),
            (d.atan2(Dual::constant(0.3)), fd(|t| t.atan2(0.3), x)),
            (Dual::constant(0.3).atan2(d), fd(|t| 0.3f64.atan2(t), x)),
        ];
        for (i, (ad, want)) in cases.iter().enumerate() {
            assert!((ad.eps - want).abs() < 1e-8, "case {i}: {} vs {want}", ad.eps);
        }
    }

    #[test]
    fn powi_zero_is_constant() {
        let p = Dual::variable(0.0).powi(0);
        assert_eq!(p, Dual::constant(1.0));
    }
}
