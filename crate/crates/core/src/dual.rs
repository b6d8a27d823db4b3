//! Forward-mode dual numbers and the scalar abstraction the loss kernels are
//! written against.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Arithmetic needed by the loss kernels. Implemented for `f64` (primal and
/// finite-difference evaluation), [`Dual`] (one tangent direction) and
/// [`DualN`] (several).
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `|x|`, with the branch picked by the primal value. The derivative at
    /// exactly zero is zero.
    fn abs(self) -> Self {
        let v = self.value();
        if v > 0.0 {
            self
        } else if v < 0.0 {
            -self
        } else {
            self * 0.0
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// `value + deriv·ε` with `ε² = 0`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    #[inline]
    pub const fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    /// A seeded input variable (tangent 1).
    #[inline]
    pub const fn variable(value: f64) -> Self {
        Dual { value, deriv: 1.0 }
    }

    #[inline]
    pub const fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    pub fn powi(self, n: i32) -> Self {
        let p = self.value.powi(n - 1);
        Dual::new(p * self.value, n as f64 * p * self.deriv)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        Dual::new(s, self.deriv / (2.0 * s))
    }
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ε", self.value, self.deriv)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.value + o.value, self.deriv + o.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.value - o.value, self.deriv - o.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.value * o.value, self.deriv * o.value + self.value * o.deriv)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.value;
        let q = self.value * inv;
        Dual::new(q, (self.deriv - q * o.deriv) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.value += o.value;
        self.deriv += o.deriv;
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: f64) -> Dual {
        Dual::new(self.value + o, self.deriv)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: f64) -> Dual {
        Dual::new(self.value - o, self.deriv)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: f64) -> Dual {
        Dual::new(self.value * o, self.deriv * o)
    }
}

impl Scalar for Dual {
    #[inline]
    fn constant(v: f64) -> Self {
        Dual::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn sin(self) -> Self {
        Dual::new(self.value.sin(), self.deriv * self.value.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Dual::new(self.value.cos(), -self.deriv * self.value.sin())
    }
}

/// A value with `L` tangent directions carried side by side. Each lane
/// follows exactly the arithmetic of a single [`Dual`].
#[derive(Clone, Copy, PartialEq)]
pub struct DualN<const L: usize> {
    pub value: f64,
    pub deriv: [f64; L],
}

impl<const L: usize> DualN<L> {
    #[inline]
    pub const fn constant(value: f64) -> Self {
        DualN { value, deriv: [0.0; L] }
    }

    /// Seeded with tangent 1 in `lane`.
    #[inline]
    pub fn variable(value: f64, lane: usize) -> Self {
        let mut d = Self::constant(value);
        d.deriv[lane] = 1.0;
        d
    }

    #[inline]
    fn map(self, value: f64, f: impl Fn(f64) -> f64) -> Self {
        let mut deriv = self.deriv;
        for d in &mut deriv {
            *d = f(*d);
        }
        DualN { value, deriv }
    }

    #[inline]
    fn zip(self, o: Self, value: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut deriv = self.deriv;
        for (d, e) in deriv.iter_mut().zip(o.deriv) {
            *d = f(*d, e);
        }
        DualN { value, deriv }
    }
}

impl<const L: usize> fmt::Debug for DualN<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {:?}ε", self.value, self.deriv)
    }
}

impl<const L: usize> Add for DualN<L> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        self.zip(o, self.value + o.value, |a, b| a + b)
    }
}

impl<const L: usize> Sub for DualN<L> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.zip(o, self.value - o.value, |a, b| a - b)
    }
}

impl<const L: usize> Mul for DualN<L> {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: Self) -> Self {
        let (u, v) = (self.value, o.value);
        self.zip(o, u * v, |a, b| a * v + u * b)
    }
}

impl<const L: usize> Div for DualN<L> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.value;
        let q = self.value * inv;
        self.zip(o, q, |a, b| (a - q * b) * inv)
    }
}

impl<const L: usize> Neg for DualN<L> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.map(-self.value, |a| -a)
    }
}

impl<const L: usize> AddAssign for DualN<L> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const L: usize> Add<f64> for DualN<L> {
    type Output = Self;
    #[inline]
    fn add(self, o: f64) -> Self {
        DualN { value: self.value + o, deriv: self.deriv }
    }
}

impl<const L: usize> Sub<f64> for DualN<L> {
    type Output = Self;
    #[inline]
    fn sub(self, o: f64) -> Self {
        DualN { value: self.value - o, deriv: self.deriv }
    }
}

impl<const L: usize> Mul<f64> for DualN<L> {
    type Output = Self;
    #[inline]
    fn mul(self, o: f64) -> Self {
        self.map(self.value * o, |a| a * o)
    }
}

impl<const L: usize> Scalar for DualN<L> {
    #[inline]
    fn constant(v: f64) -> Self {
        DualN::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn sin(self) -> Self {
        let c = self.value.cos();
        self.map(self.value.sin(), |a| a * c)
    }
    #[inline]
    fn cos(self) -> Self {
        let s = self.value.sin();
        self.map(self.value.cos(), |a| -a * s)
    }
}

/// Derivative of a scalar function at `x`.
pub fn derivative(f: impl Fn(Dual) -> Dual, x: f64) -> f64 {
    f(Dual::variable(x)).deriv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_one() {
        assert_eq!(derivative(|x| x * x, 1.0), 2.0);
    }

    #[test]
    fn product_quotient_chain() {
        let x = 0.7;
        // d/dx [x sin x / (1 + x^2)]
        let d = derivative(|x| x * x.sin() / (x * x + 1.0), x);
        let num = x * x.sin();
        let den = 1.0 + x * x;
        let dnum = x.sin() + x * x.cos();
        let expected = (dnum * den - num * 2.0 * x) / (den * den);
        assert!((d - expected).abs() < 1e-15);
        assert!((derivative(|x| x.cos(), x) + x.sin()).abs() < 1e-15);
        assert!((derivative(|x| x.sqrt(), 4.0) - 0.25).abs() < 1e-15);
        assert_eq!(derivative(|x| x.powi(3), 2.0), 12.0);
    }

    #[test]
    fn abs_branches() {
        assert_eq!(derivative(|x| Scalar::abs(x), 3.0), 1.0);
        assert_eq!(derivative(|x| Scalar::abs(x), -3.0), -1.0);
        assert_eq!(derivative(|x| Scalar::abs(x), 0.0), 0.0);
    }

    #[test]
    fn constant_has_no_tangent() {
        assert_eq!(derivative(|_| Dual::constant(5.0), 1.0), 0.0);
    }

    #[test]
    fn lanes_match_single_duals() {
        let f = |x: DualN<3>, y: DualN<3>| (x * y + x.sin()) / (y.cos() + 2.0) - x * 0.5;
        let g = |x: Dual, y: Dual| (x * y + x.sin()) / (y.cos() + 2.0) - x * 0.5;
        let (x, y) = (0.7, -1.3);
        let r = f(DualN::variable(x, 0), DualN::variable(y, 2));
        assert_eq!(r.deriv[0], g(Dual::variable(x), Dual::constant(y)).deriv);
        assert_eq!(r.deriv[1], 0.0);
        assert_eq!(r.deriv[2], g(Dual::constant(x), Dual::variable(y)).deriv);
    }
}
