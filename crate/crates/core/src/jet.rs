//! Second-order bivariate truncated Taylor arithmetic about `(λ, z) = (1, 1)`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::scalar::Scalar;

/// `c00 + c10 dλ + c01 dz + c20 dλ² + c11 dλ dz + c02 dz²`, with
/// `dλ = λ - 1`, `dz = z - 1` and terms of total degree above two dropped.
///
/// The coefficients are Taylor coefficients, so `∂λ² f = 2 c20`,
/// `∂λ∂z f = c11` and `∂z² f = 2 c02`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct Jet2<T> {
    pub c00: T,
    pub c10: T,
    pub c01: T,
    pub c20: T,
    pub c11: T,
    pub c02: T,
}

impl<T: Scalar> Jet2<T> {
    pub fn new(c00: T, c10: T, c01: T, c20: T, c11: T, c02: T) -> Self {
        Jet2 {
            c00,
            c10,
            c01,
            c20,
            c11,
            c02,
        }
    }

    pub fn constant(c: T) -> Self {
        let z = T::zero();
        Jet2::new(c, z, z, z, z, z)
    }

    /// The variable `λ` itself.
    pub fn lambda() -> Self {
        let z = T::zero();
        Jet2::new(T::one(), T::one(), z, z, z, z)
    }

    /// The variable `z` itself.
    pub fn z() -> Self {
        let z = T::zero();
        Jet2::new(T::one(), z, T::one(), z, z, z)
    }

    /// Jet of a function of `λ` alone from its value and two derivatives.
    pub fn of_lambda(value: T, d1: T, d2: T) -> Self {
        let z = T::zero();
        Jet2::new(value, d1, z, d2 * T::of(0.5), z, z)
    }

    /// Jet of `z^w` for a real exponent `w >= 0`.
    pub fn z_power(w: T) -> Self {
        let z = T::zero();
        Jet2::new(T::one(), z, w, z, z, w * (w - T::one()) * T::of(0.5))
    }

    pub fn scale(self, s: T) -> Self {
        Jet2::new(
            self.c00 * s,
            self.c10 * s,
            self.c01 * s,
            self.c20 * s,
            self.c11 * s,
            self.c02 * s,
        )
    }

    pub fn recip(self) -> Self {
        let inv = T::one() / self.c00;
        let mut u = self.scale(inv);
        u.c00 = T::zero();
        (Jet2::one() - u + u * u).scale(inv)
    }

    pub fn value(&self) -> T {
        self.c00
    }

    pub fn d_lambda(&self) -> T {
        self.c10
    }

    pub fn d_z(&self) -> T {
        self.c01
    }

    pub fn d_lambda2(&self) -> T {
        self.c20 * T::of(2.0)
    }

    pub fn d_lambda_z(&self) -> T {
        self.c11
    }

    pub fn d_z2(&self) -> T {
        self.c02 * T::of(2.0)
    }

    /// Evaluates the truncated polynomial at `(1 + dl, 1 + dz)`.
    pub fn eval(&self, dl: T, dz: T) -> T {
        self.c00
            + self.c10 * dl
            + self.c01 * dz
            + self.c20 * dl * dl
            + self.c11 * dl * dz
            + self.c02 * dz * dz
    }

    fn zip(self, o: Self, f: impl Fn(T, T) -> T) -> Self {
        Jet2::new(
            f(self.c00, o.c00),
            f(self.c10, o.c10),
            f(self.c01, o.c01),
            f(self.c20, o.c20),
            f(self.c11, o.c11),
            f(self.c02, o.c02),
        )
    }

    pub fn max_abs_diff(&self, o: &Self) -> T {
        let d = self.zip(*o, |a, b| (a - b).abs());
        d.c00.max(d.c10).max(d.c01).max(d.c20).max(d.c11).max(d.c02)
    }
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = self;
        Jet2 {
            c00: a.c00 * o.c00,
            c10: a.c00 * o.c10 + a.c10 * o.c00,
            c01: a.c00 * o.c01 + a.c01 * o.c00,
            c20: a.c00 * o.c20 + a.c10 * o.c10 + a.c20 * o.c00,
            c11: a.c00 * o.c11 + a.c10 * o.c01 + a.c01 * o.c10 + a.c11 * o.c00,
            c02: a.c00 * o.c02 + a.c01 * o.c01 + a.c02 * o.c00,
        }
    }
}

impl<T: Scalar> Div for Jet2<T> {
    type Output = Self;
    /// Defined only for a non-zero constant term of the divisor.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Scalar> AddAssign for Jet2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Jet2<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Jet2<T> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Zero for Jet2<T> {
    fn zero() -> Self {
        Jet2::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }
}

impl<T: Scalar> One for Jet2<T> {
    fn one() -> Self {
        Jet2::constant(T::one())
    }
}

impl<T: Scalar> fmt::Display for Jet2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} + {}·dλ + {}·dz + {}·dλ² + {}·dλdz + {}·dz²",
            self.c00, self.c10, self.c01, self.c20, self.c11, self.c02
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_variables() {
        // λ z = 1 + dλ + dz + dλ dz
        let p = Jet2::<f64>::lambda() * Jet2::z();
        assert_eq!(p, Jet2::new(1.0, 1.0, 1.0, 0.0, 1.0, 0.0));
        // λ² = 1 + 2dλ + dλ²
        let sq = Jet2::<f64>::lambda() * Jet2::lambda();
        assert_eq!(sq, Jet2::new(1.0, 2.0, 0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn z_power_matches_integer_power() {
        let z = Jet2::<f64>::z();
        assert_eq!(Jet2::z_power(2.0), z * z);
        assert_eq!(Jet2::z_power(3.0), z * z * z);
        assert_eq!(Jet2::z_power(0.0), Jet2::one());
    }

    #[test]
    fn reciprocal_of_lambda() {
        // 1/λ = 1 - dλ + dλ²
        let r = Jet2::<f64>::lambda().recip();
        assert!(r.max_abs_diff(&Jet2::new(1.0, -1.0, 0.0, 1.0, 0.0, 0.0)) < 1e-15);
        let x = Jet2::new(2.0, 0.3, -0.7, 0.1, 0.4, -0.2);
        assert!((x / x).max_abs_diff(&Jet2::one()) < 1e-15);
    }

    #[test]
    fn partial_accessors() {
        let j = Jet2::new(0.0, 1.0, 2.0, 3.0, 4.0, 5.0);
        assert_eq!(
            (
                j.d_lambda(),
                j.d_z(),
                j.d_lambda2(),
                j.d_lambda_z(),
                j.d_z2()
            ),
            (1.0, 2.0, 6.0, 4.0, 10.0)
        );
        assert_eq!(
            Jet2::of_lambda(0.5, 2.0, 28.0),
            Jet2::new(0.5, 2.0, 0.0, 14.0, 0.0, 0.0)
        );
    }
}
