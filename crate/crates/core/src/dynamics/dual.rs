//! Forward-mode dual numbers used to linearize the flux exactly.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar field the flux routines are generic over.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn val(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Value with a single tangent direction. Nesting (`Dual<Dual>`) gives second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T = f64> {
    pub v: T,
    pub d: T,
}

/// Dual number over dual numbers.
pub type HyperDual = Dual<Dual>;

impl<T> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Dual { v, d }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Dual::new(q, (self.d - q * o.d) / o.v)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual::new(-self.v, -self.d)
    }
}

impl<T: Real> Real for Dual<T> {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::new(T::cst(v), T::cst(0.0))
    }
    #[inline]
    fn val(self) -> f64 {
        self.v.val()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual::new(s, T::cst(0.5) * self.d / s)
    }
    #[inline]
    fn abs(self) -> Self {
        if self.val() < 0.0 {
            -self
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<T: Real>(x: T) -> T {
        (x * x + T::cst(1.0)).sqrt() / (x - T::cst(3.0))
    }

    #[test]
    fn derivative_matches_central_difference() {
        let x = 0.7;
        let h = 1e-6;
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let d = f(Dual::new(x, 1.0));
        assert!((d.v - f(x)).abs() < 1e-15);
        assert!((d.d - fd).abs() < 1e-8);
    }

    #[test]
    fn nested_dual_gives_second_derivative() {
        let x = 0.7;
        let h = 1e-4;
        let fd2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let d = f(HyperDual::new(Dual::new(x, 1.0), Dual::new(1.0, 0.0)));
        assert!((d.v.v - f(x)).abs() < 1e-15);
        assert!((d.d.d - fd2).abs() < 1e-5);
        assert_eq!(d.v.d, d.d.v);
    }

    #[test]
    fn abs_keeps_the_branch_at_zero() {
        let d = HyperDual::new(Dual::new(0.0, -1.0), Dual::new(1.0, 0.0)).abs();
        assert_eq!((d.d.v, d.d.d), (1.0, 0.0));
    }
}
