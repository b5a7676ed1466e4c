//! Floating values with a forward error bound.
//!
//! Every MPFR operation is correctly rounded, so one rounding contributes at
//! most half an ulp. We charge a full unit roundoff `u = 2^(1-prec)` per inexact
//! operation and propagate absolute errors to first order plus the quadratic
//! cross terms. Error companions are themselves rounded upward.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};

use rug::float::{Constant, Round};
use rug::{Float, Rational};

/// `2^(1 - prec)`.
pub fn unit_roundoff(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, 1 - prec as i32))
}

pub(crate) fn mul_up(a: &Float, b: &Float) -> Float {
    Float::with_val_round(a.prec().max(b.prec()), a * b, Round::Up).0
}

pub(crate) fn add_up(a: &Float, b: &Float) -> Float {
    Float::with_val_round(a.prec().max(b.prec()), a + b, Round::Up).0
}

pub(crate) fn abs(a: &Float) -> Float {
    Float::with_val(a.prec(), a.abs_ref())
}

/// A value together with an upper bound on `|value - exact|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounded {
    pub value: Float,
    pub err: Float,
}

impl Bounded {
    pub fn exact(value: Float) -> Self {
        let err = Float::new(value.prec());
        Self { value, err }
    }

    pub fn zero(prec: u32) -> Self {
        Self::exact(Float::new(prec))
    }

    pub fn with_err(value: Float, err: Float) -> Self {
        Self { value, err }
    }

    pub fn from_rational(prec: u32, r: &Rational) -> Self {
        let (value, ord) = Float::with_val_round(prec, r, Round::Nearest);
        let err = if ord == Ordering::Equal {
            Float::new(prec)
        } else {
            mul_up(&abs(&value), &unit_roundoff(prec))
        };
        Self { value, err }
    }

    pub fn from_i64(prec: u32, v: i64) -> Self {
        Self::from_rational(prec, &Rational::from(v))
    }

    pub fn pi(prec: u32) -> Self {
        let value = Float::with_val(prec, Constant::Pi);
        let err = mul_up(&value, &unit_roundoff(prec));
        Self { value, err }
    }

    pub fn prec(&self) -> u32 {
        self.value.prec()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.value.is_zero() && self.err.is_zero()
    }

    /// Lower bound on the magnitude of the exact value (may be negative).
    pub fn lower_abs(&self) -> Float {
        Float::with_val_round(self.prec(), &abs(&self.value) - &self.err, Round::Down).0
    }

    /// Upper bound on the magnitude of the exact value.
    pub fn upper_abs(&self) -> Float {
        add_up(&abs(&self.value), &self.err)
    }

    /// Sign of the exact value when `|value| > err + extra`, otherwise `None`.
    pub fn certified_sign(&self, extra: &Float) -> Option<Ordering> {
        let budget = add_up(&self.err, extra);
        if self.value.cmp_abs(&budget) == Some(Ordering::Greater) {
            self.value.cmp0()
        } else {
            None
        }
    }

    /// Adds `extra` to the error bound.
    pub fn inflate(&self, extra: &Float) -> Self {
        Self {
            value: self.value.clone(),
            err: add_up(&self.err, extra),
        }
    }

    /// Multiplication by an exactly known scalar.
    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec();
        let (value, ord) = Float::with_val_round(p, &self.value * s, Round::Nearest);
        let mut err = mul_up(&self.err, &abs(s));
        if ord != Ordering::Equal {
            err = add_up(&err, &mul_up(&abs(&value), &unit_roundoff(p)));
        }
        Self { value, err }
    }

    /// Exact multiplication by `2^n`.
    pub fn mul_pow2(&self, n: i32) -> Self {
        let p = self.prec();
        Self {
            value: Float::with_val(p, &self.value << n),
            err: Float::with_val(p, &self.err << n),
        }
    }

    /// `exp(self)`, or `None` when the result leaves the exponent range.
    pub fn exp(&self) -> Option<Self> {
        let p = self.prec();
        let (value, ord) = Float::with_val_round(p, self.value.exp_ref(), Round::Nearest);
        if !value.is_finite() || (value.is_zero() && !self.value.is_zero()) {
            return None;
        }
        let u = unit_roundoff(p);
        let mut err = Float::new(p);
        if !self.err.is_zero() {
            let spread = Float::with_val_round(p, self.err.exp_m1_ref(), Round::Up).0;
            let one_plus_u = add_up(&Float::with_val(p, 1), &u);
            err = mul_up(&mul_up(&value, &one_plus_u), &spread);
        }
        if ord != Ordering::Equal {
            err = add_up(&err, &mul_up(&value, &u));
        }
        Some(Self { value, err })
    }

    fn rounded(value: Float, ord: Ordering, err: Float) -> Self {
        if ord == Ordering::Equal {
            Self { value, err }
        } else {
            let slop = mul_up(&abs(&value), &unit_roundoff(value.prec()));
            Self {
                err: add_up(&err, &slop),
                value,
            }
        }
    }
}

impl Add for &Bounded {
    type Output = Bounded;
    fn add(self, rhs: &Bounded) -> Bounded {
        let p = self.prec().max(rhs.prec());
        let (value, ord) = Float::with_val_round(p, &self.value + &rhs.value, Round::Nearest);
        Bounded::rounded(value, ord, add_up(&self.err, &rhs.err))
    }
}

impl Sub for &Bounded {
    type Output = Bounded;
    fn sub(self, rhs: &Bounded) -> Bounded {
        let p = self.prec().max(rhs.prec());
        let (value, ord) = Float::with_val_round(p, &self.value - &rhs.value, Round::Nearest);
        Bounded::rounded(value, ord, add_up(&self.err, &rhs.err))
    }
}

impl Mul for &Bounded {
    type Output = Bounded;
    fn mul(self, rhs: &Bounded) -> Bounded {
        let p = self.prec().max(rhs.prec());
        let (value, ord) = Float::with_val_round(p, &self.value * &rhs.value, Round::Nearest);
        let mut err = mul_up(&abs(&self.value), &rhs.err);
        err = add_up(&err, &mul_up(&abs(&rhs.value), &self.err));
        err = add_up(&err, &mul_up(&self.err, &rhs.err));
        Bounded::rounded(value, ord, err)
    }
}

impl Neg for &Bounded {
    type Output = Bounded;
    fn neg(self) -> Bounded {
        Bounded {
            value: Float::with_val(self.prec(), -&self.value),
            err: self.err.clone(),
        }
    }
}

impl Add for Bounded {
    type Output = Bounded;
    fn add(self, rhs: Bounded) -> Bounded {
        &self + &rhs
    }
}

impl Mul for Bounded {
    type Output = Bounded;
    fn mul(self, rhs: Bounded) -> Bounded {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 128;

    fn contains(b: &Bounded, exact: &Rational) -> bool {
        let v = b.value.to_rational().unwrap();
        let e = b.err.to_rational().unwrap();
        let diff = Rational::from(&v - exact).abs();
        diff <= e
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Bounded::from_i64(P, 3);
        let b = Bounded::from_i64(P, -5);
        let s = &a + &b;
        let m = &a * &b;
        assert!(s.err.is_zero() && m.err.is_zero());
        assert_eq!(m.value, -15);
        assert!(Bounded::zero(P).exp().unwrap().err.is_zero());
    }

    #[test]
    fn rational_products_are_enclosed() {
        let third = Rational::from((1, 3));
        let sev = Rational::from((7, 11));
        let a = Bounded::from_rational(P, &third);
        let b = Bounded::from_rational(P, &sev);
        let prod = &(&a * &b) - &a;
        let exact = Rational::from(&third * &sev) - &third;
        assert!(contains(&prod, &exact));
        assert!(!prod.err.is_zero());
    }

    #[test]
    fn exp_error_covers_input_error() {
        let x = Bounded::with_err(Float::with_val(P, 1), Float::with_val(P, 1e-20));
        let y = x.exp().unwrap();
        let hi = Float::with_val(300, Float::with_val(300, 1) + 1e-20f64).exp();
        let gap = Float::with_val(300, &hi - &y.value);
        assert!(gap <= y.err);
    }

    #[test]
    fn certified_sign_respects_budget() {
        let x = Bounded::with_err(Float::with_val(P, 1e-10), Float::with_val(P, 1e-11));
        assert_eq!(x.certified_sign(&Float::new(P)), Some(Ordering::Greater));
        assert_eq!(x.certified_sign(&Float::with_val(P, 1e-10)), None);
        assert_eq!((-&x).certified_sign(&Float::new(P)), Some(Ordering::Less));
    }

    #[test]
    fn exp_overflow_is_reported() {
        let big = Bounded::exact(Float::with_val(P, 1e30));
        assert!(big.exp().is_none());
    }
}
