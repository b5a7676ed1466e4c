use std::cmp::Ordering;
use std::fmt;

use rug::float::Constant;
use rug::{Float, Integer};

use crate::bounded::{mul_up, unit_roundoff, Bounded};

/// An exact dyadic rational `numerator / 2^exponent` in canonical form
/// (odd numerator, or zero with exponent 0).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: Integer,
    exponent: u32,
}

impl DyadicRational {
    pub fn new(numerator: Integer, exponent: u32) -> Self {
        let mut out = Self {
            numerator,
            exponent,
        };
        out.canonicalize();
        out
    }

    fn canonicalize(&mut self) {
        if self.numerator == 0 {
            self.exponent = 0;
            return;
        }
        let tz = self.numerator.find_one(0).unwrap_or(0).min(self.exponent);
        self.numerator >>= tz;
        self.exponent -= tz;
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(Integer::from(v), 0)
    }

    /// `2^l` for any integer `l`.
    pub fn pow2(l: i32) -> Self {
        if l >= 0 {
            Self::new(Integer::from(1) << l as u32, 0)
        } else {
            Self::new(Integer::from(1), l.unsigned_abs())
        }
    }

    /// Exact conversion of a finite binary float.
    pub fn from_float(x: &Float) -> Option<Self> {
        if x.is_zero() {
            return Some(Self::from_int(0));
        }
        let (m, e) = x.to_integer_exp()?;
        Some(if e >= 0 {
            Self::new(m << e as u32, 0)
        } else {
            Self::new(m, e.unsigned_abs())
        })
    }

    pub fn from_f64(x: f64) -> Option<Self> {
        Self::from_float(&Float::with_val(53, x))
    }

    pub fn numerator(&self) -> &Integer {
        &self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn is_integer(&self) -> bool {
        self.exponent == 0
    }

    pub fn to_integer(&self) -> Option<Integer> {
        self.is_integer().then(|| self.numerator.clone())
    }

    pub fn mul_int(&self, j: i64) -> Self {
        Self::new(Integer::from(&self.numerator * j), self.exponent)
    }

    /// Exact division by `2^k`.
    pub fn div_pow2(&self, k: u32) -> Self {
        Self::new(self.numerator.clone(), self.exponent + k)
    }

    pub fn add(&self, other: &Self) -> Self {
        let e = self.exponent.max(other.exponent);
        let a = Integer::from(&self.numerator << (e - self.exponent));
        let b = Integer::from(&other.numerator << (e - other.exponent));
        Self::new(a + b, e)
    }

    pub fn neg(&self) -> Self {
        Self::new(Integer::from(-&self.numerator), self.exponent)
    }

    /// Representative of `self mod 2` in `[0, 2)`.
    pub fn rem_two(&self) -> Self {
        // two's-complement low bits give the Euclidean remainder mod 2^(e+1)
        Self::new(self.numerator.clone().keep_bits(self.exponent + 1), self.exponent)
    }

    /// Nearest float at `prec` bits.
    pub fn to_float(&self, prec: u32) -> Float {
        let v = Float::with_val(prec, &self.numerator);
        Float::with_val(prec, v >> self.exponent)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_float(64).to_f64()
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.add(&other.neg());
        diff.numerator.cmp0()
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

/// `sin(π q)` with exact reduction of `q` modulo 2 before any rounding.
/// Integer `q` gives an exact 0 and odd multiples of `1/2` an exact `±1`.
pub fn sinpi_dyadic(q: &DyadicRational, prec: u32) -> Bounded {
    let mut r = q.rem_two();
    let one = DyadicRational::from_int(1);
    let half = DyadicRational::pow2(-1);
    if r.is_integer() {
        return Bounded::zero(prec);
    }
    let mut negate = false;
    if r > one {
        negate = true;
        r = r.add(&one.neg());
    }
    // r in (0, 1) now
    if r == half {
        let v = Float::with_val(prec, if negate { -1 } else { 1 });
        return Bounded::exact(v);
    }
    if r > half {
        r = one.add(&r.neg());
    }
    // r in (0, 1/2): relative error of π·r is ≤ 3u, and sin(t) ≥ 2t/π on
    // [0, π/2] turns the argument error into a relative error ≤ (3π/2 + 1)u.
    let arg = Float::with_val(prec, Constant::Pi) * r.to_float(prec);
    let mut v = Float::with_val(prec, arg.sin_ref());
    if negate {
        v = -v;
    }
    let eight_u = Float::with_val(prec, unit_roundoff(prec) * 8u32);
    let err = mul_up(&Float::with_val(prec, v.abs_ref()), &eight_u);
    Bounded::with_err(v, err)
}

/// `cos(π q) = sin(π (q + 1/2))`.
pub fn cospi_dyadic(q: &DyadicRational, prec: u32) -> Bounded {
    sinpi_dyadic(&q.add(&DyadicRational::pow2(-1)), prec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: i64, e: u32) -> DyadicRational {
        DyadicRational::new(Integer::from(n), e)
    }

    #[test]
    fn canonical_form() {
        assert_eq!(d(4, 3), d(1, 1));
        assert_eq!(d(0, 7).exponent(), 0);
        assert_eq!(d(6, 0).exponent(), 0);
        assert_eq!(d(-12, 2), DyadicRational::from_int(-3));
    }

    #[test]
    fn float_conversion_is_exact() {
        let x = DyadicRational::from_f64(0.375).unwrap();
        assert_eq!(x, d(3, 3));
        let y = DyadicRational::from_f64(-96.0).unwrap();
        assert_eq!(y, DyadicRational::from_int(-96));
        assert!(DyadicRational::from_f64(f64::NAN).is_none());
    }

    #[test]
    fn reduction_mod_two() {
        assert_eq!(d(5, 1).rem_two(), d(1, 1));
        assert_eq!(d(-1, 1).rem_two(), d(3, 1));
        assert_eq!(DyadicRational::from_int(-4).rem_two(), DyadicRational::from_int(0));
    }

    #[test]
    fn special_values_are_exact() {
        let p = 256;
        assert!(sinpi_dyadic(&DyadicRational::from_int(3), p).is_exact_zero());
        assert!(sinpi_dyadic(&DyadicRational::from_int(-1 << 40), p).is_exact_zero());
        let s = sinpi_dyadic(&d(1, 1), p);
        assert_eq!(s.value, 1);
        assert!(s.err.is_zero());
        let s = sinpi_dyadic(&d(5, 1), p);
        assert_eq!(s.value, 1);
        assert!(s.err.is_zero());
        let s = sinpi_dyadic(&d(3, 1), p);
        assert_eq!(s.value, -1);
        let c = cospi_dyadic(&DyadicRational::from_int(7), p);
        assert_eq!(c.value, -1);
        assert!(c.err.is_zero());
    }

    #[test]
    fn generic_values_match_mpfr() {
        let p = 128;
        for (n, e) in [(1i64, 2u32), (3, 3), (-7, 4), (1001, 9), (13, 1)] {
            let q = d(n, e);
            let s = sinpi_dyadic(&q, p);
            let reference = Float::with_val(400, Constant::Pi) * q.to_float(400);
            let reference = reference.sin();
            let diff = Float::with_val(400, &reference - &s.value).abs();
            assert!(diff <= s.err, "sinpi({q}) off by {diff}");
        }
    }
}
