//! Exact rational construction of
//! `P_c(x) = x (x² − 1 + 1/2)(x² − 1 + 1/3)···(x² − 1 + 1/c)`
//! and of the block coefficient tables derived from it.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rug::{Float, Integer, Rational};

use crate::bounded::{unit_roundoff, Bounded};
use crate::error::{Error, Result};

/// Largest supported `c`.
pub const MAX_C: u32 = 64;

fn check_c(c: u32) -> Result<()> {
    if (2..=MAX_C).contains(&c) {
        Ok(())
    } else {
        Err(Error::DegreeOutOfRange(c))
    }
}

/// Univariate polynomial with exact rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalPolynomial {
    coeffs: Vec<Rational>,
}

impl RationalPolynomial {
    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| *c == 0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, j: usize) -> Rational {
        self.coeffs.get(j).cloned().unwrap_or_default()
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::from_coeffs(Vec::new());
        }
        let mut out = vec![Rational::new(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += Rational::from(a * b);
            }
        }
        Self::from_coeffs(out)
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, t: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= t;
            acc += c;
        }
        acc
    }
}

/// Builds `P_c` by multiplying out the monic quadratic factors.
pub fn build_pc(c: u32) -> Result<RationalPolynomial> {
    check_c(c)?;
    let mut p = RationalPolynomial::from_coeffs(vec![Rational::new(), Rational::from(1)]);
    for j in 2..=c {
        // x² − (1 − 1/j)
        let constant = Rational::from((1, j)) - Rational::from(1);
        let factor = RationalPolynomial::from_coeffs(vec![constant, Rational::new(), Rational::from(1)]);
        p = p.mul(&factor);
    }
    Ok(p)
}

/// `(-1)^((j-1)/2)` for odd `j`.
fn alternating_sign(j: u32) -> i32 {
    if (j / 2).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Coefficients `b_j` of the level block for a given `c`. Even `j` are absent
/// (zero); odd `j` satisfy `(-1)^((j-1)/2) b_j = [x^j] P_c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCoefficients {
    c: u32,
    b: BTreeMap<u32, Rational>,
}

impl BlockCoefficients {
    pub fn c(&self) -> u32 {
        self.c
    }

    /// Highest index, `2c − 1`.
    pub fn max_j(&self) -> u32 {
        2 * self.c - 1
    }

    pub fn get(&self, j: u32) -> Option<&Rational> {
        self.b.get(&j)
    }

    /// Nonzero entries in increasing `j`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &Rational)> + '_ {
        self.b.iter().map(|(j, v)| (*j, v))
    }

    /// Re-expands `Σ (-1)^((j-1)/2) b_j x^j`.
    pub fn reconstruct(&self) -> RationalPolynomial {
        let mut coeffs = vec![Rational::new(); self.max_j() as usize + 1];
        for (j, b) in self.iter() {
            coeffs[j as usize] = Rational::from(b * alternating_sign(j));
        }
        RationalPolynomial::from_coeffs(coeffs)
    }

    /// Checks `|b_j| ≤ binomial(c − 1, (j − 1)/2)` for every stored `j`.
    pub fn within_binomial_bounds(&self) -> bool {
        self.iter()
            .all(|(j, b)| *b.clone().abs().numer() <= binomial(self.c - 1, (j - 1) / 2) * b.denom())
    }

    /// `Σ_j |b_j|`.
    pub fn abs_sum(&self) -> Rational {
        self.iter().map(|(_, b)| b.clone().abs()).sum()
    }
}

pub fn extract_b(c: u32) -> Result<BlockCoefficients> {
    let p = build_pc(c)?;
    let mut b = BTreeMap::new();
    for (j, coeff) in p.coeffs().iter().enumerate() {
        let j = j as u32;
        if j % 2 == 1 && *coeff != 0 {
            b.insert(j, Rational::from(coeff * alternating_sign(j)));
        } else {
            debug_assert!(*coeff == 0, "even coefficient of P_c must vanish");
        }
    }
    Ok(BlockCoefficients { c, b })
}

pub fn binomial(n: u32, k: u32) -> Integer {
    Integer::from(Integer::binomial_u(n, k))
}

/// A root of `P_c`: `0` or `±√(1 − 1/j)` with `2 ≤ j ≤ c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExactRoot {
    Minus(u32),
    Zero,
    Plus(u32),
}

impl ExactRoot {
    /// Index `j`, or `None` for the zero root.
    pub fn j(&self) -> Option<u32> {
        match *self {
            ExactRoot::Zero => None,
            ExactRoot::Plus(j) | ExactRoot::Minus(j) => Some(j),
        }
    }

    /// The exact square `1 − 1/j` (0 for the zero root).
    pub fn square(&self) -> Rational {
        match self.j() {
            None => Rational::new(),
            Some(j) => Rational::from(1) - Rational::from((1, j)),
        }
    }

    /// Materializes the root at `prec` bits.
    pub fn value(&self, prec: u32) -> Bounded {
        let Some(_) = self.j() else {
            return Bounded::zero(prec);
        };
        let mut v = Float::with_val(prec, self.square());
        v.sqrt_mut();
        if matches!(self, ExactRoot::Minus(_)) {
            v = -v;
        }
        let err = Float::with_val(prec, v.abs_ref()) * unit_roundoff(prec) * 2u32;
        Bounded::with_err(v, err)
    }

    fn sort_key(&self) -> (u8, i64) {
        match *self {
            ExactRoot::Minus(j) => (0, -(j as i64)),
            ExactRoot::Zero => (1, 0),
            ExactRoot::Plus(j) => (2, j as i64),
        }
    }
}

impl Ord for ExactRoot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for ExactRoot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All `2c − 1` roots of `P_c` in ascending order.
pub fn roots_pc(c: u32) -> Result<Vec<ExactRoot>> {
    check_c(c)?;
    let mut roots: Vec<ExactRoot> = (2..=c)
        .flat_map(|j| [ExactRoot::Minus(j), ExactRoot::Plus(j)])
        .chain(std::iter::once(ExactRoot::Zero))
        .collect();
    roots.sort();
    Ok(roots)
}

/// Horner evaluation with a running rounding-error bound.
pub fn eval_poly(p: &RationalPolynomial, t: &Bounded) -> Bounded {
    let prec = t.prec();
    let mut acc = Bounded::zero(prec);
    for c in p.coeffs().iter().rev() {
        acc = &(&acc * t) + &Bounded::from_rational(prec, c);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn p2_and_p3_expansions() {
        let p2 = build_pc(2).unwrap();
        assert_eq!(p2.coeffs(), &[q(0, 1), q(-1, 2), q(0, 1), q(1, 1)]);
        let p3 = build_pc(3).unwrap();
        assert_eq!(
            p3.coeffs(),
            &[q(0, 1), q(1, 3), q(0, 1), q(-7, 6), q(0, 1), q(1, 1)]
        );
    }

    #[test]
    fn rejects_out_of_range_c() {
        assert!(matches!(build_pc(1), Err(Error::DegreeOutOfRange(1))));
        assert!(build_pc(0).is_err());
        assert!(extract_b(65).is_err());
        assert!(roots_pc(1).is_err());
        assert!(build_pc(64).is_ok());
    }

    #[test]
    fn block_coefficients_small_cases() {
        let b2 = extract_b(2).unwrap();
        assert_eq!(b2.get(1), Some(&q(-1, 2)));
        assert_eq!(b2.get(3), Some(&q(-1, 1)));
        assert_eq!(b2.get(2), None);
        let b3 = extract_b(3).unwrap();
        assert_eq!(b3.get(1), Some(&q(1, 3)));
        assert_eq!(b3.get(3), Some(&q(7, 6)));
        assert_eq!(b3.get(5), Some(&q(1, 1)));
        assert!(b3.within_binomial_bounds());
    }

    #[test]
    fn roots_are_sorted_and_complete() {
        let r2 = roots_pc(2).unwrap();
        assert_eq!(r2, vec![ExactRoot::Minus(2), ExactRoot::Zero, ExactRoot::Plus(2)]);
        let r3 = roots_pc(3).unwrap();
        assert_eq!(
            r3,
            vec![
                ExactRoot::Minus(3),
                ExactRoot::Minus(2),
                ExactRoot::Zero,
                ExactRoot::Plus(2),
                ExactRoot::Plus(3)
            ]
        );
        let vals: Vec<f64> = r3.iter().map(|r| r.value(64).value.to_f64()).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn root_squares_are_exact() {
        for r in roots_pc(6).unwrap() {
            if let Some(j) = r.j() {
                assert_eq!(r.square(), Rational::from(1) - q(1, j as i64));
            }
        }
    }

    #[test]
    fn eval_poly_small_cases() {
        let p2 = build_pc(2).unwrap();
        let one = eval_poly(&p2, &Bounded::from_i64(128, 1));
        assert_eq!(one.value, 0.5);
        for c in 2..6 {
            let p = build_pc(c).unwrap();
            assert!(eval_poly(&p, &Bounded::zero(128)).is_exact_zero());
        }
        let p3 = build_pc(3).unwrap();
        let root = ExactRoot::Plus(2).value(256);
        let v = eval_poly(&p3, &root);
        assert!(v.value.clone().abs() <= v.err);
    }
}
