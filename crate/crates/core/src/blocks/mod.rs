//! Harmonic building blocks
//! `u_k(x, y) = Σ_j b_j sin(π j x / 2^k) exp(π j y / 2^k)`.
//!
//! Phases `j x / 2^k` are reduced exactly as dyadic rationals, so `u_k`
//! evaluates to an exact zero on every line `x = 2^l`, `l ≥ k`.

mod contour;
mod dyadic;

use rug::float::{Constant, Round};
use rug::{Float, Rational};

pub use contour::{march, Grid, Polyline, Rect};
pub use dyadic::{cospi_dyadic, sinpi_dyadic, DyadicRational};

use crate::bounded::{add_up, mul_up, Bounded};
use crate::error::{Error, Result};
use crate::exactpoly::{extract_b, BlockCoefficients};

/// Level-`k` block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    k: u32,
    coeffs: BlockCoefficients,
}

/// One odd index `j` of a block restricted to a fixed abscissa.
#[derive(Clone, Debug)]
pub struct PhaseTerm {
    pub j: u32,
    /// `b_j sin(π j x / 2^k)`
    pub value: Bounded,
    /// `b_j (π j / 2^k) cos(π j x / 2^k)`
    pub d_dx: Bounded,
    /// `b_j (π j / 2^k) sin(π j x / 2^k)`
    pub d_dy: Bounded,
}

/// A block with its abscissa fixed; combine with [`ExpPowers`] of an ordinate.
#[derive(Clone, Debug)]
pub struct BlockPhases {
    pub k: u32,
    pub terms: Vec<PhaseTerm>,
}

/// Powers `t^j`, `t = exp(π y / 2^k)`, for the odd `j` of a block.
#[derive(Clone, Debug)]
pub struct ExpPowers {
    pub k: u32,
    pub powers: Vec<Bounded>,
}

/// Predicted zero `ξ_{k,j} = (2^(k−1), (2^(k−1)/π) log(1 − 1/j))` of `u_k`.
#[derive(Clone, Debug)]
pub struct XiPoint {
    pub k: u32,
    pub j: u32,
    pub x: DyadicRational,
    pub y: Bounded,
}

impl BlockPhases {
    pub fn value(&self, p: &ExpPowers) -> Bounded {
        let prec = p.powers[0].prec();
        self.terms
            .iter()
            .zip(&p.powers)
            .fold(Bounded::zero(prec), |acc, (t, pw)| &acc + &(&t.value * pw))
    }

    pub fn gradient(&self, p: &ExpPowers) -> (Bounded, Bounded) {
        let prec = p.powers[0].prec();
        let mut dx = Bounded::zero(prec);
        let mut dy = Bounded::zero(prec);
        for (t, pw) in self.terms.iter().zip(&p.powers) {
            dx = &dx + &(&t.d_dx * pw);
            dy = &dy + &(&t.d_dy * pw);
        }
        (dx, dy)
    }

    /// Value without error tracking, for rasterization.
    pub fn value_fast(&self, p: &ExpPowers) -> Float {
        let prec = p.powers[0].prec();
        let mut acc = Float::new(prec);
        for (t, pw) in self.terms.iter().zip(&p.powers) {
            if !t.value.value.is_zero() {
                acc += Float::with_val(prec, &t.value.value * &pw.value);
            }
        }
        acc
    }

    /// True when every term vanishes exactly at this abscissa.
    pub fn vanishes(&self) -> bool {
        self.terms.iter().all(|t| t.value.is_exact_zero())
    }
}

fn pi_over_pow2(prec: u32, j: u32, k: u32, round: Round) -> Float {
    let pi = Float::with_val_round(prec, Constant::Pi, round).0;
    let w = Float::with_val_round(prec, &pi * j, round).0;
    w >> k
}

fn abs_rational_up(prec: u32, r: &Rational) -> Float {
    Float::with_val_round(prec, r.clone().abs(), Round::Up).0
}

fn exp_up(x: Float) -> Float {
    let prec = x.prec();
    Float::with_val_round(prec, x.exp_ref(), Round::Up).0
}

impl Block {
    pub fn new(k: u32, coeffs: BlockCoefficients) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("block level k must be at least 1".into()));
        }
        Ok(Self { k, coeffs })
    }

    /// Block at level `k` with the coefficient table of `c`.
    pub fn for_level(k: u32, c: u32) -> Result<Self> {
        Self::new(k, extract_b(c)?)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn c(&self) -> u32 {
        self.coeffs.c()
    }

    pub fn coeffs(&self) -> &BlockCoefficients {
        &self.coeffs
    }

    /// `π j / 2^k` as a bounded value.
    fn frequency(&self, j: u32, prec: u32) -> Bounded {
        Bounded::pi(prec)
            .scale(&Float::with_val(prec, j))
            .mul_pow2(-(self.k as i32))
    }

    pub fn phases(&self, x: &DyadicRational, prec: u32) -> BlockPhases {
        let terms = self
            .coeffs
            .iter()
            .map(|(j, b)| {
                let b = Bounded::from_rational(prec, b);
                let q = x.mul_int(j as i64).div_pow2(self.k);
                let s = sinpi_dyadic(&q, prec);
                let c = cospi_dyadic(&q, prec);
                let bw = &b * &self.frequency(j, prec);
                PhaseTerm {
                    j,
                    value: &b * &s,
                    d_dx: &bw * &c,
                    d_dy: &bw * &s,
                }
            })
            .collect();
        BlockPhases { k: self.k, terms }
    }

    /// Powers of `exp(π y / 2^k)` at the precision of `y`.
    pub fn powers(&self, y: &Float) -> Result<ExpPowers> {
        self.powers_at(y, y.prec())
    }

    pub fn powers_at(&self, y: &Float, prec: u32) -> Result<ExpPowers> {
        let arg = Bounded::pi(prec).scale(y).mul_pow2(-(self.k as i32));
        let t = arg.exp().ok_or(Error::Overflow { level: self.k })?;
        let t2 = &t * &t;
        let mut powers = Vec::with_capacity(self.coeffs.c() as usize);
        let mut cur = t;
        let mut cur_j = 1;
        for (j, _) in self.coeffs.iter() {
            while cur_j < j {
                cur = &cur * &t2;
                cur_j += 2;
            }
            powers.push(cur.clone());
        }
        if powers.iter().any(|p| !p.value.is_finite()) {
            return Err(Error::Overflow { level: self.k });
        }
        Ok(ExpPowers { k: self.k, powers })
    }

    pub fn eval_u(&self, x: &DyadicRational, y: &Float) -> Result<Bounded> {
        let prec = y.prec();
        Ok(self.phases(x, prec).value(&self.powers(y)?))
    }

    /// Evaluation at a float abscissa, converted exactly to a dyadic.
    pub fn eval_u_float(&self, x: &Float, y: &Float) -> Result<Bounded> {
        let xd = DyadicRational::from_float(x)
            .ok_or_else(|| Error::InvalidArgument("non-finite abscissa".into()))?;
        self.eval_u(&xd, y)
    }

    /// `(∂u/∂x, ∂u/∂y)` with error bounds.
    pub fn grad_u(&self, x: &DyadicRational, y: &Float) -> Result<(Bounded, Bounded)> {
        let prec = y.prec();
        Ok(self.phases(x, prec).gradient(&self.powers(y)?))
    }

    /// Upper bound on `‖u_k‖_{C¹(B_r)}`:
    /// `Σ_j |b_j| max(1, πj/2^k) exp(πj r/2^k)`, rounded upward.
    pub fn c1_norm_bound(&self, r: &Float) -> Float {
        let prec = r.prec();
        let one = Float::with_val(prec, 1);
        self.coeffs.iter().fold(Float::new(prec), |acc, (j, b)| {
            let w = pi_over_pow2(prec, j, self.k, Round::Up);
            let growth = exp_up(mul_up(&w, r));
            let factor = if w > one { w } else { one.clone() };
            let term = mul_up(&mul_up(&abs_rational_up(prec, b), &factor), &growth);
            add_up(&acc, &term)
        })
    }

    /// Upper bound on `μ(u_k, r)`: `Σ_j |b_j| exp(πj r/2^k)`, rounded upward.
    pub fn mu_u_bound(&self, r: &Float) -> Float {
        let prec = r.prec();
        self.coeffs.iter().fold(Float::new(prec), |acc, (j, b)| {
            let w = pi_over_pow2(prec, j, self.k, Round::Up);
            let growth = exp_up(mul_up(&w, r));
            add_up(&acc, &mul_up(&abs_rational_up(prec, b), &growth))
        })
    }

    /// Upper bound on `|∂^m u/∂y^m|` over the half plane `y ≤ y_max`
    /// (`m ≥ 0`): `Σ_j |b_j| (πj/2^k)^m exp(πj y_max/2^k)`.
    pub fn y_derivative_bound(&self, order: u32, y_max: &Float) -> Float {
        let prec = y_max.prec();
        self.coeffs.iter().fold(Float::new(prec), |acc, (j, b)| {
            let w_up = pi_over_pow2(prec, j, self.k, Round::Up);
            let w_dn = pi_over_pow2(prec, j, self.k, Round::Down);
            let e_hi = Float::with_val_round(prec, &w_up * y_max, Round::Up).0;
            let e_lo = Float::with_val_round(prec, &w_dn * y_max, Round::Up).0;
            let growth = exp_up(if e_hi > e_lo { e_hi } else { e_lo });
            let mut term = mul_up(&abs_rational_up(prec, b), &growth);
            for _ in 0..order {
                term = mul_up(&term, &w_up);
            }
            add_up(&acc, &term)
        })
    }

    /// The `c − 1` predicted zeros on the line `x = 2^(k−1)`, ordered by `y`.
    pub fn xi_points(&self, prec: u32) -> Vec<XiPoint> {
        let x = DyadicRational::pow2(self.k as i32 - 1);
        (2..=self.c())
            .map(|j| XiPoint {
                k: self.k,
                j,
                x: x.clone(),
                y: xi_ordinate(self.k, j, prec),
            })
            .collect()
    }

    /// Zero set of `u_k` inside `bbox` as polylines.
    pub fn trace_zero_set(&self, bbox: &Rect, resolution: usize, prec: u32) -> Result<Vec<Polyline>> {
        let grid = Grid::new(*bbox, resolution)?;
        let n = resolution + 1;
        let columns: Vec<BlockPhases> = (0..n)
            .map(|i| {
                let x = DyadicRational::from_f64(grid.x(i))
                    .ok_or_else(|| Error::InvalidArgument("non-finite grid abscissa".into()))?;
                Ok(self.phases(&x, prec))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            let powers = self.powers_at(&Float::with_val(prec, grid.y(j)), prec)?;
            values.extend(columns.iter().map(|c| c.value_fast(&powers)));
        }
        Ok(march(&grid, &values, |i, j| {
            let xc = 0.5 * (grid.x(i) + grid.x(i + 1));
            let yc = 0.5 * (grid.y(j) + grid.y(j + 1));
            let x = DyadicRational::from_f64(xc).unwrap_or_else(|| DyadicRational::from_int(0));
            self.powers_at(&Float::with_val(prec, yc), prec)
                .map(|p| self.phases(&x, prec).value_fast(&p))
                .unwrap_or_else(|_| Float::with_val(prec, 1))
        }))
    }
}

/// `(2^(k−1)/π) log(1 − 1/j)`.
pub fn xi_ordinate(k: u32, j: u32, prec: u32) -> Bounded {
    let work = prec + 32;
    let ratio = Float::with_val(work, Rational::from((j - 1, j)));
    let log = Float::with_val(work, ratio.ln_ref());
    let pi = Float::with_val(work, Constant::Pi);
    let y = Float::with_val(work, log / pi) << (k as i32 - 1);
    let value = Float::with_val(prec, &y);
    let err = Float::with_val(prec, Float::with_val(prec, value.abs_ref()) * crate::bounded::unit_roundoff(prec) * 2u32);
    Bounded::with_err(value, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactpoly::{build_pc, eval_poly};

    const P: u32 = 128;

    fn f(v: f64) -> Float {
        Float::with_val(P, v)
    }

    #[test]
    fn vanishes_exactly_on_dyadic_lines() {
        for k in 1..=4 {
            let block = Block::for_level(k, k + 1).unwrap();
            for l in k..k + 4 {
                let x = DyadicRational::pow2(l as i32);
                for y in [-7.25, -1.0, 0.0, 0.3, 2.5] {
                    let v = block.eval_u(&x, &f(y)).unwrap();
                    assert!(v.is_exact_zero(), "k={k} l={l} y={y}");
                }
            }
        }
    }

    #[test]
    fn restriction_to_half_period_line_is_pc() {
        for k in 1..=3 {
            let c = k + 2;
            let block = Block::for_level(k, c).unwrap();
            let p = build_pc(c).unwrap();
            let x = DyadicRational::pow2(k as i32 - 1);
            for y in [-3.0, -1.1, -0.4, 0.0] {
                let y = f(y);
                let u = block.eval_u(&x, &y).unwrap();
                let t = Bounded::pi(P).scale(&y).mul_pow2(-(k as i32)).exp().unwrap();
                let q = eval_poly(&p, &t);
                let gap = Float::with_val(P, &u.value - &q.value).abs();
                assert!(gap <= Float::with_val(P, &u.err + &q.err));
            }
        }
    }

    #[test]
    fn xi_points_are_zeros_with_nonzero_y_slope() {
        let block = Block::for_level(2, 4).unwrap();
        for xi in block.xi_points(256) {
            let y = xi.y.value.clone();
            assert!(y < 0 && y > -2);
            let u = block.eval_u(&xi.x, &y).unwrap();
            // the ordinate carries its own error; u changes by at most |u_y| err
            let (_, dy) = block.grad_u(&xi.x, &y).unwrap();
            let slack = Float::with_val(256, dy.upper_abs() * &xi.y.err) + &u.err;
            assert!(Float::with_val(256, u.value.abs_ref()) <= slack);
            assert!(dy.lower_abs() > 0);
        }
    }

    #[test]
    fn bounds_at_zero_radius() {
        let block = Block::for_level(1, 3).unwrap();
        let mu = block.mu_u_bound(&f(0.0));
        let sum = Float::with_val(P, block.coeffs().abs_sum());
        assert!(mu >= sum);
        assert!(Float::with_val(P, &mu - &sum) < Float::with_val(P, &sum * 1e-30));
        assert!(block.c1_norm_bound(&f(0.0)) >= mu);
    }

    #[test]
    fn trace_rejects_degenerate_input() {
        let block = Block::for_level(1, 2).unwrap();
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
        let bbox = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(block.trace_zero_set(&bbox, 1, P).is_err());
    }
}
