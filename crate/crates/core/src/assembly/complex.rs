//! Complex extension `f(z1, z2)` of `h`, term by term.

use rug::float::{Constant, Round};
use rug::{Complex, Float, Rational};

use super::{ball_level_of_norm2, Construction};
use crate::bounded::{add_up, mul_up, unit_roundoff};
use crate::error::{Error, Result};

/// Both components of `f` with separate rounding bounds (absolute, in the
/// complex modulus).
#[derive(Clone, Debug)]
pub struct FValue {
    pub first: Complex,
    pub first_err: Float,
    pub second: Complex,
    pub second_err: Float,
    /// Truncation tail of the enclosing real ball. Only attached when both
    /// arguments are real; off the real plane the series tail is not bounded.
    pub tail: Option<Float>,
    pub ball_level: u32,
}

fn abs_up(z: &Complex) -> Float {
    let p = z.prec().0;
    Float::with_val_round(p, z.abs_ref(), Round::Up).0
}

fn cosh_up(x: &Float) -> Float {
    let p = x.prec();
    Float::with_val_round(p, x.cosh_ref(), Round::Up).0
}

fn exp_up(x: &Float) -> Float {
    let p = x.prec();
    Float::with_val_round(p, x.exp_ref(), Round::Up).0
}

fn norm2(z: &Complex) -> Option<Rational> {
    let re = z.real().to_rational()?;
    let im = z.imag().to_rational()?;
    Some(Rational::from(re.square_ref()) + Rational::from(im.square_ref()))
}

/// Bound on `|sin(w) e^v|` evaluated from rounded `w`, `v` that carry a
/// relative error below `4u`, plus the rounding of `sin`, `exp` and the product.
///
/// With `δ = 4u|w|` (at most one) the derivative of `sin` on the segment is
/// bounded by `cosh(|Im w| + 1) ≤ e cosh(Im w)`; same for `exp` with `Re v`.
fn term_err(w: &Complex, v: &Complex, s: &Complex, e: &Complex, u: &Float) -> Float {
    let p = u.prec();
    let four_u = Float::with_val(p, u * 4u32);
    let two_u = Float::with_val(p, u * 2u32);
    let euler = exp_up(&Float::with_val(p, 1));
    let abs_s = abs_up(s);
    let abs_e = abs_up(e);
    let im_w = Float::with_val(p, w.imag().abs_ref());
    let dw = mul_up(&four_u, &abs_up(w));
    let ds = add_up(
        &mul_up(&mul_up(&dw, &euler), &cosh_up(&im_w)),
        &mul_up(&two_u, &abs_s),
    );
    let re_v = Float::with_val(p, v.real());
    let dv = mul_up(&four_u, &abs_up(v));
    let de = add_up(&mul_up(&mul_up(&dv, &euler), &exp_up(&re_v)), &mul_up(&two_u, &abs_e));
    // |S̃Ẽ − SE| ≤ |ΔS||E| + |S̃||ΔE| with |E| ≤ |Ẽ| + |ΔE|
    let abs_e_hi = add_up(&abs_e, &de);
    let mut err = add_up(&mul_up(&ds, &abs_e_hi), &mul_up(&abs_s, &de));
    err = add_up(&err, &mul_up(&mul_up(&two_u, &abs_s), &abs_e));
    err
}

/// `f = (Σ_k a_k Σ_j b_j sin(πj z1/2^k) e^{πj z2/2^k}, sin(πz1) e^{πz2})`.
pub fn eval_f(constr: &Construction, z1: &Complex, z2: &Complex) -> Result<FValue> {
    let prec = constr.precision();
    let n2 = match (norm2(z1), norm2(z2)) {
        (Some(a), Some(b)) => a + b,
        _ => return Err(Error::InvalidArgument("non-finite complex argument".into())),
    };
    let ball_level = ball_level_of_norm2(&n2).unwrap_or(u32::MAX);
    constr.tail_for_ball(ball_level, || format!("{}", n2.to_f64().sqrt()))?;
    let real_args = z1.imag().is_zero() && z2.imag().is_zero();
    let tail = real_args.then(|| constr.truncation_error(ball_level).expect("checked"));

    let u = unit_roundoff(prec);
    let pi = Complex::with_val(prec, (Float::with_val(prec, Constant::Pi), 0));
    let mut first = Complex::new(prec);
    let mut first_err = Float::new(prec);
    for level in constr.levels() {
        let k = level.k as i32;
        let mut level_sum = Complex::new(prec);
        let mut level_err = Float::new(prec);
        for (j, b) in level.block.coeffs().iter() {
            let scale = Complex::with_val(prec, &pi * j) >> k;
            let w = Complex::with_val(prec, &scale * z1);
            let v = Complex::with_val(prec, &scale * z2);
            let s = Complex::with_val(prec, w.sin_ref());
            let e = Complex::with_val(prec, v.exp_ref());
            if !e.real().is_finite() || !e.imag().is_finite() {
                return Err(Error::Overflow { level: level.k });
            }
            let bf = Float::with_val(prec, b);
            let abs_b = Float::with_val_round(prec, bf.abs_ref(), Round::Up).0;
            let se = Complex::with_val(prec, &s * &e);
            let term = Complex::with_val(prec, &se * &bf);
            // b rounding plus the final scaling, on top of the phase error
            let mut t_err = mul_up(&abs_b, &term_err(&w, &v, &s, &e, &u));
            t_err = add_up(&t_err, &mul_up(&mul_up(&u, &Float::with_val(prec, 3)), &abs_up(&term)));
            level_sum += &term;
            level_err = add_up(&level_err, &t_err);
            level_err = add_up(&level_err, &mul_up(&mul_up(&u, &Float::with_val(prec, 2)), &abs_up(&level_sum)));
        }
        let a = &level.amplitude;
        let scaled = Complex::with_val(prec, &level_sum * a);
        first_err = add_up(&first_err, &mul_up(&level_err, a));
        first_err = add_up(&first_err, &mul_up(&mul_up(&u, &Float::with_val(prec, 2)), &abs_up(&scaled)));
        first += &scaled;
        first_err = add_up(&first_err, &mul_up(&mul_up(&u, &Float::with_val(prec, 2)), &abs_up(&first)));
    }

    let w = Complex::with_val(prec, &pi * z1);
    let v = Complex::with_val(prec, &pi * z2);
    let s = Complex::with_val(prec, w.sin_ref());
    let e = Complex::with_val(prec, v.exp_ref());
    if !e.real().is_finite() || !e.imag().is_finite() {
        return Err(Error::Overflow { level: 0 });
    }
    let second = Complex::with_val(prec, &s * &e);
    let second_err = term_err(&w, &v, &s, &e, &u);
    Ok(FValue {
        first,
        first_err,
        second,
        second_err,
        tail,
        ball_level,
    })
}
