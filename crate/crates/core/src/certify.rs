//! Certified zero counting on integer lines, Jacobian regularity and growth
//! checks.
//!
//! Zeros of `h` lie on the lines `x ∈ Z`, where the second component vanishes
//! identically, so counting reduces to sign changes of `g` along each line.
//! A sign is trusted only when `|g|` exceeds rounding plus truncation error.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::float::{Constant, Round};
use rug::{Complex, Float};
use serde_json::{json, Value};

use crate::assembly::{eval_f, margin_test_points, Column, Construction};
use crate::blocks::DyadicRational;
use crate::bounded::{add_up, mul_up, Bounded};
use crate::error::{Error, Result};

/// Uniform samples per scanned segment.
pub const SCAN_SAMPLES: usize = 512;

/// Boundary samples used for sampled maximum moduli.
pub const BOUNDARY_SAMPLES: usize = 720;

/// Relative bisection target for refined roots.
pub const REFINE_TOLERANCE: f64 = 1e-10;

/// A certified sign change of `g` on the line `x = line_x`.
#[derive(Clone, Debug)]
pub struct ZeroCertificate {
    pub line_x: i64,
    pub y_lo: Float,
    pub y_hi: Float,
    pub sign_lo: i8,
    pub sign_hi: i8,
    /// Root estimate inside the bracket, bisected on computed signs.
    pub refined_root: Float,
    /// Bound on `|g_N(refined_root)|` from the final bisection interval.
    pub residual_bound: Float,
    /// Lower bound on `|∂g/∂y|` over the whole bracket.
    pub derivative_bound: Float,
    pub jacobian_det: Float,
    pub jacobian_det_err: Float,
}

impl ZeroCertificate {
    pub fn bracket_width(&self) -> Float {
        Float::with_val(self.y_hi.prec(), &self.y_hi - &self.y_lo)
    }

    pub fn is_regular(&self) -> bool {
        self.jacobian_det.cmp_abs(&self.jacobian_det_err) == Some(Ordering::Greater)
    }

    pub fn to_json(&self) -> Value {
        let s = |f: &Float| f.to_string_radix(10, None);
        json!({
            "line_x": self.line_x,
            "y_lo": s(&self.y_lo),
            "y_hi": s(&self.y_hi),
            "sign_lo": self.sign_lo,
            "sign_hi": self.sign_hi,
            "refined_root": s(&self.refined_root),
            "residual_bound": s(&self.residual_bound),
            "derivative_bound": s(&self.derivative_bound),
            "jacobian_det": s(&self.jacobian_det),
            "jacobian_det_err": s(&self.jacobian_det_err),
        })
    }
}

/// Result of scanning one segment.
#[derive(Clone, Debug, Default)]
pub struct LineScan {
    pub certificates: Vec<ZeroCertificate>,
    /// Samples whose sign could not be certified.
    pub uncertain_samples: usize,
    /// Sign-change brackets dropped because regularity failed.
    pub rejected_brackets: usize,
}

#[derive(Clone, Debug)]
pub struct CountReport {
    pub r: Float,
    pub per_line: BTreeMap<i64, usize>,
    pub total: usize,
    /// `Σ_{i≤k} n_i` when `r = 2^k`.
    pub target: Option<usize>,
    /// Lines excluded because `g` vanishes identically on them.
    pub degenerate_lines: Vec<i64>,
    pub uncertain_samples: usize,
    pub rejected_brackets: usize,
    /// Ordered by line, then `y_lo`.
    pub certificates: Vec<ZeroCertificate>,
}

impl CountReport {
    pub fn meets_target(&self) -> bool {
        self.target.is_none_or(|t| self.total >= t)
    }

    pub fn to_json(&self, construction_hash: &str) -> Value {
        json!({
            "construction_hash": construction_hash,
            "r": self.r.to_string_radix(10, None),
            "per_line": self.per_line.iter().map(|(x, c)| json!({"x": x, "count": c})).collect::<Vec<_>>(),
            "total": self.total,
            "target": self.target,
            "degenerate_lines": self.degenerate_lines,
            "uncertain_samples": self.uncertain_samples,
            "rejected_brackets": self.rejected_brackets,
            "certificates": self.certificates.iter().map(ZeroCertificate::to_json).collect::<Vec<_>>(),
        })
    }
}

fn sign_i8(o: Ordering) -> i8 {
    match o {
        Ordering::Less => -1,
        Ordering::Equal => 0,
        Ordering::Greater => 1,
    }
}

fn midpoint(a: &Float, b: &Float) -> Float {
    Float::with_val(a.prec(), a + b) >> 1u32
}

/// `dh` at a point of an integer line, with error bounds. The `g` row is
/// inflated by the C¹ truncation tail.
#[derive(Clone, Debug)]
pub struct Jacobian {
    pub g_x: Bounded,
    pub g_y: Bounded,
    /// `∂(sin(πx)e^{πy})/∂x = π cos(πx) e^{πy}`
    pub s_x: Bounded,
    /// `∂(sin(πx)e^{πy})/∂y = π sin(πx) e^{πy}`, exactly 0 for integer `x`.
    pub s_y: Bounded,
    pub det: Bounded,
}

fn jacobian_on(column: &Column<'_>, tail: &Float, y: &Float) -> Result<Jacobian> {
    let prec = y.prec();
    let (g_x, g_y) = column.grad_rounded(y)?;
    let g_x = g_x.inflate(tail);
    let g_y = g_y.inflate(tail);
    let e = Bounded::pi(prec)
        .scale(y)
        .exp()
        .ok_or(Error::Overflow { level: 0 })?;
    let pe = &Bounded::pi(prec) * &e;
    let s_x = column.cos_pi_x() * &pe;
    let s_y = if column.sin_pi_x().is_exact_zero() {
        Bounded::zero(prec)
    } else {
        column.sin_pi_x() * &pe
    };
    let det = &(&g_x * &s_y) - &(&s_x * &g_y);
    Ok(Jacobian {
        g_x,
        g_y,
        s_x,
        s_y,
        det,
    })
}

/// Matrix of derivatives of `h` on the line `x`.
pub fn jacobian_h(constr: &Construction, x: i64, y: &Float) -> Result<Jacobian> {
    let column = constr.column(&DyadicRational::from_int(x));
    let y = Float::with_val(constr.precision(), y);
    let level = column.ball_level(&y)?;
    let tail = constr.truncation_error(level).expect("checked");
    jacobian_on(&column, &tail, &y)
}

struct Sample {
    y: Float,
    sign: Option<Ordering>,
}

/// Scans `[y_min, y_max]` on the line `x` for certified sign changes.
/// `seeds` are extra sample ordinates, `scale` sets the refinement target.
pub fn scan_line(
    constr: &Construction,
    x: i64,
    y_min: &Float,
    y_max: &Float,
    seeds: &[Float],
    scale: &Float,
) -> Result<LineScan> {
    let prec = constr.precision();
    let column = constr.column(&DyadicRational::from_int(x));
    let span = Float::with_val(prec, y_max - y_min);
    let mut ys: Vec<Float> = (0..=SCAN_SAMPLES)
        .map(|i| {
            if i == SCAN_SAMPLES {
                y_max.clone()
            } else {
                Float::with_val(prec, &span * i as u32) / SCAN_SAMPLES as u32 + y_min
            }
        })
        .collect();
    ys.extend(seeds.iter().filter(|s| *s >= y_min && *s <= y_max).cloned());
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    ys.dedup();

    let samples = ys
        .into_iter()
        .map(|y| {
            let g = column.eval_g(&y)?;
            Ok(Sample {
                sign: g.certified_sign(),
                y,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scan = LineScan {
        uncertain_samples: samples.iter().filter(|s| s.sign.is_none()).count(),
        ..LineScan::default()
    };
    let certified: Vec<&Sample> = samples.iter().filter(|s| s.sign.is_some()).collect();
    let target = Float::with_val(prec, scale * REFINE_TOLERANCE);
    for w in certified.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.sign == b.sign {
            continue;
        }
        match certify_bracket(constr, &column, x, a, b, &target)? {
            Some(c) => scan.certificates.push(c),
            None => scan.rejected_brackets += 1,
        }
    }
    Ok(scan)
}

fn certify_bracket(
    constr: &Construction,
    column: &Column<'_>,
    x: i64,
    a: &Sample,
    b: &Sample,
    target: &Float,
) -> Result<Option<ZeroCertificate>> {
    let prec = constr.precision();
    let (mut lo, mut hi) = (a.y.clone(), b.y.clone());
    let (sign_lo, sign_hi) = (a.sign.expect("certified"), b.sign.expect("certified"));

    // Shrink while the midpoint sign stays certified.
    loop {
        let width = Float::with_val(prec, &hi - &lo);
        if width <= *target {
            break;
        }
        let mid = midpoint(&lo, &hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match column.eval_g(&mid)?.certified_sign() {
            Some(s) if s == sign_lo => lo = mid,
            Some(_) => hi = mid,
            None => break,
        }
    }

    // Continue on computed signs for the root estimate.
    let (mut a_y, mut b_y) = (lo.clone(), hi.clone());
    loop {
        let width = Float::with_val(prec, &b_y - &a_y);
        if width <= *target {
            break;
        }
        let mid = midpoint(&a_y, &b_y);
        if mid <= a_y || mid >= b_y {
            break;
        }
        let v = column.g_rounded(&mid)?.value;
        match v.cmp0() {
            Some(Ordering::Equal) | None => {
                a_y = mid.clone();
                b_y = mid;
                break;
            }
            Some(s) if s == sign_lo => a_y = mid,
            Some(_) => b_y = mid,
        }
    }
    let root = midpoint(&a_y, &b_y);
    let ga = column.g_rounded(&a_y)?;
    let gb = column.g_rounded(&b_y)?;
    let residual_bound = {
        let ua = ga.upper_abs();
        let ub = gb.upper_abs();
        if ua > ub {
            ua
        } else {
            ub
        }
    };

    let level = column.ball_level(&hi)?.max(column.ball_level(&lo)?);
    let tail = constr.truncation_error(level).expect("checked");
    let jac = jacobian_on(column, &tail, &root)?;

    let derivative_bound = match derivative_lower_bound(column, &tail, &lo, &hi, &jac.g_y)? {
        Some(d) => d,
        None => return Ok(None),
    };
    if jac.det.certified_sign(&Float::new(prec)).is_none() {
        return Ok(None);
    }
    Ok(Some(ZeroCertificate {
        line_x: x,
        y_lo: lo,
        y_hi: hi,
        sign_lo: sign_i8(sign_lo),
        sign_hi: sign_i8(sign_hi),
        refined_root: root,
        residual_bound,
        derivative_bound,
        jacobian_det: jac.det.value,
        jacobian_det_err: jac.det.err,
    }))
}

/// Most pieces a bracket is split into when bounding `∂g/∂y` on it.
const MAX_DERIVATIVE_PIECES: u32 = 4096;

/// Lower bound on `|∂g/∂y|` over `[lo, hi]`, or `None` when it cannot be
/// shown to stay away from zero.
///
/// The bracket is cut into pieces of width `w`; on each, `|g_y| ≥
/// |g_y(center)| − err − tail − sup|g_yy| w/2`. A positive bound on every
/// piece keeps the sign of `g_y` fixed across the bracket.
fn derivative_lower_bound(
    column: &Column<'_>,
    tail: &Float,
    lo: &Float,
    hi: &Float,
    g_y_root: &Bounded,
) -> Result<Option<Float>> {
    let prec = lo.prec();
    let width = Float::with_val_round(prec, hi - lo, Round::Up).0;
    // pieces may overhang hi by rounding; bound g_yy a full width beyond it
    let dyy = column.dyy_bound(&Float::with_val_round(prec, hi + &width, Round::Up).0);
    let root_abs = g_y_root.lower_abs();
    if root_abs <= 0 {
        return Ok(None);
    }
    // enough pieces that the drift is a quarter of |g_y(root)|
    let ratio = Float::with_val(prec, mul_up(&dyy, &width) * 2u32) / &root_abs;
    let pieces = ratio
        .to_u32_saturating_round(Round::Up)
        .unwrap_or(u32::MAX)
        .clamp(1, MAX_DERIVATIVE_PIECES);
    let step = Float::with_val_round(prec, &width / pieces, Round::Up).0;
    let drift = mul_up(&dyy, &Float::with_val(prec, &step >> 1u32));
    let mut bound: Option<Float> = None;
    for i in 0..pieces {
        let center = Float::with_val(prec, &step * (2 * i + 1)) / 2u32 + lo;
        let (_, g_y) = column.grad_rounded(&center)?;
        let b = Float::with_val_round(prec, g_y.inflate(tail).lower_abs() - &drift, Round::Down).0;
        if b <= 0 {
            return Ok(None);
        }
        if bound.as_ref().is_none_or(|m| b < *m) {
            bound = Some(b);
        }
    }
    Ok(bound)
}

/// Certified zeros of `g` on `{2^(k−1)} × (−2^(k−1), 0)`, seeded at the
/// predicted ordinates of level `k`.
pub fn count_zeros_on_line(constr: &Construction, k: u32) -> Result<Vec<ZeroCertificate>> {
    let level = constr
        .level(k)
        .ok_or_else(|| Error::InvalidArgument(format!("level {k} is not built")))?;
    let prec = constr.precision();
    let half = Float::with_val(prec, Float::i_exp(1, k as i32 - 1));
    let x = 1i64 << (k - 1);
    let seeds = margin_test_points(&level.block, prec);
    let scan = scan_line(constr, x, &Float::with_val(prec, -&half), &Float::new(prec), &seeds, &half)?;
    Ok(scan.certificates)
}

fn segment_half_length(r: &Float, x: i64) -> Option<Float> {
    let prec = r.prec();
    let r2 = Float::with_val_round(prec, r.square_ref(), Round::Down).0;
    let x2 = Float::with_val(prec, x) * x;
    let d = Float::with_val_round(prec, &r2 - &x2, Round::Down).0;
    if d.is_sign_negative() && !d.is_zero() {
        return None;
    }
    Some(Float::with_val_round(prec, d.sqrt_ref(), Round::Down).0)
}

/// Certified zeros of `h` in the closed ball `B_r`, over every integer line.
pub fn count_zeros_ball(constr: &Construction, r: &Float) -> Result<CountReport> {
    let prec = constr.precision();
    let r = Float::with_val(prec, r);
    let limit = Float::with_val(prec, Float::i_exp(1, constr.depth() as i32));
    if r.is_sign_negative() || r > limit || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "radius must lie in [0, 2^N] = [0, {}]",
            limit.to_f64()
        )));
    }
    let x_max = r.to_integer_round(Round::Down).map(|(i, _)| i).unwrap_or_default();
    let x_max = x_max.to_i64().unwrap_or(0);
    let mut degenerate_lines = Vec::new();
    let mut lines = Vec::new();
    for x in -x_max..=x_max {
        if x == 0 {
            degenerate_lines.push(0);
            continue;
        }
        if let Some(y) = segment_half_length(&r, x) {
            if !y.is_zero() {
                lines.push((x, y));
            }
        }
    }
    let scans = lines
        .par_iter()
        .map(|(x, y_half)| {
            let seeds = seeds_for_line(constr, *x);
            let scan = scan_line(constr, *x, &Float::with_val(prec, -y_half), y_half, &seeds, y_half)?;
            Ok((*x, scan))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_line = BTreeMap::new();
    let mut certificates = Vec::new();
    let mut uncertain_samples = 0;
    let mut rejected_brackets = 0;
    for (x, scan) in scans {
        per_line.insert(x, scan.certificates.len());
        uncertain_samples += scan.uncertain_samples;
        rejected_brackets += scan.rejected_brackets;
        certificates.extend(scan.certificates);
    }
    certificates.sort_by(|a, b| {
        a.line_x
            .cmp(&b.line_x)
            .then(a.y_lo.partial_cmp(&b.y_lo).expect("finite"))
    });
    let total = certificates.len();
    Ok(CountReport {
        target: target_for_radius(constr, &r),
        r,
        per_line,
        total,
        degenerate_lines,
        uncertain_samples,
        rejected_brackets,
        certificates,
    })
}

/// `Σ_{i≤k} n_i` when `r = 2^k` with `1 ≤ k ≤ N`.
pub fn target_for_radius(constr: &Construction, r: &Float) -> Option<usize> {
    (1..=constr.depth() as u32)
        .find(|&k| *r == Float::with_val(r.prec(), Float::i_exp(1, k as i32)))
        .map(|k| constr.n()[..k as usize].iter().map(|&v| v as usize).sum())
}

/// Predicted ordinates for the lines `x = ±2^(k−1)`.
fn seeds_for_line(constr: &Construction, x: i64) -> Vec<Float> {
    let ax = x.unsigned_abs();
    if !ax.is_power_of_two() {
        return Vec::new();
    }
    let k = ax.trailing_zeros() + 1;
    constr
        .level(k)
        .map(|l| margin_test_points(&l.block, constr.precision()))
        .unwrap_or_default()
}

/// One radius of [`check_mu_bound`].
#[derive(Clone, Debug)]
pub struct MuBoundRow {
    pub r: Float,
    /// `Σ_k a_k mu_u_bound(k, r)`
    pub certified: Float,
    /// `exp(r^{1+ε})`, rounded down.
    pub budget: Float,
    pub certified_ok: bool,
    /// Largest computed `|g|` on the sampled circle.
    pub sampled_g: Float,
    /// Largest computed `|h|` on the sampled circle.
    pub sampled_h: Float,
    /// `sqrt(exp(r^{1+ε}) + exp(2πr))`, the radicand as displayed in the
    /// growth argument.
    pub displayed_bound: Float,
    /// `sqrt(exp(2 r^{1+ε}) + exp(2πr))`, which is what `|h|² = g² + s²` gives.
    pub squared_bound: Float,
    pub sampled_g_ok: bool,
    pub sampled_h_ok_displayed: bool,
    pub sampled_h_ok_squared: bool,
}

#[derive(Clone, Debug)]
pub struct MuBoundReport {
    pub rows: Vec<MuBoundRow>,
}

impl MuBoundReport {
    /// The certified inequality and the sampled consistency checks.
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.certified_ok && r.sampled_g_ok && r.sampled_h_ok_squared)
    }

    pub fn to_json(&self, construction_hash: &str) -> Value {
        let s = |f: &Float| f.to_string_radix(10, Some(20));
        json!({
            "construction_hash": construction_hash,
            "rows": self.rows.iter().map(|r| json!({
                "r": s(&r.r),
                "certified": s(&r.certified),
                "budget": s(&r.budget),
                "certified_ok": r.certified_ok,
                "sampled_g": s(&r.sampled_g),
                "sampled_h": s(&r.sampled_h),
                "displayed_bound": s(&r.displayed_bound),
                "squared_bound": s(&r.squared_bound),
                "sampled_g_ok": r.sampled_g_ok,
                "sampled_h_ok_displayed": r.sampled_h_ok_displayed,
                "sampled_h_ok_squared": r.sampled_h_ok_squared,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Point `r(cos θ, sin θ)` rounded toward the origin, so it stays in `B_r`.
fn circle_point(r: &Float, i: usize, count: usize, prec: u32) -> (Float, Float) {
    let work = prec + 32;
    let theta = Float::with_val(work, Constant::Pi) * 2u32 * i as u32 / count as u32;
    let (s, c) = theta.sin_cos(Float::new(work));
    // sin and cos carry relative error below 2^-work; pull the radius in by more
    let shrink = Float::with_val(work, 1u32) - Float::with_val(work, Float::i_exp(1, 2 - work as i32));
    let r_in = Float::with_val_round(work, r * &shrink, Round::Down).0;
    let x = Float::with_val_round(prec, Float::with_val_round(work, &c * &r_in, Round::Zero).0, Round::Zero).0;
    let y = Float::with_val_round(prec, Float::with_val_round(work, &s * &r_in, Round::Zero).0, Round::Zero).0;
    (x, y)
}

/// Largest computed `|g|` and `|h|` over the sampled circle of radius `r`.
pub fn sampled_modulus(constr: &Construction, r: &Float, count: usize) -> Result<(Float, Float)> {
    let prec = constr.precision();
    let pts: Vec<(Float, Float)> = (0..count).map(|i| circle_point(r, i, count, prec)).collect();
    let vals = pts
        .par_iter()
        .map(|(x, y)| {
            let xd = DyadicRational::from_float(x).expect("finite");
            let h = constr.column(&xd).eval_h(y)?;
            Ok((Float::with_val(prec, h.g.value.abs_ref()), h.norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut g_max = Float::new(prec);
    let mut h_max = Float::new(prec);
    for (g, h) in vals {
        if g > g_max {
            g_max = g;
        }
        if h > h_max {
            h_max = h;
        }
    }
    Ok((g_max, h_max))
}

/// Growth checks at each radius: the certified bound against `exp(r^{1+ε})`,
/// and sampled maxima on 720 boundary points.
pub fn check_mu_bound(constr: &Construction, r_values: &[Float]) -> Result<MuBoundReport> {
    let prec = constr.precision();
    let rows = r_values
        .iter()
        .map(|r| {
            let r = Float::with_val(prec, r);
            let certified = constr.modulus_bound(&r);
            let budget = constr.modulus_budget(&r);
            let (sampled_g, sampled_h) = if r.is_zero() {
                let h = constr.column(&DyadicRational::from_int(0)).eval_h(&r)?;
                (Float::with_val(prec, h.g.value.abs_ref()), h.norm())
            } else {
                sampled_modulus(constr, &r, BOUNDARY_SAMPLES)?
            };
            let two_pi_r = Float::with_val(prec, Constant::Pi) * 2u32 * &r;
            let e_pi = Float::with_val(prec, two_pi_r.exp_ref());
            let budget_sq = Float::with_val(prec, budget.square_ref());
            let displayed_bound = Float::with_val(prec, &budget + &e_pi).sqrt();
            let squared_bound = Float::with_val(prec, &budget_sq + &e_pi).sqrt();
            // sampled values carry rounding far below these relative slacks
            let slack = Float::with_val(prec, 1u32) + Float::with_val(prec, Float::i_exp(1, 16 - prec as i32));
            let h_up = Float::with_val(prec, &sampled_h * &slack);
            Ok(MuBoundRow {
                certified_ok: certified <= budget,
                sampled_g_ok: Float::with_val(prec, &sampled_g * &slack) <= certified || sampled_g.is_zero(),
                sampled_h_ok_displayed: h_up <= displayed_bound,
                sampled_h_ok_squared: h_up <= squared_bound,
                r,
                certified,
                budget,
                sampled_g,
                sampled_h,
                displayed_bound,
                squared_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuBoundReport { rows })
}

/// Outcome of comparing `f` on the real plane with `h`.
#[derive(Clone, Debug)]
pub struct RestrictionReport {
    pub samples: usize,
    /// Largest `|f − h|` over both components.
    pub max_deviation: Float,
    /// Largest ratio of deviation to its combined rounding bound.
    pub max_ratio: f64,
    pub within_bound: bool,
    pub zero_checks: Vec<ZeroCheck>,
}

impl RestrictionReport {
    pub fn passed(&self) -> bool {
        self.within_bound && self.zero_checks.iter().all(ZeroCheck::passed)
    }
}

/// `f` and its complex Jacobian at a certified root.
#[derive(Clone, Debug)]
pub struct ZeroCheck {
    pub line_x: i64,
    pub root: Float,
    pub f_abs: Float,
    pub f_bound: Float,
    /// Finite-difference complex Jacobian determinant.
    pub complex_det: Complex,
    /// Relative gap between the complex and the real determinant.
    pub det_rel_gap: f64,
}

impl ZeroCheck {
    pub fn passed(&self) -> bool {
        self.f_abs <= self.f_bound && self.det_rel_gap < 1e-6 && !self.complex_det.is_zero()
    }
}

fn complex_abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

fn real_c(x: &Float, prec: u32) -> Complex {
    Complex::with_val(prec, (x, 0))
}

/// Both components of `f`, ignoring error bounds.
fn f_pair(constr: &Construction, z1: &Complex, z2: &Complex) -> Result<(Complex, Complex)> {
    let v = eval_f(constr, z1, z2)?;
    Ok((v.first, v.second))
}

/// Central differences `∂f/∂z1`, `∂f/∂z2` along the real direction.
fn complex_jacobian_fd(constr: &Construction, z1: &Complex, z2: &Complex, step: &Float) -> Result<[[Complex; 2]; 2]> {
    let prec = constr.precision();
    let hstep = real_c(step, prec);
    let two_h = Complex::with_val(prec, &hstep * 2u32);
    let d = |dz1: bool| -> Result<(Complex, Complex)> {
        let (p1, p2, m1, m2) = if dz1 {
            (
                Complex::with_val(prec, z1 + &hstep),
                z2.clone(),
                Complex::with_val(prec, z1 - &hstep),
                z2.clone(),
            )
        } else {
            (
                z1.clone(),
                Complex::with_val(prec, z2 + &hstep),
                z1.clone(),
                Complex::with_val(prec, z2 - &hstep),
            )
        };
        let (fp1, fp2) = f_pair(constr, &p1, &p2)?;
        let (fm1, fm2) = f_pair(constr, &m1, &m2)?;
        Ok((
            Complex::with_val(prec, &fp1 - &fm1) / &two_h,
            Complex::with_val(prec, &fp2 - &fm2) / &two_h,
        ))
    };
    let (f1_z1, f2_z1) = d(true)?;
    let (f1_z2, f2_z2) = d(false)?;
    Ok([[f1_z1, f1_z2], [f2_z1, f2_z2]])
}

fn random_point_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    loop {
        let x: f64 = rng.gen_range(-radius..=radius);
        let y: f64 = rng.gen_range(-radius..=radius);
        if x.hypot(y) <= radius {
            return (x, y);
        }
    }
}

/// `f` restricted to `R²` against `h` at random points of `B_{2^N}`, then
/// `f` and its complex Jacobian at each certified zero.
pub fn verify_restriction(
    constr: &Construction,
    sample_count: usize,
    seed: u64,
    certificates: &[ZeroCertificate],
) -> Result<RestrictionReport> {
    let prec = constr.precision();
    let radius = (1u64 << constr.depth()) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(f64, f64)> = (0..sample_count)
        .map(|_| random_point_in_disk(&mut rng, radius))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(x, y)| {
            let xf = Float::with_val(prec, x);
            let yf = Float::with_val(prec, y);
            let xd = DyadicRational::from_float(&xf).expect("finite");
            let h = constr.column(&xd).eval_h(&yf)?;
            let f = eval_f(constr, &real_c(&xf, prec), &real_c(&yf, prec))?;
            let d1 = complex_abs(&Complex::with_val(prec, &f.first - &h.g.value));
            let d2 = complex_abs(&Complex::with_val(prec, &f.second - &h.second.value));
            let b1 = add_up(&f.first_err, &h.g.rounding);
            let b2 = add_up(&f.second_err, &h.second.err);
            Ok((d1, b1, d2, b2))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut max_deviation = Float::new(prec);
    let mut max_ratio = 0f64;
    let mut within_bound = true;
    for (d1, b1, d2, b2) in rows {
        for (d, b) in [(d1, b1), (d2, b2)] {
            within_bound &= d <= b;
            if !b.is_zero() {
                max_ratio = max_ratio.max(Float::with_val(prec, &d / &b).to_f64());
            } else if !d.is_zero() {
                max_ratio = f64::INFINITY;
            }
            if d > max_deviation {
                max_deviation = d;
            }
        }
    }

    let zero_checks = certificates
        .par_iter()
        .map(|c| zero_check(constr, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(RestrictionReport {
        samples: sample_count,
        max_deviation,
        max_ratio,
        within_bound,
        zero_checks,
    })
}

fn zero_check(constr: &Construction, c: &ZeroCertificate) -> Result<ZeroCheck> {
    let prec = constr.precision();
    let xf = Float::with_val(prec, c.line_x);
    let z1 = real_c(&xf, prec);
    let z2 = real_c(&c.refined_root, prec);
    let f = eval_f(constr, &z1, &z2)?;
    let f_abs = {
        let a = complex_abs(&f.first);
        let b = complex_abs(&f.second);
        Float::with_val(prec, a.hypot(&b))
    };
    // |f1| ≤ |f1 − g_N| + |g_N|, |f2| within its rounding of the exact 0
    let f_bound = add_up(&add_up(&f.first_err, &c.residual_bound), &f.second_err);
    // the differences cancel terms far larger than the determinant, so work
    // with enough extra bits to resolve it
    let det_bits = c.jacobian_det.get_exp().map_or(0, |e| (-e).max(0) as u32);
    let wide = constr.with_precision(prec + det_bits + 128)?;
    let work = wide.precision();
    let step = Float::with_val(work, Float::i_exp(1, -20));
    let jac = complex_jacobian_fd(&wide, &real_c(&xf, work), &real_c(&c.refined_root, work), &step)?;
    let complex_det = Complex::with_val(work, &jac[0][0] * &jac[1][1]) - Complex::with_val(work, &jac[0][1] * &jac[1][0]);
    let complex_det = Complex::with_val(prec, complex_det);
    let real_det = Float::with_val(prec, &c.jacobian_det);
    let gap = complex_abs(&Complex::with_val(prec, &complex_det - &real_c(&real_det, prec)));
    let det_rel_gap = Float::with_val(prec, gap / real_det.abs()).to_f64();
    Ok(ZeroCheck {
        line_x: c.line_x,
        root: c.refined_root.clone(),
        f_abs,
        f_bound,
        complex_det,
        det_rel_gap,
    })
}

/// Largest relative Cauchy–Riemann residual over random complex points of
/// `B_radius ⊂ C²`: for each component and variable, the central difference
/// along the real direction against the one along the imaginary direction.
pub fn cauchy_riemann_residual(constr: &Construction, samples: usize, radius: f64, seed: u64) -> Result<f64> {
    let prec = constr.precision();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 4]> = (0..samples)
        .map(|_| {
            let p = unit_sphere_point(&mut rng);
            let s = radius * rng.gen::<f64>();
            [p[0] * s, p[1] * s, p[2] * s, p[3] * s]
        })
        .collect();
    let step = Float::with_val(prec, 1e-5);
    let worst = pts
        .par_iter()
        .map(|p| {
            let z1 = Complex::with_val(prec, (p[0], p[1]));
            let z2 = Complex::with_val(prec, (p[2], p[3]));
            let hr = Complex::with_val(prec, (&step, 0));
            let hi = Complex::with_val(prec, (0, &step));
            let mut worst = 0f64;
            for var in 0..2 {
                let shift = |h: &Complex, sign: i32| -> Result<(Complex, Complex)> {
                    let dh = Complex::with_val(prec, h * sign);
                    if var == 0 {
                        f_pair(constr, &Complex::with_val(prec, &z1 + &dh), &z2)
                    } else {
                        f_pair(constr, &z1, &Complex::with_val(prec, &z2 + &dh))
                    }
                };
                let (pr1, pr2) = shift(&hr, 1)?;
                let (mr1, mr2) = shift(&hr, -1)?;
                let (pi1, pi2) = shift(&hi, 1)?;
                let (mi1, mi2) = shift(&hi, -1)?;
                let two_hr = Complex::with_val(prec, &hr * 2u32);
                let two_hi = Complex::with_val(prec, &hi * 2u32);
                for (pr, mr, pi, mi) in [(pr1, mr1, pi1, mi1), (pr2, mr2, pi2, mi2)] {
                    let dr = Complex::with_val(prec, &pr - &mr) / &two_hr;
                    let di = Complex::with_val(prec, &pi - &mi) / &two_hi;
                    let scale = complex_abs(&dr).max(&complex_abs(&di));
                    if scale.is_zero() {
                        continue;
                    }
                    let res = complex_abs(&Complex::with_val(prec, &dr - &di)) / scale;
                    worst = worst.max(res.to_f64());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

fn unit_sphere_point(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let v: [f64; 4] = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// One radius of the extension-constant fit.
#[derive(Clone, Debug)]
pub struct ExtensionRow {
    pub r: f64,
    /// Sampled `μ(f, r)` over the sphere of radius `r` in `C²`.
    pub mu_f: Float,
    /// Sampled `μ(h, 2r)`.
    pub mu_h: Float,
    pub ratio: f64,
}

/// Measures `C` in `μ(f,r) ≤ C μ(h,2r)`: the largest sampled ratio.
pub fn extension_constant(
    constr: &Construction,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, Vec<ExtensionRow>)> {
    let prec = constr.precision();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &r in radii {
        let pts: Vec<[f64; 4]> = (0..samples).map(|_| unit_sphere_point(&mut rng)).collect();
        let mu_f = pts
            .par_iter()
            .map(|p| {
                let z1 = Complex::with_val(prec, (p[0] * r, p[1] * r));
                let z2 = Complex::with_val(prec, (p[2] * r, p[3] * r));
                let (a, b) = f_pair(constr, &z1, &z2)?;
                Ok(Float::with_val(prec, complex_abs(&a).hypot(&complex_abs(&b))))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(Float::new(prec), |m, v| if v > m { v } else { m });
        let (_, mu_h) = sampled_modulus(constr, &Float::with_val(prec, 2.0 * r), BOUNDARY_SAMPLES)?;
        let ratio = Float::with_val(prec, &mu_f / &mu_h).to_f64();
        rows.push(ExtensionRow { r, mu_f, mu_h, ratio });
    }
    let c = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((c, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::build_construction;

    fn small() -> Construction {
        build_construction(&[1, 2], &Float::with_val(64, 0.5), 2, 192).unwrap()
    }

    #[test]
    fn level_lines_carry_the_predicted_counts() {
        let c = small();
        assert_eq!(count_zeros_on_line(&c, 1).unwrap().len(), 1);
        let certs = count_zeros_on_line(&c, 2).unwrap();
        assert_eq!(certs.len(), 2);
        assert!(certs[0].y_hi <= certs[1].y_lo);
        for z in &certs {
            assert!(z.derivative_bound > 0);
            assert!(z.is_regular());
            assert_eq!(z.sign_lo, -z.sign_hi);
        }
    }

    #[test]
    fn small_ball_has_only_the_degenerate_line() {
        let c = small();
        let rep = count_zeros_ball(&c, &Float::with_val(64, 0.5)).unwrap();
        assert_eq!(rep.total, 0);
        assert_eq!(rep.degenerate_lines, vec![0]);
        assert!(rep.per_line.is_empty());
    }

    #[test]
    fn radius_beyond_depth_rejected() {
        let c = small();
        assert!(count_zeros_ball(&c, &Float::with_val(64, 4.5)).is_err());
    }

    #[test]
    fn jacobian_at_integer_line_has_exact_zero_entry() {
        let c = small();
        let j = jacobian_h(&c, 1, &Float::with_val(192, -0.2)).unwrap();
        assert!(j.s_y.is_exact_zero());
        assert!(j.s_x.value < 0);
    }
}
