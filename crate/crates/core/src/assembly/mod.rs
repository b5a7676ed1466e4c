//! Inductive assembly of `g = Σ a_k u_k` and the map `h = (g, sin(πx) e^{πy})`.
//!
//! Level `k` receives a modulus cap `A_k`, an amplitude `a_k` and a
//! perturbation margin `m_k`. The caps keep `Σ a_k μ(u_k, r) ≤ exp(r^{1+ε})`;
//! the amplitudes are small enough that every later level perturbs the zeros
//! already placed on `x = 2^(i−1)` by less than `m_i`. Evaluation of the
//! truncated series always reports the certified truncation tail alongside
//! the rounding error.

mod complex;
mod serial;

use std::cmp::Ordering;

use rug::float::{Constant, Round};
use rug::ops::Pow;
use rug::{Float, Rational};

pub use complex::{eval_f, FValue};
pub use serial::{ConstructionRecord, LevelRecord};

use crate::blocks::{
    cospi_dyadic, march, sinpi_dyadic, Block, BlockPhases, DyadicRational, ExpPowers, Grid, Polyline, Rect,
};
use crate::bounded::{add_up, mul_up, Bounded};
use crate::error::{Error, Result};

/// Lowest supported working precision.
pub const MIN_PRECISION: u32 = 53;

/// One level of the construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub k: u32,
    /// `c_k = n_k + 1`
    pub c: u32,
    /// Modulus cap `A_k`.
    pub cap: Float,
    /// Amplitude `a_k`.
    pub amplitude: Float,
    /// Perturbation margin `m_k`.
    pub margin: Float,
    pub block: Block,
}

/// Certified bound on `‖Σ_{i>k} a_i u_i‖_{C¹(B_{2^k})}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailBound {
    pub k: u32,
    pub depth: usize,
    /// Levels `k+1..=N` that were actually built, summed from their bounds.
    pub explicit: Float,
    /// `m_k 2^{−N}`, covering every level beyond the truncation.
    pub unbuilt: Float,
    pub value: Float,
}

#[derive(Clone, Debug)]
pub struct Construction {
    epsilon: Float,
    n: Vec<u32>,
    depth: usize,
    precision: u32,
    levels: Vec<Level>,
    tails: Vec<TailBound>,
}

/// Value of the truncated `g` with its rounding error and the truncation
/// tail of the enclosing dyadic ball.
#[derive(Clone, Debug)]
pub struct GValue {
    pub value: Float,
    pub rounding: Float,
    pub tail: Float,
    /// `K` with the point in `B_{2^K}`.
    pub ball_level: u32,
}

impl GValue {
    pub fn total_err(&self) -> Float {
        add_up(&self.rounding, &self.tail)
    }

    pub fn bounded(&self) -> Bounded {
        Bounded::with_err(self.value.clone(), self.total_err())
    }

    /// Sign of the full series, when the value clears rounding and tail.
    pub fn certified_sign(&self) -> Option<Ordering> {
        self.bounded().certified_sign(&Float::new(self.value.prec()))
    }
}

#[derive(Clone, Debug)]
pub struct HValue {
    pub g: GValue,
    /// `sin(πx) e^{πy}`
    pub second: Bounded,
}

impl HValue {
    /// `|h|` at the computed values (no error attached).
    pub fn norm(&self) -> Float {
        let p = self.g.value.prec();
        let a = Float::with_val(p, self.g.value.square_ref());
        let b = Float::with_val(p, self.second.value.square_ref());
        Float::with_val(p, a + b).sqrt()
    }
}

/// Closed-form minimizer of `r ↦ r^{1+ε} − (π/2) κ r` on `r ≥ 0`:
/// returns `(r*, M)` with `r* = (πκ / (2(1+ε)))^{1/ε}` and
/// `M = −r* (πκ/2) ε/(1+ε)`.
pub fn cap_minimizer(kappa: u32, epsilon: &Float, prec: u32) -> (Float, Float) {
    let eps = Float::with_val(prec, epsilon);
    let one_plus = Float::with_val(prec, &eps + 1u32);
    let slope = Float::with_val(prec, Constant::Pi) * kappa / 2u32;
    let base = Float::with_val(prec, &slope / &one_plus);
    let inv_eps = Float::with_val(prec, 1u32 / &eps);
    let r_star = Float::with_val(prec, (&base).pow(&inv_eps));
    let ratio = Float::with_val(prec, &eps / &one_plus);
    let m = -Float::with_val(prec, &r_star * &slope) * ratio;
    (r_star, m)
}

/// Modulus cap `A_k = 2^{−s} e^{M(κ)} / 2^{3c−2}` with `κ = 2c − 1` and
/// `s = max(κ, k)`. Any `a_k ≤ A_k` gives
/// `a_k 2^{3c−2} e^{(π/2)κ r} ≤ 2^{−s} e^{r^{1+ε}}` for all `r ≥ 0`.
pub fn compute_cap(k: u32, c: u32, epsilon: &Float, prec: u32) -> Float {
    let kappa = 2 * c - 1;
    let work = prec + 64;
    let (_, m) = cap_minimizer(kappa, epsilon, work);
    // absorb the rounding of the closed form: make M slightly more negative
    let slack = Float::with_val(work, Float::i_exp(1, -(prec as i32)));
    let m_lo = Float::with_val_round(work, &m * Float::with_val(work, 1u32 + &slack), Round::Down).0;
    let e = Float::with_val_round(work, m_lo.exp_ref(), Round::Down).0;
    let shift = kappa.max(k) + 3 * c - 2;
    Float::with_val_round(prec, e >> shift, Round::Down).0
}

fn min_float<'a>(xs: impl IntoIterator<Item = &'a Float>) -> Option<Float> {
    xs.into_iter()
        .fold(None, |acc: Option<Float>, x| match acc {
            Some(a) if a <= *x => Some(a),
            _ => Some(x.clone()),
        })
}

/// Amplitude at its allowed maximum,
/// `min(A_k, min(m_1..m_{k−1}) / (2^k ‖u_k‖_{C¹(B_{2^k})}))`, rounded down.
pub fn choose_amplitude(block: &Block, cap: &Float, prior_margins: &[Float], prec: u32) -> Result<Float> {
    let k = block.k();
    let a = match min_float(prior_margins) {
        None => cap.clone(),
        Some(min_m) => {
            let radius = Float::with_val(prec, Float::i_exp(1, k as i32));
            let norm = block.c1_norm_bound(&radius);
            let denom = mul_up(&norm, &radius);
            let limit = Float::with_val_round(prec, &min_m / &denom, Round::Down).0;
            if limit < *cap {
                limit
            } else {
                cap.clone()
            }
        }
    };
    if !a.is_normal() || a <= 0 {
        return Err(Error::Precision {
            level: k,
            reason: "amplitude underflowed".into(),
        });
    }
    Ok(a)
}

/// Ordinates where the margin of level `k` is measured: `−2^(k−1)`, the
/// midpoints between consecutive predicted zeros, and `0`.
pub fn margin_test_points(block: &Block, prec: u32) -> Vec<Float> {
    let k = block.k();
    let mut ys = vec![-Float::with_val(prec, Float::i_exp(1, k as i32 - 1))];
    let xi = block.xi_points(prec);
    for w in xi.windows(2) {
        ys.push(Float::with_val(prec, &w[0].y.value + &w[1].y.value) / 2u32);
    }
    ys.push(Float::new(prec));
    ys
}

/// Evaluates `Σ a_i u_i` over the given levels with rounding error only.
fn partial_sum(levels: &[Level], x: &DyadicRational, y: &Float, prec: u32) -> Result<Bounded> {
    let mut acc = Bounded::zero(prec);
    for lvl in levels {
        let phases = lvl.block.phases(x, prec);
        if phases.vanishes() {
            continue;
        }
        let u = phases.value(&lvl.block.powers_at(y, prec)?);
        acc = &acc + &u.scale(&lvl.amplitude);
    }
    Ok(acc)
}

/// Margin `m_k`: half the smallest certified `|g_k|` over the test points on
/// `x = 2^(k−1)`, after checking that the signs alternate there. `levels`
/// holds levels `1..=k` with `a_k` fixed.
pub fn choose_margin(levels: &[Level], prec: u32) -> Result<Float> {
    let last = levels
        .last()
        .ok_or_else(|| Error::InvalidArgument("choose_margin needs at least one level".into()))?;
    let k = last.k;
    let x = DyadicRational::pow2(k as i32 - 1);
    let mut lows = Vec::new();
    let mut prev: Option<Ordering> = None;
    for y in margin_test_points(&last.block, prec) {
        let g = partial_sum(levels, &x, &y, prec)?;
        let sign = g.certified_sign(&Float::new(prec)).ok_or_else(|| Error::Precision {
            level: k,
            reason: format!("|g_k| at y = {} does not exceed its error bound", y.to_f64()),
        })?;
        if prev == Some(sign) {
            return Err(Error::Precision {
                level: k,
                reason: format!("sign of g_k fails to alternate at y = {}", y.to_f64()),
            });
        }
        prev = Some(sign);
        lows.push(g.lower_abs());
    }
    let min_low = min_float(&lows).expect("at least two test points");
    let m = Float::with_val_round(prec, min_low >> 1u32, Round::Down).0;
    if m <= 0 || !m.is_normal() {
        return Err(Error::Precision {
            level: k,
            reason: "margin is not strictly positive".into(),
        });
    }
    Ok(m)
}

/// Runs the induction for `k = 1..=depth` with `c_k = n_k + 1`.
pub fn build_construction(n: &[u32], epsilon: &Float, depth: usize, precision: u32) -> Result<Construction> {
    validate_inputs(n, epsilon, depth, precision)?;
    let mut levels: Vec<Level> = Vec::with_capacity(depth);
    for (idx, &nk) in n.iter().take(depth).enumerate() {
        let k = idx as u32 + 1;
        let c = nk + 1;
        let block = Block::for_level(k, c)?;
        let cap = compute_cap(k, c, epsilon, precision);
        let margins: Vec<Float> = levels.iter().map(|l| l.margin.clone()).collect();
        let amplitude = choose_amplitude(&block, &cap, &margins, precision)?;
        levels.push(Level {
            k,
            c,
            cap,
            amplitude,
            margin: Float::new(precision),
            block,
        });
        let margin = choose_margin(&levels, precision)?;
        levels.last_mut().expect("just pushed").margin = margin;
    }
    Construction::from_levels(n.to_vec(), Float::with_val(precision, epsilon), depth, precision, levels)
}

fn validate_inputs(n: &[u32], epsilon: &Float, depth: usize, precision: u32) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if depth > n.len() {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} exceeds the length {} of the zero-count sequence",
            n.len()
        )));
    }
    if n.contains(&0) {
        return Err(Error::InvalidArgument("zero counts n_k must be positive".into()));
    }
    if !epsilon.is_finite() || *epsilon <= 0 {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if precision < MIN_PRECISION {
        return Err(Error::InvalidArgument(format!(
            "precision must be at least {MIN_PRECISION} bits"
        )));
    }
    Ok(())
}

/// Tail bound over `B_{2^k}` for the given levels.
fn compute_tail(levels: &[Level], k: u32, prec: u32) -> TailBound {
    let depth = levels.len();
    let radius = Float::with_val(prec, Float::i_exp(1, k as i32));
    let explicit = levels
        .iter()
        .filter(|l| l.k > k)
        .fold(Float::new(prec), |acc, l| {
            add_up(&acc, &mul_up(&l.amplitude, &l.block.c1_norm_bound(&radius)))
        });
    let unbuilt = Float::with_val(prec, &levels[k as usize - 1].margin >> depth as u32);
    let value = add_up(&explicit, &unbuilt);
    TailBound {
        k,
        depth,
        explicit,
        unbuilt,
        value,
    }
}

/// Exact test of `x² + y² ≤ 4^K`; returns the smallest such `K ≥ 1`.
pub fn enclosing_ball_level(x: &DyadicRational, y: &Float) -> Option<u32> {
    let xr = Rational::from((x.numerator().clone(), rug::Integer::from(1) << x.exponent()));
    let yr = y.to_rational()?;
    ball_level_of_norm2(&(Rational::from(xr.square_ref()) + Rational::from(yr.square_ref())))
}

/// Smallest `K ≥ 1` with `norm2 ≤ 4^K`.
pub fn ball_level_of_norm2(norm2: &Rational) -> Option<u32> {
    let mut k = 1u32;
    let mut bound = Rational::from(4);
    while *norm2 > bound {
        k += 1;
        bound *= 4;
        if k > 4096 {
            return None;
        }
    }
    Some(k)
}

impl Construction {
    /// Assembles a construction from finished levels and derives its tails.
    pub fn from_levels(
        n: Vec<u32>,
        epsilon: Float,
        depth: usize,
        precision: u32,
        levels: Vec<Level>,
    ) -> Result<Self> {
        validate_inputs(&n, &epsilon, depth, precision)?;
        if levels.len() != depth {
            return Err(Error::Format(format!(
                "expected {depth} levels, found {}",
                levels.len()
            )));
        }
        for (idx, l) in levels.iter().enumerate() {
            if l.k as usize != idx + 1 || l.c != n[idx] + 1 || l.block.c() != l.c || l.block.k() != l.k {
                return Err(Error::Format(format!("level {} is inconsistent with n", idx + 1)));
            }
        }
        let tails = (1..=depth as u32)
            .map(|k| compute_tail(&levels, k, precision))
            .collect();
        Ok(Self {
            epsilon,
            n,
            depth,
            precision,
            levels,
            tails,
        })
    }

    /// The same construction evaluated at a higher precision. Stored values
    /// convert exactly; tails are recomputed.
    pub fn with_precision(&self, precision: u32) -> Result<Self> {
        if precision < self.precision {
            return Err(Error::InvalidArgument(format!(
                "cannot lower precision from {} to {precision}",
                self.precision
            )));
        }
        let widen = |f: &Float| Float::with_val(precision, f);
        let levels = self
            .levels
            .iter()
            .map(|l| Level {
                k: l.k,
                c: l.c,
                cap: widen(&l.cap),
                amplitude: widen(&l.amplitude),
                margin: widen(&l.margin),
                block: l.block.clone(),
            })
            .collect();
        Self::from_levels(self.n.clone(), widen(&self.epsilon), self.depth, precision, levels)
    }

    pub fn epsilon(&self) -> &Float {
        &self.epsilon
    }

    pub fn n(&self) -> &[u32] {
        &self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Level `k` (1-based).
    pub fn level(&self, k: u32) -> Option<&Level> {
        self.levels.get((k as usize).checked_sub(1)?)
    }

    /// Tail bound over `B_{2^k}`, `1 ≤ k ≤ N`.
    pub fn tail_bound(&self, k: u32) -> Option<&TailBound> {
        self.tails.get((k as usize).checked_sub(1)?)
    }

    pub fn tails(&self) -> &[TailBound] {
        &self.tails
    }

    /// Tail bound for the ball `B_{2^K}`; errors when `K > N`.
    pub fn tail_for_ball(&self, ball_level: u32, norm: impl FnOnce() -> String) -> Result<&TailBound> {
        self.tail_bound(ball_level).ok_or_else(|| Error::OutsideTailDomain {
            norm: norm(),
            depth: self.depth,
        })
    }

    /// Bound on the neglected levels `i > N` at any point of `B_{2^K}`.
    ///
    /// Every such level obeys `a_i ‖u_i‖_{C¹(B_{2^i})} ≤ m_j 2^{−i}` for each
    /// `j < i`, and `B_{2^K} ⊂ B_{2^j}` for `K ≤ j ≤ N`, so the smallest
    /// `m_j 2^{−N}` over those `j` applies (value and first derivatives).
    pub fn truncation_error(&self, ball_level: u32) -> Option<Float> {
        let start = (ball_level as usize).checked_sub(1)?;
        min_float(self.tails.get(start..)?.iter().map(|t| &t.unbuilt))
    }

    /// Per-abscissa evaluator that caches every level's phases.
    pub fn column(&self, x: &DyadicRational) -> Column<'_> {
        let prec = self.precision;
        Column {
            constr: self,
            x: x.clone(),
            phases: self.levels.iter().map(|l| l.block.phases(x, prec)).collect(),
            sin_pi_x: sinpi_dyadic(x, prec),
            cos_pi_x: cospi_dyadic(x, prec),
        }
    }

    /// Certified `Σ_k a_k mu_u_bound(k, r)`, rounded upward.
    pub fn modulus_bound(&self, r: &Float) -> Float {
        let r = Float::with_val(self.precision, r);
        self.levels.iter().fold(Float::new(self.precision), |acc, l| {
            add_up(&acc, &mul_up(&l.amplitude, &l.block.mu_u_bound(&r)))
        })
    }

    /// `exp(r^{1+ε})`, rounded downward.
    pub fn modulus_budget(&self, r: &Float) -> Float {
        let p = self.precision;
        let r = Float::with_val(p, r);
        if r.is_zero() {
            return Float::with_val(p, 1);
        }
        let expo = Float::with_val_round(p, &self.epsilon + 1u32, Round::Down).0;
        let expo = if r >= 1 { expo } else { Float::with_val_round(p, &self.epsilon + 1u32, Round::Up).0 };
        let lo = Float::with_val_round(p, (&r).pow(&expo), Round::Down).0;
        Float::with_val_round(p, lo.exp_ref(), Round::Down).0
    }

    /// Zero set of the truncated `g` inside `bbox` as polylines, from node
    /// signs on a `resolution × resolution` cell grid.
    pub fn trace_zero_set(&self, bbox: &Rect, resolution: usize) -> Result<Vec<Polyline>> {
        let prec = self.precision;
        let grid = Grid::new(*bbox, resolution)?;
        let n = resolution + 1;
        let dyadic = |v: f64| {
            DyadicRational::from_f64(v).ok_or_else(|| Error::InvalidArgument("non-finite grid coordinate".into()))
        };
        let columns = (0..n)
            .map(|i| Ok(self.column(&dyadic(grid.x(i))?)))
            .collect::<Result<Vec<_>>>()?;
        let row_powers = |y: f64| -> Result<Vec<Option<ExpPowers>>> {
            let y = Float::with_val(prec, y);
            self.levels
                .iter()
                .map(|l| l.block.powers_at(&y, prec).map(Some))
                .collect()
        };
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            let powers = row_powers(grid.y(j))?;
            values.extend(columns.iter().map(|c| c.g_fast(&powers)));
        }
        Ok(march(&grid, &values, |i, j| {
            let xc = 0.5 * (grid.x(i) + grid.x(i + 1));
            let yc = 0.5 * (grid.y(j) + grid.y(j + 1));
            match (dyadic(xc), row_powers(yc)) {
                (Ok(x), Ok(p)) => self.column(&x).g_fast(&p),
                _ => Float::with_val(prec, 1),
            }
        }))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_json_compact().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Invariant recheck of one level against stored values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelAudit {
    pub k: u32,
    /// `0 < a_k ≤ A_k`
    pub amplitude_within_cap: bool,
    /// `a_k 2^k ‖u_k‖ ≤ min(m_1..m_{k−1})`, compared exactly; true for `k = 1`.
    pub perturbation_condition: bool,
    /// `tail_bound(k) < m_k`
    pub tail_below_margin: bool,
    pub margin_positive: bool,
    /// Stored `m_k` does not exceed the margin recomputed from stored levels.
    pub margin_reproduced: bool,
}

impl LevelAudit {
    pub fn passed(&self) -> bool {
        self.amplitude_within_cap
            && self.perturbation_condition
            && self.tail_below_margin
            && self.margin_positive
            && self.margin_reproduced
    }
}

fn exact(x: &Float) -> Rational {
    x.to_rational().expect("stored values are finite")
}

impl Construction {
    /// Rechecks the construction invariants level by level.
    pub fn audit(&self) -> Vec<LevelAudit> {
        let p = self.precision;
        self.levels
            .iter()
            .enumerate()
            .map(|(idx, l)| {
                let perturbation_condition = match min_float(self.levels[..idx].iter().map(|l| &l.margin)) {
                    None => true,
                    Some(min_m) => {
                        let radius = Float::with_val(p, Float::i_exp(1, l.k as i32));
                        let norm = exact(&l.block.c1_norm_bound(&radius));
                        let lhs = exact(&l.amplitude) * norm * exact(&radius);
                        lhs <= exact(&min_m)
                    }
                };
                let tail = &self.tails[idx];
                let margin_reproduced = choose_margin(&self.levels[..=idx], p)
                    .map(|m| l.margin <= m)
                    .unwrap_or(false);
                LevelAudit {
                    k: l.k,
                    amplitude_within_cap: l.amplitude > 0 && l.amplitude <= l.cap,
                    perturbation_condition,
                    tail_below_margin: tail.value < l.margin,
                    margin_positive: l.margin > 0,
                    margin_reproduced,
                }
            })
            .collect()
    }
}

/// Evaluator of `g`, `∇g` and `h` along a fixed vertical line.
pub struct Column<'a> {
    constr: &'a Construction,
    x: DyadicRational,
    phases: Vec<BlockPhases>,
    sin_pi_x: Bounded,
    cos_pi_x: Bounded,
}

impl Column<'_> {
    pub fn x(&self) -> &DyadicRational {
        &self.x
    }

    pub fn sin_pi_x(&self) -> &Bounded {
        &self.sin_pi_x
    }

    pub fn cos_pi_x(&self) -> &Bounded {
        &self.cos_pi_x
    }

    fn prec(&self) -> u32 {
        self.constr.precision
    }

    /// Powers of `exp(π y/2^k)` for every level that does not vanish here.
    pub fn powers(&self, y: &Float) -> Result<Vec<Option<ExpPowers>>> {
        self.constr
            .levels
            .iter()
            .zip(&self.phases)
            .map(|(l, ph)| {
                if ph.vanishes() {
                    Ok(None)
                } else {
                    l.block.powers_at(y, self.prec()).map(Some)
                }
            })
            .collect()
    }

    /// Truncated `Σ_{k≤N} a_k u_k` with rounding error only.
    pub fn g_rounded(&self, y: &Float) -> Result<Bounded> {
        let prec = self.prec();
        let mut acc = Bounded::zero(prec);
        for (l, ph) in self.constr.levels.iter().zip(&self.phases) {
            if ph.vanishes() {
                continue;
            }
            let pw = l.block.powers_at(y, prec)?;
            acc = &acc + &ph.value(&pw).scale(&l.amplitude);
        }
        Ok(acc)
    }

    /// Truncated gradient `(∂g/∂x, ∂g/∂y)` with rounding error only.
    pub fn grad_rounded(&self, y: &Float) -> Result<(Bounded, Bounded)> {
        let prec = self.prec();
        let mut dx = Bounded::zero(prec);
        let mut dy = Bounded::zero(prec);
        for (l, ph) in self.constr.levels.iter().zip(&self.phases) {
            let pw = l.block.powers_at(y, prec)?;
            let (gx, gy) = ph.gradient(&pw);
            dx = &dx + &gx.scale(&l.amplitude);
            dy = &dy + &gy.scale(&l.amplitude);
        }
        Ok((dx, dy))
    }

    /// Upper bound on `|∂²g_N/∂y²|` over `y ≤ y_max`.
    pub fn dyy_bound(&self, y_max: &Float) -> Float {
        let prec = self.prec();
        let y = Float::with_val(prec, y_max);
        self.constr
            .levels
            .iter()
            .zip(&self.phases)
            .filter(|(_, ph)| !ph.vanishes())
            .fold(Float::new(prec), |acc, (l, _)| {
                add_up(&acc, &mul_up(&l.amplitude, &l.block.y_derivative_bound(2, &y)))
            })
    }

    /// Smallest dyadic ball level containing `(x, y)`, checked against `N`.
    pub fn ball_level(&self, y: &Float) -> Result<u32> {
        let k = enclosing_ball_level(&self.x, y).unwrap_or(u32::MAX);
        self.constr
            .tail_for_ball(k, || format_norm(&self.x, y))
            .map(|t| t.k)
    }

    pub fn eval_g(&self, y: &Float) -> Result<GValue> {
        let ball_level = self.ball_level(y)?;
        let tail = self.constr.truncation_error(ball_level).expect("checked");
        let g = self.g_rounded(y)?;
        Ok(GValue {
            value: g.value,
            rounding: g.err,
            tail,
            ball_level,
        })
    }

    /// `sin(πx) e^{πy}`.
    pub fn second(&self, y: &Float) -> Result<Bounded> {
        if self.sin_pi_x.is_exact_zero() {
            return Ok(Bounded::zero(self.prec()));
        }
        let e = Bounded::pi(self.prec())
            .scale(y)
            .exp()
            .ok_or(Error::Overflow { level: 0 })?;
        Ok(&self.sin_pi_x * &e)
    }

    pub fn eval_h(&self, y: &Float) -> Result<HValue> {
        Ok(HValue {
            g: self.eval_g(y)?,
            second: self.second(y)?,
        })
    }

    /// Truncated `g` without error tracking.
    pub fn g_fast(&self, powers: &[Option<ExpPowers>]) -> Float {
        let prec = self.prec();
        let mut acc = Float::new(prec);
        for ((l, ph), pw) in self.constr.levels.iter().zip(&self.phases).zip(powers) {
            if let Some(pw) = pw {
                if !ph.vanishes() {
                    acc += Float::with_val(prec, &l.amplitude * ph.value_fast(pw));
                }
            }
        }
        acc
    }
}

fn format_norm(x: &DyadicRational, y: &Float) -> String {
    let xf = x.to_f64();
    let yf = y.to_f64();
    format!("{}", xf.hypot(yf))
}

pub fn eval_g(constr: &Construction, x: &DyadicRational, y: &Float) -> Result<GValue> {
    constr.column(x).eval_g(y)
}

pub fn eval_h(constr: &Construction, x: &DyadicRational, y: &Float) -> Result<HValue> {
    constr.column(x).eval_h(y)
}

pub fn tail_bound(constr: &Construction, k: u32) -> Option<TailBound> {
    constr.tail_bound(k).cloned()
}

/// `(h(x1, x2), x3, …, xd)` for `d ≥ 3`.
pub fn lift_dim(constr: &Construction, point: &[Float]) -> Result<Vec<Bounded>> {
    if point.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "dimension lift needs d >= 3, got {}",
            point.len()
        )));
    }
    let x = DyadicRational::from_float(&point[0])
        .ok_or_else(|| Error::InvalidArgument("non-finite coordinate".into()))?;
    let y = Float::with_val(constr.precision(), &point[1]);
    let h = eval_h(constr, &x, &y)?;
    let mut out = vec![h.g.bounded(), h.second];
    out.extend(point[2..].iter().map(|v| Bounded::exact(v.clone())));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(v: f64) -> Float {
        Float::with_val(64, v)
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_construction(&[1, 2], &eps(0.5), 3, 256).is_err());
        assert!(build_construction(&[1, 2], &eps(0.0), 2, 256).is_err());
        assert!(build_construction(&[1, 2], &eps(-1.0), 2, 256).is_err());
        assert!(build_construction(&[0, 2], &eps(0.5), 2, 256).is_err());
        assert!(build_construction(&[1, 2], &eps(0.5), 0, 256).is_err());
        assert!(build_construction(&[1, 2], &eps(0.5), 2, 32).is_err());
    }

    #[test]
    fn single_level_uses_the_cap() {
        let c = build_construction(&[3], &eps(0.5), 1, 128).unwrap();
        let l = &c.levels()[0];
        assert_eq!(l.amplitude, l.cap);
        assert!(l.margin > 0);
    }

    #[test]
    fn cap_limit_for_large_epsilon() {
        // r* -> 1 so M -> -πκ/2 from above, not 0
        let p = 128;
        let a = compute_cap(1, 2, &eps(1e6), p);
        let pi = Float::with_val(p, Constant::Pi);
        let limit = Float::with_val(p, -pi * 3u32 / 2u32).exp() >> (3 + 3 * 2 - 2);
        assert!(a > limit);
        let rel = Float::with_val(p, &a - &limit) / &limit;
        assert!(rel < 1e-4);
        assert!(a < Float::with_val(p, Float::i_exp(1, -(3 + 3 * 2 - 2))));
    }

    #[test]
    fn margin_is_linear_in_amplitude() {
        let p = 256;
        let mut c = build_construction(&[1], &eps(0.5), 1, p).unwrap().levels().to_vec();
        let m1 = choose_margin(&c, p).unwrap();
        c[0].amplitude = Float::with_val(p, &c[0].amplitude * 2u32);
        let m2 = choose_margin(&c, p).unwrap();
        let ratio = Float::with_val(p, &m2 / &m1).to_f64();
        assert!((ratio - 2.0).abs() < 1e-60);
    }

    #[test]
    fn enclosing_ball_is_exact() {
        let y0 = Float::with_val(64, 0);
        assert_eq!(enclosing_ball_level(&DyadicRational::from_int(2), &y0), Some(1));
        assert_eq!(enclosing_ball_level(&DyadicRational::from_int(3), &y0), Some(2));
        assert_eq!(enclosing_ball_level(&DyadicRational::from_int(4), &y0), Some(2));
        let y = Float::with_val(64, 1e-10);
        assert_eq!(enclosing_ball_level(&DyadicRational::from_int(4), &y), Some(3));
        assert_eq!(enclosing_ball_level(&DyadicRational::from_int(0), &y0), Some(1));
    }
}
