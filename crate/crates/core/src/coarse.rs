//! Coarse zero counts: components of `{|h| ≤ δ} ∩ B_r` that contain a
//! certified zero, on a node grid.
//!
//! The grid has nodes `(i r/R, j r/R)` for `−R ≤ i, j ≤ R`, kept when
//! `i² + j² ≤ R²`. Components use 4-connectivity. Nodes nearest to certified
//! roots are always in the mask, so every zero-containing component at a
//! smaller `δ` sits inside one at a larger `δ`.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use rug::Float;
use serde_json::{json, Value};

use crate::assembly::Construction;
use crate::blocks::{DyadicRational, Rect};
use crate::certify::{sampled_modulus, ZeroCertificate, BOUNDARY_SAMPLES};
use crate::error::{Error, Result};

/// Smallest accepted grid half-resolution.
pub const MIN_RESOLUTION: usize = 16;

/// Default grid half-resolution.
pub const DEFAULT_RESOLUTION: usize = 512;

/// Sampled `ln|h|` on the node grid over `B_r`.
#[derive(Clone, Debug)]
pub struct Raster {
    pub r: f64,
    pub resolution: usize,
    /// Row-major over `j` then `i`, both shifted by `R`; `−∞` where `h`
    /// evaluates to exactly 0, NaN outside the disk.
    pub ln_abs: Vec<f64>,
    /// Node indices forced into every mask, one per certified root in `B_r`.
    pub zero_nodes: Vec<usize>,
}

impl Raster {
    pub fn side(&self) -> usize {
        2 * self.resolution + 1
    }

    pub fn index(&self, i: i64, j: i64) -> usize {
        let r = self.resolution as i64;
        ((j + r) as usize) * self.side() + (i + r) as usize
    }

    /// Grid offsets `(i, j)` of a node.
    pub fn offsets(&self, idx: usize) -> (i64, i64) {
        let r = self.resolution as i64;
        ((idx % self.side()) as i64 - r, (idx / self.side()) as i64 - r)
    }

    pub fn spacing(&self) -> f64 {
        self.r / self.resolution as f64
    }

    pub fn inside(&self, idx: usize) -> bool {
        let (i, j) = self.offsets(idx);
        let r = self.resolution as i64;
        i * i + j * j <= r * r
    }

    /// Nearest node to a point, if it lies in the disk.
    pub fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let s = self.spacing();
        let i = (x / s).round() as i64;
        let j = (y / s).round() as i64;
        let r = self.resolution as i64;
        (i * i + j * j <= r * r).then(|| self.index(i, j))
    }

    /// Mask of `{ln|h| ≤ ln δ}` plus the forced zero nodes; `δ = 0` keeps
    /// only exact zeros.
    pub fn mask(&self, delta: f64) -> Vec<bool> {
        let ln_delta = if delta == 0.0 { f64::NEG_INFINITY } else { delta.ln() };
        let mut m: Vec<bool> = self.ln_abs.iter().map(|&v| !v.is_nan() && v <= ln_delta).collect();
        for &z in &self.zero_nodes {
            m[z] = true;
        }
        m
    }
}

/// Samples `|h|` at every node of the disk grid of half-resolution `R`.
pub fn raster(constr: &Construction, r: f64, resolution: usize, certificates: &[ZeroCertificate]) -> Result<Raster> {
    check_inputs(constr, r, resolution)?;
    let prec = constr.precision();
    let side = 2 * resolution + 1;
    let rf = Float::with_val(prec, r);
    let coord = |i: i64| -> Float { Float::with_val(prec, &rf * i) / resolution as u32 };
    let columns: Vec<_> = (0..side)
        .map(|i| {
            let x = coord(i as i64 - resolution as i64);
            constr.column(&DyadicRational::from_float(&x).expect("finite"))
        })
        .collect();
    let rows = (0..side)
        .into_par_iter()
        .map(|jj| {
            let j = jj as i64 - resolution as i64;
            let y = coord(j);
            let e_pi_y = Float::with_val(prec, Float::with_val(prec, rug::float::Constant::Pi) * &y).exp();
            let mut row = vec![f64::NAN; side];
            let r2 = (resolution * resolution) as i64;
            // the powers depend on y only; each column skips its vanishing levels
            let powers = constr
                .levels()
                .iter()
                .map(|l| l.block.powers_at(&y, prec).map(Some))
                .collect::<Result<Vec<_>>>()?;
            for (ii, column) in columns.iter().enumerate() {
                let i = ii as i64 - resolution as i64;
                if i * i + j * j > r2 {
                    continue;
                }
                let g = column.g_fast(&powers);
                let s = Float::with_val(prec, &column.sin_pi_x().value * &e_pi_y);
                let h2 = Float::with_val(prec, g.square_ref()) + Float::with_val(prec, s.square_ref());
                row[ii] = if h2.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    (h2.ln() / 2u32).to_f64()
                };
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Raster {
        r,
        resolution,
        ln_abs: rows.concat(),
        zero_nodes: Vec::new(),
    };
    let mut zero_nodes: Vec<usize> = certificates
        .iter()
        .filter_map(|c| out.nearest(c.line_x as f64, c.refined_root.to_f64()))
        .collect();
    zero_nodes.sort_unstable();
    zero_nodes.dedup();
    out.zero_nodes = zero_nodes;
    Ok(out)
}

fn check_inputs(constr: &Construction, r: f64, resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let limit = (1u64 << constr.depth()) as f64;
    if !(r > 0.0 && r <= limit) {
        return Err(Error::InvalidArgument(format!("radius must lie in (0, {limit}]")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta < 0.0 || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be finite and non-negative, got {delta}")));
    }
    Ok(())
}

/// Component labels of a mask; 0 marks nodes outside it.
#[derive(Clone, Debug)]
pub struct Labels {
    pub labels: Vec<u32>,
    pub count: usize,
}

/// 4-connected flood fill of the masked disk nodes, labels in scan order.
pub fn label_components(raster: &Raster, mask: &[bool]) -> Labels {
    let side = raster.side();
    let mut labels = vec![0u32; mask.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (col, row) = (idx % side, idx / side);
            let mut visit = |n: usize| {
                if mask[n] && labels[n] == 0 {
                    labels[n] = count;
                    queue.push_back(n);
                }
            };
            if col > 0 {
                visit(idx - 1);
            }
            if col + 1 < side {
                visit(idx + 1);
            }
            if row > 0 {
                visit(idx - side);
            }
            if row + 1 < side {
                visit(idx + side);
            }
        }
    }
    Labels {
        labels,
        count: count as usize,
    }
}

/// A 4-connected component of the thresholded grid.
#[derive(Clone, Debug)]
pub struct CoarseComponent {
    /// Grid offsets `(i, j)` of the member nodes.
    pub cells: Vec<(i64, i64)>,
    pub contains_zero: bool,
    pub bbox: Rect,
}

impl CoarseComponent {
    /// Width of the bounding box in grid cells (the larger side).
    pub fn extent_cells(&self, spacing: f64) -> f64 {
        (self.bbox.width().max(self.bbox.height())) / spacing
    }
}

fn components_from(raster: &Raster, labels: &Labels) -> Vec<CoarseComponent> {
    let s = raster.spacing();
    let mut cells: Vec<Vec<(i64, i64)>> = vec![Vec::new(); labels.count];
    for (idx, &l) in labels.labels.iter().enumerate() {
        if l > 0 {
            cells[l as usize - 1].push(raster.offsets(idx));
        }
    }
    let mut has_zero = vec![false; labels.count];
    for &z in &raster.zero_nodes {
        has_zero[labels.labels[z] as usize - 1] = true;
    }
    cells
        .into_iter()
        .zip(has_zero)
        .map(|(cells, contains_zero)| {
            let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
            for &(i, j) in &cells {
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
            // half a cell of padding keeps single nodes non-degenerate
            let bbox = Rect {
                x0: (i0 as f64 - 0.5) * s,
                x1: (i1 as f64 + 0.5) * s,
                y0: (j0 as f64 - 0.5) * s,
                y1: (j1 as f64 + 0.5) * s,
            };
            CoarseComponent {
                cells,
                contains_zero,
                bbox,
            }
        })
        .collect()
}

/// Components of `{|h| ≤ δ} ∩ B_r` on the grid of half-resolution `R`.
pub fn sublevel_components(
    constr: &Construction,
    r: f64,
    delta: f64,
    resolution: usize,
    certificates: &[ZeroCertificate],
) -> Result<Vec<CoarseComponent>> {
    check_delta(delta)?;
    let raster = raster(constr, r, resolution, certificates)?;
    let labels = label_components(&raster, &raster.mask(delta));
    Ok(components_from(&raster, &labels))
}

fn zero_count(raster: &Raster, labels: &Labels) -> usize {
    let mut seen: Vec<u32> = raster.zero_nodes.iter().map(|&z| labels.labels[z]).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Number of components containing at least one certified zero.
pub fn coarse_zero_count(
    constr: &Construction,
    r: f64,
    delta: f64,
    resolution: usize,
    certificates: &[ZeroCertificate],
) -> Result<usize> {
    check_delta(delta)?;
    let raster = raster(constr, r, resolution, certificates)?;
    Ok(zero_count(&raster, &label_components(&raster, &raster.mask(delta))))
}

/// True when every component of `fine` lies inside a single component of
/// `coarse` (and the fine mask is contained in the coarse one).
pub fn refines(fine: &Labels, coarse: &Labels) -> bool {
    let mut image = vec![0u32; fine.count + 1];
    for (&f, &c) in fine.labels.iter().zip(&coarse.labels) {
        if f == 0 {
            continue;
        }
        if c == 0 {
            return false;
        }
        let slot = &mut image[f as usize];
        if *slot == 0 {
            *slot = c;
        } else if *slot != c {
            return false;
        }
    }
    true
}

/// Coarse counts along a sweep of thresholds, with the fitted shape constant.
#[derive(Clone, Debug)]
pub struct CoarseSweep {
    pub r: f64,
    pub resolution: usize,
    pub deltas: Vec<f64>,
    pub counts: Vec<usize>,
    /// Sampled `μ(h, 2r)`.
    pub mu_hat: f64,
    /// Smallest `Ĉ` with `count ≤ Ĉ (ln(μ̂/δ))²` over the sweep.
    pub fitted_c: f64,
    /// `Ĉ (ln(μ̂/δ))²` per threshold.
    pub bound_values: Vec<f64>,
    /// Every consecutive pair of masks passed the label refinement check.
    pub refinement_ok: bool,
    /// Distinct grid nodes holding a certified root.
    pub certified_zeros: usize,
}

impl CoarseSweep {
    pub fn monotone(&self) -> bool {
        self.counts.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_csv(&self, construction_hash: &str) -> String {
        let mut s = format!("# construction sha256={construction_hash}\n");
        s.push_str(&format!(
            "# r={} resolution={} mu_hat={:e} fitted_c={:e} certified_zeros={}\n",
            self.r, self.resolution, self.mu_hat, self.fitted_c, self.certified_zeros
        ));
        s.push_str("delta,count,bound\n");
        for ((d, c), b) in self.deltas.iter().zip(&self.counts).zip(&self.bound_values) {
            s.push_str(&format!("{d:e},{c},{b:e}\n"));
        }
        s
    }

    pub fn to_json(&self, construction_hash: &str) -> Value {
        json!({
            "construction_hash": construction_hash,
            "r": self.r,
            "resolution": self.resolution,
            "deltas": self.deltas,
            "counts": self.counts,
            "mu_hat": self.mu_hat,
            "fitted_c": self.fitted_c,
            "bound_values": self.bound_values,
            "refinement_ok": self.refinement_ok,
            "certified_zeros": self.certified_zeros,
        })
    }
}

/// `n` log-spaced thresholds from `hi` down to `lo`, returned ascending.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Sweep over an existing raster; `deltas` must be ascending and positive.
pub fn sweep_raster(raster: &Raster, deltas: &[f64], mu_hat: f64) -> Result<CoarseSweep> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("empty delta sweep".into()));
    }
    for &d in deltas {
        check_delta(d)?;
        if d == 0.0 {
            return Err(Error::InvalidArgument("sweep thresholds must be positive".into()));
        }
    }
    if deltas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sweep thresholds must be sorted ascending".into()));
    }
    let labels: Vec<Labels> = deltas
        .iter()
        .map(|&d| label_components(raster, &raster.mask(d)))
        .collect();
    let counts: Vec<usize> = labels.iter().map(|l| zero_count(raster, l)).collect();
    let refinement_ok = labels.windows(2).all(|w| refines(&w[0], &w[1]));
    let shape: Vec<f64> = deltas.iter().map(|&d| (mu_hat / d).ln().powi(2)).collect();
    let fitted_c = counts
        .iter()
        .zip(&shape)
        .filter(|(_, s)| **s > 0.0 && s.is_finite())
        .map(|(&c, &s)| c as f64 / s)
        .fold(0.0, f64::max);
    let bound_values = shape.iter().map(|s| fitted_c * s).collect();
    Ok(CoarseSweep {
        r: raster.r,
        resolution: raster.resolution,
        deltas: deltas.to_vec(),
        counts,
        mu_hat,
        fitted_c,
        bound_values,
        refinement_ok,
        certified_zeros: raster.zero_nodes.len(),
    })
}

/// Rasterizes once and counts zero-containing components for every `δ`.
pub fn coarse_sweep(
    constr: &Construction,
    r: f64,
    deltas: &[f64],
    resolution: usize,
    certificates: &[ZeroCertificate],
) -> Result<CoarseSweep> {
    let raster = raster(constr, r, resolution, certificates)?;
    let (_, mu) = sampled_modulus(constr, &Float::with_val(constr.precision(), 2.0 * r), BOUNDARY_SAMPLES)?;
    sweep_raster(&raster, deltas, mu.to_f64())
}

/// Pairs of certified roots in `B_r` closer than two grid cells; the grid
/// cannot be expected to separate these.
pub fn close_zero_pairs(certificates: &[ZeroCertificate], r: f64, resolution: usize) -> usize {
    let cell = r / resolution as f64;
    let pts: Vec<(f64, f64)> = certificates
        .iter()
        .map(|c| (c.line_x as f64, c.refined_root.to_f64()))
        .filter(|(x, y)| x.hypot(*y) <= r)
        .collect();
    let mut n = 0;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if (pts[a].0 - pts[b].0).hypot(pts[a].1 - pts[b].1) < 2.0 * cell {
                n += 1;
            }
        }
    }
    n
}

/// Counts at resolution `R` and `2R` for one `δ`.
#[derive(Clone, Debug)]
pub struct ResolutionCheck {
    pub delta: f64,
    pub count_low: usize,
    pub count_high: usize,
    /// Zero-containing components at `R` whose extent is at most 2 cells.
    pub small_components: usize,
}

impl ResolutionCheck {
    pub fn within_bound(&self) -> bool {
        self.count_low.abs_diff(self.count_high) <= self.small_components
    }
}

pub fn resolution_stability(
    constr: &Construction,
    r: f64,
    delta: f64,
    resolution: usize,
    certificates: &[ZeroCertificate],
) -> Result<ResolutionCheck> {
    check_delta(delta)?;
    let low = raster(constr, r, resolution, certificates)?;
    let labels = label_components(&low, &low.mask(delta));
    let small_components = components_from(&low, &labels)
        .iter()
        .filter(|c| c.contains_zero && c.extent_cells(low.spacing()) <= 3.0)
        .count();
    let count_low = zero_count(&low, &labels);
    let count_high = coarse_zero_count(constr, r, delta, 2 * resolution, certificates)?;
    Ok(ResolutionCheck {
        delta,
        count_low,
        count_high,
        small_components,
    })
}

/// Binary PGM of a mask (255 inside the mask, 0 elsewhere), top row first.
pub fn write_pgm<W: Write>(raster: &Raster, mask: &[bool], out: &mut W) -> std::io::Result<()> {
    let side = raster.side();
    write!(out, "P5\n{side} {side}\n255\n")?;
    let mut row = vec![0u8; side];
    for j in (0..side).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            *px = if mask[j * side + i] { 255 } else { 0 };
        }
        out.write_all(&row)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::build_construction;
    use crate::certify::count_zeros_ball;

    fn setup() -> (Construction, Vec<ZeroCertificate>) {
        let c = build_construction(&[1, 2], &Float::with_val(64, 0.5), 2, 128).unwrap();
        let certs = count_zeros_ball(&c, &Float::with_val(128, 2)).unwrap().certificates;
        (c, certs)
    }

    #[test]
    fn whole_disk_for_huge_delta() {
        let (c, certs) = setup();
        let comps = sublevel_components(&c, 2.0, 1e300, 16, &certs).unwrap();
        assert_eq!(comps.len(), 1);
        let disk = (-16i64..=16)
            .flat_map(|i| (-16i64..=16).map(move |j| (i, j)))
            .filter(|(i, j)| i * i + j * j <= 256)
            .count();
        assert_eq!(comps[0].cells.len(), disk);
        assert!(comps[0].contains_zero);
    }

    #[test]
    fn count_bounded_by_certificates() {
        let (c, certs) = setup();
        for d in [1e-3, 1e-9, 1e-20] {
            assert!(coarse_zero_count(&c, 2.0, d, 32, &certs).unwrap() <= certs.len());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let (c, certs) = setup();
        assert!(sublevel_components(&c, 2.0, -1.0, 16, &certs).is_err());
        assert!(sublevel_components(&c, 2.0, 0.1, 8, &certs).is_err());
        assert!(sublevel_components(&c, 5.0, 0.1, 16, &certs).is_err());
        assert!(sweep_raster(&raster(&c, 2.0, 16, &certs).unwrap(), &[0.1, 0.01], 1.0).is_err());
    }

    #[test]
    fn exact_zero_threshold_keeps_zero_lines() {
        let (c, certs) = setup();
        let r = raster(&c, 2.0, 16, &certs).unwrap();
        // g and the sine factor vanish identically on x = 0
        for j in -16..=16 {
            assert_eq!(r.ln_abs[r.index(0, j)], f64::NEG_INFINITY);
        }
        let labels = label_components(&r, &r.mask(0.0));
        assert!(labels.count >= 1);
    }

    #[test]
    fn sweep_is_monotone_and_refining() {
        let (c, certs) = setup();
        let r = raster(&c, 2.0, 32, &certs).unwrap();
        let deltas = log_spaced(1e-12, 1e-1, 12);
        let s = sweep_raster(&r, &deltas, 10.0).unwrap();
        assert!(s.monotone());
        assert!(s.refinement_ok);
        assert!(s.fitted_c.is_finite());
    }

    #[test]
    fn pgm_has_header_and_pixels() {
        let (c, certs) = setup();
        let r = raster(&c, 2.0, 16, &certs).unwrap();
        let mut buf = Vec::new();
        write_pgm(&r, &r.mask(0.5), &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n33 33\n255\n"));
        assert_eq!(buf.len(), "P5\n33 33\n255\n".len() + 33 * 33);
    }
}
