//! Marching-squares extraction of the zero level set of a sampled field.

use std::collections::HashMap;

use rug::Float;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let finite = [x0, x1, y0, y1].iter().all(|v| v.is_finite());
        if !finite || x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidArgument(format!(
                "degenerate bounding box [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

pub type Polyline = Vec<[f64; 2]>;

/// Node coordinates of a `resolution × resolution` cell grid over `rect`.
#[derive(Clone, Debug)]
pub struct Grid {
    pub rect: Rect,
    pub resolution: usize,
}

impl Grid {
    pub fn new(rect: Rect, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "resolution must be at least 2, got {resolution}"
            )));
        }
        Ok(Self { rect, resolution })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.rect.x0 + self.rect.width() * i as f64 / self.resolution as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.rect.y0 + self.rect.height() * j as f64 / self.resolution as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        let dx = self.rect.width() / self.resolution as f64;
        let dy = self.rect.height() / self.resolution as f64;
        dx.hypot(dy)
    }

    fn nodes(&self) -> usize {
        self.resolution + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum EdgeKey {
    /// (i, j) – (i + 1, j)
    Horizontal(usize, usize),
    /// (i, j) – (i, j + 1)
    Vertical(usize, usize),
}

/// Traces `{f = 0}` from node samples `values[j * (res + 1) + i]`.
///
/// Nodes with `f ≥ 0` are classified as non-negative, so exact zeros on a
/// grid column still produce a crossing on the adjacent edge. Saddle cells
/// ask `center` for the sign at the cell midpoint.
pub fn march<C>(grid: &Grid, values: &[Float], mut center: C) -> Vec<Polyline>
where
    C: FnMut(usize, usize) -> Float,
{
    let n = grid.nodes();
    assert_eq!(values.len(), n * n, "sample grid has the wrong size");
    let at = |i: usize, j: usize| &values[j * n + i];
    let nonneg = |v: &Float| !v.is_sign_negative() || v.is_zero();

    let mut vertices: HashMap<EdgeKey, [f64; 2]> = HashMap::new();
    let mut vertex = |key: EdgeKey| -> EdgeKey {
        vertices.entry(key).or_insert_with(|| {
            let (a, b, pa, pb) = match key {
                EdgeKey::Horizontal(i, j) => (
                    at(i, j),
                    at(i + 1, j),
                    [grid.x(i), grid.y(j)],
                    [grid.x(i + 1), grid.y(j)],
                ),
                EdgeKey::Vertical(i, j) => (
                    at(i, j),
                    at(i, j + 1),
                    [grid.x(i), grid.y(j)],
                    [grid.x(i), grid.y(j + 1)],
                ),
            };
            let denom = Float::with_val(a.prec(), a - b);
            let t = if denom.is_zero() {
                0.5
            } else {
                Float::with_val(a.prec(), a / &denom).to_f64().clamp(0.0, 1.0)
            };
            [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
        });
        key
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for j in 0..grid.resolution {
        for i in 0..grid.resolution {
            let bl = nonneg(at(i, j));
            let br = nonneg(at(i + 1, j));
            let tr = nonneg(at(i + 1, j + 1));
            let tl = nonneg(at(i, j + 1));
            let bottom = EdgeKey::Horizontal(i, j);
            let right = EdgeKey::Vertical(i + 1, j);
            let top = EdgeKey::Horizontal(i, j + 1);
            let left = EdgeKey::Vertical(i, j);
            let mut crossed = Vec::with_capacity(4);
            if bl != br {
                crossed.push(bottom);
            }
            if br != tr {
                crossed.push(right);
            }
            if tr != tl {
                crossed.push(top);
            }
            if tl != bl {
                crossed.push(left);
            }
            match crossed.len() {
                0 => {}
                2 => segments.push((vertex(crossed[0]), vertex(crossed[1]))),
                4 => {
                    let mid = nonneg(&center(i, j));
                    if mid == bl {
                        // bl and tr joined through the middle
                        segments.push((vertex(bottom), vertex(right)));
                        segments.push((vertex(top), vertex(left)));
                    } else {
                        segments.push((vertex(left), vertex(bottom)));
                        segments.push((vertex(right), vertex(top)));
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }
    join_segments(&segments, &vertices)
}

fn join_segments(segments: &[(EdgeKey, EdgeKey)], vertices: &HashMap<EdgeKey, [f64; 2]>) -> Vec<Polyline> {
    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(s);
        incident.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();

    let walk = |start_seg: usize, start_key: EdgeKey, used: &mut Vec<bool>| -> Polyline {
        let mut line = vec![vertices[&start_key]];
        let mut seg = start_seg;
        let mut key = start_key;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == key { b } else { a };
            line.push(vertices[&next]);
            key = next;
            match incident[&key].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        line
    };

    // Open chains first, starting from edges touched by a single segment.
    let mut ends: Vec<(EdgeKey, usize)> = incident
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(k, segs)| (*k, segs[0]))
        .collect();
    ends.sort_by_key(|(k, _)| sort_key(k));
    for (key, seg) in ends {
        if !used[seg] {
            out.push(walk(seg, key, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let start = segments[s].0;
            out.push(walk(s, start, &mut used));
        }
    }
    out
}

fn sort_key(k: &EdgeKey) -> (u8, usize, usize) {
    match *k {
        EdgeKey::Horizontal(i, j) => (0, j, i),
        EdgeKey::Vertical(i, j) => (1, j, i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<Float> {
        let n = grid.resolution + 1;
        let mut v = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                v.push(Float::with_val(53, f(grid.x(i), grid.y(j))));
            }
        }
        v
    }

    #[test]
    fn circle_is_one_closed_loop() {
        let grid = Grid::new(Rect::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 40).unwrap();
        let f = |x: f64, y: f64| x * x + y * y - 1.0;
        let values = sample(&grid, f);
        let lines = march(&grid, &values, |_, _| Float::with_val(53, 1));
        assert_eq!(lines.len(), 1);
        let line = &lines[0];
        assert_eq!(line.first(), line.last());
        for p in line {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn vertical_line_through_nodes() {
        let grid = Grid::new(Rect::new(0.0, 4.0, 0.0, 1.0).unwrap(), 8).unwrap();
        let values = sample(&grid, |x, _| x - 2.0);
        let lines = march(&grid, &values, |_, _| Float::with_val(53, 1));
        assert_eq!(lines.len(), 1);
        assert!(lines[0].iter().all(|p| (p[0] - 2.0).abs() <= 0.5));
    }

    #[test]
    fn positive_field_has_no_contour() {
        let grid = Grid::new(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 4).unwrap();
        let values = sample(&grid, |x, y| 1.0 + x + y);
        assert!(march(&grid, &values, |_, _| Float::with_val(53, 1)).is_empty());
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, 1.0, 2.0, 1.0).is_err());
        let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(Grid::new(r, 1).is_err());
    }
}
