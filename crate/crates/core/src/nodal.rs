//! Nodal set extraction by periodic marching squares, and length
//! measurements of the resulting segment soup.

use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::eigen::SampledField;
use crate::error::{Error, Result};
use crate::report::fmt17;
use crate::torus::{displacement, wrap, wrap_point, Point};

/// Replacement for grid values that are exactly zero.
pub const ZERO_NUDGE: f64 = 1e-30;

/// One piece of the nodal polyline, inside a single grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodalSegment {
    pub a: Point,
    pub b: Point,
    pub length: f64,
}

impl NodalSegment {
    /// Build from endpoints in periodic coordinates; the length is the
    /// flat periodic distance.
    pub fn new(a: Point, b: Point) -> Self {
        let a = wrap_point(a);
        let b = wrap_point(b);
        let d = displacement(a, b);
        Self {
            a,
            b,
            length: d[0].hypot(d[1]),
        }
    }

    /// Shortest displacement from `a` to `b`.
    pub fn delta(&self) -> Point {
        displacement(self.a, self.b)
    }

    pub fn midpoint(&self) -> Point {
        let d = self.delta();
        wrap_point([self.a[0] + 0.5 * d[0], self.a[1] + 0.5 * d[1]])
    }

    /// Portion of the segment inside the closed disk `B(center, r)`, as
    /// `(midpoint, length)` of the clipped piece. Requires `r < 1/2`.
    pub fn clip_to_ball(&self, center: Point, r: f64) -> Option<(Point, f64)> {
        let p = displacement(center, self.a);
        let d = self.delta();
        let dd = d[0] * d[0] + d[1] * d[1];
        if dd == 0.0 {
            return None;
        }
        let pd = p[0] * d[0] + p[1] * d[1];
        let pp = p[0] * p[0] + p[1] * p[1];
        let disc = pd * pd - dd * (pp - r * r);
        if disc <= 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let t0 = ((-pd - root) / dd).max(0.0);
        let t1 = ((-pd + root) / dd).min(1.0);
        if t1 <= t0 {
            return None;
        }
        let tm = 0.5 * (t0 + t1);
        let mid = wrap_point([self.a[0] + tm * d[0], self.a[1] + tm * d[1]]);
        Some((mid, (t1 - t0) * self.length))
    }
}

/// The discretized nodal set of a sampled eigenfunction.
#[derive(Clone, Debug)]
pub struct NodalSet {
    segments: Vec<NodalSegment>,
    total_length: f64,
    source_resolution: usize,
    source_lambda: f64,
    index: OnceLock<BucketIndex>,
}

impl NodalSet {
    pub fn from_segments(
        segments: Vec<NodalSegment>,
        source_resolution: usize,
        source_lambda: f64,
    ) -> Self {
        let total_length = segments.iter().map(|s| s.length).sum();
        Self {
            segments,
            total_length,
            source_resolution,
            source_lambda,
            index: OnceLock::new(),
        }
    }

    pub fn segments(&self) -> &[NodalSegment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn source_resolution(&self) -> usize {
        self.source_resolution
    }

    pub fn source_lambda(&self) -> f64 {
        self.source_lambda
    }

    /// `total_length / lambda`.
    pub fn yau_ratio(&self) -> f64 {
        self.total_length / self.source_lambda
    }

    fn index(&self) -> &BucketIndex {
        self.index
            .get_or_init(|| BucketIndex::build(&self.segments, self.source_resolution))
    }

    /// Indices of segments whose midpoints may lie within `reach` of `center`.
    fn candidates(&self, center: Point, reach: f64, mut visit: impl FnMut(&NodalSegment)) {
        let index = self.index();
        index.for_each_near(center, reach + 0.5 * index.max_length, |k| {
            visit(&self.segments[k])
        });
    }

    /// CSV with columns `ax,ay,bx,by,length`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ax,ay,bx,by,length")?;
        for s in &self.segments {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(s.a[0]),
                fmt17(s.a[1]),
                fmt17(s.b[0]),
                fmt17(s.b[1]),
                fmt17(s.length)
            )?;
        }
        Ok(())
    }
}

/// Uniform bucket grid over the torus keyed by segment midpoint.
#[derive(Clone, Debug)]
struct BucketIndex {
    per_axis: usize,
    starts: Vec<usize>,
    items: Vec<usize>,
    max_length: f64,
}

impl BucketIndex {
    fn build(segments: &[NodalSegment], resolution: usize) -> Self {
        let per_axis = (resolution / 8).clamp(1, 256);
        let bucket_of = |p: Point| {
            let bx = ((p[0] * per_axis as f64) as usize).min(per_axis - 1);
            let by = ((p[1] * per_axis as f64) as usize).min(per_axis - 1);
            bx * per_axis + by
        };
        let mut counts = vec![0usize; per_axis * per_axis + 1];
        let keys: Vec<usize> = segments.iter().map(|s| bucket_of(s.midpoint())).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; segments.len()];
        for (idx, &k) in keys.iter().enumerate() {
            items[fill[k]] = idx;
            fill[k] += 1;
        }
        let max_length = segments.iter().map(|s| s.length).fold(0.0, f64::max);
        Self {
            per_axis,
            starts: counts,
            items,
            max_length,
        }
    }

    fn axis_range(&self, c: f64, reach: f64) -> Vec<usize> {
        let b = self.per_axis as i64;
        let lo = ((c - reach) * b as f64).floor() as i64;
        let hi = ((c + reach) * b as f64).floor() as i64;
        if hi - lo + 1 >= b {
            (0..self.per_axis).collect()
        } else {
            (lo..=hi).map(|k| k.rem_euclid(b) as usize).collect()
        }
    }

    fn for_each_near(&self, center: Point, reach: f64, mut visit: impl FnMut(usize)) {
        let xs = self.axis_range(wrap(center[0]), reach);
        let ys = self.axis_range(wrap(center[1]), reach);
        for &bx in &xs {
            for &by in &ys {
                let k = bx * self.per_axis + by;
                for &item in &self.items[self.starts[k]..self.starts[k + 1]] {
                    visit(item);
                }
            }
        }
    }
}

/// Crossing point on the edge from corner `p` (value `vp`) to corner `q`
/// (value `vq`), by linear interpolation.
#[inline]
fn crossing(p: [f64; 2], q: [f64; 2], vp: f64, vq: f64) -> [f64; 2] {
    let t = vp / (vp - vq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn march_cell(field: &SampledField, i: i64, j: i64, out: &mut Vec<NodalSegment>) {
    let nudge = |v: f64| if v == 0.0 { ZERO_NUDGE } else { v };
    let v = [
        nudge(field.at(i, j)),
        nudge(field.at(i + 1, j)),
        nudge(field.at(i + 1, j + 1)),
        nudge(field.at(i, j + 1)),
    ];
    let pos = v.map(|x| x > 0.0);
    if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
        return;
    }
    let (x, y) = (i as f64, j as f64);
    let corners = [[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]];
    let edge = |k: usize| {
        let l = (k + 1) % 4;
        crossing(corners[k], corners[l], v[k], v[l])
    };
    let crossed: Vec<usize> = (0..4).filter(|&k| pos[k] != pos[(k + 1) % 4]).collect();
    let pairs: [(usize, usize); 2];
    let pairs: &[(usize, usize)] = match crossed.len() {
        2 => {
            pairs = [(crossed[0], crossed[1]), (0, 0)];
            &pairs[..1]
        }
        4 => {
            // saddle: the bilinear value at the cell center decides which
            // diagonal pair of corners is connected
            let center = 0.25 * (v[0] + v[1] + v[2] + v[3]);
            if (center > 0.0) == pos[0] {
                pairs = [(0, 1), (2, 3)];
            } else {
                pairs = [(3, 0), (1, 2)];
            }
            &pairs
        }
        _ => unreachable!("a closed cell boundary crosses zero an even number of times"),
    };
    let n = field.resolution() as f64;
    for &(e, f) in pairs {
        let p = edge(e);
        let q = edge(f);
        let length = (q[0] - p[0]).hypot(q[1] - p[1]) / n;
        if length > 0.0 {
            out.push(NodalSegment {
                a: wrap_point([p[0] / n, p[1] / n]),
                b: wrap_point([q[0] / n, q[1] / n]),
                length,
            });
        }
    }
}

/// Marching squares over all `N^2` periodic cells of `field`.
pub fn extract_nodal(field: &SampledField) -> NodalSet {
    let n = field.resolution() as i64;
    let rows: Vec<Vec<NodalSegment>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in 0..n {
                march_cell(field, i, j, &mut row);
            }
            row
        })
        .collect();
    NodalSet::from_segments(rows.concat(), field.resolution(), field.lambda())
}

fn check_ball(r: f64) -> Result<()> {
    if r > 0.0 && r < 0.5 {
        Ok(())
    } else {
        Err(Error::BallTooLarge { r })
    }
}

/// Nodal length inside the closed ball `B(center, r)`, `0 < r < 1/2`.
pub fn length_in_ball(nodal: &NodalSet, center: Point, r: f64) -> Result<f64> {
    check_ball(r)?;
    let mut total = 0.0;
    nodal.candidates(center, r, |s| {
        if let Some((_, len)) = s.clip_to_ball(center, r) {
            total += len;
        }
    });
    Ok(total)
}

/// `int_{N cap B(center, r)} f dH^1` by the midpoint rule on clipped pieces.
pub fn integrate_in_ball(
    nodal: &NodalSet,
    f: impl Fn(Point) -> f64,
    center: Point,
    r: f64,
) -> Result<f64> {
    check_ball(r)?;
    let mut total = 0.0;
    nodal.candidates(center, r, |s| {
        if let Some((mid, len)) = s.clip_to_ball(center, r) {
            total += f(mid) * len;
        }
    });
    Ok(total)
}

/// Clipped pieces of the nodal set inside `B(center, r)`.
pub fn pieces_in_ball(nodal: &NodalSet, center: Point, r: f64) -> Result<Vec<(Point, f64)>> {
    check_ball(r)?;
    let mut pieces = Vec::new();
    nodal.candidates(center, r, |s| pieces.extend(s.clip_to_ball(center, r)));
    Ok(pieces)
}

/// `int_N f dH^1`, midpoint rule on each segment.
pub fn integrate_over_nodal(nodal: &NodalSet, f: impl Fn(Point) -> f64) -> f64 {
    nodal
        .segments
        .iter()
        .map(|s| f(s.midpoint()) * s.length)
        .sum()
}
