//! Maximal disjoint families of `r/2`-balls on the torus. Their `r`-balls
//! cover the torus, and in the flat metric no point lies in more than
//! `4^2 = 16` of them: the disjoint half-balls around centers within `r` of
//! a point all fit in the `2r`-ball about it.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::fmt17;
use crate::torus::{distance_sq, wrap, Point};

/// Flat overlap bound `(2r / (r/2))^2`.
pub const OVERLAP_BOUND: usize = 16;

/// Probe lattice per axis used to verify coverage and overlap.
pub const COVER_PROBES: usize = 512;

/// Candidate lattice spacing as a fraction of `r`.
const CANDIDATE_SPACING: f64 = 1.0 / 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub centers: Vec<Point>,
    pub half_radius: f64,
    pub full_radius: f64,
    pub overlap_max: usize,
    pub covers: bool,
}

impl BallFamily {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Smallest periodic distance between two distinct centers.
    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (k, a) in self.centers.iter().enumerate() {
            for b in &self.centers[k + 1..] {
                best = best.min(distance_sq(*a, *b));
            }
        }
        best.sqrt()
    }

    /// CSV with columns `x,y,radius` (full radius).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,radius")?;
        for c in &self.centers {
            writeln!(
                w,
                "{},{},{}",
                fmt17(c[0]),
                fmt17(c[1]),
                fmt17(self.full_radius)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> CoverSummary {
        CoverSummary {
            r: self.full_radius,
            count: self.centers.len(),
            overlap_max: self.overlap_max,
            covers: self.covers,
        }
    }
}

/// JSON summary `{r, count, overlap_max, covers}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSummary {
    pub r: f64,
    pub count: usize,
    pub overlap_max: usize,
    pub covers: bool,
}

/// Bucket grid with cell side at least `r`, so every center within `r` of
/// a point lies in the 3x3 block of buckets around it.
struct CenterGrid {
    per_axis: usize,
    buckets: Vec<Vec<Point>>,
}

impl CenterGrid {
    fn new(r: f64) -> Self {
        let per_axis = ((1.0 / r).floor() as usize).max(1);
        Self {
            per_axis,
            buckets: vec![Vec::new(); per_axis * per_axis],
        }
    }

    fn bucket(&self, t: f64) -> i64 {
        ((wrap(t) * self.per_axis as f64) as i64).min(self.per_axis as i64 - 1)
    }

    fn insert(&mut self, p: Point) {
        let k = self.bucket(p[0]) as usize * self.per_axis + self.bucket(p[1]) as usize;
        self.buckets[k].push(p);
    }

    fn neighbors(&self, p: Point) -> impl Iterator<Item = &Point> {
        let b = self.per_axis as i64;
        let span: Vec<i64> = if b < 3 {
            (0..b).collect()
        } else {
            vec![-1, 0, 1]
        };
        let (bx, by) = (self.bucket(p[0]), self.bucket(p[1]));
        let mut keys = Vec::with_capacity(9);
        for dx in &span {
            for dy in &span {
                let (x, y) = if b < 3 {
                    (*dx, *dy)
                } else {
                    ((bx + dx).rem_euclid(b), (by + dy).rem_euclid(b))
                };
                keys.push((x * b + y) as usize);
            }
        }
        keys.into_iter().flat_map(move |k| self.buckets[k].iter())
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r < 0.25 {
        Ok(())
    } else {
        Err(Error::RadiusTooLarge { r, max: 0.25 })
    }
}

/// Greedy maximal disjoint family of `r/2`-balls over a shuffled candidate
/// lattice of spacing `r/8`, then over the `512^2` probe lattice. Coverage
/// and overlap of the `r`-balls are measured on the probe lattice.
pub fn build_cover(r: f64, candidate_seed: u64) -> Result<BallFamily> {
    check_radius(r)?;
    let m = (1.0 / (CANDIDATE_SPACING * r)).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(candidate_seed);
    let r2 = r * r;
    let mut grid = CenterGrid::new(r);
    let mut centers = Vec::new();
    // second pass over the probe lattice fills the gaps the coarse
    // candidate lattice leaves near the r/8 slack
    for side in [m, COVER_PROBES] {
        let mut order: Vec<usize> = (0..side * side).collect();
        order.shuffle(&mut rng);
        for idx in order {
            let p = [
                (idx / side) as f64 / side as f64,
                (idx % side) as f64 / side as f64,
            ];
            if grid.neighbors(p).all(|c| distance_sq(*c, p) > r2) {
                grid.insert(p);
                centers.push(p);
            }
        }
    }
    let mut family = BallFamily {
        centers,
        half_radius: 0.5 * r,
        full_radius: r,
        overlap_max: 0,
        covers: false,
    };
    let hist = overlap_profile(&family, COVER_PROBES);
    family.covers = hist.first().copied().unwrap_or(0) == 0;
    family.overlap_max = hist.len().saturating_sub(1);
    Ok(family)
}

/// Histogram of how many full-radius balls contain each point of a
/// `probes x probes` lattice: entry `k` counts probes in exactly `k` balls.
pub fn overlap_profile(family: &BallFamily, probes: usize) -> Vec<usize> {
    let r = family.full_radius;
    let mut grid = CenterGrid::new(r);
    for &c in &family.centers {
        grid.insert(c);
    }
    let r2 = r * r;
    let counts: Vec<usize> = (0..probes)
        .into_par_iter()
        .flat_map_iter(|a| {
            let grid = &grid;
            (0..probes).map(move |b| {
                let p = [a as f64 / probes as f64, b as f64 / probes as f64];
                grid.neighbors(p)
                    .filter(|c| distance_sq(**c, p) <= r2)
                    .count()
            })
        })
        .collect();
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for c in counts {
        hist[c] += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cover_at_point_two() {
        let family = build_cover(0.2, 1).unwrap();
        assert!(family.min_pair_distance() > 0.2);
        assert!(family.covers);
        assert!(family.overlap_max <= OVERLAP_BOUND);
        let n = family.len() as f64;
        let pi = std::f64::consts::PI;
        assert!(n * pi * 0.01 <= 1.0 && n * pi * 0.04 >= 1.0);
    }

    #[test]
    fn radius_bound_enforced() {
        assert!(matches!(
            build_cover(0.25, 1),
            Err(Error::RadiusTooLarge { .. })
        ));
        assert!(build_cover(0.0, 1).is_err());
    }

    #[test]
    fn family_is_maximal_over_candidates() {
        let r = 0.1;
        let family = build_cover(r, 9).unwrap();
        let m = (1.0 / (CANDIDATE_SPACING * r)).ceil() as usize;
        for a in 0..m {
            for b in 0..m {
                let p = [a as f64 / m as f64, b as f64 / m as f64];
                assert!(family.centers.iter().any(|c| distance_sq(*c, p) <= r * r));
            }
        }
    }

    #[test]
    fn histogram_bounds() {
        let family = build_cover(0.15, 3).unwrap();
        let hist = overlap_profile(&family, 128);
        assert_eq!(hist[0], 0);
        assert!(hist.len() - 1 <= OVERLAP_BOUND);
        assert_eq!(hist.iter().sum::<usize>(), 128 * 128);
    }
}
