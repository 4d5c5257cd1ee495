//! L^2 mass of sampled eigenfunctions in small balls, small-scale
//! functions `r(lambda) = lambda^-rho`, and the empirical comparability
//! constants `D1 <= (int_B |u|^2) / Vol(B) <= D2`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::SampledField;
use crate::error::{Error, Result};
use crate::report::{fmt17, min_median_max};
use crate::torus::{wrap_point, Point};

/// Minimum `r * N` for a ball to count as resolved.
pub const MIN_CELLS_PER_RADIUS: f64 = 20.0;

/// Sub-samples per axis used to weight cells cut by the ball boundary.
const BOUNDARY_SUBSAMPLES: usize = 4;

/// Number of random centers added to the default lattice plan.
pub const RANDOM_EXTRA_CENTERS: usize = 100;

/// A small-scale function `r(lambda) = lambda^-rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction {
    rho: f64,
}

impl ScaleFunction {
    /// `rho` must lie in `(0, 1]`.
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho <= 1.0 {
            Ok(Self { rho })
        } else {
            Err(Error::InvalidParameter(format!(
                "scale exponent rho = {rho} outside (0, 1]: r(lambda) = lambda^-rho is not a small-scale function"
            )))
        }
    }

    /// Scale function admissible on the 2-torus, `rho` in `(0, 1/(n-1)) = (0, 1)`.
    pub fn for_torus(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho < 1.0 {
            Ok(Self { rho })
        } else {
            Err(Error::InvalidParameter(format!(
                "scale exponent rho = {rho} outside (0, 1): small-scale equidistribution on the 2-torus needs 0 < rho < 1"
            )))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn radius(&self, lambda: f64) -> f64 {
        lambda.powf(-self.rho)
    }
}

impl Default for ScaleFunction {
    fn default() -> Self {
        Self { rho: 0.5 }
    }
}

/// Quadrature weights of grid points for the disk `B(center, r)`: each grid
/// point stands for its `1/N x 1/N` cell, weighted by the fraction of that
/// cell inside the disk.
pub fn ball_weights(n: usize, center: Point, r: f64) -> Result<Vec<(i64, i64, f64)>> {
    let h = 1.0 / n as f64;
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    if !(r > 0.0) || r + half_diag >= 0.5 {
        return Err(Error::BallTooLarge { r });
    }
    let c = wrap_point(center);
    let nf = n as f64;
    let lo = |t: f64| ((t - r) * nf).floor() as i64 - 1;
    let hi = |t: f64| ((t + r) * nf).ceil() as i64 + 1;
    let sub = BOUNDARY_SUBSAMPLES;
    let cell = h * h;
    let mut weights = Vec::new();
    for i in lo(c[0])..=hi(c[0]) {
        let px = i as f64 * h;
        for j in lo(c[1])..=hi(c[1]) {
            let py = j as f64 * h;
            let d = (px - c[0]).hypot(py - c[1]);
            let w = if d + half_diag <= r {
                cell
            } else if d - half_diag >= r {
                continue;
            } else {
                let mut inside = 0usize;
                for a in 0..sub {
                    let sx = px + ((a as f64 + 0.5) / sub as f64 - 0.5) * h;
                    for b in 0..sub {
                        let sy = py + ((b as f64 + 0.5) / sub as f64 - 0.5) * h;
                        if (sx - c[0]).hypot(sy - c[1]) <= r {
                            inside += 1;
                        }
                    }
                }
                if inside == 0 {
                    continue;
                }
                cell * inside as f64 / (sub * sub) as f64
            };
            weights.push((i, j, w));
        }
    }
    Ok(weights)
}

/// Grid-point positions (reduced mod 1) carrying nonzero weight for the ball.
pub fn ball_support(n: usize, center: Point, r: f64) -> Result<Vec<Point>> {
    let h = 1.0 / n as f64;
    Ok(ball_weights(n, center, r)?
        .into_iter()
        .map(|(i, j, _)| wrap_point([i as f64 * h, j as f64 * h]))
        .collect())
}

fn check_resolved(n: usize, r: f64) -> Result<()> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::BallTooLarge { r });
    }
    if r * (n as f64) < MIN_CELLS_PER_RADIUS {
        return Err(Error::RadiusUnderResolved {
            r,
            n,
            min_cells: MIN_CELLS_PER_RADIUS,
        });
    }
    Ok(())
}

/// `int_{B(center, r)} |u|^2 dVol` by cell-fraction quadrature.
pub fn mass_in_ball(field: &SampledField, center: Point, r: f64) -> Result<f64> {
    check_resolved(field.resolution(), r)?;
    Ok(ball_weights(field.resolution(), center, r)?
        .into_iter()
        .map(|(i, j, w)| {
            let v = field.at(i, j);
            w * v * v
        })
        .sum())
}

/// `int_{B(center, r)} f dVol` by the same quadrature as [`mass_in_ball`].
pub fn integrate_in_ball(n: usize, f: impl Fn(Point) -> f64, center: Point, r: f64) -> Result<f64> {
    let h = 1.0 / n as f64;
    Ok(ball_weights(n, center, r)?
        .into_iter()
        .map(|(i, j, w)| w * f(wrap_point([i as f64 * h, j as f64 * h])))
        .sum())
}

/// `M x M` lattice with spacing at most `r / 2`, starting at the origin,
/// followed by [`RANDOM_EXTRA_CENTERS`] uniform random centers.
pub fn default_centers(r: f64, seed: u64) -> Vec<Point> {
    let m = (2.0 / r).ceil().max(1.0) as usize;
    let mut centers: Vec<Point> = (0..m)
        .flat_map(|a| (0..m).map(move |b| [a as f64 / m as f64, b as f64 / m as f64]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    centers.extend((0..RANDOM_EXTRA_CENTERS).map(|_| [rng.random::<f64>(), rng.random::<f64>()]));
    centers
}

/// Ball masses and mass-to-volume ratios at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMassReport {
    pub lambda: f64,
    pub rho: f64,
    pub radius: f64,
    pub centers: Vec<Point>,
    pub masses: Vec<f64>,
    pub ratios: Vec<f64>,
    pub d1: f64,
    pub d2: f64,
}

impl BallMassReport {
    pub fn median(&self) -> f64 {
        min_median_max(&self.ratios)
            .map(|(_, m, _)| m)
            .unwrap_or(f64::NAN)
    }

    /// Fraction of balls whose ratio lies in `[lo, hi]`.
    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|&&q| q >= lo && q <= hi).count() as f64
            / self.ratios.len() as f64
    }

    /// CSV with columns `center_x,center_y,radius,mass,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "center_x,center_y,radius,mass,ratio")?;
        for ((c, m), q) in self.centers.iter().zip(&self.masses).zip(&self.ratios) {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(c[0]),
                fmt17(c[1]),
                fmt17(self.radius),
                fmt17(*m),
                fmt17(*q)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> BallMassSummary {
        BallMassSummary {
            lambda: self.lambda,
            rho: self.rho,
            radius: self.radius,
            d1: self.d1,
            d2: self.d2,
            median: self.median(),
            count: self.ratios.len(),
        }
    }
}

/// JSON summary `{lambda, rho, radius, d1, d2, median, count}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallMassSummary {
    pub lambda: f64,
    pub rho: f64,
    pub radius: f64,
    pub d1: f64,
    pub d2: f64,
    pub median: f64,
    pub count: usize,
}

/// Mass ratios at an explicit radius.
pub fn mass_ratios(field: &SampledField, r: f64, centers: &[Point]) -> Result<Vec<(f64, f64)>> {
    check_resolved(field.resolution(), r)?;
    let volume = PI * r * r;
    centers
        .par_iter()
        .map(|&c| mass_in_ball(field, c, r).map(|m| (m, m / volume)))
        .collect()
}

/// Evaluate the comparability condition at `r = scale(lambda)` over `centers`.
pub fn sse_scan(
    field: &SampledField,
    scale: ScaleFunction,
    centers: &[Point],
) -> Result<BallMassReport> {
    let radius = scale.radius(field.lambda());
    let pairs = mass_ratios(field, radius, centers)?;
    let (masses, ratios): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let d1 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let d2 = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BallMassReport {
        lambda: field.lambda(),
        rho: scale.rho(),
        radius,
        centers: centers.to_vec(),
        masses,
        ratios,
        d1,
        d2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_mass_is_area() {
        let field = SampledField::constant(256, 10.0);
        for c in [[0.5, 0.5], [0.0, 0.0], [0.93, 0.11]] {
            let m = mass_in_ball(&field, c, 0.1).unwrap();
            assert!((m - PI * 0.01).abs() < 1e-4, "mass {m} at {c:?}");
        }
    }

    #[test]
    fn under_resolved_ball_is_rejected() {
        let field = SampledField::constant(128, 10.0);
        assert!(matches!(
            mass_in_ball(&field, [0.5, 0.5], 0.1),
            Err(Error::RadiusUnderResolved { .. })
        ));
        assert!(matches!(
            mass_in_ball(&field, [0.5, 0.5], 0.6),
            Err(Error::BallTooLarge { .. })
        ));
    }

    #[test]
    fn scale_function_bounds() {
        assert!(ScaleFunction::new(1.0).is_ok());
        assert!(ScaleFunction::for_torus(1.0).is_err());
        assert!(ScaleFunction::for_torus(1.5).is_err());
        assert!(ScaleFunction::for_torus(0.0).is_err());
        let s = ScaleFunction::for_torus(0.5).unwrap();
        assert!((s.radius(100.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn default_plan_spacing() {
        let centers = default_centers(0.1, 1);
        assert_eq!(centers.len(), 20 * 20 + RANDOM_EXTRA_CENTERS);
        assert_eq!(centers[1], [0.0, 0.05]);
    }

    #[test]
    fn constant_fixture_scan_is_flat() {
        let field = SampledField::constant(256, 100.0);
        let report = sse_scan(&field, ScaleFunction::default(), &default_centers(0.1, 3)).unwrap();
        assert!((report.d1 - 1.0).abs() < 1e-3 && (report.d2 - 1.0).abs() < 1e-3);
        assert!(report
            .ratios
            .iter()
            .all(|&q| q >= report.d1 && q <= report.d2));
    }
}
