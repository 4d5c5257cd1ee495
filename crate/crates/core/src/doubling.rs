//! Wavelength-scale analysis: dilated views of an eigenfunction, the
//! doubling classification of balls `B(p, 10 a1 / lambda)` against
//! `B(p, 20 a1 / lambda)`, and the nodal lower bound assembled from the
//! good balls.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::mass_in_ball;
use crate::cover::OVERLAP_BOUND;
use crate::eigen::{random_eigenfunction, sample_grid, SampledField};
use crate::error::{Error, Result};
use crate::nodal::{length_in_ball, NodalSet};
use crate::report::fmt17;
use crate::torus::{wrap_point, Point};

/// Default sign-change scale, calibrated by [`calibrate_a1`] over seeds
/// `1..=50` at `E = 65` (see the calibration test).
pub const DEFAULT_A1: f64 = 2.5;

/// Default doubling threshold.
pub const DEFAULT_A2: f64 = 16.0;

/// Probe lattice per axis for sign-change detection.
pub const SIGN_PROBES: usize = 32;

/// Inner ball masses below this are treated as numerically dead.
const NEGLIGIBLE_MASS: f64 = 1e-30;

/// Default chart radius of a dilated view.
pub const DEFAULT_CHART: f64 = 10.0;

/// The rescaled function `v(y) = u(center + r y)`, an eigenfunction with
/// `mu = r lambda`, read through the band-limited reconstruction of the base
/// samples.
#[derive(Clone, Copy, Debug)]
pub struct DilatedView<'a> {
    pub base: &'a SampledField,
    pub center: Point,
    pub r: f64,
    pub mu: f64,
    pub chart: f64,
}

impl<'a> DilatedView<'a> {
    /// View on the chart `|y| <= chart`; requires `chart * r < 1/2` so the
    /// chart embeds in the torus.
    pub fn with_chart(field: &'a SampledField, center: Point, r: f64, chart: f64) -> Result<Self> {
        if !(r > 0.0) || !(chart > 0.0) || chart * r >= 0.5 {
            return Err(Error::RadiusTooLarge {
                r,
                max: 0.5 / chart,
            });
        }
        Ok(Self {
            base: field,
            center: wrap_point(center),
            r,
            mu: r * field.lambda(),
            chart,
        })
    }

    /// `v(y) = u(center + r y)`.
    pub fn eval(&self, y: Point) -> f64 {
        self.base.interpolate([
            self.center[0] + self.r * y[0],
            self.center[1] + self.r * y[1],
        ])
    }

    /// Wavelength of `v` in view coordinates, `2 pi / mu`.
    pub fn wavelength(&self) -> f64 {
        std::f64::consts::TAU / self.mu
    }

    /// `int_{|y - p| <= radius} |v|^2 dy` by a polar midpoint rule.
    pub fn mass(&self, p: Point, radius: f64) -> f64 {
        let (nr, nt) = (96usize, 192usize);
        let dr = radius / nr as f64;
        let dt = std::f64::consts::TAU / nt as f64;
        let mut total = 0.0;
        for a in 0..nr {
            let rho = (a as f64 + 0.5) * dr;
            let mut ring = 0.0;
            for b in 0..nt {
                let (s, c) = (b as f64 * dt).sin_cos();
                let v = self.eval([p[0] + rho * c, p[1] + rho * s]);
                ring += v * v;
            }
            total += ring * rho * dr * dt;
        }
        total
    }
}

/// Dilation onto the standard chart `|y| <= 10`; requires `r < 1/40`.
pub fn dilate(field: &SampledField, center: Point, r: f64) -> Result<DilatedView<'_>> {
    if !(r > 0.0 && r < 1.0 / 40.0) {
        return Err(Error::RadiusTooLarge { r, max: 1.0 / 40.0 });
    }
    DilatedView::with_chart(field, center, r, DEFAULT_CHART)
}

/// True if the field takes both signs on a `k x k` probe lattice of `B(center, radius)`.
pub fn sign_change_in_ball(field: &SampledField, center: Point, radius: f64, k: usize) -> bool {
    let (mut pos, mut neg) = (false, false);
    for a in 0..k {
        let dx = (2.0 * (a as f64 + 0.5) / k as f64 - 1.0) * radius;
        for b in 0..k {
            let dy = (2.0 * (b as f64 + 0.5) / k as f64 - 1.0) * radius;
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let v = field.interpolate([center[0] + dx, center[1] + dy]);
            pos |= v > 0.0;
            neg |= v < 0.0;
            if pos && neg {
                return true;
            }
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingBall {
    pub center: Point,
    pub inner_mass: f64,
    pub outer_mass: f64,
    pub ratio: f64,
    pub is_good: bool,
    pub has_nodal_point: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub scale_a1: f64,
    pub threshold_a2: f64,
    pub lambda: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub balls: Vec<DoublingBall>,
    pub good_fraction: f64,
}

impl DoublingReport {
    pub fn good(&self) -> impl Iterator<Item = &DoublingBall> {
        self.balls.iter().filter(|b| b.is_good)
    }

    /// Fraction of good balls with a detected sign change (1 when none are good).
    pub fn good_with_nodal_point(&self) -> f64 {
        let good = self.good().count();
        if good == 0 {
            return 1.0;
        }
        self.good().filter(|b| b.has_nodal_point).count() as f64 / good as f64
    }

    /// CSV with columns `px,py,ratio,good,nodal_point,length_in_ball`.
    pub fn write_csv<W: Write>(&self, nodal: &NodalSet, mut w: W) -> Result<()> {
        writeln!(w, "px,py,ratio,good,nodal_point,length_in_ball")?;
        for b in &self.balls {
            let len = length_in_ball(nodal, b.center, self.inner_radius)?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt17(b.center[0]),
                fmt17(b.center[1]),
                fmt17(b.ratio),
                b.is_good,
                b.has_nodal_point,
                fmt17(len)
            )?;
        }
        Ok(())
    }
}

/// Classify each `B(p, 10 a1/lambda)` as good when
/// `int_{B(p, 20 a1/lambda)} u^2 <= a2 int_{B(p, 10 a1/lambda)} u^2`, and
/// probe `B(p, a1/lambda)` for a sign change.
pub fn classify_doubling(
    field: &SampledField,
    a1: f64,
    a2: f64,
    centers: &[Point],
) -> Result<DoublingReport> {
    let lambda = field.lambda();
    if !(a1 > 0.0) || !(a2 > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "doubling needs a1 > 0, a2 > 0 and lambda > 0 (got {a1}, {a2}, {lambda})"
        )));
    }
    let inner = 10.0 * a1 / lambda;
    let outer = 20.0 * a1 / lambda;
    if outer >= 0.25 {
        return Err(Error::RadiusTooLarge {
            r: outer,
            max: 0.25,
        });
    }
    let probe = a1 / lambda;
    let balls = centers
        .par_iter()
        .map(|&p| {
            let inner_mass = mass_in_ball(field, p, inner)?;
            let outer_mass = mass_in_ball(field, p, outer)?;
            if inner_mass < NEGLIGIBLE_MASS {
                return Err(Error::DivisionByNegligibleMass {
                    x: p[0],
                    y: p[1],
                    mass: inner_mass,
                });
            }
            let ratio = outer_mass / inner_mass;
            Ok(DoublingBall {
                center: p,
                inner_mass,
                outer_mass,
                ratio,
                is_good: ratio <= a2,
                has_nodal_point: sign_change_in_ball(field, p, probe, SIGN_PROBES),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let good_fraction = if balls.is_empty() {
        0.0
    } else {
        balls.iter().filter(|b| b.is_good).count() as f64 / balls.len() as f64
    };
    Ok(DoublingReport {
        scale_a1: a1,
        threshold_a2: a2,
        lambda,
        inner_radius: inner,
        outer_radius: outer,
        balls,
        good_fraction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// `sum_{good} H^1(N cap B(p, 10 a1/lambda)) / 16`.
    pub bound: f64,
    /// `min_{good} lambda H^1(N cap B(p, 10 a1/lambda))`, `None` without good balls.
    pub a3_hat: Option<f64>,
    pub good_count: usize,
}

/// Lower bound on total nodal length from the good balls. Certified when
/// the centers come from a cover whose `10 a1/lambda`-balls overlap at most
/// [`OVERLAP_BOUND`] times, e.g. `build_cover(10 a1 / lambda, seed)`.
pub fn lower_bound_assembly(report: &DoublingReport, nodal: &NodalSet) -> Result<LowerBound> {
    let lengths = report
        .good()
        .map(|b| length_in_ball(nodal, b.center, report.inner_radius))
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = lengths.iter().sum();
    let lambda = nodal.source_lambda();
    let a3_hat = lengths.iter().map(|l| l * lambda).reduce(f64::min);
    Ok(LowerBound {
        bound: sum / OVERLAP_BOUND as f64,
        a3_hat,
        good_count: lengths.len(),
    })
}

/// Smallest half-integer `a1` such that every ball `B(p, a1/lambda)` over a
/// `centers_per_axis^2` lattice and all `seeds` shows a sign change.
pub fn calibrate_a1(
    energy: u64,
    seeds: impl IntoIterator<Item = u64>,
    centers_per_axis: usize,
    n: usize,
) -> Result<f64> {
    let seeds: Vec<u64> = seeds.into_iter().collect();
    let centers: Vec<Point> = (0..centers_per_axis)
        .flat_map(|a| {
            (0..centers_per_axis).map(move |b| {
                [
                    (a as f64 + 0.5) / centers_per_axis as f64,
                    (b as f64 + 0.5) / centers_per_axis as f64,
                ]
            })
        })
        .collect();
    let mut needed = 0.5f64;
    for seed in seeds {
        let spec = random_eigenfunction(energy, seed)?;
        let field = sample_grid(&spec, n)?;
        let lambda = field.lambda();
        field.interpolant();
        let worst = centers
            .par_iter()
            .map(|&p| {
                let mut a = 0.5;
                // a half-wavelength disk always meets the nodal set
                while !sign_change_in_ball(&field, p, a / lambda, SIGN_PROBES) && a < 16.0 {
                    a += 0.5;
                }
                a
            })
            .reduce(|| 0.5, f64::max);
        needed = needed.max(worst);
    }
    Ok(needed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::build_cover;
    use crate::eigen::EigenfunctionSpec;
    use crate::nodal::extract_nodal;

    #[test]
    fn default_a1_matches_calibration() {
        assert_eq!(calibrate_a1(65, 1..=50, 16, 256).unwrap(), DEFAULT_A1);
    }

    #[test]
    fn dilation_parameters() {
        let field = sample_grid(&random_eigenfunction(65, 7).unwrap(), 256).unwrap();
        let r = 1.0 / field.lambda();
        let view = dilate(&field, [0.3, 0.4], r).unwrap();
        assert!((view.mu - 1.0).abs() < 1e-15);
        assert!((view.eval([0.0, 0.0]) - field.interpolate([0.3, 0.4])).abs() < 1e-15);
        assert!(matches!(
            dilate(&field, [0.3, 0.4], 0.03),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn constant_doubling_ratio_is_area_ratio() {
        let field = SampledField::constant(512, 200.0);
        let report =
            classify_doubling(&field, 1.0, DEFAULT_A2, &[[0.5, 0.5], [0.01, 0.99]]).unwrap();
        for b in &report.balls {
            assert!((b.ratio - 4.0).abs() < 0.08, "ratio {}", b.ratio);
            assert!(b.is_good && !b.has_nodal_point);
        }
        assert_eq!(report.good_fraction, 1.0);
    }

    #[test]
    fn outer_radius_bound_enforced() {
        let field = sample_grid(&random_eigenfunction(65, 7).unwrap(), 256).unwrap();
        assert!(matches!(
            classify_doubling(&field, 2.0, DEFAULT_A2, &[[0.5, 0.5]]),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn dead_ball_is_reported() {
        let field = SampledField::from_values(512, vec![0.0; 512 * 512], 100.0).unwrap();
        assert!(matches!(
            classify_doubling(&field, 0.5, DEFAULT_A2, &[[0.5, 0.5]]),
            Err(Error::DivisionByNegligibleMass { .. })
        ));
    }

    #[test]
    fn sine_lower_bound_within_overlap_factor() {
        let spec = EigenfunctionSpec::sine_x(4);
        let field = sample_grid(&spec, 256).unwrap();
        let nodal = extract_nodal(&field);
        let a1 = 0.25;
        let family = build_cover(10.0 * a1 / field.lambda(), 5).unwrap();
        let report = classify_doubling(&field, a1, DEFAULT_A2, &family.centers).unwrap();
        let lb = lower_bound_assembly(&report, &nodal).unwrap();
        assert!(lb.bound <= nodal.total_length());
        assert!(lb.bound >= 8.0 / 16.0, "bound {}", lb.bound);
    }
}
