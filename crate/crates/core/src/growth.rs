//! Empirical growth exponents of eigenfunctions.
//!
//! Two quantities are estimated: the real doubling exponent
//! `c7 = log(max_{B(p,2 delta)} |v| / max_{B(p,delta)} |v|) / mu` of a dilated
//! view, and the growth of the holomorphic extension
//! `v(x + iy) = sum c_xi e^{2 pi i xi.x} e^{-2 pi xi.y}` into the strip
//! `|y|_inf <= tau` relative to a real sup norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doubling::DilatedView;
use crate::eigen::{EigenfunctionSpec, TrigPolynomial};
use crate::error::{Error, Result};
use crate::torus::{wrap_point, Point};

/// Samples per wavelength for sup-norm sampling.
const SAMPLES_PER_WAVELENGTH: f64 = 10.0;

/// Minimum lattice resolution per disk radius.
const MIN_STEPS_PER_RADIUS: f64 = 8.0;

/// Local hill climb: compass moves in 8 directions with step halving.
fn refine_max(
    f: impl Fn(Point) -> f64,
    start: Point,
    step: f64,
    project: impl Fn(Point) -> Point,
    tol: f64,
) -> (Point, f64) {
    const DIRS: [Point; 8] = [
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
        [
            -std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ],
        [
            std::f64::consts::FRAC_1_SQRT_2,
            -std::f64::consts::FRAC_1_SQRT_2,
        ],
        [
            -std::f64::consts::FRAC_1_SQRT_2,
            -std::f64::consts::FRAC_1_SQRT_2,
        ],
    ];
    let mut best = start;
    let mut best_val = f(start);
    let mut h = step;
    while h > tol {
        let mut moved = false;
        for d in DIRS {
            let q = project([best[0] + h * d[0], best[1] + h * d[1]]);
            let v = f(q);
            if v > best_val {
                best = q;
                best_val = v;
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (best, best_val)
}

/// `max_{|y - center| <= radius} |f(y)|` by lattice and boundary-circle
/// sampling at spacing `step`, followed by a local refinement around the
/// best sample.
pub fn sup_on_disk(f: impl Fn(Point) -> f64 + Sync, center: Point, radius: f64, step: f64) -> f64 {
    let h = step.min(radius / MIN_STEPS_PER_RADIUS);
    let k = (radius / h).ceil() as i64;
    let mut samples: Vec<Point> = Vec::new();
    for a in -k..=k {
        for b in -k..=k {
            let (dx, dy) = (a as f64 * h, b as f64 * h);
            if dx * dx + dy * dy <= radius * radius {
                samples.push([center[0] + dx, center[1] + dy]);
            }
        }
    }
    let ring = ((std::f64::consts::TAU * radius / h).ceil() as usize).max(16);
    for t in 0..ring {
        let (s, c) = (std::f64::consts::TAU * t as f64 / ring as f64).sin_cos();
        samples.push([center[0] + radius * c, center[1] + radius * s]);
    }
    let abs = |p: Point| f(p).abs();
    // ties resolve to the earliest sample so the result is schedule independent
    let (start, _, _) = samples
        .par_iter()
        .enumerate()
        .map(|(k, &p)| (p, abs(p), k))
        .reduce(
            || (center, f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.2 < a.2) {
                    b
                } else {
                    a
                }
            },
        );
    let project = |p: Point| {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        let d = dx.hypot(dy);
        if d <= radius {
            p
        } else {
            [center[0] + dx * radius / d, center[1] + dy * radius / d]
        }
    };
    refine_max(abs, start, h, project, 1e-10 * radius.max(1e-300)).1
}

/// `log_ratio / mu`, with the 0/0 case of a flat function mapped to 0.
fn exponent(log_ratio: f64, mu: f64) -> f64 {
    if log_ratio == 0.0 {
        0.0
    } else {
        log_ratio / mu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterGrowth {
    pub p: Point,
    pub sup_2delta: f64,
    pub sup_delta: f64,
    pub c7_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealGrowth {
    pub delta: f64,
    pub mu: f64,
    pub per_center: Vec<CenterGrowth>,
    pub c7_max: f64,
}

/// Sup-norm doubling exponent of a dilated view at the given view-coordinate
/// centers.
pub fn real_doubling_exponent(
    view: &DilatedView<'_>,
    delta: f64,
    centers: &[Point],
) -> Result<RealGrowth> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    for p in centers {
        if p[0].hypot(p[1]) + 2.0 * delta > view.chart {
            return Err(Error::ChartExceeded {
                x: p[0],
                y: p[1],
                radius: 2.0 * delta,
                chart: view.chart,
            });
        }
    }
    let step = if view.mu > 0.0 {
        view.wavelength() / SAMPLES_PER_WAVELENGTH
    } else {
        f64::INFINITY
    };
    let f = |y: Point| view.eval(y);
    let per_center = centers
        .iter()
        .map(|&p| {
            let sup_delta = sup_on_disk(f, p, delta, step);
            let sup_2delta = sup_on_disk(f, p, 2.0 * delta, step).max(sup_delta);
            if !(sup_delta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "v vanishes identically on B({p:?}, {delta})"
                )));
            }
            Ok(CenterGrowth {
                p,
                sup_2delta,
                sup_delta,
                c7_hat: exponent((sup_2delta / sup_delta).ln(), view.mu),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c7_max = per_center.iter().map(|c| c.c7_hat).fold(0.0, f64::max);
    Ok(RealGrowth {
        delta,
        mu: view.mu,
        per_center,
        c7_max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripSup {
    pub tau: f64,
    /// Sampled `sup |v(x + iy)|` over `|y|_inf <= tau`.
    pub sup: f64,
    /// Triangle-inequality bound `sum |c_xi| e^{2 pi |xi|_1 tau}`.
    pub certificate: f64,
    pub argmax_x: Point,
    pub argmax_y: Point,
}

/// Supremum of the holomorphic extension over the strip `|Im z|_inf <= tau`.
///
/// `|v|` is subharmonic in each complex variable separately and periodic in
/// the real directions, so the supremum sits on the distinguished boundary
/// `|y_1| = |y_2| = tau`; each of the four corners is sampled over the real
/// torus and the best sample refined.
pub fn complex_strip_sup(spec: &EigenfunctionSpec, tau: f64) -> Result<StripSup> {
    strip_sup_poly(spec.poly(), (spec.energy() as f64).sqrt(), tau)
}

fn strip_sup_poly(poly: &TrigPolynomial, radius: f64, tau: f64) -> Result<StripSup> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "strip width must be >= 0, got {tau}"
        )));
    }
    let certificate = poly
        .modes
        .iter()
        .zip(&poly.coeffs)
        .map(|(m, c)| c.norm() * (std::f64::consts::TAU * m.l1_norm() as f64 * tau).exp())
        .sum();
    let corners: Vec<Point> = if tau == 0.0 {
        vec![[0.0, 0.0]]
    } else {
        vec![[-tau, -tau], [-tau, tau], [tau, -tau], [tau, tau]]
    };
    let n = ((SAMPLES_PER_WAVELENGTH * radius).ceil() as usize).max(32);
    let h = 1.0 / n as f64;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0], [0.0, 0.0]);
    for y in corners {
        let damped = TrigPolynomial {
            modes: poly.modes.clone(),
            coeffs: poly
                .modes
                .iter()
                .zip(&poly.coeffs)
                .map(|(m, c)| {
                    c * (-std::f64::consts::TAU * (m.xi[0] as f64 * y[0] + m.xi[1] as f64 * y[1]))
                        .exp()
                })
                .collect(),
        };
        let grid = damped.sample_complex(n);
        let (k, _) = grid
            .iter()
            .enumerate()
            .map(|(k, z)| (k, z.norm()))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let start = [(k / n) as f64 * h, (k % n) as f64 * h];
        let modulus = |x: Point| damped.eval_complex(x, [0.0, 0.0]).norm();
        let (x, v) = refine_max(modulus, start, h, wrap_point, 1e-12);
        if v > best.0 {
            best = (v, x, y);
        }
    }
    Ok(StripSup {
        tau,
        sup: best.0,
        certificate,
        argmax_x: best.1,
        argmax_y: best.2,
    })
}

/// A real ball `B(center, radius)` on the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealRegion {
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthInC {
    pub tau: f64,
    /// `lambda * tau`.
    pub mu: f64,
    pub complex_sup: f64,
    pub real_sup: f64,
    pub certificate: f64,
    pub c9_hat: f64,
}

/// `c9 = log(sup_strip |v| / sup_region |v|) / (lambda tau)`.
pub fn growth_in_c_exponent(
    spec: &EigenfunctionSpec,
    tau: f64,
    region: RealRegion,
) -> Result<GrowthInC> {
    if !(region.radius > 0.0 && region.radius < 0.5) {
        return Err(Error::BallTooLarge { r: region.radius });
    }
    let strip = complex_strip_sup(spec, tau)?;
    let sqrt_e = (spec.energy() as f64).sqrt();
    let step = if sqrt_e > 0.0 {
        1.0 / (SAMPLES_PER_WAVELENGTH * sqrt_e)
    } else {
        f64::INFINITY
    };
    let real_sup = sup_on_disk(
        |p| spec.poly().eval(wrap_point(p)),
        region.center,
        region.radius,
        step,
    );
    if !(real_sup > 0.0) {
        return Err(Error::InvalidParameter(
            "eigenfunction vanishes on the real region".into(),
        ));
    }
    let mu = spec.lambda() * tau;
    Ok(GrowthInC {
        tau,
        mu,
        complex_sup: strip.sup,
        real_sup,
        certificate: strip.certificate,
        c9_hat: exponent((strip.sup / real_sup).ln(), mu),
    })
}

/// JSON report `{E, seed, tau, c7_max, c9_hat, certificates}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    #[serde(rename = "E")]
    pub energy: u64,
    pub seed: u64,
    pub tau: f64,
    pub delta: f64,
    pub mu_real: f64,
    pub c7_max: f64,
    pub per_center: Vec<CenterGrowth>,
    pub complex_sup: f64,
    pub real_sup: f64,
    pub c9_hat: f64,
    pub certificates: Certificates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// Coefficient bound on the strip sup.
    pub strip_upper_bound: f64,
    pub strip_sup_within_bound: bool,
}
