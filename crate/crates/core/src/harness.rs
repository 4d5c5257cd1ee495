//! End-to-end experiment plans: run every measurement over an ensemble of
//! random eigenfunctions, reduce to empirical constants and gate them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::{ball_weights, mass_ratios, ScaleFunction, MIN_CELLS_PER_RADIUS};
use crate::cover::{build_cover, BallFamily, OVERLAP_BOUND};
use crate::doubling::{
    classify_doubling, lower_bound_assembly, DilatedView, DEFAULT_A1, DEFAULT_A2,
};
use crate::eigen::{
    enumerate_modes, random_eigenfunction, sample_grid, EigenfunctionSpec, SampledField,
};
use crate::error::{Error, Result};
use crate::growth::{
    complex_strip_sup, growth_in_c_exponent, real_doubling_exponent, Certificates, GrowthReport,
    RealRegion,
};
use crate::nodal::{extract_nodal, integrate_over_nodal, length_in_ball, pieces_in_ball, NodalSet};
use crate::report::{fmt17, min_median_max};
use crate::svg::{render, BallOverlay};
use crate::testfn::TestFunction;
use crate::torus::{wrap_point, Point};

/// Balls whose mass ratio falls outside this window are excluded from the
/// nodal-length comparability gate.
pub const SSE_GATE: (f64, f64) = (0.1, 10.0);

/// Spectra with at most this many modes are flagged degenerate.
pub const DEGENERATE_MODES: usize = 4;

/// Dilated-view parameters for the real doubling exponent.
const GROWTH_CHART: f64 = 3.0;
const GROWTH_DELTA: f64 = 0.5;
const GROWTH_CENTERS: [Point; 5] = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

/// Real region for the complexified growth exponent.
const GROWTH_REGION: RealRegion = RealRegion {
    center: [0.0, 0.0],
    radius: 0.25,
};

/// Grid rule `N(E) = max(256, 16 ceil(sqrt E))`.
pub fn grid_rule(energy: u64) -> usize {
    let s = (energy as f64).sqrt().ceil() as usize;
    256.max(16 * s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub e_floor: f64,
    pub e_ceiling: f64,
    pub e_ratio_max: f64,
    pub c_ratio_max: f64,
    pub yau_drift: f64,
    pub yau_window: f64,
    pub sse_window: (f64, f64),
    pub sse_fraction: f64,
    pub chain_rel: f64,
    pub growth_window: f64,
    pub good_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            e_floor: 0.02,
            e_ceiling: 50.0,
            e_ratio_max: 100.0,
            c_ratio_max: 10.0,
            yau_drift: 0.15,
            yau_window: 3.0,
            sse_window: (0.3, 3.0),
            sse_fraction: 0.9,
            chain_rel: 1e-3,
            growth_window: 2.0,
            good_fraction: 0.5,
        }
    }
}

fn default_rho() -> f64 {
    0.5
}
fn default_first_seed() -> u64 {
    1
}
fn default_a1() -> f64 {
    DEFAULT_A1
}
fn default_a2() -> f64 {
    DEFAULT_A2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub energies: Vec<u64>,
    pub seeds_per_energy: u64,
    #[serde(default = "default_first_seed")]
    pub first_seed: u64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "TestFunction::suite")]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_a1")]
    pub a1: f64,
    #[serde(default = "default_a2")]
    pub a2: f64,
    #[serde(default)]
    pub svg: bool,
}

impl ExperimentPlan {
    pub fn new(energies: Vec<u64>, seeds_per_energy: u64) -> Self {
        Self {
            energies,
            seeds_per_energy,
            first_seed: 1,
            rho: 0.5,
            test_functions: TestFunction::suite(),
            tolerances: Tolerances::default(),
            a1: DEFAULT_A1,
            a2: DEFAULT_A2,
            svg: false,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.energies.is_empty() {
            return Err(Error::InvalidPlan("no energies".into()));
        }
        if self.seeds_per_energy == 0 {
            return Err(Error::InvalidPlan(
                "seeds_per_energy must be positive".into(),
            ));
        }
        let scale = ScaleFunction::for_torus(self.rho).map_err(|_| {
            Error::InvalidPlan(format!(
                "rho = {} outside (0, 1): r(lambda) = lambda^-rho must shrink with lambda yet stay above the wavelength scale",
                self.rho
            ))
        })?;
        if !(self.a1 > 0.0 && self.a2 > 1.0) {
            return Err(Error::InvalidPlan(format!(
                "need a1 > 0 and a2 > 1, got a1 = {}, a2 = {}",
                self.a1, self.a2
            )));
        }
        for &e in &self.energies {
            if enumerate_modes(e).is_empty() || e == 0 {
                return Err(Error::InvalidPlan(format!("empty spectrum at E={e}")));
            }
            let n = grid_rule(e);
            let lambda = 2.0 * PI * (e as f64).sqrt();
            let r = scale.radius(lambda);
            if r >= 0.25 {
                return Err(Error::InvalidPlan(format!(
                    "E={e}: scale radius {r} is not below 1/4"
                )));
            }
            if r * (n as f64) < MIN_CELLS_PER_RADIUS {
                return Err(Error::InvalidPlan(format!(
                    "E={e}: scale radius {r} spans {} grid cells at N={n}, need {MIN_CELLS_PER_RADIUS}",
                    r * n as f64
                )));
            }
        }
        Ok(())
    }

    pub fn runs(&self) -> Vec<(u64, u64)> {
        self.energies
            .iter()
            .flat_map(|&e| (0..self.seeds_per_energy).map(move |k| (e, self.first_seed + k)))
            .collect()
    }
}

/// Nodal-length comparability over cover balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallComparability {
    pub radius: f64,
    /// `(1/lambda) length_in_ball / Vol(B)` per included ball.
    pub ratios: Vec<f64>,
    pub e1_hat: f64,
    pub e2_hat: f64,
    pub included: usize,
    pub excluded: usize,
}

/// `(min, max)` of `(1/lambda) H^1(N cap B(x, r)) / (pi r^2)` over cover
/// centers whose mass ratio lies in [`SSE_GATE`].
pub fn check_ball_comparability(
    field: &SampledField,
    nodal: &NodalSet,
    scale: ScaleFunction,
    family: &BallFamily,
) -> Result<BallComparability> {
    let lambda = field.lambda();
    let r = scale.radius(lambda);
    if (family.full_radius - r).abs() > 1e-12 * r {
        return Err(Error::InvalidParameter(format!(
            "cover radius {} differs from scale radius {r}",
            family.full_radius
        )));
    }
    let masses = mass_ratios(field, r, &family.centers)?;
    let volume = PI * r * r;
    let per_ball = family
        .centers
        .par_iter()
        .zip(masses.par_iter())
        .map(|(&c, &(_, q))| {
            if q < SSE_GATE.0 || q > SSE_GATE.1 {
                return Ok(None);
            }
            Ok(Some(length_in_ball(nodal, c, r)? / lambda / volume))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = per_ball.iter().flatten().copied().collect();
    let excluded = per_ball.len() - ratios.len();
    let (e1_hat, e2_hat) = if ratios.is_empty() {
        (0.0, 0.0)
    } else {
        (
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max),
        )
    };
    Ok(BallComparability {
        radius: r,
        included: ratios.len(),
        ratios,
        e1_hat,
        e2_hat,
        excluded,
    })
}

/// `int_{T^2} f` as the grid mean; fails on negative samples.
fn grid_integral(n: usize, f: &TestFunction) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = [i as f64 / n as f64, j as f64 / n as f64];
            let v = f.eval(p);
            if v < -1e-9 {
                return Err(Error::NegativeTestFunction {
                    name: f.name(),
                    value: v,
                    x: p[0],
                    y: p[1],
                });
            }
            sum += v;
        }
    }
    Ok(sum / (n * n) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalDistribution {
    /// `(name, rho_f)`; identically zero functions are omitted.
    pub rho_f: Vec<(String, f64)>,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub trivial: bool,
}

/// `rho_f = (1/lambda) int_N f dH^1 / int f dVol` over the test functions.
pub fn check_nodal_distribution(
    field: &SampledField,
    nodal: &NodalSet,
    functions: &[TestFunction],
) -> Result<NodalDistribution> {
    let lambda = field.lambda();
    let mut rho_f = Vec::new();
    for f in functions {
        let denom = grid_integral(field.resolution(), f)?;
        if denom == 0.0 {
            continue;
        }
        let num = integrate_over_nodal(nodal, |p| f.eval(p));
        rho_f.push((f.name(), num / lambda / denom));
    }
    if rho_f.is_empty() {
        return Ok(NodalDistribution {
            rho_f,
            c1_hat: 0.0,
            c2_hat: 0.0,
            trivial: true,
        });
    }
    let c1_hat = rho_f.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let c2_hat = rho_f.iter().map(|x| x.1).fold(0.0, f64::max);
    Ok(NodalDistribution {
        rho_f,
        c1_hat,
        c2_hat,
        trivial: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YauSample {
    pub energy: u64,
    pub yau_ratio: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YauVerdict {
    /// `(E, median yau_ratio, count)` over non-degenerate runs.
    pub per_energy: Vec<(u64, f64, usize)>,
    /// `max median / min median - 1`.
    pub drift: f64,
    /// `max / min` over all non-degenerate runs.
    pub window: f64,
    pub excluded_degenerate: usize,
    /// At least 3 energies with 10 runs each.
    pub sufficient: bool,
    pub pass: bool,
}

pub fn check_yau_scaling(samples: &[YauSample], tol: &Tolerances) -> YauVerdict {
    let mut by_energy: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut excluded_degenerate = 0;
    for s in samples {
        if s.degenerate {
            excluded_degenerate += 1;
        } else {
            by_energy.entry(s.energy).or_default().push(s.yau_ratio);
        }
    }
    let per_energy: Vec<(u64, f64, usize)> = by_energy
        .iter()
        .map(|(&e, v)| {
            (
                e,
                min_median_max(v).map(|t| t.1).unwrap_or(f64::NAN),
                v.len(),
            )
        })
        .collect();
    let medians: Vec<f64> = per_energy.iter().map(|t| t.1).collect();
    let all: Vec<f64> = by_energy.values().flatten().copied().collect();
    let ratio = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi / lo
    };
    let (drift, window) = if all.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (ratio(&medians) - 1.0, ratio(&all))
    };
    let sufficient = per_energy.len() >= 3 && per_energy.iter().all(|t| t.2 >= 10);
    let pass = sufficient && drift <= tol.yau_drift && window <= tol.yau_window;
    YauVerdict {
        per_energy,
        drift,
        window,
        excluded_degenerate,
        sufficient,
        pass,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub name: String,
    /// `">="`, `"<="` or `"="`, read as `lhs relation rhs`.
    pub relation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Asymptotic step: holds only once the scale is fine enough for `f`.
    pub conditional: bool,
}

pub const CHAIN_HOLDS: &str = "all steps hold";
pub const CHAIN_UNMET: &str = "as k -> infinity hypothesis unmet at this scale";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundChainTrace {
    pub function: String,
    pub radius: f64,
    pub overlap_bound: usize,
    pub balls: usize,
    /// Largest oscillation of `f` over a cover ball.
    pub omega: f64,
    pub integral_f: f64,
    pub nodal_integral: f64,
    pub e1_hat: f64,
    pub e2_hat: f64,
    pub lower: Vec<ChainStep>,
    pub upper: Vec<ChainStep>,
    pub lower_regime_met: bool,
    pub upper_regime_met: bool,
    pub status: String,
}

struct BallTerms {
    vol: f64,
    int_f: f64,
    length: f64,
    nodal_f: f64,
    fbar: f64,
    osc: f64,
    deviation: f64,
}

fn ball_terms(
    field: &SampledField,
    nodal: &NodalSet,
    f: &TestFunction,
    c: Point,
    r: f64,
) -> Result<BallTerms> {
    let n = field.resolution();
    let h = 1.0 / n as f64;
    let weights = ball_weights(n, c, r)?;
    let values: Vec<(f64, f64)> = weights
        .iter()
        .map(|&(i, j, w)| (w, f.eval(wrap_point([i as f64 * h, j as f64 * h]))))
        .collect();
    let pieces = pieces_in_ball(nodal, c, r)?;
    let length: f64 = pieces.iter().map(|p| p.1).sum();
    let nodal_f: f64 = pieces.iter().map(|&(m, l)| f.eval(m) * l).sum();
    let fbar = if length > 0.0 {
        nodal_f / length
    } else {
        f.eval(wrap_point(c))
    };
    let mut lo = fbar;
    let mut hi = fbar;
    for v in values
        .iter()
        .map(|x| x.1)
        .chain(pieces.iter().map(|&(m, _)| f.eval(m)))
    {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(BallTerms {
        vol: values.iter().map(|x| x.0).sum(),
        int_f: values.iter().map(|&(w, v)| w * v).sum(),
        length,
        nodal_f,
        fbar,
        osc: hi - lo,
        deviation: values.iter().map(|&(w, v)| w * (v - fbar).abs()).sum(),
    })
}

/// Evaluate every quantity of the covering lower and upper chains for
/// `int_N f dH^1` and check each inequality.
///
/// The mean-value point of ball `i` is realised by the nodal average
/// `fbar_i`, the continuity modulus by the largest oscillation of `f` over a
/// ball (`|f(x) - fbar_i|` with both points in `B(x_i, r)`), and the overlap
/// factor by the flat bound 16. Ball integrals use the cell-fraction
/// quadrature of the ball-statistics module.
pub fn replicate_bound_chain(
    field: &SampledField,
    nodal: &NodalSet,
    scale: ScaleFunction,
    family: &BallFamily,
    f: &TestFunction,
    rel_tol: f64,
) -> Result<BoundChainTrace> {
    let lambda = field.lambda();
    let r = scale.radius(lambda);
    if (family.full_radius - r).abs() > 1e-12 * r {
        return Err(Error::InvalidParameter(format!(
            "cover radius {} differs from scale radius {r}",
            family.full_radius
        )));
    }
    let integral_f = grid_integral(field.resolution(), f)?;
    let terms = family
        .centers
        .par_iter()
        .map(|&c| ball_terms(field, nodal, f, c, r))
        .collect::<Result<Vec<_>>>()?;
    let l = OVERLAP_BOUND as f64;
    let total = integrate_over_nodal(nodal, |p| f.eval(p));
    let sum = |g: &dyn Fn(&BallTerms) -> f64| terms.iter().map(g).sum::<f64>();
    let s = sum(&|t| t.nodal_f);
    let fh = sum(&|t| t.fbar * t.length);
    let fv = sum(&|t| t.fbar * t.vol);
    let int_b = sum(&|t| t.int_f);
    let dev = sum(&|t| t.deviation);
    let vol = sum(&|t| t.vol);
    let omega = terms.iter().map(|t| t.osc).fold(0.0, f64::max);
    let e1_hat = terms
        .iter()
        .map(|t| t.length / lambda / t.vol)
        .fold(f64::INFINITY, f64::min);
    let e2_hat = terms
        .iter()
        .map(|t| t.length / lambda / t.vol)
        .fold(0.0, f64::max);

    let holds = |rel: &str, lhs: f64, rhs: f64| {
        let slack = rel_tol * lhs.abs().max(rhs.abs()) + 1e-12;
        match rel {
            ">=" => lhs >= rhs - slack,
            "<=" => lhs <= rhs + slack,
            _ => (lhs - rhs).abs() <= slack,
        }
    };
    let chain = |rel: &str, names: &[&str], values: &[f64]| -> Vec<ChainStep> {
        (0..values.len() - 1)
            .map(|k| ChainStep {
                name: names[k].to_string(),
                relation: if names[k].ends_with("mean_value") {
                    "=".into()
                } else {
                    rel.into()
                },
                lhs: values[k],
                rhs: values[k + 1],
                holds: holds(
                    if names[k].ends_with("mean_value") {
                        "="
                    } else {
                        rel
                    },
                    values[k],
                    values[k + 1],
                ),
                conditional: k == values.len() - 2,
            })
            .collect()
    };
    let a = e1_hat * lambda / l;
    let lower = chain(
        ">=",
        &[
            "lower.overlap",
            "lower.mean_value",
            "lower.ball_comparability",
            "lower.pointwise",
            "lower.modulus",
            "lower.cover",
            "lower.fine_scale",
        ],
        &[
            total,
            s / l,
            fh / l,
            a * fv,
            a * (int_b - dev),
            a * (int_b - omega * vol),
            // sum_i Vol(B_i) <= L Vol(M), so the modulus term carries the overlap factor
            a * (integral_f - omega * l),
            0.5 * a * integral_f,
        ],
    );
    let b = e2_hat * lambda;
    let upper = chain(
        "<=",
        &[
            "upper.cover",
            "upper.mean_value",
            "upper.ball_comparability",
            "upper.pointwise",
            "upper.modulus",
            "upper.overlap",
            "upper.fine_scale",
        ],
        &[
            total,
            s,
            fh,
            b * fv,
            b * (int_b + dev),
            b * (int_b + omega * vol),
            b * l * (integral_f + omega),
            2.0 * l * b * integral_f,
        ],
    );
    for step in lower.iter().chain(&upper) {
        if !step.holds && !step.conditional {
            return Err(Error::ChainStepViolated {
                step: step.name.clone(),
                lhs: step.lhs,
                rhs: step.rhs,
            });
        }
    }
    let lower_regime_met = lower.last().is_some_and(|s| s.holds);
    let upper_regime_met = upper.last().is_some_and(|s| s.holds);
    let status = if lower_regime_met && upper_regime_met {
        CHAIN_HOLDS
    } else {
        CHAIN_UNMET
    };
    Ok(BoundChainTrace {
        function: f.name(),
        radius: r,
        overlap_bound: OVERLAP_BOUND,
        balls: terms.len(),
        omega,
        integral_f,
        nodal_integral: total,
        e1_hat,
        e2_hat,
        lower,
        upper,
        lower_regime_met,
        upper_regime_met,
        status: status.into(),
    })
}

/// Chain outcome kept in the run record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutcome {
    pub function: String,
    pub status: String,
    pub violated_step: Option<String>,
    pub omega: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "E")]
    pub energy: u64,
    pub seed: u64,
    pub n: usize,
    pub modes: usize,
    pub degenerate: bool,
    pub lambda: f64,
    pub total_length: f64,
    pub yau_ratio: f64,
    pub radius: f64,
    pub cover_count: usize,
    pub cover_overlap_max: usize,
    pub cover_covers: bool,
    pub d1: f64,
    pub d2: f64,
    /// Balls with mass ratio inside the tolerance window.
    pub sse_in_window: usize,
    pub sse_balls: usize,
    pub e1_hat: f64,
    pub e2_hat: f64,
    pub sse_excluded: usize,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub rho_f: Vec<(String, f64)>,
    pub chains: Vec<ChainOutcome>,
    /// `None` when `20 a1 / lambda >= 1/4`.
    pub good_fraction: Option<f64>,
    pub good_with_nodal_point: Option<f64>,
    pub doubling_balls: Option<usize>,
    pub lower_bound: Option<f64>,
    pub a3_hat: Option<f64>,
    pub c7_max: f64,
    pub c9_hat: f64,
    pub strip_sup: f64,
    pub strip_certificate: f64,
}

fn growth_for_run(
    spec: &EigenfunctionSpec,
    field: &SampledField,
    seed: u64,
) -> Result<GrowthReport> {
    let lambda = field.lambda();
    let view = DilatedView::with_chart(field, [0.5, 0.5], lambda.powf(-0.5), GROWTH_CHART)?;
    let real = real_doubling_exponent(&view, GROWTH_DELTA, &GROWTH_CENTERS)?;
    let tau = 1.0 / (spec.energy() as f64).sqrt();
    let c = growth_in_c_exponent(spec, tau, GROWTH_REGION)?;
    Ok(GrowthReport {
        energy: spec.energy(),
        seed,
        tau,
        delta: GROWTH_DELTA,
        mu_real: real.mu,
        c7_max: real.c7_max,
        per_center: real.per_center,
        complex_sup: c.complex_sup,
        real_sup: c.real_sup,
        c9_hat: c.c9_hat,
        certificates: Certificates {
            strip_upper_bound: c.certificate,
            strip_sup_within_bound: c.complex_sup <= c.certificate * (1.0 + 1e-12),
        },
    })
}

/// Growth report for a single run, as written by the CLI.
pub fn growth_report(spec: &EigenfunctionSpec, seed: u64) -> Result<GrowthReport> {
    let field = sample_grid(spec, grid_rule(spec.energy()))?;
    growth_for_run(spec, &field, seed)
}

/// Everything measured for one `(E, seed)`, plus an optional SVG.
pub fn run_single(
    plan: &ExperimentPlan,
    energy: u64,
    seed: u64,
) -> Result<(RunRecord, Option<String>)> {
    let tol = &plan.tolerances;
    let spec = random_eigenfunction(energy, seed)?;
    let n = grid_rule(energy);
    let field = sample_grid(&spec, n)?;
    let lambda = field.lambda();
    let nodal = extract_nodal(&field);
    let scale = ScaleFunction::for_torus(plan.rho)?;
    let r = scale.radius(lambda);
    let family = build_cover(r, seed)?;

    let sse: Vec<f64> = mass_ratios(&field, r, &family.centers)?
        .into_iter()
        .map(|x| x.1)
        .collect();
    let d1 = sse.iter().copied().fold(f64::INFINITY, f64::min);
    let d2 = sse.iter().copied().fold(0.0, f64::max);
    let sse_in_window = sse
        .iter()
        .filter(|&&q| q >= tol.sse_window.0 && q <= tol.sse_window.1)
        .count();

    let t1 = check_ball_comparability(&field, &nodal, scale, &family)?;
    let t2 = check_nodal_distribution(&field, &nodal, &plan.test_functions)?;

    let chains = plan
        .test_functions
        .iter()
        .map(
            |f| match replicate_bound_chain(&field, &nodal, scale, &family, f, tol.chain_rel) {
                Ok(t) => Ok(ChainOutcome {
                    function: t.function,
                    status: t.status,
                    violated_step: None,
                    omega: t.omega,
                }),
                Err(Error::ChainStepViolated { step, .. }) => Ok(ChainOutcome {
                    function: f.name(),
                    status: "violated".into(),
                    violated_step: Some(step),
                    omega: f64::NAN,
                }),
                Err(e) => Err(e),
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let outer = 20.0 * plan.a1 / lambda;
    let doubling = if outer < 0.25 {
        let centers = build_cover(10.0 * plan.a1 / lambda, seed)?.centers;
        let report = classify_doubling(&field, plan.a1, plan.a2, &centers)?;
        let bound = lower_bound_assembly(&report, &nodal)?;
        Some((report, bound))
    } else {
        None
    };

    let growth = growth_for_run(&spec, &field, seed)?;
    let strip = complex_strip_sup(&spec, growth.tau)?;

    let svg = plan.svg.then(|| {
        let balls: Vec<BallOverlay> = family
            .centers
            .iter()
            .map(|&c| BallOverlay {
                center: c,
                radius: r,
            })
            .collect();
        render(nodal.segments(), &balls)
    });

    let record = RunRecord {
        energy,
        seed,
        n,
        modes: spec.modes().len(),
        degenerate: spec.modes().len() <= DEGENERATE_MODES,
        lambda,
        total_length: nodal.total_length(),
        yau_ratio: nodal.yau_ratio(),
        radius: r,
        cover_count: family.len(),
        cover_overlap_max: family.overlap_max,
        cover_covers: family.covers,
        d1,
        d2,
        sse_in_window,
        sse_balls: sse.len(),
        e1_hat: t1.e1_hat,
        e2_hat: t1.e2_hat,
        sse_excluded: t1.excluded,
        c1_hat: t2.c1_hat,
        c2_hat: t2.c2_hat,
        rho_f: t2.rho_f,
        chains,
        good_fraction: doubling.as_ref().map(|d| d.0.good_fraction),
        good_with_nodal_point: doubling.as_ref().map(|d| d.0.good_with_nodal_point()),
        doubling_balls: doubling.as_ref().map(|d| d.0.balls.len()),
        lower_bound: doubling.as_ref().map(|d| d.1.bound),
        a3_hat: doubling.as_ref().and_then(|d| d.1.a3_hat),
        c7_max: growth.c7_max,
        c9_hat: growth.c9_hat,
        strip_sup: strip.sup,
        strip_certificate: strip.certificate,
    };
    Ok((record, svg))
}

/// Min/median/max of a per-run quantity at one energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Self> {
        min_median_max(values).map(|(min, median, max)| Self { min, median, max })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyAggregate {
    #[serde(rename = "E")]
    pub energy: u64,
    pub runs: usize,
    pub stats: BTreeMap<String, Spread>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub plan: ExperimentPlan,
    pub per_run: Vec<RunRecord>,
    pub aggregates: Vec<EnergyAggregate>,
    pub yau: YauVerdict,
    pub verdicts: BTreeMap<String, Verdict>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-run CSV table.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "E,seed,N,lambda,total_length,yau_ratio,radius,d1,d2,e1_hat,e2_hat,c1_hat,c2_hat,good_fraction,c7_max,c9_hat"
        )?;
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        for r in &self.per_run {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.energy,
                r.seed,
                r.n,
                fmt17(r.lambda),
                fmt17(r.total_length),
                fmt17(r.yau_ratio),
                fmt17(r.radius),
                fmt17(r.d1),
                fmt17(r.d2),
                fmt17(r.e1_hat),
                fmt17(r.e2_hat),
                fmt17(r.c1_hat),
                fmt17(r.c2_hat),
                opt(r.good_fraction),
                fmt17(r.c7_max),
                fmt17(r.c9_hat),
            )?;
        }
        Ok(())
    }

    pub fn failed_gates(&self) -> Vec<&str> {
        self.verdicts
            .iter()
            .filter(|(_, v)| !v.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

fn aggregate(energy: u64, runs: &[&RunRecord]) -> EnergyAggregate {
    let mut stats = BTreeMap::new();
    type Getter = fn(&RunRecord) -> Option<f64>;
    let fields: [(&str, Getter); 11] = [
        ("yau_ratio", |r| Some(r.yau_ratio)),
        ("d1", |r| Some(r.d1)),
        ("d2", |r| Some(r.d2)),
        ("e1_hat", |r| Some(r.e1_hat)),
        ("e2_hat", |r| Some(r.e2_hat)),
        ("c1_hat", |r| Some(r.c1_hat)),
        ("c2_hat", |r| Some(r.c2_hat)),
        ("good_fraction", |r| r.good_fraction),
        ("lower_bound", |r| r.lower_bound),
        ("c7_max", |r| Some(r.c7_max)),
        ("c9_hat", |r| Some(r.c9_hat)),
    ];
    for (name, get) in fields {
        let values: Vec<f64> = runs.iter().filter_map(|r| get(r)).collect();
        if let Some(s) = Spread::of(&values) {
            stats.insert(name.to_string(), s);
        }
    }
    EnergyAggregate {
        energy,
        runs: runs.len(),
        stats,
    }
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Reduce run records to aggregates and gate verdicts. Gates on individual
/// ball statistics are evaluated at the largest energy; smaller energies are
/// reported for trend.
pub fn assemble_report(plan: &ExperimentPlan, per_run: Vec<RunRecord>) -> VerificationReport {
    let tol = &plan.tolerances;
    let mut energies: Vec<u64> = plan.energies.clone();
    energies.sort_unstable();
    energies.dedup();
    let aggregates: Vec<EnergyAggregate> = energies
        .iter()
        .map(|&e| {
            aggregate(
                e,
                &per_run.iter().filter(|r| r.energy == e).collect::<Vec<_>>(),
            )
        })
        .collect();
    let samples: Vec<YauSample> = per_run
        .iter()
        .map(|r| YauSample {
            energy: r.energy,
            yau_ratio: r.yau_ratio,
            degenerate: r.degenerate,
        })
        .collect();
    let yau = check_yau_scaling(&samples, tol);

    let top = *energies.last().expect("validated plan has energies");
    let top_runs: Vec<&RunRecord> = per_run
        .iter()
        .filter(|r| r.energy == top && !r.degenerate)
        .collect();
    let mut verdicts = BTreeMap::new();

    verdicts.insert(
        "yau_scaling".into(),
        verdict(
            yau.pass,
            format!(
                "median drift {:.4} (max {}), window {:.4} (max {}), {} degenerate runs excluded{}",
                yau.drift,
                tol.yau_drift,
                yau.window,
                tol.yau_window,
                yau.excluded_degenerate,
                if yau.sufficient {
                    ""
                } else {
                    "; needs >= 3 energies with >= 10 runs"
                }
            ),
        ),
    );

    let inside: usize = top_runs.iter().map(|r| r.sse_in_window).sum();
    let balls: usize = top_runs.iter().map(|r| r.sse_balls).sum();
    let frac = if balls == 0 {
        0.0
    } else {
        inside as f64 / balls as f64
    };
    verdicts.insert(
        "small_scale_mass".into(),
        verdict(
            balls > 0 && frac >= tol.sse_fraction,
            format!(
                "E={top}: {inside}/{balls} = {frac:.4} of balls in [{}, {}]",
                tol.sse_window.0, tol.sse_window.1
            ),
        ),
    );

    let e1 = top_runs
        .iter()
        .map(|r| r.e1_hat)
        .fold(f64::INFINITY, f64::min);
    let e2 = top_runs.iter().map(|r| r.e2_hat).fold(0.0, f64::max);
    let excluded: usize = top_runs.iter().map(|r| r.sse_excluded).sum();
    verdicts.insert(
        "nodal_length_in_balls".into(),
        verdict(
            !top_runs.is_empty() && e1 > tol.e_floor && e2 < tol.e_ceiling && e2 / e1 <= tol.e_ratio_max,
            format!("E={top}: e1_hat {e1:.6}, e2_hat {e2:.6}, ratio {:.4}, {excluded} balls excluded by the mass gate", e2 / e1),
        ),
    );

    let worst_c = top_runs
        .iter()
        .map(|r| r.c2_hat / r.c1_hat)
        .fold(0.0, f64::max);
    let one_consistent = top_runs.iter().all(|r| {
        r.rho_f
            .iter()
            .find(|(name, _)| name == "one")
            .is_none_or(|&(_, rho)| rho == r.yau_ratio && r.c1_hat <= rho && rho <= r.c2_hat)
    });
    verdicts.insert(
        "nodal_distribution".into(),
        verdict(
            !top_runs.is_empty() && worst_c <= tol.c_ratio_max && one_consistent,
            format!(
                "E={top}: worst c2_hat/c1_hat {worst_c:.4} (max {})",
                tol.c_ratio_max
            ),
        ),
    );

    let violations: Vec<String> = per_run
        .iter()
        .flat_map(|r| {
            r.chains.iter().filter_map(move |c| {
                c.violated_step
                    .as_ref()
                    .map(|s| format!("E={} seed={} f={}: {s}", r.energy, r.seed, c.function))
            })
        })
        .collect();
    let unmet = per_run
        .iter()
        .flat_map(|r| &r.chains)
        .filter(|c| c.status == CHAIN_UNMET)
        .count();
    verdicts.insert(
        "bound_chain".into(),
        verdict(
            violations.is_empty(),
            if violations.is_empty() {
                format!(
                    "all finite steps hold; {unmet} chains report the fine-scale hypothesis unmet"
                )
            } else {
                violations.join("; ")
            },
        ),
    );

    let covers = per_run
        .iter()
        .all(|r| r.cover_covers && r.cover_overlap_max <= OVERLAP_BOUND);
    verdicts.insert(
        "cover".into(),
        verdict(
            covers,
            format!(
                "max overlap {}",
                per_run
                    .iter()
                    .map(|r| r.cover_overlap_max)
                    .max()
                    .unwrap_or(0)
            ),
        ),
    );

    let applicable: Vec<&RunRecord> = per_run
        .iter()
        .filter(|r| r.good_fraction.is_some())
        .collect();
    let worst_good = applicable
        .iter()
        .filter_map(|r| r.good_fraction)
        .fold(1.0, f64::min);
    let worst_nodal = applicable
        .iter()
        .filter_map(|r| r.good_with_nodal_point)
        .fold(1.0, f64::min);
    verdicts.insert(
        "good_balls".into(),
        verdict(
            !applicable.is_empty() && worst_good >= tol.good_fraction && worst_nodal == 1.0,
            format!(
                "{} runs applicable (20 a1/lambda < 1/4); min good fraction {worst_good:.4}; min good-with-nodal-point {worst_nodal:.4}",
                applicable.len()
            ),
        ),
    );

    let growth_medians: Vec<(u64, f64, f64)> = aggregates
        .iter()
        .filter(|a| {
            per_run
                .iter()
                .any(|r| r.energy == a.energy && !r.degenerate)
        })
        .filter_map(|a| {
            Some((
                a.energy,
                a.stats.get("c9_hat")?.median,
                a.stats.get("c7_max")?.median,
            ))
        })
        .collect();
    let spread = |v: Vec<f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        hi / lo
    };
    let c9_spread = spread(growth_medians.iter().map(|g| g.1).collect());
    verdicts.insert(
        "growth_c9_uniform".into(),
        verdict(
            !growth_medians.is_empty() && c9_spread <= tol.growth_window,
            format!(
                "median c9_hat max/min across energies {c9_spread:.4} (max {})",
                tol.growth_window
            ),
        ),
    );
    let c7_gate = match (growth_medians.first(), growth_medians.last()) {
        (Some(lo), Some(hi)) => hi.2 <= tol.growth_window * lo.2,
        _ => false,
    };
    verdicts.insert(
        "growth_c7_uniform".into(),
        verdict(
            c7_gate,
            format!(
                "median c7_max {}",
                growth_medians
                    .iter()
                    .map(|g| format!("E={}: {:.4}", g.0, g.2))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ),
    );

    let passed = verdicts.values().all(|v| v.pass);
    VerificationReport {
        plan: plan.clone(),
        per_run,
        aggregates,
        yau,
        verdicts,
        passed,
    }
}

/// Execute a validated plan. Runs execute in parallel and are collected in
/// plan order, so the report is independent of scheduling. With `out`,
/// writes `report.json`, `runs.csv` and, if requested, one SVG per run.
pub fn run_plan(plan: &ExperimentPlan, out: Option<&Path>) -> Result<VerificationReport> {
    plan.validate()?;
    let results = plan
        .runs()
        .into_par_iter()
        .map(|(e, seed)| run_single(plan, e, seed))
        .collect::<Result<Vec<_>>>()?;
    let (records, svgs): (Vec<RunRecord>, Vec<Option<String>>) = results.into_iter().unzip();
    let report = assemble_report(plan, records);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), report.to_json_string())?;
        report.write_csv(std::io::BufWriter::new(std::fs::File::create(
            dir.join("runs.csv"),
        )?))?;
        for (r, svg) in report.per_run.iter().zip(svgs) {
            if let Some(svg) = svg {
                std::fs::write(
                    dir.join(format!("run_E{}_seed{}.svg", r.energy, r.seed)),
                    svg,
                )?;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rule_values() {
        assert_eq!(grid_rule(65), 256);
        assert_eq!(grid_rule(325), 304);
        assert_eq!(grid_rule(1105), 544);
    }

    #[test]
    fn plan_validation_messages() {
        let mut plan = ExperimentPlan::new(vec![65, 3], 2);
        assert_eq!(
            plan.validate().unwrap_err().to_string(),
            "invalid experiment plan: empty spectrum at E=3"
        );
        plan.energies = vec![65];
        plan.rho = 1.5;
        assert!(plan
            .validate()
            .unwrap_err()
            .to_string()
            .contains("rho = 1.5 outside (0, 1)"));
        plan.rho = 0.5;
        assert!(plan.validate().is_ok());
    }

    #[test]
    fn plan_json_defaults() {
        let plan =
            ExperimentPlan::from_json_str(r#"{"energies":[65],"seeds_per_energy":3}"#).unwrap();
        assert_eq!(plan.test_functions, TestFunction::suite());
        assert_eq!(plan.a1, DEFAULT_A1);
        assert_eq!(plan.runs(), vec![(65, 1), (65, 2), (65, 3)]);
        assert!(ExperimentPlan::from_json_str(
            r#"{"energies":[65],"seeds_per_energy":3,"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn zero_function_is_trivial() {
        let field = sample_grid(&EigenfunctionSpec::sine_x(1), 256).unwrap();
        let nodal = extract_nodal(&field);
        let t = check_nodal_distribution(&field, &nodal, &[TestFunction::Zero]).unwrap();
        assert!(t.trivial);
        assert_eq!((t.c1_hat, t.c2_hat), (0.0, 0.0));
    }

    #[test]
    fn yau_fixtures_have_no_drift() {
        let samples: Vec<YauSample> = [1u32, 2, 4, 8]
            .iter()
            .map(|&k| {
                let spec = EigenfunctionSpec::sine_x(k);
                let field = sample_grid(&spec, 256.max(64 * k as usize)).unwrap();
                YauSample {
                    energy: spec.energy(),
                    yau_ratio: extract_nodal(&field).yau_ratio(),
                    degenerate: false,
                }
            })
            .collect();
        let v = check_yau_scaling(&samples, &Tolerances::default());
        assert!(v.drift < 1e-9, "drift {}", v.drift);
        assert!(!v.sufficient && !v.pass);
        for s in &samples {
            assert!((s.yau_ratio - 1.0 / PI).abs() < 1e-9);
        }
    }
}
