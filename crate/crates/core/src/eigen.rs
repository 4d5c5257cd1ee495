//! Exact Laplacian eigenfunctions on the unit flat torus.
//!
//! An eigenfunction at energy `E` is a trigonometric polynomial
//! `u(x) = sum c_xi exp(2 pi i xi.x)` over the lattice points `|xi|^2 = E`.
//! With the unit square as fundamental domain, `Delta u = 4 pi^2 E u`, so
//! `lambda = 2 pi sqrt(E)`. Coefficients are conjugate symmetric (so `u` is
//! real) and normalized so that `||u||_{L^2} = 1 = Vol(T^2)`.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::io::{Read, Write};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{wrap, wrap_point, Point};

/// Samples per shortest wavelength required by [`sample_grid`].
pub const OVERSAMPLING: f64 = 10.0;

/// Relative tolerance on the imaginary residue of a point evaluation.
const IMAG_TOLERANCE: f64 = 1e-10;

/// An integer frequency vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeMode {
    pub xi: [i64; 2],
}

impl LatticeMode {
    pub const fn new(a: i64, b: i64) -> Self {
        Self { xi: [a, b] }
    }

    pub fn norm_sq(self) -> i64 {
        self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]
    }

    pub fn l1_norm(self) -> i64 {
        self.xi[0].abs() + self.xi[1].abs()
    }

    /// True for the member of each `{xi, -xi}` pair that carries the free coefficient.
    fn is_representative(self) -> bool {
        self.xi[0] > 0 || (self.xi[0] == 0 && self.xi[1] > 0)
    }
}

impl std::ops::Neg for LatticeMode {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.xi[0], -self.xi[1])
    }
}

/// All `xi` in `Z^2` with `|xi|^2 = energy`, in lexicographic order.
///
/// `energy = 0` yields the single constant mode.
pub fn enumerate_modes(energy: u64) -> Vec<LatticeMode> {
    let e = energy as i64;
    let bound = isqrt(energy) as i64;
    let mut modes = Vec::new();
    for a in -bound..=bound {
        let rest = e - a * a;
        let b = isqrt(rest as u64) as i64;
        if b * b != rest {
            continue;
        }
        if b == 0 {
            modes.push(LatticeMode::new(a, 0));
        } else {
            modes.push(LatticeMode::new(a, -b));
            modes.push(LatticeMode::new(a, b));
        }
    }
    modes
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// A finite Fourier series with integer frequencies on the unit torus.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    pub modes: Vec<LatticeMode>,
    pub coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// `sum c_xi exp(2 pi i xi.(x + i y))` at the complex point `x + i y`.
    pub fn eval_complex(&self, x: Point, y: Point) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in self.modes.iter().zip(&self.coeffs) {
            let [a, b] = m.xi;
            let (a, b) = (a as f64, b as f64);
            let phase = wrap(a * x[0] + b * x[1]);
            let (s, co) = (TAU * phase).sin_cos();
            let damp = (-TAU * (a * y[0] + b * y[1])).exp();
            acc += c * Complex64::new(co, s) * damp;
        }
        acc
    }

    /// Real part at a real point.
    pub fn eval(&self, x: Point) -> f64 {
        self.eval_complex(x, [0.0, 0.0]).re
    }

    pub fn sum_abs_coeffs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn sum_sq_coeffs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Complex values on the `n x n` lattice `(i/n, j/n)`, row-major in `i`.
    pub fn sample_complex(&self, n: usize) -> Vec<Complex64> {
        let twiddle = twiddles(n);
        let nn = n as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let row_coeffs: Vec<(usize, Complex64)> = self
                .modes
                .iter()
                .zip(&self.coeffs)
                .map(|(m, c)| {
                    let k = (m.xi[0] * i as i64).rem_euclid(nn) as usize;
                    (m.xi[1].rem_euclid(nn) as usize, c * twiddle[k])
                })
                .collect();
            for (j, slot) in row.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(b, c) in &row_coeffs {
                    acc += c * twiddle[(b * j) % n];
                }
                *slot = acc;
            }
        });
        out
    }
}

/// `exp(2 pi i k / n)` for `k` in `0..n`, exact at the quarter turns.
fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else if 4 * k == n {
                Complex64::new(0.0, 1.0)
            } else if 2 * k == n {
                Complex64::new(-1.0, 0.0)
            } else if 4 * k == 3 * n {
                Complex64::new(0.0, -1.0)
            } else {
                let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
                Complex64::new(c, s)
            }
        })
        .collect()
}

/// A normalized real eigenfunction of the flat Laplacian on `T^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenfunctionSpec {
    energy: u64,
    lambda: f64,
    poly: TrigPolynomial,
}

impl EigenfunctionSpec {
    /// Validate modes and conjugate symmetry, then rescale to unit `L^2` norm.
    pub fn new(energy: u64, modes: Vec<LatticeMode>, coeffs: Vec<Complex64>) -> Result<Self> {
        let spec = Self::from_parts(energy, modes, coeffs)?;
        let norm = spec.poly.sum_sq_coeffs().sqrt();
        let coeffs = spec.poly.coeffs.iter().map(|c| c / norm).collect();
        Ok(Self {
            poly: TrigPolynomial {
                coeffs,
                ..spec.poly
            },
            ..spec
        })
    }

    fn from_parts(energy: u64, modes: Vec<LatticeMode>, coeffs: Vec<Complex64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptySpectrum { energy });
        }
        if modes.len() != coeffs.len() {
            return Err(Error::InvalidSpec(format!(
                "{} modes but {} coefficients",
                modes.len(),
                coeffs.len()
            )));
        }
        if let Some(m) = modes.iter().find(|m| m.norm_sq() as u64 != energy) {
            return Err(Error::InvalidSpec(format!(
                "mode {:?} does not lie on |xi|^2 = {energy}",
                m.xi
            )));
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidSpec(
                "coefficients must be finite and not all zero".into(),
            ));
        }
        for (m, c) in modes.iter().zip(&coeffs) {
            let partner = modes
                .iter()
                .position(|p| *p == -*m)
                .map(|k| coeffs[k])
                .unwrap_or_default();
            if (partner - c.conj()).norm() > 1e-12 * scale {
                return Err(Error::InvalidSpec(format!(
                    "coefficient of {:?} is not the conjugate of its mirror",
                    m.xi
                )));
            }
        }
        let lambda = TAU * (energy as f64).sqrt();
        Ok(Self {
            energy,
            lambda,
            poly: TrigPolynomial { modes, coeffs },
        })
    }

    /// The constant function `u = 1` (energy 0); a calibration fixture.
    pub fn constant() -> Self {
        Self {
            energy: 0,
            lambda: 0.0,
            poly: TrigPolynomial {
                modes: vec![LatticeMode::new(0, 0)],
                coeffs: vec![Complex64::new(1.0, 0.0)],
            },
        }
    }

    /// `sqrt(2) sin(2 pi k x)`.
    pub fn sine_x(k: u32) -> Self {
        let k = k as i64;
        let c = Complex64::new(0.0, -1.0 / SQRT_2);
        Self::from_parts(
            (k * k) as u64,
            vec![LatticeMode::new(-k, 0), LatticeMode::new(k, 0)],
            vec![c.conj(), c],
        )
        .expect("closed-form fixture is valid")
    }

    /// `sqrt(2) sin(2 pi k y)`.
    pub fn sine_y(k: u32) -> Self {
        let k = k as i64;
        let c = Complex64::new(0.0, -1.0 / SQRT_2);
        Self::from_parts(
            (k * k) as u64,
            vec![LatticeMode::new(0, -k), LatticeMode::new(0, k)],
            vec![c.conj(), c],
        )
        .expect("closed-form fixture is valid")
    }

    /// `2 sin(2 pi k x) sin(2 pi k y)`.
    pub fn sine_product(k: u32) -> Self {
        let k = k as i64;
        let half = Complex64::new(0.5, 0.0);
        Self::from_parts(
            (2 * k * k) as u64,
            vec![
                LatticeMode::new(-k, -k),
                LatticeMode::new(-k, k),
                LatticeMode::new(k, -k),
                LatticeMode::new(k, k),
            ],
            vec![-half, half, half, -half],
        )
        .expect("closed-form fixture is valid")
    }

    pub fn energy(&self) -> u64 {
        self.energy
    }

    /// Square root of the Laplace eigenvalue, `2 pi sqrt(E)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn modes(&self) -> &[LatticeMode] {
        &self.poly.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.poly.coeffs
    }

    pub fn poly(&self) -> &TrigPolynomial {
        &self.poly
    }

    /// Eigenvalue of the spectral Laplacian on each mode, `4 pi^2 |xi|^2`.
    pub fn mode_eigenvalues(&self) -> Vec<f64> {
        self.poly
            .modes
            .iter()
            .map(|m| 4.0 * PI * PI * m.norm_sq() as f64)
            .collect()
    }

    /// Value at `point` (reduced mod 1). Fails if the imaginary residue
    /// betrays broken conjugate symmetry.
    pub fn evaluate(&self, point: Point) -> Result<f64> {
        let z = self.poly.eval_complex(wrap_point(point), [0.0, 0.0]);
        let bound = IMAG_TOLERANCE * self.poly.sum_abs_coeffs();
        if z.im.abs() > bound {
            return Err(Error::NonRealValue {
                residue: z.im.abs(),
                bound,
            });
        }
        Ok(z.re)
    }

    /// Smallest grid resolution accepted by [`sample_grid`].
    pub fn min_resolution(&self) -> usize {
        (OVERSAMPLING * (self.energy as f64).sqrt()).ceil() as usize
    }

    pub fn to_json(&self) -> SpecJson {
        SpecJson {
            energy: self.energy,
            modes: self.poly.modes.iter().map(|m| m.xi).collect(),
            coeffs: self.poly.coeffs.iter().map(|c| [c.re, c.im]).collect(),
            lambda: self.lambda,
        }
    }

    /// Rebuild from the serialized form; coefficients are kept bit-for-bit.
    pub fn from_json(json: SpecJson) -> Result<Self> {
        let modes = json
            .modes
            .into_iter()
            .map(|[a, b]| LatticeMode::new(a, b))
            .collect();
        let coeffs = json
            .coeffs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        let spec = if json.energy == 0 {
            Self::from_parts_constant(modes, coeffs)?
        } else {
            Self::from_parts(json.energy, modes, coeffs)?
        };
        let norm = spec.poly.sum_sq_coeffs();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "sum |c|^2 = {norm}, expected 1"
            )));
        }
        if (json.lambda - spec.lambda).abs() > 1e-9 * spec.lambda.max(1.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda {} inconsistent with energy {} (expected {})",
                json.lambda, spec.energy, spec.lambda
            )));
        }
        Ok(spec)
    }

    fn from_parts_constant(modes: Vec<LatticeMode>, coeffs: Vec<Complex64>) -> Result<Self> {
        match (modes.as_slice(), coeffs.as_slice()) {
            ([m], [c]) if *m == LatticeMode::new(0, 0) && c.im == 0.0 => Ok(Self {
                energy: 0,
                lambda: 0.0,
                poly: TrigPolynomial { modes, coeffs },
            }),
            _ => Err(Error::InvalidSpec(
                "energy 0 admits only the real constant mode".into(),
            )),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("spec serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(s)?)
    }
}

/// Serialized eigenfunction: `{energy, modes: [[a,b],...], coeffs: [[re,im],...], lambda}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecJson {
    pub energy: u64,
    pub modes: Vec<[i64; 2]>,
    pub coeffs: Vec<[f64; 2]>,
    pub lambda: f64,
}

/// Random member of the energy-`E` eigenspace: i.i.d. standard complex
/// Gaussian coefficients on one representative of each `+-xi` pair,
/// mirrored by conjugation, then normalized.
pub fn random_eigenfunction(energy: u64, seed: u64) -> Result<EigenfunctionSpec> {
    if energy == 0 {
        return Err(Error::InvalidEnergy(energy));
    }
    let modes = enumerate_modes(energy);
    if modes.is_empty() {
        return Err(Error::EmptySpectrum { energy });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); modes.len()];
    for (k, m) in modes.iter().enumerate() {
        if !m.is_representative() {
            continue;
        }
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        let c = Complex64::new(re, im) / SQRT_2;
        coeffs[k] = c;
        let mirror = modes.binary_search(&-*m).expect("spectrum is symmetric");
        coeffs[mirror] = c.conj();
    }
    EigenfunctionSpec::new(energy, modes, coeffs)
}

/// Values of a real function on the periodic `N x N` lattice.
///
/// `values[i * n + j] = u(i / n, j / n)`; the first index runs along `x`.
#[derive(Clone, Debug)]
pub struct SampledField {
    n: usize,
    values: Vec<f64>,
    lambda: f64,
    interpolant: OnceLock<TrigPolynomial>,
}

impl SampledField {
    pub fn from_values(n: usize, values: Vec<f64>, lambda: f64) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::InvalidField(format!(
                "expected {} values for N={n}, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite sample {v}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidField(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            n,
            values,
            lambda,
            interpolant: OnceLock::new(),
        })
    }

    /// `u = 1` on an `n x n` grid, tagged with a nominal `lambda`.
    pub fn constant(n: usize, lambda: f64) -> Self {
        Self::from_values(n, vec![1.0; n * n], lambda).expect("constant field is valid")
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at lattice index `(i, j)`, both taken mod `N`.
    #[inline]
    pub fn at(&self, i: i64, j: i64) -> f64 {
        let n = self.n as i64;
        self.values[(i.rem_euclid(n) * n + j.rem_euclid(n)) as usize]
    }

    /// Grid mean of `u^2`, the periodic trapezoid rule for `int |u|^2`.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    /// Bilinear interpolation of the samples.
    pub fn bilinear(&self, p: Point) -> f64 {
        let n = self.n as f64;
        let (gx, gy) = (wrap(p[0]) * n, wrap(p[1]) * n);
        let (i, j) = (gx.floor(), gy.floor());
        let (tx, ty) = (gx - i, gy - j);
        let (i, j) = (i as i64, j as i64);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
    }

    /// Band-limited reconstruction of the samples: the unique trigonometric
    /// polynomial with frequencies in `(-N/2, N/2]^2` through every sample.
    /// Exact for eigenfunctions sampled above the Nyquist rate.
    pub fn interpolant(&self) -> &TrigPolynomial {
        self.interpolant
            .get_or_init(|| reconstruct(self.n, &self.values))
    }

    /// Evaluate the band-limited reconstruction at an arbitrary point.
    pub fn interpolate(&self, p: Point) -> f64 {
        self.interpolant().eval(wrap_point(p))
    }

    /// Binary export: `N` as little-endian `u32`, a reserved `u32`, then
    /// `N^2` little-endian `f64` in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.n).map_err(|_| Error::InvalidField("N exceeds u32".into()))?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, lambda: f64) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let n = u32::from_le_bytes(header[..4].try_into().expect("4 bytes")) as usize;
        let mut buf = vec![0u8; n * n * 8];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_values(n, values, lambda)
    }
}

fn reconstruct(n: usize, values: &[f64]) -> TrigPolynomial {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = data[i * n + j];
        }
        fft.process(&mut column);
        for i in 0..n {
            data[i * n + j] = column[i];
        }
    }
    let scale = 1.0 / (n * n) as f64;
    let largest = data.iter().map(|c| c.norm()).fold(0.0, f64::max) * scale;
    let threshold = 1e-10 * largest;
    let signed = |k: usize| {
        if 2 * k <= n {
            k as i64
        } else {
            k as i64 - n as i64
        }
    };
    let mut terms: Vec<(LatticeMode, Complex64)> = data
        .iter()
        .enumerate()
        .filter_map(|(idx, c)| {
            let c = c * scale;
            (c.norm() > threshold).then(|| (LatticeMode::new(signed(idx / n), signed(idx % n)), c))
        })
        .collect();
    terms.sort_by_key(|(m, _)| *m);
    let (modes, coeffs) = terms.into_iter().unzip();
    TrigPolynomial { modes, coeffs }
}

/// Exact evaluation of `spec` on the periodic `N x N` lattice.
pub fn sample_grid(spec: &EigenfunctionSpec, n: usize) -> Result<SampledField> {
    let min = spec.min_resolution().max(1);
    if n < min {
        return Err(Error::ResolutionTooCoarse { n, min });
    }
    let values = spec
        .poly
        .sample_complex(n)
        .into_iter()
        .map(|z| z.re)
        .collect();
    SampledField::from_values(n, values, spec.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_at_unit_energy() {
        let modes = enumerate_modes(1);
        assert_eq!(
            modes,
            vec![
                LatticeMode::new(-1, 0),
                LatticeMode::new(0, -1),
                LatticeMode::new(0, 1),
                LatticeMode::new(1, 0)
            ]
        );
    }

    #[test]
    fn three_is_not_a_sum_of_two_squares() {
        assert!(enumerate_modes(3).is_empty());
        assert!(matches!(
            random_eigenfunction(3, 1),
            Err(Error::EmptySpectrum { energy: 3 })
        ));
    }

    #[test]
    fn modes_at_65_by_brute_force() {
        let mut brute = Vec::new();
        for a in -9i64..=9 {
            for b in -9i64..=9 {
                if a * a + b * b == 65 {
                    brute.push(LatticeMode::new(a, b));
                }
            }
        }
        assert_eq!(brute.len(), 16);
        assert_eq!(enumerate_modes(65), brute);
    }

    #[test]
    fn random_spec_is_normalized_and_deterministic() {
        let a = random_eigenfunction(65, 7).unwrap();
        let b = random_eigenfunction(65, 7).unwrap();
        assert_eq!(a, b);
        assert!((a.poly.sum_sq_coeffs() - 1.0).abs() < 1e-14);
        let c = random_eigenfunction(1, 99).unwrap();
        assert_eq!(c.modes().len(), 4);
        assert!((c.poly.sum_sq_coeffs() - 1.0).abs() < 1e-14);
        assert_ne!(random_eigenfunction(65, 8).unwrap(), a);
    }

    #[test]
    fn sine_peak_and_zero() {
        let u = EigenfunctionSpec::sine_x(1);
        assert!((u.evaluate([0.25, 0.7]).unwrap() - SQRT_2).abs() < 1e-14);
        assert!(u.evaluate([0.5, 0.3]).unwrap().abs() < 1e-14);
        assert!((u.evaluate([1.25, -0.3]).unwrap() - SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn broken_symmetry_is_rejected() {
        let modes = vec![LatticeMode::new(-1, 0), LatticeMode::new(1, 0)];
        let coeffs = vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 1.0)];
        assert!(matches!(
            EigenfunctionSpec::new(1, modes, coeffs),
            Err(Error::InvalidSpec(_))
        ));
        // evaluate guards specs assembled without validation
        let bad = EigenfunctionSpec {
            energy: 1,
            lambda: TAU,
            poly: TrigPolynomial {
                modes: vec![LatticeMode::new(1, 0)],
                coeffs: vec![Complex64::new(1.0, 0.0)],
            },
        };
        assert!(matches!(
            bad.evaluate([0.1, 0.0]),
            Err(Error::NonRealValue { .. })
        ));
    }

    #[test]
    fn sine_grid_is_independent_of_y() {
        let field = sample_grid(&EigenfunctionSpec::sine_x(1), 64).unwrap();
        for i in 0..64 {
            let expected = SQRT_2 * (TAU * i as f64 / 64.0).sin();
            for j in 0..64 {
                assert!((field.at(i, j) - expected).abs() < 1e-14);
            }
        }
        // quarter-turn twiddles are exact, so the nodal columns are exact zeros
        assert_eq!(field.at(0, 5), 0.0);
        assert_eq!(field.at(32, 5), 0.0);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = random_eigenfunction(65, 1).unwrap();
        assert_eq!(spec.min_resolution(), 81);
        assert!(matches!(
            sample_grid(&spec, 80),
            Err(Error::ResolutionTooCoarse { n: 80, min: 81 })
        ));
        assert!(sample_grid(&spec, 81).is_ok());
    }

    #[test]
    fn grid_matches_pointwise_evaluation() {
        let spec = random_eigenfunction(65, 7).unwrap();
        let field = sample_grid(&spec, 128).unwrap();
        for i in (0..128).step_by(7) {
            for j in (0..128).step_by(5) {
                let exact = spec.evaluate([i as f64 / 128.0, j as f64 / 128.0]).unwrap();
                assert!((field.at(i, j) - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolant_recovers_the_spectrum() {
        let spec = random_eigenfunction(65, 3).unwrap();
        let field = sample_grid(&spec, 96).unwrap();
        let poly = field.interpolant();
        assert_eq!(poly.modes, spec.modes());
        for (a, b) in poly.coeffs.iter().zip(spec.coeffs()) {
            assert!((a - b).norm() < 1e-13);
        }
        let p = [0.123, 0.877];
        assert!((field.interpolate(p) - spec.evaluate(p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let spec = random_eigenfunction(325, 11).unwrap();
        let back = EigenfunctionSpec::from_json_str(&spec.to_json_string()).unwrap();
        assert_eq!(back, spec);
        let c = EigenfunctionSpec::constant();
        assert_eq!(
            EigenfunctionSpec::from_json_str(&c.to_json_string()).unwrap(),
            c
        );
    }

    #[test]
    fn json_with_wrong_lambda_is_rejected() {
        let mut json = EigenfunctionSpec::sine_x(1).to_json();
        json.lambda = 1.0;
        assert!(EigenfunctionSpec::from_json(json).is_err());
    }

    #[test]
    fn binary_field_layout() {
        let field = sample_grid(&EigenfunctionSpec::sine_product(1), 32).unwrap();
        let mut buf = Vec::new();
        field.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 * 32 * 8);
        assert_eq!(&buf[..8], &[32, 0, 0, 0, 0, 0, 0, 0]);
        let back = SampledField::read_binary(buf.as_slice(), field.lambda()).unwrap();
        assert_eq!(back.values(), field.values());
    }
}
