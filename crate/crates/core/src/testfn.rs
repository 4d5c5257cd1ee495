//! Nonnegative continuous test functions on the torus.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::torus::{distance, Point};

/// Radius of the compactly supported bump.
pub const BUMP_WIDTH: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    Zero,
    One,
    /// `1 + cos(2 pi k x)`
    CosX(u32),
    /// `1 + cos(2 pi k y)`
    CosY(u32),
    /// `(1 - (d / w)^2)^2` for `d = dist(p, (1/2, 1/2)) < w`, else 0.
    Bump,
}

impl TestFunction {
    /// The standard four-function suite.
    pub fn suite() -> Vec<TestFunction> {
        vec![Self::One, Self::CosX(1), Self::CosY(1), Self::Bump]
    }

    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::One => 1.0,
            Self::CosX(k) => 1.0 + (TAU * k as f64 * p[0]).cos(),
            Self::CosY(k) => 1.0 + (TAU * k as f64 * p[1]).cos(),
            Self::Bump => {
                let d = distance(p, [0.5, 0.5]);
                if d >= BUMP_WIDTH {
                    0.0
                } else {
                    let s = 1.0 - (d / BUMP_WIDTH).powi(2);
                    s * s
                }
            }
        }
    }

    /// `int_{T^2} f dVol` in closed form.
    pub fn exact_integral(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::One | Self::CosX(_) | Self::CosY(_) => 1.0,
            Self::Bump => PI * BUMP_WIDTH * BUMP_WIDTH / 3.0,
        }
    }

    /// Upper bound on the Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::Zero | Self::One => 0.0,
            Self::CosX(k) | Self::CosY(k) => TAU * k as f64,
            // max of |d/dd (1 - d^2/w^2)^2| = 8 / (3 sqrt 3 w)
            Self::Bump => 8.0 / (3.0 * 3f64.sqrt() * BUMP_WIDTH),
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("zero"),
            Self::One => f.write_str("one"),
            Self::CosX(1) => f.write_str("cos_x"),
            Self::CosY(1) => f.write_str("cos_y"),
            Self::CosX(k) => write!(f, "cos_x:{k}"),
            Self::CosY(k) => write!(f, "cos_y:{k}"),
            Self::Bump => f.write_str("bump"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidPlan(format!(
                "unknown test function {s:?} (expected zero, one, cos_x[:k], cos_y[:k], bump)"
            ))
        };
        let freq = |rest: Option<&str>| -> Result<u32> {
            match rest {
                None => Ok(1),
                Some(k) => k.parse::<u32>().ok().filter(|&k| k > 0).ok_or_else(bad),
            }
        };
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("zero", None) => Ok(Self::Zero),
            ("one", None) => Ok(Self::One),
            ("bump", None) => Ok(Self::Bump),
            ("cos_x", r) => Ok(Self::CosX(freq(r)?)),
            ("cos_y", r) => Ok(Self::CosY(freq(r)?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for TestFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TestFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in [
            TestFunction::Zero,
            TestFunction::One,
            TestFunction::CosX(1),
            TestFunction::CosY(3),
            TestFunction::Bump,
        ] {
            assert_eq!(f.name().parse::<TestFunction>().unwrap(), f);
        }
        assert!("cos_x:0".parse::<TestFunction>().is_err());
        assert!("gauss".parse::<TestFunction>().is_err());
    }

    #[test]
    fn grid_integrals_match_closed_form() {
        let n = 512;
        for f in TestFunction::suite() {
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    sum += f.eval([i as f64 / n as f64, j as f64 / n as f64]);
                }
            }
            let q = sum / (n * n) as f64;
            assert!((q - f.exact_integral()).abs() < 1e-4, "{f}: {q}");
        }
    }
}
