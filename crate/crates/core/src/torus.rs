//! Geometry of the unit flat torus `R^2 / Z^2`.

/// A point (or displacement) in the plane.
pub type Point = [f64; 2];

/// Reduce a coordinate into `[0, 1)`.
#[inline]
pub fn wrap(t: f64) -> f64 {
    let w = t - t.floor();
    // `t - floor(t)` rounds to 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[inline]
pub fn wrap_point(p: Point) -> Point {
    [wrap(p[0]), wrap(p[1])]
}

/// Minimal-image representative of a displacement, each component in `[-1/2, 1/2)`.
#[inline]
pub fn min_image(d: f64) -> f64 {
    d - (d + 0.5).floor()
}

/// Shortest displacement from `a` to `b` on the torus.
#[inline]
pub fn displacement(a: Point, b: Point) -> Point {
    [min_image(b[0] - a[0]), min_image(b[1] - a[1])]
}

#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    let d = displacement(a, b);
    d[0].hypot(d[1])
}

#[inline]
pub fn distance_sq(a: Point, b: Point) -> f64 {
    let d = displacement(a, b);
    d[0] * d[0] + d[1] * d[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_into_unit_interval() {
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(-1e-300), 0.0);
        assert_eq!(wrap(1.0), 0.0);
    }

    #[test]
    fn periodic_distance_uses_minimal_image() {
        assert!((distance([0.05, 0.5], [0.95, 0.5]) - 0.1).abs() < 1e-15);
        assert!((distance([0.0, 0.0], [0.5, 0.5]) - 0.5f64.hypot(0.5)).abs() < 1e-15);
        let d = displacement([0.9, 0.1], [0.1, 0.9]);
        assert!((d[0] - 0.2).abs() < 1e-15 && (d[1] + 0.2).abs() < 1e-15);
    }
}
