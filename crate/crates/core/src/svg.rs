//! SVG rendering of nodal sets and ball overlays on the unit square.

use std::fmt::Write as _;

use crate::nodal::NodalSegment;
use crate::torus::Point;

/// A circle overlay in torus coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallOverlay {
    pub center: Point,
    pub radius: f64,
}

/// Render segments and balls into a standalone SVG document with a
/// `0 0 1 1` viewBox. The `y` axis points up. Output depends only on the
/// inputs and their order.
pub fn render(segments: &[NodalSegment], balls: &[BallOverlay]) -> String {
    let mut out = String::new();
    out.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\" width=\"800\" height=\"800\">\n",
    );
    out.push_str("<defs><clipPath id=\"torus\"><rect x=\"0\" y=\"0\" width=\"1\" height=\"1\"/></clipPath></defs>\n");
    out.push_str("<rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"white\" stroke=\"black\" stroke-width=\"0.002\"/>\n");
    out.push_str("<g clip-path=\"url(#torus)\" transform=\"matrix(1 0 0 -1 0 1)\">\n");
    if !segments.is_empty() {
        out.push_str("<g fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"0.0015\" stroke-linecap=\"round\">\n");
        for s in segments {
            let d = s.delta();
            let (x0, y0) = (s.a[0], s.a[1]);
            let (x1, y1) = (x0 + d[0], y0 + d[1]);
            for (ox, oy) in seam_offsets([x0.min(x1), y0.min(y1)], [x0.max(x1), y0.max(y1)]) {
                let _ = writeln!(
                    out,
                    "<polyline points=\"{:.6},{:.6} {:.6},{:.6}\"/>",
                    x0 + ox,
                    y0 + oy,
                    x1 + ox,
                    y1 + oy
                );
            }
        }
        out.push_str("</g>\n");
    }
    if !balls.is_empty() {
        out.push_str("<g fill=\"none\" stroke=\"#c0392b\" stroke-width=\"0.0015\">\n");
        for b in balls {
            let [cx, cy] = b.center;
            let r = b.radius;
            for (ox, oy) in seam_offsets([cx - r, cy - r], [cx + r, cy + r]) {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.6}\" cy=\"{:.6}\" r=\"{:.6}\"/>",
                    cx + ox,
                    cy + oy,
                    r
                );
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Translates needed to draw a shape with bounding box `[lo, hi]` so that
/// every part that wraps across the seam is visible.
fn seam_offsets(lo: Point, hi: Point) -> Vec<(f64, f64)> {
    let shifts = |l: f64, h: f64| {
        let mut v = vec![0.0];
        if l < 0.0 {
            v.push(1.0);
        }
        if h > 1.0 {
            v.push(-1.0);
        }
        v
    };
    let xs = shifts(lo[0], hi[0]);
    let ys = shifts(lo[1], hi[1]);
    xs.iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_renders_frame_only() {
        let svg = render(&[], &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("<polyline"));
        assert!(!svg.contains("<circle"));
    }

    #[test]
    fn ball_across_seam_is_drawn_twice() {
        let svg = render(
            &[],
            &[BallOverlay {
                center: [0.02, 0.5],
                radius: 0.1,
            }],
        );
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
