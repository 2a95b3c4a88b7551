use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Relative slack allowed when checking that a parameter lies in the curve interval.
const PARAM_SLACK: f64 = 1e-12;

/// Discriminant margin below which a grid line is treated as tangent to a conic.
pub const GRAZING_TOL: f64 = 1e-12;

/// Exact curve geometry carried by a mesh face.
///
/// * `Segment` is parameterised on `[0, 1]` by `a + t (b - a)`.
/// * `CircularArc` is `center + radius (cos(s t), sin(s t))` on `[t0, t1]`, where `s = sign`
///   is `+1` for counter-clockwise and `-1` for clockwise traversal.
/// * `EllipseArc` is `center + axes (cos t, sin t)` on `[t0, t1]` with `axes` invertible.
#[derive(Clone, Debug, PartialEq)]
pub enum Curve {
    Segment {
        a: Point,
        b: Point,
    },
    CircularArc {
        center: Point,
        radius: f64,
        t0: f64,
        t1: f64,
        sign: f64,
    },
    EllipseArc {
        center: Point,
        axes: Matrix2<f64>,
        t0: f64,
        t1: f64,
    },
}

impl Curve {
    pub fn segment(a: Point, b: Point) -> Self {
        Curve::Segment { a, b }
    }

    /// Full counter-clockwise circle starting at angle 0.
    pub fn circle(center: Point, radius: f64) -> Self {
        Curve::CircularArc {
            center,
            radius,
            t0: 0.0,
            t1: TAU,
            sign: 1.0,
        }
    }

    /// Full ellipse `center + axes (cos t, sin t)`, `t` in `[0, 2 pi]`.
    pub fn ellipse(center: Point, axes: Matrix2<f64>) -> Self {
        Curve::EllipseArc {
            center,
            axes,
            t0: 0.0,
            t1: TAU,
        }
    }

    pub fn param_range(&self) -> (f64, f64) {
        match *self {
            Curve::Segment { .. } => (0.0, 1.0),
            Curve::CircularArc { t0, t1, .. } | Curve::EllipseArc { t0, t1, .. } => (t0, t1),
        }
    }

    pub fn is_straight(&self) -> bool {
        matches!(self, Curve::Segment { .. })
    }

    /// Conic form `center + axes (cos t, sin t)` shared by arcs and ellipses.
    pub fn conic(&self) -> Option<(Point, Matrix2<f64>)> {
        match *self {
            Curve::Segment { .. } => None,
            Curve::CircularArc {
                center, radius, sign, ..
            } => Some((center, Matrix2::new(radius, 0.0, 0.0, sign * radius))),
            Curve::EllipseArc { center, axes, .. } => Some((center, axes)),
        }
    }

    /// Point and derivative without the interval check.
    pub fn point_tangent(&self, t: f64) -> (Point, Vector2<f64>) {
        match *self {
            Curve::Segment { a, b } => (a + (b - a) * t, b - a),
            Curve::CircularArc {
                center, radius, sign, ..
            } => {
                let (s, c) = (sign * t).sin_cos();
                (
                    center + Vector2::new(c, s) * radius,
                    Vector2::new(-s, c) * (radius * sign),
                )
            }
            Curve::EllipseArc { center, axes, .. } => {
                let (s, c) = t.sin_cos();
                (center + axes * Vector2::new(c, s), axes * Vector2::new(-s, c))
            }
        }
    }

    pub fn point(&self, t: f64) -> Point {
        self.point_tangent(t).0
    }

    /// `gamma(t)` and `gamma'(t)`; fails outside the parameter interval.
    pub fn eval(&self, t: f64) -> Result<(Point, Vector2<f64>)> {
        let (t0, t1) = self.param_range();
        let slack = PARAM_SLACK * (t1 - t0).abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::Domain { t, t0, t1 });
        }
        Ok(self.point_tangent(t))
    }

    pub fn start(&self) -> Point {
        self.point(self.param_range().0)
    }

    pub fn end(&self) -> Point {
        self.point(self.param_range().1)
    }

    /// Right-hand unit normal `(tau_y, -tau_x) / |tau|` at parameter `t`.
    pub fn right_normal(&self, t: f64) -> Vector2<f64> {
        let (_, d) = self.point_tangent(t);
        Vector2::new(d.y, -d.x) / d.norm()
    }

    /// The same geometry restricted to `[ta, tb]`.
    pub fn restrict(&self, ta: f64, tb: f64) -> Curve {
        match *self {
            Curve::Segment { .. } => Curve::Segment {
                a: self.point(ta),
                b: self.point(tb),
            },
            Curve::CircularArc {
                center, radius, sign, ..
            } => Curve::CircularArc {
                center,
                radius,
                t0: ta,
                t1: tb,
                sign,
            },
            Curve::EllipseArc { center, axes, .. } => Curve::EllipseArc {
                center,
                axes,
                t0: ta,
                t1: tb,
            },
        }
    }

    pub fn chord(&self) -> Curve {
        Curve::Segment {
            a: self.start(),
            b: self.end(),
        }
    }

    /// The same point set traversed end to start, still on an increasing parameter interval.
    pub fn reversed(&self) -> Curve {
        match *self {
            Curve::Segment { a, b } => Curve::Segment { a: b, b: a },
            Curve::CircularArc {
                center,
                radius,
                t0,
                t1,
                sign,
            } => Curve::CircularArc {
                center,
                radius,
                t0: -t1,
                t1: -t0,
                sign: -sign,
            },
            Curve::EllipseArc { center, axes, t0, t1 } => Curve::EllipseArc {
                center,
                axes: axes * Matrix2::new(1.0, 0.0, 0.0, -1.0),
                t0: -t1,
                t1: -t0,
            },
        }
    }

    /// Exact value of `1/2 * integral of (x dy - y dx)` along the curve.
    pub fn area_moment(&self) -> f64 {
        self.area_moment_about(&Point::zeros())
    }

    /// As [`Curve::area_moment`] with coordinates taken relative to `o`.
    ///
    /// A conic arc contributes its chord plus the segment between chord and arc,
    /// `det(A) (theta - sin theta) / 2`.
    pub fn area_moment_about(&self, o: &Point) -> f64 {
        let (a, b) = (self.start() - o, self.end() - o);
        let chord = 0.5 * (a.x * b.y - a.y * b.x);
        match self.conic() {
            None => chord,
            Some((_, axes)) => {
                let (t0, t1) = self.param_range();
                chord + 0.5 * axes.determinant() * theta_minus_sin(t1 - t0)
            }
        }
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        (self.end() - self.start()).norm() <= tol
    }

    /// Implicit function of a closed conic: positive inside, zero on the curve, negative outside.
    pub fn level(&self, x: &Point) -> Option<f64> {
        let (p, axes) = self.conic()?;
        let u = axes.try_inverse()? * (x - p);
        Some(1.0 - u.norm_squared())
    }

    /// Parameters in `[t0, t0 + 2 pi)` at which coordinate `axis` (0 = x, 1 = y) equals `value`.
    pub fn axis_crossings(&self, axis: usize, value: f64) -> Result<Vec<f64>> {
        let (p, axes) = self
            .conic()
            .ok_or_else(|| Error::CutSpec("cutting curves must be circles or ellipses".into()))?;
        let (a, b) = (axes[(axis, 0)], axes[(axis, 1)]);
        let rho = a.hypot(b);
        let q = (value - p[axis]) / rho;
        if (1.0 - q.abs()).abs() <= GRAZING_TOL {
            return Err(Error::DegenerateCut(format!(
                "grid line {}={value} is tangent to the cutting curve",
                if axis == 0 { "x" } else { "y" }
            )));
        }
        if q.abs() > 1.0 {
            return Ok(Vec::new());
        }
        let psi = b.atan2(a);
        let phi = q.acos();
        let t0 = self.param_range().0;
        let wrap = |t: f64| t0 + (t - t0).rem_euclid(TAU);
        let mut ts = vec![wrap(psi + phi), wrap(psi - phi)];
        ts.sort_by(f64::total_cmp);
        Ok(ts)
    }

    /// Sampled points (parameters uniformly spaced, endpoints included).
    pub fn sample(&self, count: usize) -> Vec<Point> {
        let (t0, t1) = self.param_range();
        let count = count.max(2);
        (0..count)
            .map(|i| self.point(t0 + (t1 - t0) * i as f64 / (count - 1) as f64))
            .collect()
    }
}

/// `theta - sin(theta)`, summed as a series for small angles.
fn theta_minus_sin(theta: f64) -> f64 {
    if theta.abs() >= 1.0 {
        return theta - theta.sin();
    }
    let t2 = theta * theta;
    let mut term = theta * t2 / 6.0;
    let mut sum = 0.0;
    for n in 2..20 {
        sum += term;
        term *= -t2 / ((2 * n) * (2 * n + 1)) as f64;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn reversal_swaps_endpoints_and_moment_sign() {
        let axes = Matrix2::new(0.8, -0.3, 0.2, 0.5);
        for c in [
            Curve::segment(Point::new(0.1, 0.2), Point::new(-0.4, 0.9)),
            Curve::circle(Point::new(0.3, -0.1), 0.7).restrict(0.4, 2.5),
            Curve::ellipse(Point::new(-0.2, 0.1), axes).restrict(-1.0, 0.6),
        ] {
            let r = c.reversed();
            let (t0, t1) = r.param_range();
            assert!(t0 < t1);
            assert_abs_diff_eq!(r.start(), c.end(), epsilon = 1e-15);
            assert_abs_diff_eq!(r.end(), c.start(), epsilon = 1e-15);
            assert_abs_diff_eq!(r.area_moment(), -c.area_moment(), epsilon = 1e-15);
            // the right normal flips with the direction of travel
            let (s0, s1) = c.param_range();
            let mid = c.point(0.5 * (s0 + s1));
            assert_abs_diff_eq!(r.point(0.5 * (t0 + t1)), mid, epsilon = 1e-15);
            assert_abs_diff_eq!(
                r.right_normal(0.5 * (t0 + t1)),
                -c.right_normal(0.5 * (s0 + s1)),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn segment_eval_midpoint() {
        let c = Curve::segment(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        let (x, d) = c.eval(0.5).unwrap();
        assert_eq!(x, Point::new(1.0, 0.0));
        assert_eq!(d, Vector2::new(2.0, 0.0));
    }

    #[test]
    fn unit_circle_eval_at_zero() {
        let c = Curve::circle(Point::zeros(), 1.0);
        let (x, d) = c.eval(0.0).unwrap();
        assert_abs_diff_eq!(x, Point::new(1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(d, Vector2::new(0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn rotated_ellipse_eval_at_zero() {
        let alpha = 0.8;
        let s3 = 3f64.sqrt();
        let axes = Matrix2::new(alpha / s3, -alpha, alpha / s3, alpha);
        let c = Curve::ellipse(Point::zeros(), axes);
        let (x, _) = c.eval(0.0).unwrap();
        let expected = 4.0 / (5.0 * s3);
        assert_abs_diff_eq!(x, Point::new(expected, expected), epsilon = 1e-15);
    }

    #[test]
    fn eval_outside_interval_is_domain_error() {
        let c = Curve::segment(Point::zeros(), Point::new(1.0, 0.0));
        assert!(matches!(c.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(c.eval(-0.1), Err(Error::Domain { .. })));
        let arc = Curve::circle(Point::zeros(), 1.0).restrict(0.0, 1.0);
        assert!(matches!(arc.eval(f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn area_moment_of_closed_curves() {
        let c = Curve::circle(Point::new(0.3, -0.2), 0.7);
        assert_abs_diff_eq!(c.area_moment(), PI * 0.49, epsilon = 1e-14);
        let cw = Curve::CircularArc {
            center: Point::new(0.3, -0.2),
            radius: 0.7,
            t0: 0.0,
            t1: TAU,
            sign: -1.0,
        };
        assert_abs_diff_eq!(cw.area_moment(), -PI * 0.49, epsilon = 1e-14);
        let e = Curve::ellipse(Point::new(1.0, 2.0), Matrix2::new(2.0, 0.5, 0.0, 1.0));
        assert_abs_diff_eq!(e.area_moment(), 2.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn crossings_lie_on_line() {
        let e = Curve::ellipse(Point::new(0.1, 0.0), Matrix2::new(0.6, -0.8, 0.5, 0.8));
        for axis in 0..2 {
            for v in [-0.5, 0.0, 0.25, 0.6] {
                for t in e.axis_crossings(axis, v).unwrap() {
                    assert_abs_diff_eq!(e.point(t)[axis], v, epsilon = 1e-13);
                }
            }
        }
        assert!(e.axis_crossings(0, 5.0).unwrap().is_empty());
    }

    #[test]
    fn tangent_line_is_degenerate() {
        let c = Curve::circle(Point::zeros(), 1.0);
        assert!(matches!(c.axis_crossings(0, 1.0), Err(Error::DegenerateCut(_))));
    }
}
