//! Gauss-Legendre rules, curved-edge rules and element rules built from the
//! inverse-divergence identity anchored at a base vertex.
//!
//! For a base point `nu`, the volume integral over an element is rewritten as
//!
//! ```text
//! int_T v = sum_F int_F (x - nu).n_T(x) int_0^1 t v(t x + (1 - t) nu) dt dS
//! ```
//!
//! and both integrals are approximated with Gauss-Legendre rules. Faces that
//! are straight and pass through `nu` contribute nothing and are skipped.

use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::{Face, Mesh, Point};

/// Default number of Gauss-Legendre points for edge and radial rules.
pub const DEFAULT_POINTS: usize = 30;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`, exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<Rule1D> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "Gauss-Legendre rule needs at least one point".into(),
        ));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x_i descends from near 1; map [-1, 1] -> [0, 1]
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    Ok(Rule1D { nodes, weights })
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Points, weights and face normals `n_F` along one face.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRule {
    pub face: usize,
    pub params: Vec<f64>,
    pub points: Vec<Point>,
    /// Include the `|gamma'|` factor, so they sum to the arc length.
    pub weights: Vec<f64>,
    pub normals: Vec<Vector2<f64>>,
}

pub fn edge_rule(face_id: usize, face: &Face, base: &Rule1D) -> EdgeRule {
    let (t0, t1) = face.curve.param_range();
    let len = base.len();
    let mut rule = EdgeRule {
        face: face_id,
        params: Vec::with_capacity(len),
        points: Vec::with_capacity(len),
        weights: Vec::with_capacity(len),
        normals: Vec::with_capacity(len),
    };
    for (x, w) in base.nodes.iter().zip(&base.weights) {
        let t = t0 + (t1 - t0) * x;
        let (p, d) = face.curve.point_tangent(t);
        rule.params.push(t);
        rule.points.push(p);
        rule.weights.push((t1 - t0) * w * d.norm());
        rule.normals.push(Vector2::new(d.y, -d.x) / d.norm() * face.orientation);
    }
    rule
}

/// Edge rules for every face of the mesh, indexed by face id.
pub fn edge_rules(mesh: &Mesh, base: &Rule1D) -> Vec<EdgeRule> {
    mesh.faces
        .iter()
        .enumerate()
        .map(|(i, f)| edge_rule(i, f, base))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElemRule {
    pub element: usize,
    pub base_point: Point,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Set when some boundary point sees the base point from outside, i.e. the
    /// element is not star-shaped with respect to it and radial segments leave it.
    pub leaves_element: bool,
}

/// Base vertex: the vertex with most incident straight faces, lowest id on ties.
pub fn choose_base_vertex(mesh: &Mesh, elem: usize) -> (usize, Point) {
    let el = &mesh.elements[elem];
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for r in &el.faces {
        let f = &mesh.faces[r.face];
        let straight = f.curve.is_straight() as usize;
        for v in f.vertices {
            match counts.iter_mut().find(|(id, _)| *id == v) {
                Some((_, c)) => *c += straight,
                None => counts.push((v, straight)),
            }
        }
    }
    let (v, _) = counts
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)))
        .expect("element has at least one face");
    (v, mesh.vertices[v])
}

/// Whether a face contributes nothing to the rule anchored at `nu`.
fn vanishes_at(face: &Face, nu: &Point, scale: f64) -> bool {
    match face.curve {
        crate::geometry::Curve::Segment { a, b } => {
            let d = b - a;
            let off = nu - a;
            (d.x * off.y - d.y * off.x).abs() <= 1e-13 * d.norm() * scale
        }
        _ => false,
    }
}

/// Element rule from per-face edge rules (looked up by face id) and a radial rule.
pub fn element_rule<'a>(
    mesh: &Mesh,
    elem: usize,
    edge_rules: impl Fn(usize) -> &'a EdgeRule,
    radial: &Rule1D,
    base_point: Point,
) -> Result<ElemRule> {
    let el = &mesh.elements[elem];
    if el.faces.is_empty() {
        return Err(Error::Structural(format!("element {elem} has no faces")));
    }
    let scale = el.diameter.max(f64::MIN_POSITIVE);
    let mut rule = ElemRule {
        element: elem,
        base_point,
        points: Vec::new(),
        weights: Vec::new(),
        leaves_element: false,
    };
    for r in &el.faces {
        let face = &mesh.faces[r.face];
        if vanishes_at(face, &base_point, scale) {
            continue;
        }
        let er = edge_rules(r.face);
        let sign = face.outward_sign(r);
        for ((x, w), n) in er.points.iter().zip(&er.weights).zip(&er.normals) {
            let flux = (x - base_point).dot(n) * sign;
            if flux < -1e-13 * scale {
                rule.leaves_element = true;
            }
            for (s, ws) in radial.nodes.iter().zip(&radial.weights) {
                rule.points.push(base_point + (x - base_point) * *s);
                rule.weights.push(w * flux * ws * s);
            }
        }
    }
    Ok(rule)
}

/// Element rule with `points`-point edge and radial rules and the default base vertex.
pub fn element_rule_with(mesh: &Mesh, elem: usize, points: usize) -> Result<ElemRule> {
    let base = gauss_legendre(points)?;
    let local: Vec<EdgeRule> = mesh.elements[elem]
        .faces
        .iter()
        .map(|r| edge_rule(r.face, &mesh.faces[r.face], &base))
        .collect();
    let lookup = |f: usize| {
        local
            .iter()
            .find(|r| r.face == f)
            .expect("edge rule built for every face of the element")
    };
    let (_, nu) = choose_base_vertex(mesh, elem);
    element_rule(mesh, elem, lookup, &base, nu)
}

/// Element rule with default point counts and base vertex.
pub fn element_rule_default(mesh: &Mesh, elem: usize) -> Result<ElemRule> {
    element_rule_with(mesh, elem, DEFAULT_POINTS)
}

/// Any weighted point set.
pub trait Rule {
    fn points(&self) -> &[Point];
    fn weights(&self) -> &[f64];
}

impl Rule for EdgeRule {
    fn points(&self) -> &[Point] {
        &self.points
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Rule for ElemRule {
    fn points(&self) -> &[Point] {
        &self.points
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `sum_i w_i f(x_i)`; fails on the first non-finite value of `f`.
pub fn integrate<R: Rule + ?Sized>(rule: &R, f: impl Fn(&Point) -> f64) -> Result<f64> {
    let mut sum = 0.0;
    for (x, w) in rule.points().iter().zip(rule.weights()) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                value: v,
                x: x.x,
                y: x.y,
            });
        }
        sum += w * v;
    }
    Ok(sum)
}

/// Componentwise integral of a vector field.
pub fn integrate_vector<R: Rule + ?Sized>(rule: &R, f: impl Fn(&Point) -> Vector2<f64>) -> Result<Vector2<f64>> {
    let mut sum = Vector2::zeros();
    for (x, w) in rule.points().iter().zip(rule.weights()) {
        let v = f(x);
        if !(v.x.is_finite() && v.y.is_finite()) {
            let bad = if v.x.is_finite() { v.y } else { v.x };
            return Err(Error::Evaluation {
                value: bad,
                x: x.x,
                y: x.y,
            });
        }
        sum += v * *w;
    }
    Ok(sum)
}

/// CSV dump `x,y,weight` of a rule.
pub fn rule_to_csv<R: Rule + ?Sized>(rule: &R) -> String {
    let mut s = String::from("x,y,weight\n");
    for (x, w) in rule.points().iter().zip(rule.weights()) {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", x.x, x.y, w);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::{disc_mesh, polygon_mesh, quarter_disc, unit_square};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn one_point_rule_is_midpoint() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn zero_points_is_error() {
        assert!(matches!(gauss_legendre(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn two_point_rule_integrates_cubic() {
        let r = gauss_legendre(2).unwrap();
        let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(3)).sum();
        assert_relative_eq!(v, 0.25, epsilon = 1e-16);
    }

    #[test]
    fn thirty_point_rule_exactness() {
        let r = gauss_legendre(30).unwrap();
        let total: f64 = r.weights.iter().sum();
        assert!((total - 1.0).abs() <= 1e-14);
        for q in 0..60 {
            let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(q)).sum();
            assert!((v - 1.0 / (q as f64 + 1.0)).abs() <= 1e-14, "q = {q}");
        }
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn square_moments() {
        let m = unit_square();
        let rule = element_rule_default(&m, 0).unwrap();
        assert_eq!(rule.base_point, Point::new(0.0, 0.0));
        assert_relative_eq!(integrate(&rule, |_| 1.0).unwrap(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(integrate(&rule, |x| x.x).unwrap(), 0.5, epsilon = 1e-13);
        assert_relative_eq!(integrate(&rule, |x| x.x * x.y).unwrap(), 0.25, epsilon = 1e-13);
        assert!(!rule.leaves_element);
    }

    #[test]
    fn quarter_disc_area() {
        let m = quarter_disc();
        let (v, nu) = choose_base_vertex(&m, 0);
        assert_eq!((v, nu), (0, Point::zeros()));
        let rule = element_rule_default(&m, 0).unwrap();
        assert_relative_eq!(integrate(&rule, |_| 1.0).unwrap(), PI / 4.0, max_relative = 1e-12);
        // only the arc contributes
        assert_eq!(rule.points.len(), DEFAULT_POINTS * DEFAULT_POINTS);
    }

    #[test]
    fn disc_base_vertex_lowest_index() {
        let m = disc_mesh(4);
        assert_eq!(choose_base_vertex(&m, 0).0, 0);
        let rule = element_rule_default(&m, 0).unwrap();
        assert_relative_eq!(integrate(&rule, |_| 1.0).unwrap(), PI, max_relative = 1e-12);
    }

    #[test]
    fn segment_and_arc_edge_rules() {
        let base = gauss_legendre(DEFAULT_POINTS).unwrap();
        let sq = unit_square();
        let r = edge_rule(0, &sq.faces[0], &base);
        assert_relative_eq!(integrate(&r, |_| 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(integrate(&r, |x| x.x).unwrap(), 0.5, epsilon = 1e-15);
        let q = quarter_disc();
        let r = edge_rule(1, &q.faces[1], &base);
        assert_relative_eq!(integrate(&r, |_| 1.0).unwrap(), PI / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn nonfinite_integrand_is_reported() {
        let m = unit_square();
        let rule = element_rule_default(&m, 0).unwrap();
        let err = integrate(&rule, |x| if x.x > 0.5 { f64::NAN } else { 0.0 }).unwrap_err();
        assert!(matches!(err, Error::Evaluation { x, .. } if x > 0.5));
    }

    #[test]
    fn nonconvex_polygon_sets_flag() {
        // arrow shape; the base vertex (0,0) does not see the whole boundary
        let m = polygon_mesh(&[
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(1.0, 0.5),
            Point::new(0.0, 2.0),
        ]);
        let rule = element_rule_default(&m, 0).unwrap();
        assert!(rule.leaves_element);
        assert_relative_eq!(
            integrate(&rule, |_| 1.0).unwrap(),
            m.elements[0].area,
            max_relative = 1e-13
        );
    }
}
