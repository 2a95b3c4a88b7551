//! Curved 2D meshes: curves, faces, elements and their geometric queries.
//!
//! Elements are closed loops of faces traversed counter-clockwise. A face is
//! traversed *forward* (along its curve parameter) by the element lying to the
//! left of the curve, recorded as `elem_left`; the other side is `elem_right`.
//! The outward normal of the left element is therefore the right-hand normal
//! of the curve.

mod curve;
pub mod io;

use std::fmt;

use nalgebra::Vector2;

pub use curve::{Curve, Point, GRAZING_TOL};

use crate::error::{Error, Result};
use crate::quadrature;

/// Closure tolerance for consecutive face endpoints, relative to `h_T`.
pub const CLOSURE_TOL: f64 = 1e-12;
/// Tolerance on unit-vector checks.
pub const UNIT_TOL: f64 = 1e-13;
/// Relative agreement required between the two area computations.
pub const AREA_TOL: f64 = 1e-10;

const DIAMETER_SAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub curve: Curve,
    /// Start and end vertex ids, in curve direction.
    pub vertices: [usize; 2],
    pub elem_left: Option<usize>,
    pub elem_right: Option<usize>,
    /// `+1` or `-1`: `n_F = orientation * right_normal`.
    pub orientation: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.elem_left.is_none() || self.elem_right.is_none()
    }

    pub fn is_interior(&self) -> bool {
        self.elem_left.is_some() && self.elem_right.is_some()
    }

    /// Factor turning `n_F` into the outward normal of the element traversing `r`.
    pub fn outward_sign(&self, r: &FaceRef) -> f64 {
        self.orientation * r.sign()
    }

    /// Unit face normal `n_F(t)`.
    pub fn normal(&self, t: f64) -> Vector2<f64> {
        self.curve.right_normal(t) * self.orientation
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceRef {
    pub face: usize,
    pub forward: bool,
}

impl FaceRef {
    pub fn new(face: usize, forward: bool) -> Self {
        Self { face, forward }
    }

    /// `+1` when traversed along the curve, `-1` otherwise.
    pub fn sign(&self) -> f64 {
        if self.forward {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub faces: Vec<FaceRef>,
    pub region: u32,
    pub diameter: f64,
    pub area: f64,
    pub centroid: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<Face>,
    pub elements: Vec<Element>,
    pub h: f64,
}

impl Mesh {
    /// Builds a mesh and caches diameters, areas and centroids.
    ///
    /// No validation beyond what the caches need; see [`validate_mesh`].
    pub fn new(vertices: Vec<Point>, faces: Vec<Face>, loops: Vec<(Vec<FaceRef>, u32)>) -> Result<Self> {
        let mut elements = Vec::with_capacity(loops.len());
        for (id, (refs, region)) in loops.into_iter().enumerate() {
            if let Some(bad) = refs.iter().find(|r| r.face >= faces.len()) {
                return Err(Error::Structural(format!(
                    "element {id} references missing face {}",
                    bad.face
                )));
            }
            let area = loop_area(&faces, &refs);
            let centroid = loop_first_moment(&faces, &refs) / area;
            let diameter = loop_diameter(&faces, &refs)?;
            elements.push(Element {
                faces: refs,
                region,
                diameter,
                area,
                centroid,
            });
        }
        let h = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        Ok(Self {
            vertices,
            faces,
            elements,
            h,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_internal_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_interior()).count()
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    /// Traversal-ordered start point of a face inside an element loop.
    pub fn loop_start(&self, r: &FaceRef) -> Point {
        let c = &self.faces[r.face].curve;
        if r.forward {
            c.start()
        } else {
            c.end()
        }
    }

    pub fn loop_end(&self, r: &FaceRef) -> Point {
        let c = &self.faces[r.face].curve;
        if r.forward {
            c.end()
        } else {
            c.start()
        }
    }

    /// Vertex ids of an element, in loop order (start vertex of each face).
    pub fn element_vertices(&self, elem: usize) -> Vec<usize> {
        self.elements[elem]
            .faces
            .iter()
            .map(|r| {
                let v = self.faces[r.face].vertices;
                if r.forward {
                    v[0]
                } else {
                    v[1]
                }
            })
            .collect()
    }

    /// Mesh with the same connectivity and updated face geometry; caches are recomputed.
    pub fn with_faces(&self, faces: Vec<Face>) -> Result<Self> {
        let loops = self.elements.iter().map(|e| (e.faces.clone(), e.region)).collect();
        Mesh::new(self.vertices.clone(), faces, loops)
    }
}

/// Outward unit normal `n_TF(t)` of `face` with respect to element `elem`.
pub fn outward_normal(mesh: &Mesh, elem: usize, face: usize, t: f64) -> Result<Vector2<f64>> {
    let element = mesh
        .elements
        .get(elem)
        .ok_or_else(|| Error::Structural(format!("no element {elem}")))?;
    let r = element
        .faces
        .iter()
        .find(|r| r.face == face)
        .ok_or(Error::Incidence { element: elem, face })?;
    let f = &mesh.faces[face];
    f.curve.eval(t)?;
    Ok(f.curve.right_normal(t) * r.sign())
}

/// Diameter of an element, recomputed from its boundary.
pub fn element_diameter(mesh: &Mesh, elem: usize) -> Result<f64> {
    let element = mesh
        .elements
        .get(elem)
        .ok_or_else(|| Error::Structural(format!("no element {elem}")))?;
    loop_diameter(&mesh.faces, &element.faces)
}

/// Local origin for loop integrals: the start of the first face.
fn loop_origin(faces: &[Face], refs: &[FaceRef]) -> Point {
    refs.first().map_or(Point::zeros(), |r| {
        let c = &faces[r.face].curve;
        if r.forward {
            c.start()
        } else {
            c.end()
        }
    })
}

fn loop_area(faces: &[Face], refs: &[FaceRef]) -> f64 {
    let o = loop_origin(faces, refs);
    refs.iter()
        .map(|r| r.sign() * faces[r.face].curve.area_moment_about(&o))
        .sum()
}

/// `(integral of x, integral of y)` over the region bounded by the loop.
fn loop_first_moment(faces: &[Face], refs: &[FaceRef]) -> Point {
    let rule = quadrature::gauss_legendre(quadrature::DEFAULT_POINTS).expect("positive count");
    let o = loop_origin(faces, refs);
    let mut m = Point::zeros();
    for r in refs {
        let c = &faces[r.face].curve;
        let (t0, t1) = c.param_range();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let (p, d) = c.point_tangent(t0 + (t1 - t0) * x);
            let p = p - o;
            let w = w * (t1 - t0) * r.sign();
            m.x += w * 0.5 * p.x * p.x * d.y;
            m.y -= w * 0.5 * p.y * p.y * d.x;
        }
    }
    m + o * loop_area(faces, refs)
}

/// A boundary sample: location, owning face and parameter (`None` for endpoints).
struct Sample {
    p: Point,
    on: Option<(usize, f64)>,
}

fn loop_diameter(faces: &[Face], refs: &[FaceRef]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::Structural("element with empty boundary".into()));
    }
    let mut samples = Vec::new();
    for r in refs {
        let c = &faces[r.face].curve;
        samples.push(Sample {
            p: if r.forward { c.start() } else { c.end() },
            on: None,
        });
        if !c.is_straight() {
            let (t0, t1) = c.param_range();
            for i in 1..DIAMETER_SAMPLES {
                let t = t0 + (t1 - t0) * i as f64 / DIAMETER_SAMPLES as f64;
                samples.push(Sample {
                    p: c.point(t),
                    on: Some((r.face, t)),
                });
            }
        }
    }
    let mut best = (0.0, 0, 0);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = (samples[i].p - samples[j].p).norm_squared();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let (_, i, j) = best;
    let (mut a, mut b) = (samples[i].on, samples[j].on);
    let (mut pa, mut pb) = (samples[i].p, samples[j].p);
    if a.is_none() && b.is_none() {
        return Ok((pa - pb).norm());
    }
    // alternate local maximisation along the curved faces
    for _ in 0..8 {
        if let Some((f, t)) = a {
            let t = refine_far_point(&faces[f].curve, t, &pb);
            a = Some((f, t));
            pa = faces[f].curve.point(t);
        }
        if let Some((f, t)) = b {
            let t = refine_far_point(&faces[f].curve, t, &pa);
            b = Some((f, t));
            pb = faces[f].curve.point(t);
        }
    }
    Ok((pa - pb).norm())
}

/// Golden-section search for the parameter near `t` maximising distance to `target`.
fn refine_far_point(c: &Curve, t: f64, target: &Point) -> f64 {
    let (t0, t1) = c.param_range();
    let step = (t1 - t0) / DIAMETER_SAMPLES as f64;
    let (mut lo, mut hi) = ((t - step).max(t0), (t + step).min(t1));
    let dist = |s: f64| (c.point(s) - target).norm_squared();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (dist(x1), dist(x2));
    for _ in 0..80 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dist(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [t, mid]
        .into_iter()
        .max_by(|x, y| dist(*x).total_cmp(&dist(*y)))
        .unwrap_or(mid)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    MissingFace {
        element: usize,
        face: usize,
    },
    /// An element loop references a face whose incidence does not name the element on that side.
    LoopIncidence {
        element: usize,
        face: usize,
    },
    /// A face names an element that does not list it (or lists it with the other direction).
    FaceIncidence {
        face: usize,
        element: usize,
    },
    FaceMultiplicity {
        face: usize,
        references: usize,
        expected: usize,
    },
    OrphanFace {
        face: usize,
    },
    OpenLoop {
        element: usize,
        position: usize,
        gap: f64,
    },
    NonPositiveArea {
        element: usize,
        area: f64,
    },
    AreaMismatch {
        element: usize,
        shoelace: f64,
        quadrature: f64,
    },
    NonPositiveDiameter {
        element: usize,
    },
    InvalidCurve {
        face: usize,
        detail: String,
    },
    NormalNotUnit {
        face: usize,
        t: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingFace { element, face } => {
                write!(f, "element {element}: missing face {face}")
            }
            Violation::LoopIncidence { element, face } => write!(
                f,
                "element {element}: face {face} does not record the element on the traversed side"
            ),
            Violation::FaceIncidence { face, element } => {
                write!(f, "face {face}: element {element} does not reference it")
            }
            Violation::FaceMultiplicity {
                face,
                references,
                expected,
            } => write!(
                f,
                "face {face}: referenced by {references} elements, expected {expected}"
            ),
            Violation::OrphanFace { face } => write!(f, "face {face}: no incident element"),
            Violation::OpenLoop { element, position, gap } => write!(
                f,
                "element {element}: loop not closed after position {position} (gap {gap:e})"
            ),
            Violation::NonPositiveArea { element, area } => {
                write!(f, "element {element}: non-positive area {area:e}")
            }
            Violation::AreaMismatch {
                element,
                shoelace,
                quadrature,
            } => write!(
                f,
                "element {element}: area {shoelace:e} (boundary) vs {quadrature:e} (quadrature)"
            ),
            Violation::NonPositiveDiameter { element } => {
                write!(f, "element {element}: non-positive diameter")
            }
            Violation::InvalidCurve { face, detail } => write!(f, "face {face}: {detail}"),
            Violation::NormalNotUnit { face, t } => {
                write!(f, "face {face}: normal not unit/orthogonal at t = {t}")
            }
        }
    }
}

fn curve_violation(c: &Curve) -> Option<String> {
    let (t0, t1) = c.param_range();
    match *c {
        Curve::Segment { a, b } if (b - a).norm() == 0.0 => Some("zero-length segment".into()),
        Curve::CircularArc { radius, sign, .. } if !(radius > 0.0) || sign.abs() != 1.0 => {
            Some("invalid circle parameters".into())
        }
        Curve::EllipseArc { axes, .. } if axes.determinant().abs() < 1e-300 => Some("singular ellipse axes".into()),
        _ if !(t0 < t1) => Some(format!("empty parameter interval [{t0}, {t1}]")),
        _ if t1 - t0 > std::f64::consts::TAU * (1.0 + 1e-14) => Some("curve wraps more than once".into()),
        _ => None,
    }
}

/// Checks the mesh invariants; an empty report means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh) -> Vec<Violation> {
    let mut out = Vec::new();
    let nf = mesh.faces.len();

    for (fid, face) in mesh.faces.iter().enumerate() {
        if let Some(detail) = curve_violation(&face.curve) {
            out.push(Violation::InvalidCurve { face: fid, detail });
            continue;
        }
        if face.orientation.abs() != 1.0 {
            out.push(Violation::InvalidCurve {
                face: fid,
                detail: "orientation must be +1 or -1".into(),
            });
        }
        let (t0, t1) = face.curve.param_range();
        for i in 0..=8 {
            let t = t0 + (t1 - t0) * i as f64 / 8.0;
            let n = face.normal(t);
            let (_, d) = face.curve.point_tangent(t);
            let tangent_ok = d.norm() > 0.0;
            if !tangent_ok || (n.norm() - 1.0).abs() > UNIT_TOL || (n.dot(&d) / d.norm()).abs() > UNIT_TOL {
                out.push(Violation::NormalNotUnit { face: fid, t });
                break;
            }
        }
        if face.elem_left.is_none() && face.elem_right.is_none() {
            out.push(Violation::OrphanFace { face: fid });
        }
        for (side, forward) in [(face.elem_left, true), (face.elem_right, false)] {
            if let Some(e) = side {
                let listed = mesh
                    .elements
                    .get(e)
                    .is_some_and(|el| el.faces.iter().any(|r| r.face == fid && r.forward == forward));
                if !listed {
                    out.push(Violation::FaceIncidence { face: fid, element: e });
                }
            }
        }
    }

    let mut refs = vec![0usize; nf];
    for (eid, el) in mesh.elements.iter().enumerate() {
        let mut complete = true;
        for r in &el.faces {
            if r.face >= nf {
                out.push(Violation::MissingFace {
                    element: eid,
                    face: r.face,
                });
                complete = false;
                continue;
            }
            refs[r.face] += 1;
            let f = &mesh.faces[r.face];
            let side = if r.forward { f.elem_left } else { f.elem_right };
            if side != Some(eid) {
                out.push(Violation::LoopIncidence {
                    element: eid,
                    face: r.face,
                });
            }
        }
        if !complete {
            continue;
        }
        let tol = CLOSURE_TOL * el.diameter.max(f64::MIN_POSITIVE);
        for (i, r) in el.faces.iter().enumerate() {
            let next = &el.faces[(i + 1) % el.faces.len()];
            let (end, start) = (mesh.loop_end(r), mesh.loop_start(next));
            let gap = (end - start).norm();
            // endpoints evaluated through trigonometric parametrisations carry a few ulps
            let ulps = 8.0 * f64::EPSILON * end.amax().max(start.amax());
            if !(gap <= tol.max(ulps)) {
                out.push(Violation::OpenLoop {
                    element: eid,
                    position: i,
                    gap,
                });
            }
        }
        if !(el.diameter > 0.0) {
            out.push(Violation::NonPositiveDiameter { element: eid });
        }
        if !(el.area > 0.0) {
            out.push(Violation::NonPositiveArea {
                element: eid,
                area: el.area,
            });
            continue;
        }
        if let Ok(rule) = quadrature::element_rule_default(mesh, eid) {
            let q: f64 = rule.weights.iter().sum();
            if !((q - el.area).abs() <= AREA_TOL * el.area) {
                out.push(Violation::AreaMismatch {
                    element: eid,
                    shoelace: el.area,
                    quadrature: q,
                });
            }
        }
    }

    for (fid, face) in mesh.faces.iter().enumerate() {
        let expected = face.elem_left.is_some() as usize + face.elem_right.is_some() as usize;
        if expected > 0 && refs[fid] != expected {
            out.push(Violation::FaceMultiplicity {
                face: fid,
                references: refs[fid],
                expected,
            });
        }
    }
    out
}
