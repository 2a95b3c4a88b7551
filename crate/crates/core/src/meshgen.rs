//! Cut-Cartesian mesh generation.
//!
//! A uniform `n x n` grid is cut by closed conic curves. Every curve is split
//! at its crossings with the grid lines, so each curve piece lies inside one
//! grid cell and connects two points of that cell's perimeter. Inside a cell,
//! the regions are traced over the perimeter and these chords: walking
//! counter-clockwise along the perimeter, a chord is taken whenever its
//! endpoint is reached, and after a chord the walk resumes along the
//! perimeter.
//!
//! Each region is classified by the level sets of the curves. Regions outside
//! a [`CutKind::Boundary`] curve are discarded; [`CutKind::Interface`] curves
//! only contribute a bit to the region tag (bit `i` for the `i`-th interface
//! curve, set inside).

use std::collections::HashMap;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geometry::{Curve, Face, FaceRef, Mesh, Point};

pub const DEFAULT_SMALL_CELL: f64 = 1e-8;
/// Relative distance below which a crossing is considered to hit a grid vertex.
pub const VERTEX_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutKind {
    Boundary,
    Interface,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmallCellPolicy {
    Reject,
    Keep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutCurve {
    pub curve: Curve,
    pub kind: CutKind,
    /// Whether the straight member of a mesh sequence replaces this curve by chords.
    pub straighten: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutSpec {
    pub lower: Point,
    pub upper: Point,
    pub n: usize,
    pub curves: Vec<CutCurve>,
    /// Elements smaller than this fraction of the grid cell area trigger `small_cell_policy`.
    pub small_cell: f64,
    pub small_cell_policy: SmallCellPolicy,
}

impl CutSpec {
    pub fn new(lower: Point, upper: Point, n: usize, curves: Vec<CutCurve>) -> Self {
        Self {
            lower,
            upper,
            n,
            curves,
            small_cell: DEFAULT_SMALL_CELL,
            small_cell_policy: SmallCellPolicy::Reject,
        }
    }

    pub fn with_resolution(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::CutSpec("grid resolution must be positive".into()));
        }
        if !(self.upper.x > self.lower.x && self.upper.y > self.lower.y) {
            return Err(Error::CutSpec("empty bounding box".into()));
        }
        if !(0.0..0.5).contains(&self.small_cell) {
            return Err(Error::CutSpec(format!(
                "small-cell threshold {} outside [0, 0.5)",
                self.small_cell
            )));
        }
        for (i, c) in self.curves.iter().enumerate() {
            let scale = self.upper.x - self.lower.x;
            if c.curve.conic().is_none() || !c.curve.is_closed(1e-12 * scale) {
                return Err(Error::CutSpec(format!("cutting curve {i} is not a closed conic")));
            }
        }
        Ok(())
    }
}

/// Ellipse `x^2 + xy + y^2 = alpha^2` in the box `[-1, 1]^2`.
pub fn ellipse_spec(n: usize) -> CutSpec {
    CutSpec::new(
        Point::new(-1.0, -1.0),
        Point::new(1.0, 1.0),
        n,
        vec![CutCurve {
            curve: Curve::ellipse(Point::zeros(), ellipse_axes(0.8)),
            kind: CutKind::Boundary,
            straighten: true,
        }],
    )
}

/// Axes of the ellipse `x^2 + xy + y^2 = alpha^2`.
pub fn ellipse_axes(alpha: f64) -> Matrix2<f64> {
    let s = 1.0 / 3f64.sqrt();
    Matrix2::new(s, -1.0, s, 1.0) * alpha
}

/// Grid resolution of the coarsest disc mesh.
pub const HETERO_BASE_N: usize = 5;

/// Half-width of the grid box used for the disc meshes: the cell side is
/// `sqrt(2) sin(pi/8)`, so full cells of the coarsest mesh have diameter `2 sin(pi/8)`.
pub fn hetero_half_width() -> f64 {
    0.5 * HETERO_BASE_N as f64 * 2f64.sqrt() * (std::f64::consts::PI / 8.0).sin()
}

/// Unit disc with an interface circle of radius `r`.
pub fn hetero_spec(n: usize, r: f64) -> CutSpec {
    let a = hetero_half_width();
    CutSpec::new(
        Point::new(-a, -a),
        Point::new(a, a),
        n,
        vec![
            CutCurve {
                curve: Curve::circle(Point::zeros(), 1.0),
                kind: CutKind::Boundary,
                straighten: false,
            },
            CutCurve {
                curve: Curve::circle(Point::zeros(), r),
                kind: CutKind::Interface,
                straighten: true,
            },
        ],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Line {
    /// `x = x_i`
    V(usize),
    /// `y = y_j`
    H(usize),
}

#[derive(Clone, Debug)]
struct Crossing {
    curve: usize,
    t: f64,
    point: Point,
    line: Line,
}

#[derive(Clone, Debug)]
struct Piece {
    curve: usize,
    start: usize,
    end: usize,
    ta: f64,
    tb: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Corner(usize, usize),
    Cross(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum FaceKey {
    /// Sub-piece `s` of grid edge `(line, index along the line)`.
    Grid(Line, usize, usize),
    Piece(usize),
}

struct Grid<'a> {
    spec: &'a CutSpec,
    dx: f64,
    dy: f64,
}

impl Grid<'_> {
    fn x(&self, i: usize) -> f64 {
        if i == self.spec.n {
            self.spec.upper.x
        } else {
            self.spec.lower.x + i as f64 * self.dx
        }
    }

    fn y(&self, j: usize) -> f64 {
        if j == self.spec.n {
            self.spec.upper.y
        } else {
            self.spec.lower.y + j as f64 * self.dy
        }
    }

    fn corner(&self, i: usize, j: usize) -> Point {
        Point::new(self.x(i), self.y(j))
    }

    fn cell_of(&self, p: &Point) -> Option<(usize, usize)> {
        let fi = (p.x - self.spec.lower.x) / self.dx;
        let fj = (p.y - self.spec.lower.y) / self.dy;
        let n = self.spec.n as f64;
        if !(0.0..n).contains(&fi) || !(0.0..n).contains(&fj) {
            return None;
        }
        Some((fi as usize, fj as usize))
    }
}

/// Crossings of all curves with the interior grid lines.
fn crossings(grid: &Grid) -> Result<Vec<Crossing>> {
    let spec = grid.spec;
    let n = spec.n;
    let scale = (spec.upper - spec.lower).amax();
    let mut out = Vec::new();
    for (c, cc) in spec.curves.iter().enumerate() {
        for axis in 0..2 {
            for i in 0..=n {
                let value = if axis == 0 { grid.x(i) } else { grid.y(i) };
                let (lo, hi, step) = if axis == 0 {
                    (spec.lower.y, spec.upper.y, grid.dy)
                } else {
                    (spec.lower.x, spec.upper.x, grid.dx)
                };
                for t in cc.curve.axis_crossings(axis, value)? {
                    let mut p = cc.curve.point(t);
                    p[axis] = value;
                    let other = p[1 - axis];
                    if other < lo - VERTEX_TOL * scale || other > hi + VERTEX_TOL * scale {
                        continue;
                    }
                    if i == 0 || i == n {
                        return Err(Error::CutSpec(format!("cutting curve {c} leaves the grid box")));
                    }
                    let near = ((other - lo) / step).round() * step + lo;
                    if (other - near).abs() <= VERTEX_TOL * scale {
                        return Err(Error::DegenerateCut(format!(
                            "cutting curve {c} passes through grid vertex ({:.6}, {:.6})",
                            p.x, p.y
                        )));
                    }
                    let line = if axis == 0 { Line::V(i) } else { Line::H(i) };
                    out.push(Crossing {
                        curve: c,
                        t,
                        point: p,
                        line,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn pieces(grid: &Grid, crossings: &[Crossing]) -> Result<Vec<Piece>> {
    let mut out = Vec::new();
    for (c, cc) in grid.spec.curves.iter().enumerate() {
        let mut ids: Vec<usize> = (0..crossings.len()).filter(|&i| crossings[i].curve == c).collect();
        if ids.is_empty() {
            if grid.cell_of(&cc.curve.start()).is_some() {
                return Err(Error::CutSpec(format!(
                    "cutting curve {c} lies inside a single grid cell"
                )));
            }
            continue;
        }
        ids.sort_by(|&a, &b| crossings[a].t.total_cmp(&crossings[b].t));
        for w in 0..ids.len() {
            let (a, b) = (ids[w], ids[(w + 1) % ids.len()]);
            let ta = crossings[a].t;
            let mut tb = crossings[b].t;
            if w + 1 == ids.len() {
                tb += std::f64::consts::TAU;
            }
            if !(tb - ta > 0.0) {
                return Err(Error::DegenerateCut(format!("coincident crossings on curve {c}")));
            }
            out.push(Piece {
                curve: c,
                start: a,
                end: b,
                ta,
                tb,
            });
        }
    }
    Ok(out)
}

/// Position of a crossing along a grid edge, in the edge's canonical (increasing) direction.
fn along(c: &Crossing) -> f64 {
    match c.line {
        Line::V(_) => c.point.y,
        Line::H(_) => c.point.x,
    }
}

struct Traced {
    cell: (usize, usize),
    refs: Vec<(FaceKey, bool)>,
    region: u32,
}

/// Classifies a point: `None` outside the domain, otherwise the region tag.
fn classify(spec: &CutSpec, p: &Point) -> Option<u32> {
    let mut tag = 0u32;
    let mut bit = 0;
    for cc in &spec.curves {
        let inside = cc.curve.level(p).is_some_and(|l| l > 0.0);
        match cc.kind {
            CutKind::Boundary if !inside => return None,
            CutKind::Boundary => {}
            CutKind::Interface => {
                if inside {
                    tag |= 1 << bit;
                }
                bit += 1;
            }
        }
    }
    Some(tag)
}

pub fn cut_cartesian(spec: &CutSpec) -> Result<Mesh> {
    spec.validate()?;
    let n = spec.n;
    let grid = Grid {
        spec,
        dx: (spec.upper.x - spec.lower.x) / n as f64,
        dy: (spec.upper.y - spec.lower.y) / n as f64,
    };
    let cr = crossings(&grid)?;
    let pcs = pieces(&grid, &cr)?;

    // crossings on each grid edge, sorted along the edge
    let mut on_edge: HashMap<(Line, usize), Vec<usize>> = HashMap::new();
    for (id, c) in cr.iter().enumerate() {
        let idx = match c.line {
            Line::V(_) => ((c.point.y - spec.lower.y) / grid.dy).floor() as usize,
            Line::H(_) => ((c.point.x - spec.lower.x) / grid.dx).floor() as usize,
        };
        on_edge.entry((c.line, idx.min(n - 1))).or_default().push(id);
    }
    for v in on_edge.values_mut() {
        v.sort_by(|&a, &b| along(&cr[a]).total_cmp(&along(&cr[b])));
    }
    // piece inside each cell, and the piece ending at each crossing per side
    let mut cell_pieces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (p, pc) in pcs.iter().enumerate() {
        let mid = spec.curves[pc.curve].curve.point(0.5 * (pc.ta + pc.tb));
        if let Some(cell) = grid.cell_of(&mid) {
            cell_pieces.entry(cell).or_default().push(p);
        }
    }

    let empty = Vec::new();
    let mut traced = Vec::new();
    for cj in 0..n {
        for ci in 0..n {
            // perimeter nodes, counter-clockwise from the lower-left corner
            let mut nodes = vec![Node::Corner(ci, cj)];
            let mut keys = Vec::new();
            let sides: [(Line, usize, bool, Node); 4] = [
                (Line::H(cj), ci, true, Node::Corner(ci + 1, cj)),
                (Line::V(ci + 1), cj, true, Node::Corner(ci + 1, cj + 1)),
                (Line::H(cj + 1), ci, false, Node::Corner(ci, cj + 1)),
                (Line::V(ci), cj, false, Node::Corner(ci, cj)),
            ];
            for (s, (line, idx, forward, end)) in sides.iter().enumerate() {
                let list = on_edge.get(&(*line, *idx)).unwrap_or(&empty);
                let m = list.len();
                for q in 0..=m {
                    let sub = if *forward { q } else { m - q };
                    keys.push((FaceKey::Grid(*line, *idx, sub), *forward));
                    if q < m {
                        let c = if *forward { list[q] } else { list[m - 1 - q] };
                        nodes.push(Node::Cross(c));
                    }
                }
                if s < 3 {
                    nodes.push(*end);
                }
            }
            debug_assert_eq!(nodes.len(), keys.len());
            let pos: HashMap<usize, usize> = nodes
                .iter()
                .enumerate()
                .filter_map(|(k, nd)| match nd {
                    Node::Cross(c) => Some((*c, k)),
                    Node::Corner(..) => None,
                })
                .collect();
            let mut chord: HashMap<usize, (usize, bool, usize)> = HashMap::new();
            for &p in cell_pieces.get(&(ci, cj)).unwrap_or(&empty) {
                let pc = &pcs[p];
                chord.insert(pc.start, (p, true, pc.end));
                chord.insert(pc.end, (p, false, pc.start));
            }
            let count = nodes.len();
            let point_of = |nd: &Node| match nd {
                Node::Corner(i, j) => grid.corner(*i, *j),
                Node::Cross(c) => cr[*c].point,
            };
            let mut used = vec![false; count];
            for start in 0..count {
                if used[start] {
                    continue;
                }
                let mut refs = Vec::new();
                let mut probe = (0.0, Point::zeros());
                let mut cur = start;
                loop {
                    used[cur] = true;
                    refs.push(keys[cur]);
                    let next = (cur + 1) % count;
                    let (a, b) = (point_of(&nodes[cur]), point_of(&nodes[next]));
                    if (b - a).norm() > probe.0 {
                        probe = ((b - a).norm(), 0.5 * (a + b));
                    }
                    cur = match nodes[next] {
                        Node::Cross(c) => {
                            let &(p, fwd, other) = chord.get(&c).ok_or_else(|| {
                                Error::Structural(format!("crossing {c} has no curve piece in cell ({ci}, {cj})"))
                            })?;
                            refs.push((FaceKey::Piece(p), fwd));
                            pos[&other]
                        }
                        Node::Corner(..) => next,
                    };
                    if cur == start {
                        break;
                    }
                    if used[cur] {
                        return Err(Error::Structural(format!("region tracing failed in cell ({ci}, {cj})")));
                    }
                }
                if let Some(region) = classify(spec, &probe.1) {
                    traced.push(Traced {
                        cell: (ci, cj),
                        refs,
                        region,
                    });
                }
            }
        }
    }

    // global faces and vertices
    let mut face_ids: HashMap<FaceKey, usize> = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut vertex_ids: HashMap<Node, usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut vertex = |nd: Node| -> usize {
        *vertex_ids.entry(nd).or_insert_with(|| {
            vertices.push(match nd {
                Node::Corner(i, j) => grid.corner(i, j),
                Node::Cross(c) => cr[c].point,
            });
            vertices.len() - 1
        })
    };
    let mut loops = Vec::with_capacity(traced.len());
    for (e, tr) in traced.iter().enumerate() {
        let mut refs = Vec::with_capacity(tr.refs.len());
        for &(key, forward) in &tr.refs {
            let id = match face_ids.get(&key) {
                Some(&id) => id,
                None => {
                    let (curve, a, b) = match key {
                        FaceKey::Piece(p) => {
                            let pc = &pcs[p];
                            (
                                spec.curves[pc.curve].curve.restrict(pc.ta, pc.tb),
                                Node::Cross(pc.start),
                                Node::Cross(pc.end),
                            )
                        }
                        FaceKey::Grid(line, idx, sub) => {
                            let list = on_edge.get(&(line, idx)).unwrap_or(&empty);
                            let (first, last) = match line {
                                Line::V(i) => (Node::Corner(i, idx), Node::Corner(i, idx + 1)),
                                Line::H(j) => (Node::Corner(idx, j), Node::Corner(idx + 1, j)),
                            };
                            let a = if sub == 0 { first } else { Node::Cross(list[sub - 1]) };
                            let b = if sub == list.len() {
                                last
                            } else {
                                Node::Cross(list[sub])
                            };
                            (
                                Curve::segment(point_of_node(&grid, &cr, a), point_of_node(&grid, &cr, b)),
                                a,
                                b,
                            )
                        }
                    };
                    faces.push(Face {
                        curve,
                        vertices: [vertex(a), vertex(b)],
                        elem_left: None,
                        elem_right: None,
                        orientation: 1.0,
                    });
                    face_ids.insert(key, faces.len() - 1);
                    faces.len() - 1
                }
            };
            let face = &mut faces[id];
            let slot = if forward {
                &mut face.elem_left
            } else {
                &mut face.elem_right
            };
            if slot.is_some() {
                return Err(Error::Structural(format!(
                    "face {id} traversed twice in the same direction"
                )));
            }
            *slot = Some(e);
            refs.push(FaceRef::new(id, forward));
        }
        loops.push((refs, tr.region));
    }
    let mesh = Mesh::new(vertices, faces, loops)?;
    if spec.small_cell_policy == SmallCellPolicy::Reject {
        let threshold = spec.small_cell * grid.dx * grid.dy;
        for (el, tr) in mesh.elements.iter().zip(&traced) {
            if el.area < threshold {
                return Err(Error::SmallCell {
                    cell: tr.cell,
                    area: el.area,
                    threshold,
                });
            }
        }
    }
    Ok(mesh)
}

fn point_of_node(grid: &Grid, cr: &[Crossing], nd: Node) -> Point {
    match nd {
        Node::Corner(i, j) => grid.corner(i, j),
        Node::Cross(c) => cr[c].point,
    }
}

/// Replaces every face selected by `select` with the segment joining its endpoints.
pub fn straighten_where(mesh: &Mesh, select: impl Fn(usize, &Face) -> bool) -> Result<Mesh> {
    let scale = mesh.h.max(f64::MIN_POSITIVE);
    let faces = mesh
        .faces
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.curve.is_straight() || !select(i, f) {
                return Ok(f.clone());
            }
            let chord = Curve::segment(mesh.vertices[f.vertices[0]], mesh.vertices[f.vertices[1]]);
            let length = (chord.end() - chord.start()).norm();
            if length <= 1e-14 * scale {
                return Err(Error::DegenerateFace { face: i, length });
            }
            Ok(Face {
                curve: chord,
                ..f.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = mesh.with_faces(faces)?;
    // an arc leaving a cell through the edge it entered by bounds a cap whose chord
    // lies on that edge
    for (e, (before, after)) in mesh.elements.iter().zip(&out.elements).enumerate() {
        if after.area <= 1e-12 * before.area.abs().max(scale * scale) {
            return Err(Error::DegenerateCut(format!(
                "straightening collapses element {e} (area {:e} -> {:e})",
                before.area, after.area
            )));
        }
    }
    Ok(out)
}

/// Replaces every curved face with its chord.
pub fn straighten(mesh: &Mesh) -> Result<Mesh> {
    straighten_where(mesh, |_, _| true)
}

/// Whether `face` lies on cutting curve `c` of `spec`.
pub fn face_on_curve(spec: &CutSpec, c: usize, face: &Face) -> bool {
    let Some((p, _)) = spec.curves[c].curve.conic() else {
        return false;
    };
    match face.curve.conic() {
        Some((q, _)) if (p - q).norm() <= 1e-14 => {
            let mid = face
                .curve
                .point(0.5 * (face.curve.param_range().0 + face.curve.param_range().1));
            spec.curves[c].curve.level(&mid).is_some_and(|l| l.abs() < 1e-10)
        }
        _ => false,
    }
}

/// Straight member: faces on curves flagged `straighten` are replaced by chords.
pub fn straighten_for(spec: &CutSpec, mesh: &Mesh) -> Result<Mesh> {
    straighten_where(mesh, |_, f| {
        spec.curves
            .iter()
            .enumerate()
            .any(|(c, cc)| cc.straighten && face_on_curve(spec, c, f))
    })
}

/// `(curved, straight)` pairs with the grid resolution doubled per level.
pub fn mesh_sequence(spec: &CutSpec, levels: usize) -> Result<Vec<(Mesh, Mesh)>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    (0..levels)
        .map(|l| {
            let s = spec.with_resolution(spec.n << l);
            let curved = cut_cartesian(&s)?;
            let straight = straighten_for(&s, &curved)?;
            Ok((curved, straight))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::disc_mesh;
    use crate::geometry::validate_mesh;
    use std::f64::consts::PI;

    fn ellipse_area() -> f64 {
        PI * 0.64 * 2.0 / 3f64.sqrt()
    }

    #[test]
    fn ellipse_meshes_are_valid_and_exact() {
        for n in [4, 8, 16, 32] {
            let m = cut_cartesian(&ellipse_spec(n)).unwrap();
            let v = validate_mesh(&m);
            assert!(v.is_empty(), "n = {n}: {:?}", &v[..v.len().min(3)]);
            let rel = (m.total_area() - ellipse_area()).abs() / ellipse_area();
            assert!(rel < 1e-10, "n = {n}: {rel:e}");
        }
    }

    #[test]
    fn mesh_two_scale() {
        let m = cut_cartesian(&ellipse_spec(8)).unwrap();
        assert!((m.h - 0.3536).abs() < 5e-4, "h = {}", m.h);
    }

    #[test]
    fn boundary_cells_have_curved_faces() {
        let m = cut_cartesian(&ellipse_spec(4)).unwrap();
        let full = 0.25;
        for el in &m.elements {
            if (el.area - full).abs() > 1e-12 {
                assert!(el.faces.iter().any(|r| !m.faces[r.face].curve.is_straight()));
            }
        }
    }

    #[test]
    fn uncut_grid_is_all_squares() {
        let far = CutCurve {
            curve: Curve::circle(Point::new(5.0, 5.0), 1.0),
            kind: CutKind::Interface,
            straighten: true,
        };
        let s = CutSpec::new(Point::zeros(), Point::new(1.0, 1.0), 3, vec![far]);
        let m = cut_cartesian(&s).unwrap();
        assert_eq!(m.num_elements(), 9);
        assert!(m.elements.iter().all(|e| e.faces.len() == 4 && e.region == 0));
        let enclosing = CutCurve {
            curve: Curve::circle(Point::new(0.5, 0.5), 2.0),
            kind: CutKind::Boundary,
            straighten: true,
        };
        let s = CutSpec::new(Point::zeros(), Point::new(1.0, 1.0), 3, vec![enclosing]);
        assert_eq!(cut_cartesian(&s).unwrap().num_elements(), 9);
    }

    #[test]
    fn interface_cells_split_exactly() {
        let s = hetero_spec(HETERO_BASE_N * 2, 0.8);
        let m = cut_cartesian(&s).unwrap();
        assert!(validate_mesh(&m).is_empty());
        assert!((m.total_area() - PI).abs() < 1e-10 * PI);
        let inner: f64 = m.elements.iter().filter(|e| e.region == 1).map(|e| e.area).sum();
        assert!((inner - PI * 0.64).abs() < 1e-10);

        // cell fully inside the disc: its elements tile the cell
        let s = CutSpec::new(
            Point::new(-1.0, -1.0),
            Point::new(1.0, 1.0),
            4,
            vec![CutCurve {
                curve: Curve::circle(Point::new(0.03, -0.02), 0.61),
                kind: CutKind::Interface,
                straighten: true,
            }],
        );
        let m = cut_cartesian(&s).unwrap();
        let total: f64 = m.elements.iter().map(|e| e.area).sum();
        assert!((total - 4.0).abs() < 1e-10 * 4.0);
        let mut per_cell: HashMap<(i64, i64), f64> = HashMap::new();
        for e in &m.elements {
            let key = (
                (e.centroid.x * 2.0 + 2.0).floor() as i64,
                (e.centroid.y * 2.0 + 2.0).floor() as i64,
            );
            *per_cell.entry(key).or_default() += e.area;
        }
        for a in per_cell.values() {
            assert!((a - 0.25).abs() < 1e-10 * 0.25);
        }
    }

    #[test]
    fn straighten_properties() {
        let m = cut_cartesian(&ellipse_spec(8)).unwrap();
        let s = straighten(&m).unwrap();
        assert_eq!(s.num_elements(), m.num_elements());
        assert_eq!(s.num_internal_faces(), m.num_internal_faces());
        assert!(s.total_area() < ellipse_area());
        assert_eq!(straighten(&s).unwrap(), s);
        let sq = cut_cartesian(&CutSpec::new(Point::zeros(), Point::new(1.0, 1.0), 2, vec![])).unwrap();
        assert_eq!(straighten(&sq).unwrap(), sq);
        let d = straighten(&disc_mesh(3)).unwrap();
        assert!(d.total_area() < PI);
    }

    #[test]
    fn straightening_a_cap_is_degenerate() {
        // dips below y = 0.25 and comes back through the same grid edge
        let spec = CutSpec::new(
            Point::zeros(),
            Point::new(1.0, 1.0),
            4,
            vec![CutCurve {
                curve: Curve::circle(Point::new(0.379, 0.3), 0.08),
                kind: CutKind::Interface,
                straighten: true,
            }],
        );
        let m = cut_cartesian(&spec).unwrap();
        assert!(validate_mesh(&m).is_empty());
        assert!(matches!(straighten_for(&spec, &m), Err(Error::DegenerateCut(_))));
    }

    #[test]
    fn straight_deficit_is_second_order() {
        let deficit = |n| {
            ellipse_area()
                - straighten(&cut_cartesian(&ellipse_spec(n)).unwrap())
                    .unwrap()
                    .total_area()
        };
        let (a, b) = (deficit(16), deficit(32));
        let rate = (a / b).log2();
        assert!((rate - 2.0).abs() < 0.3, "rate {rate}");
    }

    #[test]
    fn sequence_pairs_match() {
        let seq = mesh_sequence(&ellipse_spec(4), 3).unwrap();
        for w in seq.windows(2) {
            let r = w[0].0.h / w[1].0.h;
            assert!((r - 2.0).abs() < 0.2, "ratio {r}");
        }
        for (c, s) in &seq {
            assert_eq!(c.num_elements(), s.num_elements());
            assert_eq!(c.num_internal_faces(), s.num_internal_faces());
        }
        let hseq = mesh_sequence(&hetero_spec(HETERO_BASE_N, 0.8), 1).unwrap();
        let (c, s) = &hseq[0];
        let outer = |m: &Mesh| m.faces.iter().filter(|f| !f.curve.is_straight()).count();
        assert!(outer(s) > 0 && outer(s) < outer(c));
        assert!((s.total_area() - PI).abs() < 1e-10);
    }

    #[test]
    fn vertex_crossing_is_degenerate() {
        let s = CutSpec::new(
            Point::new(-1.0, -1.0),
            Point::new(1.0, 1.0),
            4,
            vec![CutCurve {
                curve: Curve::circle(Point::zeros(), 0.5f64.hypot(0.5)),
                kind: CutKind::Boundary,
                straighten: true,
            }],
        );
        assert!(matches!(cut_cartesian(&s), Err(Error::DegenerateCut(_))));
        let tangent = CutSpec::new(
            Point::new(-1.0, -1.0),
            Point::new(1.0, 1.0),
            4,
            vec![CutCurve {
                curve: Curve::circle(Point::zeros(), 0.5),
                kind: CutKind::Boundary,
                straighten: true,
            }],
        );
        assert!(matches!(cut_cartesian(&tangent), Err(Error::DegenerateCut(_))));
    }

    #[test]
    fn small_cells_are_rejected() {
        let mut s = CutSpec::new(
            Point::new(-1.0, -1.0),
            Point::new(1.0, 1.0),
            4,
            vec![CutCurve {
                curve: Curve::circle(Point::zeros(), 0.5 + 1e-6),
                kind: CutKind::Boundary,
                straighten: true,
            }],
        );
        s.small_cell = 1e-3;
        assert!(matches!(cut_cartesian(&s), Err(Error::SmallCell { .. })));
        s.small_cell_policy = SmallCellPolicy::Keep;
        assert!(cut_cartesian(&s).is_ok());
    }
}
