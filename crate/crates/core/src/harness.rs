//! The two experiments: a rotated ellipse with a known solution, and a disc with
//! a strongly anisotropic inclusion. Error measures, convergence tables and
//! their text output live here as well.

use std::fmt::Write as _;
use std::path::Path;
use web_time::Instant;

use log::info;
use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point};
use crate::hho::{all_local_operators, interpolate, Diffusion, LocalOperators, MeshSpaces};
use crate::meshgen::{cut_cartesian, ellipse_spec, hetero_spec, straighten_for, CutSpec, HETERO_BASE_N};
use crate::solver::{assemble, energy_norm, solve, solve_uncondensed, DiscreteSolution, DofMap};

pub const ALPHA: f64 = 0.8;
pub const INCLUSION_RADIUS: f64 = 0.8;
pub const BETA_INNER: f64 = 1e-6;
/// Reference functionals printed for the disc test (integral, broken H1 seminorm).
pub const PUBLISHED_INTEGRAL: f64 = 0.46006947;
pub const PUBLISHED_SEMINORM: f64 = 0.80699766;

pub fn level_set(x: &Point) -> f64 {
    ALPHA * ALPHA - (x.x * x.x + x.x * x.y + x.y * x.y)
}

fn ellipse_u(x: &Point) -> f64 {
    level_set(x).sin()
}

fn ellipse_grad(x: &Point) -> Vector2<f64> {
    Vector2::new(-2.0 * x.x - x.y, -x.x - 2.0 * x.y) * level_set(x).cos()
}

fn ellipse_f(x: &Point) -> f64 {
    let l = level_set(x);
    4.0 * l.cos() + (5.0 * x.x * x.x + 8.0 * x.x * x.y + 5.0 * x.y * x.y) * l.sin()
}

fn unit_source(_: &Point) -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Ellipse,
    Hetero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshMode {
    Curved,
    Straight,
}

#[derive(Clone, Copy)]
pub struct Exact {
    pub u: fn(&Point) -> f64,
    pub grad: fn(&Point) -> Vector2<f64>,
}

#[derive(Clone)]
pub struct TestCase {
    pub name: &'static str,
    pub kind: CaseKind,
    pub diffusion: Diffusion,
    pub source: fn(&Point) -> f64,
    pub exact: Option<Exact>,
}

pub fn ellipse_case() -> TestCase {
    TestCase {
        name: "ellipse",
        kind: CaseKind::Ellipse,
        diffusion: Diffusion::isotropic(),
        source: ellipse_f,
        exact: Some(Exact {
            u: ellipse_u,
            grad: ellipse_grad,
        }),
    }
}

pub fn hetero_tensor(beta: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, 1.0 - beta, 1.0 - beta, 1.0)
}

pub fn hetero_case() -> TestCase {
    TestCase {
        name: "hetero",
        kind: CaseKind::Hetero,
        diffusion: Diffusion::by_region(vec![(1, hetero_tensor(BETA_INNER)), (0, hetero_tensor(1.0))])
            .expect("both tensors are SPD"),
        source: unit_source,
        exact: None,
    }
}

impl TestCase {
    /// Grid resolution of mesh number `index` (numbering starts at 1).
    pub fn resolution(&self, index: usize) -> usize {
        let index = index.max(1);
        match self.kind {
            CaseKind::Ellipse => 1 << (index + 1),
            CaseKind::Hetero => HETERO_BASE_N << (index - 1),
        }
    }

    pub fn cut_spec(&self, index: usize) -> CutSpec {
        let n = self.resolution(index);
        match self.kind {
            CaseKind::Ellipse => ellipse_spec(n),
            CaseKind::Hetero => hetero_spec(n, INCLUSION_RADIUS),
        }
    }

    pub fn mesh(&self, index: usize, mode: MeshMode) -> Result<Mesh> {
        let spec = self.cut_spec(index);
        let curved = cut_cartesian(&spec)?;
        match mode {
            MeshMode::Curved => Ok(curved),
            MeshMode::Straight => straighten_for(&spec, &curved),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub quad_points: usize,
    pub uncondensed: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            quad_points: crate::quadrature::DEFAULT_POINTS,
            uncondensed: false,
        }
    }
}

/// Everything produced by one solve.
pub struct Run {
    pub k: usize,
    pub mesh: Mesh,
    pub spaces: MeshSpaces,
    pub ops: Vec<LocalOperators>,
    pub solution: DiscreteSolution,
    pub seconds: f64,
}

pub fn solve_case(case: &TestCase, mesh: Mesh, k: usize, opts: &SolveOptions) -> Result<Run> {
    let start = Instant::now();
    let spaces = MeshSpaces::build(&mesh, k, opts.quad_points)?;
    let ops = all_local_operators(&mesh, &spaces, &case.diffusion)?;
    let solution = if opts.uncondensed {
        solve_uncondensed(&mesh, &spaces, &ops, &case.source)?
    } else {
        let sys = assemble(&mesh, &spaces, &ops, &case.source)?;
        solve(&mesh, &ops, &sys)?
    };
    let seconds = start.elapsed().as_secs_f64();
    info!(
        "{}: k = {k}, {} elements, {} unknowns, {seconds:.2} s",
        case.name,
        mesh.num_elements(),
        solution.dofmap.n_condensed
    );
    Ok(Run {
        k,
        mesh,
        spaces,
        ops,
        solution,
        seconds,
    })
}

/// Full unknown vector of the interpolant of `u`.
pub fn global_interpolant(run: &Run, u: fn(&Point) -> f64) -> Result<DVector<f64>> {
    let dm: &DofMap = &run.solution.dofmap;
    let mut v = DVector::zeros(dm.total());
    for e in 0..run.mesh.num_elements() {
        let local = interpolate(u, &run.mesh, &run.spaces, e)?.to_vector();
        for (i, g) in dm.local_indices(&run.mesh, e).into_iter().enumerate() {
            v[g] = local[i];
        }
    }
    Ok(v)
}

/// Relative errors `(E0, E1, Ea)` of a run against the exact solution.
pub fn error_measures(case: &TestCase, run: &Run) -> Result<(f64, f64, f64)> {
    let ex = case
        .exact
        .ok_or_else(|| Error::Contract(format!("case '{}' has no exact solution", case.name)))?;
    measures_against(&ex, run)
}

pub fn measures_against(ex: &Exact, run: &Run) -> Result<(f64, f64, f64)> {
    let (mut e0, mut n0, mut e1, mut n1) = (0.0, 0.0, 0.0, 0.0);
    for e in 0..run.mesh.num_elements() {
        let rule = &run.spaces.elem_rules[e];
        let tab = run.spaces.cell_bases[e].tabulate(&rule.points);
        let p = &run.solution.potentials[e];
        let vals = &tab.values * p;
        let gx = &tab.grad_x * p;
        let gy = &tab.grad_y * p;
        for (q, (x, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let u = (ex.u)(x);
            let g = (ex.grad)(x);
            e0 += w * (u - vals[q]).powi(2);
            n0 += w * u * u;
            e1 += w * ((g.x - gx[q]).powi(2) + (g.y - gy[q]).powi(2));
            n1 += w * g.norm_squared();
        }
    }
    let iu = global_interpolant(run, ex.u)?;
    let dm = &run.solution.dofmap;
    let na = energy_norm(&run.mesh, dm, &run.ops, &iu);
    let ea = energy_norm(&run.mesh, dm, &run.ops, &(&run.solution.dofs - &iu));
    if !(n0 > 0.0 && n1 > 0.0 && na > 0.0) {
        return Err(Error::Contract(
            "exact solution has zero norm; relative errors undefined".into(),
        ));
    }
    Ok(((e0 / n0).max(0.0).sqrt(), (e1 / n1).max(0.0).sqrt(), ea / na))
}

/// `(integral of p u_h, broken H1 seminorm of p u_h)`.
pub fn reference_functionals(run: &Run) -> (f64, f64) {
    let (mut int, mut semi) = (0.0, 0.0);
    for e in 0..run.mesh.num_elements() {
        let rule = &run.spaces.elem_rules[e];
        let tab = run.spaces.cell_bases[e].tabulate(&rule.points);
        let p = &run.solution.potentials[e];
        let w = DVector::from_column_slice(&rule.weights);
        int += w.dot(&(&tab.values * p));
        let gx = &tab.grad_x * p;
        let gy = &tab.grad_y * p;
        semi += w.dot(&(gx.component_mul(&gx) + gy.component_mul(&gy)));
    }
    (int, semi.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reference {
    pub integral: f64,
    pub seminorm: f64,
}

impl Reference {
    pub fn published() -> Self {
        Self {
            integral: PUBLISHED_INTEGRAL,
            seminorm: PUBLISHED_SEMINORM,
        }
    }
}

/// Reference functionals of the disc test from a curved run at mesh `index`, degree `k`.
pub fn compute_reference(index: usize, k: usize, opts: &SolveOptions) -> Result<Reference> {
    let case = hetero_case();
    let run = solve_case(&case, case.mesh(index, MeshMode::Curved)?, k, opts)?;
    let (integral, seminorm) = reference_functionals(&run);
    Ok(Reference { integral, seminorm })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    H,
    K,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub mesh: usize,
    pub k: usize,
    pub h: f64,
    pub elements: usize,
    pub internal_edges: usize,
    pub unknowns: usize,
    /// `(E0, E1, Ea)` for the ellipse, `(E1, E2)` for the disc.
    pub errors: Vec<f64>,
    /// Observed h-rates against the previous row (h-sweeps from the second row on).
    pub rates: Option<Vec<f64>>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct Convergence {
    pub case: &'static str,
    pub sweep: Sweep,
    pub mode: MeshMode,
    pub rows: Vec<ConvergenceRow>,
    /// Error that stopped the sweep early; `rows` holds the completed part.
    pub failure: Option<Error>,
}

impl Convergence {
    pub fn final_rates(&self) -> Option<&[f64]> {
        self.rows.last().and_then(|r| r.rates.as_deref())
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors[i]).collect()
    }
}

pub fn rate(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

fn row_for(case: &TestCase, run: &Run, mesh_index: usize, reference: Option<&Reference>) -> Result<ConvergenceRow> {
    let errors = match (case.kind, reference) {
        (CaseKind::Ellipse, _) => {
            let (a, b, c) = error_measures(case, run)?;
            vec![a, b, c]
        }
        (CaseKind::Hetero, Some(r)) => {
            let (i, s) = reference_functionals(run);
            vec![(i - r.integral).abs(), (s - r.seminorm).abs()]
        }
        (CaseKind::Hetero, None) => {
            return Err(Error::Contract("the disc test needs reference functionals".into()));
        }
    };
    Ok(ConvergenceRow {
        mesh: mesh_index,
        k: run.k,
        h: run.mesh.h,
        elements: run.mesh.num_elements(),
        internal_edges: run.mesh.num_internal_faces(),
        unknowns: run.solution.dofmap.n_condensed,
        errors,
        rates: None,
        seconds: run.seconds,
    })
}

/// Runs `k` fixed over meshes `first..first+levels` (`Sweep::H`), or degrees
/// `0..=k` on mesh `first` (`Sweep::K`).
#[allow(clippy::too_many_arguments)]
pub fn run_convergence(
    case: &TestCase,
    sweep: Sweep,
    mode: MeshMode,
    k: usize,
    first: usize,
    levels: usize,
    reference: Option<&Reference>,
    opts: &SolveOptions,
) -> Convergence {
    let mut out = Convergence {
        case: case.name,
        sweep,
        mode,
        rows: Vec::new(),
        failure: None,
    };
    let jobs: Vec<(usize, usize)> = match sweep {
        Sweep::H => (first..first + levels).map(|m| (m, k)).collect(),
        Sweep::K => (0..=k).map(|d| (first, d)).collect(),
    };
    let mut mesh_cache: Option<(usize, Mesh)> = None;
    for (m, d) in jobs {
        let result = (|| -> Result<ConvergenceRow> {
            let mesh = match &mesh_cache {
                Some((i, mesh)) if *i == m => mesh.clone(),
                _ => {
                    let mesh = case.mesh(m, mode)?;
                    mesh_cache = Some((m, mesh.clone()));
                    mesh
                }
            };
            let run = solve_case(case, mesh, d, opts)?;
            row_for(case, &run, m, reference)
        })();
        match result {
            Ok(mut row) => {
                if sweep == Sweep::H {
                    if let Some(prev) = out.rows.last() {
                        row.rates = Some(
                            prev.errors
                                .iter()
                                .zip(&row.errors)
                                .map(|(a, b)| rate(*a, *b, prev.h, row.h))
                                .collect(),
                        );
                    }
                }
                out.rows.push(row);
            }
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
    }
    out
}

fn error_names(case: &str) -> &'static [&'static str] {
    if case == "hetero" {
        &["E1", "E2"]
    } else {
        &["L2Error", "H1Error", "EnergyError"]
    }
}

pub fn dat_header(conv: &Convergence) -> String {
    let x = match conv.sweep {
        Sweep::H => "MeshSize",
        Sweep::K => "EdgeDegree",
    };
    std::iter::once(x)
        .chain(error_names(conv.case).iter().copied())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn dat_string(conv: &Convergence) -> String {
    let mut s = dat_header(conv);
    s.push('\n');
    for r in &conv.rows {
        let x = match conv.sweep {
            Sweep::H => format!("{:.16e}", r.h),
            Sweep::K => r.k.to_string(),
        };
        let cols: Vec<String> = std::iter::once(x)
            .chain(r.errors.iter().map(|e| format!("{e:.16e}")))
            .collect();
        s.push_str(&cols.join(" "));
        s.push('\n');
    }
    s
}

pub fn emit_dat(conv: &Convergence, path: &Path) -> Result<()> {
    if conv.rows.is_empty() {
        return Err(Error::Contract("empty convergence table".into()));
    }
    std::fs::write(path, dat_string(conv)).map_err(|e| Error::io(path, e))
}

/// Parses a table written by [`dat_string`]: header names and rows of numbers.
pub fn parse_dat(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.split_whitespace().map(String::from).collect::<Vec<_>>())
        .ok_or(Error::Parse {
            line: 1,
            detail: "missing header".into(),
        })?;
    let rows = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        detail: format!("cannot parse '{t}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// Mesh parameters table: `MeshTitle MeshSize NbCells NbInternalEdges`.
pub fn mesh_table(conv: &Convergence) -> String {
    let mut s = String::from("MeshTitle MeshSize NbCells NbInternalEdges\n");
    let mut seen = Vec::new();
    for r in &conv.rows {
        if !seen.contains(&r.mesh) {
            seen.push(r.mesh);
            let _ = writeln!(s, "{} {:.16e} {} {}", r.mesh, r.h, r.elements, r.internal_edges);
        }
    }
    s
}

/// Human-readable table with counts and rates.
pub fn format_table(conv: &Convergence) -> String {
    let names = error_names(conv.case);
    let mut s = String::new();
    let _ = write!(
        s,
        "{:>5} {:>3} {:>10} {:>8} {:>8} {:>9}",
        "mesh", "k", "h", "elems", "edges", "unknowns"
    );
    for n in names {
        let _ = write!(s, " {:>12} {:>6}", n, "rate");
    }
    s.push('\n');
    for r in &conv.rows {
        let _ = write!(
            s,
            "{:>5} {:>3} {:>10.4e} {:>8} {:>8} {:>9}",
            r.mesh, r.k, r.h, r.elements, r.internal_edges, r.unknowns
        );
        for (i, e) in r.errors.iter().enumerate() {
            let rt = r
                .rates
                .as_ref()
                .map_or_else(|| "-".to_string(), |v| format!("{:.2}", v[i]));
            let _ = write!(s, " {:>12.4e} {:>6}", e, rt);
        }
        s.push('\n');
    }
    s
}

/// Run description written next to the tables.
pub fn metadata_json(
    conv: &Convergence,
    k: usize,
    opts: &SolveOptions,
    seed: u64,
    reference: Option<&Reference>,
) -> String {
    let value = serde_json::json!({
        "case": conv.case,
        "sweep": match conv.sweep { Sweep::H => "h", Sweep::K => "k" },
        "mesh": match conv.mode { MeshMode::Curved => "curved", MeshMode::Straight => "straight" },
        "k": k,
        "quad_points": opts.quad_points,
        "uncondensed": opts.uncondensed,
        "seed": seed,
        "reference": reference.map(|r| serde_json::json!({"integral": r.integral, "seminorm": r.seminorm})),
        "levels": conv.rows.iter().map(|r| serde_json::json!({
            "mesh": r.mesh, "k": r.k, "h": r.h, "elements": r.elements,
            "internal_edges": r.internal_edges, "unknowns": r.unknowns, "seconds": r.seconds,
        })).collect::<Vec<_>>(),
        "failure": conv.failure.as_ref().map(|e| e.to_string()),
    });
    serde_json::to_string_pretty(&value).expect("json values serialise")
}

/// Element containing `p`, by a point-in-polygon test on sampled element boundaries.
pub fn locate(polygons: &[Vec<Point>], p: &Point) -> Option<usize> {
    polygons.iter().position(|poly| {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
                inside = !inside;
            }
        }
        inside
    })
}

/// Element boundaries sampled with `per_face` points per curved face.
pub fn element_polygons(mesh: &Mesh, per_face: usize) -> Vec<Vec<Point>> {
    mesh.elements
        .iter()
        .map(|el| {
            let mut poly = Vec::new();
            for r in &el.faces {
                let c = &mesh.faces[r.face].curve;
                let count = if c.is_straight() { 2 } else { per_face.max(2) };
                let mut pts = c.sample(count);
                if !r.forward {
                    pts.reverse();
                }
                poly.extend_from_slice(&pts[..pts.len() - 1]);
            }
            poly
        })
        .collect()
}

/// `p u_h` on an `n x n` grid of points over the mesh bounding box (`NaN` outside).
pub fn sample_solution(run: &Run, n: usize) -> Vec<(Point, f64)> {
    let polys = element_polygons(&run.mesh, 24);
    let (mut lo, mut hi) = (Point::repeat(f64::INFINITY), Point::repeat(f64::NEG_INFINITY));
    for poly in &polys {
        for p in poly {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    let n = n.max(2);
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let p = Point::new(
                lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
            );
            let v = locate(&polys, &p).map_or(f64::NAN, |e| {
                run.spaces.cell_bases[e].eval(&run.solution.potentials[e], &p)
            });
            out.push((p, v));
        }
    }
    out
}

pub fn samples_to_csv(samples: &[(Point, f64)]) -> String {
    let mut s = String::from("x,y,value\n");
    for (p, v) in samples {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p.x, p.y, v);
    }
    s
}
