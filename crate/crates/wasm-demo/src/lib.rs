//! JSON-returning entry points for the static page in `www/`.
//!
//! The plain functions are what the native tests call; the `#[wasm_bindgen]`
//! wrappers only turn errors into JS exceptions.

use curved_hho::geometry::{Mesh, Point};
use curved_hho::harness::{
    element_polygons, ellipse_case, error_measures, hetero_case, reference_functionals, sample_solution, solve_case,
    CaseKind, MeshMode, SolveOptions, TestCase,
};
use curved_hho::quadrature::element_rule_with;
use curved_hho::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

pub const MAX_MESH: usize = 4;
pub const MAX_K: usize = 5;
pub const MAX_GRID: usize = 200;
const OUTLINE_POINTS: usize = 12;

fn case(test: &str) -> Result<TestCase> {
    match test {
        "ellipse" => Ok(ellipse_case()),
        "hetero" => Ok(hetero_case()),
        other => Err(Error::InvalidArgument(format!("unknown test '{other}'"))),
    }
}

fn build_mesh(case: &TestCase, index: usize, curved: bool) -> Result<Mesh> {
    if !(1..=MAX_MESH).contains(&index) {
        return Err(Error::InvalidArgument(format!("mesh must be in 1..={MAX_MESH}")));
    }
    let mode = if curved { MeshMode::Curved } else { MeshMode::Straight };
    case.mesh(index, mode)
}

fn xy(p: &Point) -> Value {
    json!([p.x, p.y])
}

/// Element outlines and face polylines of a generated mesh.
pub fn mesh_json(test: &str, index: usize, curved: bool) -> Result<String> {
    let mesh = build_mesh(&case(test)?, index, curved)?;
    let elements: Vec<Value> = element_polygons(&mesh, OUTLINE_POINTS)
        .iter()
        .zip(&mesh.elements)
        .map(|(poly, el)| {
            json!({
                "region": el.region,
                "area": el.area,
                "outline": poly.iter().map(xy).collect::<Vec<_>>(),
            })
        })
        .collect();
    let faces: Vec<Value> = mesh
        .faces
        .iter()
        .map(|f| {
            let n = if f.curve.is_straight() { 2 } else { OUTLINE_POINTS };
            json!({
                "curved": !f.curve.is_straight(),
                "boundary": f.is_boundary(),
                "points": f.curve.sample(n).iter().map(xy).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({
        "h": mesh.h,
        "area": mesh.total_area(),
        "elements": elements,
        "faces": faces,
    })
    .to_string())
}

/// Solves the test on one mesh and samples the reconstructed potential on a
/// `grid x grid` lattice over the bounding box (`null` outside the domain).
pub fn solve_json(test: &str, index: usize, curved: bool, k: usize, grid: usize) -> Result<String> {
    if k > MAX_K {
        return Err(Error::InvalidArgument(format!("k must be at most {MAX_K}")));
    }
    if !(2..=MAX_GRID).contains(&grid) {
        return Err(Error::InvalidArgument(format!("grid must be in 2..={MAX_GRID}")));
    }
    let case = case(test)?;
    let mesh = build_mesh(&case, index, curved)?;
    let run = solve_case(&case, mesh, k, &SolveOptions::default())?;
    let measures = match case.kind {
        CaseKind::Ellipse => {
            let (e0, e1, ea) = error_measures(&case, &run)?;
            json!({ "L2Error": e0, "H1Error": e1, "EnergyError": ea })
        }
        CaseKind::Hetero => {
            let (integral, seminorm) = reference_functionals(&run);
            json!({ "integral": integral, "seminorm": seminorm })
        }
    };
    let samples = sample_solution(&run, grid);
    let (first, last) = (samples[0].0, samples[samples.len() - 1].0);
    let values: Vec<Value> = samples
        .iter()
        .map(|(_, v)| if v.is_finite() { json!(v) } else { Value::Null })
        .collect();
    Ok(json!({
        "k": k,
        "elements": run.mesh.num_elements(),
        "unknowns": run.solution.dofmap.n_condensed,
        "residual": run.solution.relative_residual,
        "measures": measures,
        "grid": grid,
        "lower": xy(&first),
        "upper": xy(&last),
        "values": values,
    })
    .to_string())
}

/// The element rule of element `elem` with `points` Gauss points per direction.
pub fn quadrature_json(test: &str, index: usize, curved: bool, elem: usize, points: usize) -> Result<String> {
    let mesh = build_mesh(&case(test)?, index, curved)?;
    if elem >= mesh.num_elements() {
        return Err(Error::InvalidArgument(format!("element {elem} out of range")));
    }
    if !(1..=30).contains(&points) {
        return Err(Error::InvalidArgument("points must be in 1..=30".into()));
    }
    let rule = element_rule_with(&mesh, elem, points)?;
    let total: f64 = rule.weights.iter().sum();
    Ok(json!({
        "element": elem,
        "area": mesh.elements[elem].area,
        "weight_sum": total,
        "base": xy(&rule.base_point),
        "leaves_element": rule.leaves_element,
        "points": rule.points.iter().map(xy).collect::<Vec<_>>(),
        "weights": rule.weights,
    })
    .to_string())
}

fn js(r: Result<String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = meshGeometry)]
pub fn mesh_geometry(test: &str, index: usize, curved: bool) -> Result<String, JsValue> {
    js(mesh_json(test, index, curved))
}

#[wasm_bindgen(js_name = solveAndSample)]
pub fn solve_and_sample(test: &str, index: usize, curved: bool, k: usize, grid: usize) -> Result<String, JsValue> {
    js(solve_json(test, index, curved, k, grid))
}

#[wasm_bindgen(js_name = elementQuadrature)]
pub fn element_quadrature(
    test: &str,
    index: usize,
    curved: bool,
    elem: usize,
    points: usize,
) -> Result<String, JsValue> {
    js(quadrature_json(test, index, curved, elem, points))
}
