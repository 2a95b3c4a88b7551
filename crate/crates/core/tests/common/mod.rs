#![allow(dead_code)]

use curved_hho::geometry::{Curve, Face, FaceRef, Mesh, Point};
use std::f64::consts::PI;

/// Single-element mesh bounded by the closed polygon `points` (counter-clockwise).
pub fn polygon_mesh(points: &[Point]) -> Mesh {
    let n = points.len();
    let faces = (0..n)
        .map(|i| Face {
            curve: Curve::segment(points[i], points[(i + 1) % n]),
            vertices: [i, (i + 1) % n],
            elem_left: Some(0),
            elem_right: None,
            orientation: 1.0,
        })
        .collect();
    let refs = (0..n).map(|i| FaceRef::new(i, true)).collect();
    Mesh::new(points.to_vec(), faces, vec![(refs, 0)]).unwrap()
}

/// Quarter of the unit disc with the corner at the origin.
pub fn quarter_disc() -> Mesh {
    let vertices = vec![Point::zeros(), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
    let curves = [
        Curve::segment(vertices[0], vertices[1]),
        Curve::circle(Point::zeros(), 1.0).restrict(0.0, PI / 2.0),
        Curve::segment(vertices[2], vertices[0]),
    ];
    let faces = curves
        .into_iter()
        .enumerate()
        .map(|(i, curve)| Face {
            curve,
            vertices: [i, (i + 1) % 3],
            elem_left: Some(0),
            elem_right: None,
            orientation: 1.0,
        })
        .collect();
    let refs = (0..3).map(|i| FaceRef::new(i, true)).collect();
    Mesh::new(vertices, faces, vec![(refs, 0)]).unwrap()
}

/// Unit square split into an `n x n` grid of square elements.
#[allow(clippy::needless_range_loop)]
pub fn square_grid(n: usize) -> Mesh {
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 * h, j as f64 * h));
        }
    }
    let elem = |i: usize, j: usize| (i < n && j < n).then(|| j * n + i);
    let mut faces = Vec::new();
    // horizontal faces run in +x and vertical faces in +y; the element above
    // (resp. to the left) traverses them forwards
    let mut horizontal = vec![vec![0; n + 1]; n];
    for j in 0..=n {
        for i in 0..n {
            horizontal[i][j] = faces.len();
            let (a, b) = (vid(i, j), vid(i + 1, j));
            faces.push(Face {
                curve: Curve::segment(vertices[a], vertices[b]),
                vertices: [a, b],
                elem_left: elem(i, j),
                elem_right: j.checked_sub(1).and_then(|jj| elem(i, jj)),
                orientation: 1.0,
            });
        }
    }
    let mut vertical = vec![vec![0; n]; n + 1];
    for i in 0..=n {
        for j in 0..n {
            vertical[i][j] = faces.len();
            let (a, b) = (vid(i, j), vid(i, j + 1));
            faces.push(Face {
                curve: Curve::segment(vertices[a], vertices[b]),
                vertices: [a, b],
                elem_left: i.checked_sub(1).and_then(|ii| elem(ii, j)),
                elem_right: elem(i, j),
                orientation: 1.0,
            });
        }
    }
    let mut loops = Vec::new();
    for j in 0..n {
        for i in 0..n {
            loops.push((
                vec![
                    FaceRef::new(horizontal[i][j], true),
                    FaceRef::new(vertical[i + 1][j], true),
                    FaceRef::new(horizontal[i][j + 1], false),
                    FaceRef::new(vertical[i][j], false),
                ],
                0,
            ));
        }
    }
    Mesh::new(vertices, faces, loops).unwrap()
}
