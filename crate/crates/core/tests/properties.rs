use curved_hho::geometry::io::{mesh_to_string, parse_mesh};
use curved_hho::geometry::{validate_mesh, Curve, Point};
use curved_hho::harness::{dat_string, parse_dat, Convergence, ConvergenceRow, MeshMode, Sweep};
use curved_hho::meshgen::{cut_cartesian, straighten_for, CutCurve, CutKind, CutSpec};
use curved_hho::quadrature::{edge_rule, gauss_legendre};
use curved_hho::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn interface_spec(n: usize, cx: f64, cy: f64, r: f64) -> CutSpec {
    CutSpec::new(
        Point::new(0.0, 0.0),
        Point::new(1.0, 1.0),
        n,
        vec![CutCurve {
            curve: Curve::circle(Point::new(cx, cy), r),
            kind: CutKind::Interface,
            straighten: true,
        }],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interface_cuts_are_valid_and_exact(
        n in 2usize..9,
        cx in 0.3f64..0.7,
        cy in 0.3f64..0.7,
        r in 0.08f64..0.28,
    ) {
        let spec = interface_spec(n, cx, cy, r);
        let mesh = match cut_cartesian(&spec) {
            Ok(m) => m,
            Err(Error::DegenerateCut(_) | Error::SmallCell { .. } | Error::CutSpec(_)) => {
                return Err(TestCaseError::reject("degenerate"))
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(validate_mesh(&mesh).is_empty());
        prop_assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        let inside: f64 = mesh.elements.iter().filter(|e| e.region == 1).map(|e| e.area).sum();
        prop_assert!((inside - PI * r * r).abs() < 1e-12);

        // chords of a convex curve cut off area from the inside region only
        let straight = match straighten_for(&spec, &mesh) {
            Ok(m) => m,
            Err(Error::DegenerateCut(_)) => return Err(TestCaseError::reject("cap")),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(validate_mesh(&straight).is_empty());
        prop_assert!((straight.total_area() - 1.0).abs() < 1e-12);
        let inside_s: f64 = straight.elements.iter().filter(|e| e.region == 1).map(|e| e.area).sum();
        prop_assert!(inside_s < inside);

        let text = mesh_to_string(&mesh);
        prop_assert_eq!(parse_mesh(&text).unwrap(), mesh);
    }

    #[test]
    fn boundary_cuts_recover_ellipse_area(
        n in 2usize..12,
        angle in 0.0f64..PI,
        a in 0.15f64..0.45,
        b in 0.15f64..0.45,
        cx in 0.45f64..0.55,
        cy in 0.45f64..0.55,
    ) {
        let rot = nalgebra::Rotation2::new(angle).into_inner();
        let axes = rot * nalgebra::Matrix2::new(a, 0.0, 0.0, b);
        let spec = CutSpec::new(
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            n,
            vec![CutCurve { curve: Curve::ellipse(Point::new(cx, cy), axes), kind: CutKind::Boundary, straighten: true }],
        );
        let mesh = match cut_cartesian(&spec) {
            Ok(m) => m,
            Err(Error::DegenerateCut(_) | Error::SmallCell { .. } | Error::CutSpec(_)) => {
                return Err(TestCaseError::reject("degenerate"))
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(validate_mesh(&mesh).is_empty());
        prop_assert!((mesh.total_area() - PI * a * b).abs() < 1e-12 * PI * a * b);
        match straighten_for(&spec, &mesh) {
            Ok(s) => {
                prop_assert!(validate_mesh(&s).is_empty());
                prop_assert!(s.total_area() < mesh.total_area());
                prop_assert_eq!(s.num_elements(), mesh.num_elements());
            }
            Err(Error::DegenerateCut(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn arc_edge_rules_measure_length(r in 0.1f64..3.0, t0 in 0.0f64..6.0, span in 0.05f64..3.0, n in 2usize..12) {
        let curve = Curve::circle(Point::new(0.3, -0.2), r).restrict(t0, t0 + span);
        let face = curved_hho::geometry::Face {
            vertices: [0, 1],
            curve,
            elem_left: Some(0),
            elem_right: None,
            orientation: 1.0,
        };
        let rule = edge_rule(0, &face, &gauss_legendre(n).unwrap());
        let length: f64 = rule.weights.iter().sum();
        prop_assert!((length - r * span).abs() < 1e-12 * r * span);
        for n in &rule.normals {
            prop_assert!((n.norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn dat_tables_round_trip(values in prop::collection::vec((1e-12f64..10.0, 1e-16f64..1.0, 1e-16f64..1.0, 1e-16f64..1.0), 1..6)) {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &(h, a, b, c))| ConvergenceRow {
                mesh: i + 1,
                k: 2,
                h,
                elements: 10 * (i + 1),
                internal_edges: 20 * (i + 1),
                unknowns: 60 * (i + 1),
                errors: vec![a, b, c],
                rates: None,
                seconds: 0.0,
            })
            .collect();
        let conv = Convergence { case: "ellipse", sweep: Sweep::H, mode: MeshMode::Curved, rows, failure: None };
        let (header, parsed) = parse_dat(&dat_string(&conv)).unwrap();
        prop_assert_eq!(header.join(" "), "MeshSize L2Error H1Error EnergyError");
        for (row, &(h, a, b, c)) in parsed.iter().zip(&values) {
            prop_assert_eq!(row, &vec![h, a, b, c]);
        }
    }
}
