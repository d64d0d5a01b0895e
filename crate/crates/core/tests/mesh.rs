use std::f64::consts::PI;

use pdarcy_core::mesh::{
    format_mesh, generate_annulus, generate_square_with_holes, parse_mesh, refine_times, refine_uniform,
    BoundaryTag, Mesh, MeshError, ANNULUS_DIAMETER_FACTOR,
};
use proptest::prelude::*;

fn annulus_loops_are_tagged(mesh: &Mesh, r_inner: f64, r_outer: f64) {
    let loops = mesh.boundary_loops().unwrap();
    assert_eq!(loops.len(), 2);
    for e in mesh.boundary() {
        let [a, b] = mesh.edge_points(e);
        let r = a[0].hypot(a[1]).max(b[0].hypot(b[1]));
        let expected = if r < 0.5 * (r_inner + r_outer) {
            assert!(r <= r_inner + 1e-9);
            BoundaryTag::GammaW
        } else {
            assert!(r <= r_outer + 1e-9 && r > 0.9 * r_outer);
            BoundaryTag::Gamma
        };
        assert_eq!(e.tag, expected);
    }
}

#[test]
fn annulus_area_deficit_is_second_order() {
    let exact = 15.0 * PI;
    let deficits: Vec<f64> = [0.4, 0.2, 0.1]
        .iter()
        .map(|&h| {
            let m = generate_annulus(1.0, 4.0, h).unwrap();
            m.validate().unwrap();
            exact - m.total_area()
        })
        .collect();
    assert!(deficits.iter().all(|&d| d > 0.0), "inscribed polygons lose area: {deficits:?}");
    // a chord of length s on radius R cuts off about s^3 / (12 R)
    for (d, h) in deficits.iter().zip([0.4, 0.2, 0.1]) {
        assert!(*d <= PI * h * h / 3.0, "{deficits:?}");
    }
    assert!(deficits.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn annulus_topology_and_tags() {
    for h in [0.7, 0.3, 0.15] {
        let m = generate_annulus(1.0, 4.0, h).unwrap();
        annulus_loops_are_tagged(&m, 1.0, 4.0);
        assert!(m.h() <= ANNULUS_DIAMETER_FACTOR * h);
        for e in m.boundary() {
            let [a, b] = m.edge_points(e);
            assert!((b[0] - a[0]).hypot(b[1] - a[1]) <= h + 1e-12);
        }
    }
}

#[test]
fn annulus_boundary_length_converges() {
    let exact = 2.0 * PI * 5.0;
    let mut prev = f64::INFINITY;
    for h in [0.4, 0.2, 0.1, 0.05] {
        let m = generate_annulus(1.0, 4.0, h).unwrap();
        let len = m.boundary_length(BoundaryTag::Gamma) + m.boundary_length(BoundaryTag::GammaW);
        let err = exact - len;
        assert!(err > 0.0 && err < prev);
        prev = err;
    }
    assert!(prev < 1e-3);
}

#[test]
fn annulus_parameter_errors() {
    assert!(matches!(generate_annulus(0.0, 1.0, 0.1), Err(MeshError::InvalidParameters(_))));
    assert!(matches!(generate_annulus(2.0, 1.0, 0.1), Err(MeshError::InvalidParameters(_))));
    assert!(matches!(generate_annulus(1.0, 2.0, -0.1), Err(MeshError::InvalidParameters(_))));
    assert_eq!(
        generate_annulus(1.0, 1.5, 0.8),
        Err(MeshError::TooCoarse {
            target_h: 0.8,
            width: 0.5
        })
    );
}

#[test]
fn twice_refined_annulus_has_sixteen_times_the_triangles() {
    let m = generate_annulus(1.0, 4.0, 0.5).unwrap();
    let r = refine_times(&m, 2).unwrap();
    assert_eq!(r.num_triangles(), 16 * m.num_triangles());
    r.validate().unwrap();
    annulus_loops_are_tagged(&r, 1.0, 4.0);
}

#[test]
fn square_with_holes_area_is_exact() {
    let m = generate_square_with_holes(0.65, 0.1, 0.02, 0.05).unwrap();
    m.validate().unwrap();
    assert!((m.total_area() - 1.6496).abs() < 1e-12);
    assert_eq!(m.boundary_loops().unwrap().len(), 2);
}

#[test]
fn square_with_holes_wall_edges_lie_on_the_hole() {
    for (c, a, b, h) in [(0.65, 0.1, 0.02, 0.05), (1.0, 0.3, 0.2, 0.13), (2.0, 0.5, 0.7, 0.4)] {
        let m = generate_square_with_holes(c, a, b, h).unwrap();
        let on_hole = |p: [f64; 2]| (p[0].abs() - a).abs() < 1e-12 || (p[1].abs() - a).abs() < 1e-12;
        for e in m.boundary() {
            let [p, q] = m.edge_points(e);
            if e.tag == BoundaryTag::GammaW {
                assert!(on_hole(p) && on_hole(q));
                assert!(p[0].abs() <= a + 1e-12 && p[1].abs() <= a + 1e-12);
            }
        }
        let hole_len = m.boundary_length(BoundaryTag::GammaW);
        assert!((hole_len - 8.0 * a).abs() < 1e-12);
        let outer_len = m.boundary_length(BoundaryTag::Gamma);
        assert!((outer_len - 8.0 * c).abs() < 1e-12, "the notch keeps the outer perimeter");
    }
}

#[test]
fn square_with_holes_parameter_errors() {
    for (c, a, b) in [(0.65, 0.7, 0.02), (0.65, 0.1, 0.0), (0.65, 0.4, 0.3), (0.65, -0.1, 0.02)] {
        assert!(matches!(
            generate_square_with_holes(c, a, b, 0.05),
            Err(MeshError::InvalidParameters(_))
        ));
    }
}

#[test]
fn refinement_halves_h_and_keeps_area() {
    let meshes = [
        generate_annulus(1.0, 4.0, 0.5).unwrap(),
        generate_square_with_holes(0.65, 0.1, 0.02, 0.1).unwrap(),
    ];
    for m in meshes {
        let r = refine_uniform(&m).unwrap();
        r.validate().unwrap();
        assert_eq!(r.num_triangles(), 4 * m.num_triangles());
        assert!((r.h() - m.h() / 2.0).abs() < 1e-12);
        assert!((r.total_area() - m.total_area()).abs() < 1e-12);
        assert_eq!(r.boundary().len(), 2 * m.boundary().len());
        for tag in [BoundaryTag::Gamma, BoundaryTag::GammaW] {
            assert!((r.boundary_length(tag) - m.boundary_length(tag)).abs() < 1e-12);
        }
    }
}

#[test]
fn shape_ratio_is_bounded_across_levels() {
    // Refinement produces similar triangles, so the worst ratio is fixed.
    let m = generate_square_with_holes(0.65, 0.1, 0.02, 0.05).unwrap();
    let base = m.quality().max_shape_ratio;
    let r = refine_times(&m, 2).unwrap();
    assert!((r.quality().max_shape_ratio - base).abs() < 1e-9 * base);
    // Regenerated annuli stay below a fixed bound.
    for h in [0.4, 0.2, 0.1, 0.05] {
        let q = generate_annulus(1.0, 4.0, h).unwrap().quality();
        assert!(q.max_shape_ratio < 12.0, "h = {h}: {q:?}");
        assert!(q.h_max / q.min_inradius < 12.0, "h = {h}: {q:?}");
    }
}

#[test]
fn mesh_file_round_trip_is_exact() {
    let m = generate_annulus(1.0, 4.0, 0.6).unwrap();
    let text = format_mesh(&m);
    assert_eq!(parse_mesh(&text).unwrap(), m);
}

#[test]
fn truncated_file_names_the_line() {
    let m = generate_square_with_holes(0.65, 0.1, 0.02, 0.2).unwrap();
    let text = format_mesh(&m);
    let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    match parse_mesh(&cut) {
        Err(MeshError::Parse { line, message }) => {
            assert_eq!(line, 6);
            assert!(message.contains("end of file"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_tag_is_rejected() {
    let m = generate_square_with_holes(0.65, 0.1, 0.02, 0.2).unwrap();
    let text = format_mesh(&m).replacen("GammaW", "Wall", 1);
    let line = text.lines().position(|l| l.ends_with("Wall")).unwrap() + 1;
    assert_eq!(
        parse_mesh(&text),
        Err(MeshError::UnknownTag {
            line,
            tag: "Wall".into()
        })
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_annuli_validate_and_round_trip(
        r_inner in 0.2f64..2.0,
        width in 0.5f64..3.0,
        frac in 0.08f64..0.5,
    ) {
        let m = generate_annulus(r_inner, r_inner + width, frac * width).unwrap();
        prop_assert!(m.validate().is_ok());
        prop_assert_eq!(m.boundary_loops().unwrap().len(), 2);
        prop_assert_eq!(parse_mesh(&format_mesh(&m)).unwrap(), m);
    }

    #[test]
    fn generated_squares_validate_and_round_trip(
        c in 0.5f64..2.0,
        a_frac in 0.05f64..0.6,
        b_frac in 0.05f64..0.9,
        h_frac in 0.05f64..0.3,
    ) {
        let a = a_frac * c;
        let b = b_frac * (c - a);
        let m = generate_square_with_holes(c, a, b, h_frac * c).unwrap();
        prop_assert!(m.validate().is_ok());
        let area = 4.0 * c * c - 4.0 * a * a - b * b;
        prop_assert!((m.total_area() - area).abs() < 1e-12 * area.max(1.0));
        let r = refine_uniform(&m).unwrap();
        prop_assert!(r.validate().is_ok());
        prop_assert_eq!(parse_mesh(&format_mesh(&r)).unwrap(), r);
    }
}
