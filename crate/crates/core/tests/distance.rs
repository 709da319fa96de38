use hbmo::distance::{
    extract_interface, signed_distance_brute_force, signed_distance_field, Interface, Segment,
};
use hbmo::grid::{make_grid, ScalarField};
use proptest::prelude::*;

fn ellipse(g: hbmo::Grid2D, c: [f64; 2], a: f64, b: f64) -> ScalarField {
    ScalarField::from_fn(g, |x, y| 1.0 - ((x - c[0]) / a).hypot((y - c[1]) / b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bucketed_equals_brute_force(cx in 0.3..0.7f64, cy in 0.3..0.7f64, a in 0.08..0.25f64, b in 0.08..0.25f64, n in 17usize..60) {
        let g = make_grid(n, 1.0).unwrap();
        let f = ellipse(g, [cx, cy], a, b);
        let iface = extract_interface(&f);
        prop_assume!(!iface.is_empty());
        let fast = signed_distance_field(&iface, &f).unwrap();
        let slow = signed_distance_brute_force(&iface, &f).unwrap();
        for (p, q) in fast.values.iter().zip(&slow.values) {
            prop_assert!((p - q).abs() <= 1e-14, "{p} vs {q}");
        }
    }

    #[test]
    fn sign_follows_source(cx in 0.3..0.7f64, cy in 0.3..0.7f64, a in 0.08..0.25f64) {
        let g = make_grid(41, 1.0).unwrap();
        let f = ellipse(g, [cx, cy], a, 0.7 * a);
        let iface = extract_interface(&f);
        prop_assume!(!iface.is_empty());
        let d = signed_distance_field(&iface, &f).unwrap();
        for (dv, fv) in d.values.iter().zip(&f.values) {
            prop_assert_eq!(*dv >= 0.0, *fv >= 0.0);
        }
    }

    #[test]
    fn redistancing_is_idempotent(cx in 0.35..0.65f64, cy in 0.35..0.65f64, a in 0.1..0.25f64) {
        let g = make_grid(65, 1.0).unwrap();
        let f = ellipse(g, [cx, cy], a, 0.6 * a);
        let gamma = extract_interface(&f);
        let d = signed_distance_field(&gamma, &f).unwrap();
        let again = extract_interface(&d);
        prop_assert!(gamma.hausdorff(&again) <= 0.5 * g.hx, "{}", gamma.hausdorff(&again));
        let d2 = signed_distance_field(&again, &d).unwrap();
        let dev = d.values.iter().zip(&d2.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(dev <= 0.5 * g.hx);
    }
}

#[test]
fn distance_is_eikonal_away_from_the_medial_axis() {
    let g = make_grid(129, 1.0).unwrap();
    let c = [0.5, 0.5];
    let f = ScalarField::from_fn(g, |x, y| 0.3 - (x - c[0]).hypot(y - c[1]));
    let iface = extract_interface(&f);
    let d = signed_distance_field(&iface, &f).unwrap();
    let h = g.hx;
    let mut worst: f64 = 0.0;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let (x, y) = (g.x(i), g.y(j));
            let rho = (x - c[0]).hypot(y - c[1]);
            if rho < 0.1 || (rho - 0.3).abs() < 3.0 * h {
                continue;
            }
            let gx = (d.at(i + 1, j) - d.at(i - 1, j)) / (2.0 * h);
            let gy = (d.at(i, j + 1) - d.at(i, j - 1)) / (2.0 * h);
            worst = worst.max((gx.hypot(gy) - 1.0).abs());
        }
    }
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn polyline_interface_is_exact() {
    let g = make_grid(21, 1.0).unwrap();
    let square = Interface::new(vec![
        Segment { p: [0.25, 0.25], q: [0.75, 0.25] },
        Segment { p: [0.75, 0.25], q: [0.75, 0.75] },
        Segment { p: [0.75, 0.75], q: [0.25, 0.75] },
        Segment { p: [0.25, 0.75], q: [0.25, 0.25] },
    ]);
    assert!((square.enclosed_area() - 0.25).abs() < 1e-15);
    let d = signed_distance_field(&square, &square.sign_field(g)).unwrap();
    let k = g.index(10, 10);
    assert!((d.values[k] - 0.25).abs() < 1e-15);
    let corner = g.index(0, 0);
    assert!((d.values[corner] + 0.25 * 2f64.sqrt()).abs() < 1e-15);
}
