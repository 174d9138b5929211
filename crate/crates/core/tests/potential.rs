use proptest::prelude::*;
use trijunction::potential::*;
use trijunction::vec2::Vec2;

// Independent evaluation of s |z^3 - 1|^2 in complex arithmetic.
fn w_oracle(s: f64, u: Vec2) -> f64 {
    let (x, y) = (u.x, u.y);
    let (x2, y2) = (x * x - y * y, 2.0 * x * y);
    let (re, im) = (x2 * x - y2 * y - 1.0, x2 * y + y2 * x);
    s * (re * re + im * im)
}

fn fd_grad(ws: &WellSystem, u: Vec2, e: f64) -> Vec2 {
    let dx = Vec2::new(e, 0.0);
    let dy = Vec2::new(0.0, e);
    Vec2::new(
        (ws.eval(u + dx) - ws.eval(u - dx)) / (2.0 * e),
        (ws.eval(u + dy) - ws.eval(u - dy)) / (2.0 * e),
    )
}

#[test]
fn canonical_vanishes_exactly_on_wells() {
    let ws = canonical_wellsystem(1.0).unwrap();
    for a in canonical_wells() {
        assert!(ws.eval(a) < 1e-28);
        assert!(ws.grad(a).norm() < 1e-13);
    }
    assert!(ws.eval(Vec2::ZERO) == 1.0);
}

#[test]
fn hessian_at_wells_is_isotropic() {
    for s in [0.5, 1.0, 3.0] {
        let ws = canonical_wellsystem(s).unwrap();
        for a in canonical_wells() {
            let h = ws.hess(a);
            assert!((h.xx - 18.0 * s).abs() < 1e-12 * s);
            assert!((h.yy - 18.0 * s).abs() < 1e-12 * s);
            assert!(h.xy.abs() < 1e-12 * s);
        }
    }
}

#[test]
fn hessian_matches_finite_differences() {
    let ws = canonical_wellsystem(1.3).unwrap();
    let e = 1e-5;
    for u in [Vec2::new(0.3, -0.2), Vec2::new(-1.1, 0.7), Vec2::new(0.9, 0.05)] {
        let h = ws.hess(u);
        let gx = (ws.grad(u + Vec2::new(e, 0.0)) - ws.grad(u - Vec2::new(e, 0.0))) / (2.0 * e);
        let gy = (ws.grad(u + Vec2::new(0.0, e)) - ws.grad(u - Vec2::new(0.0, e))) / (2.0 * e);
        let scale = 1.0 + h.norm();
        assert!((gx.x - h.xx).abs() < 1e-6 * scale);
        assert!((gx.y - h.xy).abs() < 1e-6 * scale);
        assert!((gy.x - h.xy).abs() < 1e-6 * scale);
        assert!((gy.y - h.yy).abs() < 1e-6 * scale);
    }
}

#[test]
fn product_form_agrees_with_canonical() {
    let c = canonical_wellsystem(2.0).unwrap();
    let p = product_wellsystem(canonical_wells(), 2.0).unwrap();
    for k in 0..50 {
        let u = Vec2::polar(0.05 * k as f64, 0.7 * k as f64);
        let tol = 1e-12 * (1.0 + c.eval(u));
        assert!((c.eval(u) - p.eval(u)).abs() < tol);
        assert!((c.grad(u) - p.grad(u)).norm() < 1e-11 * (1.0 + c.grad(u).norm()));
        let (hc, hp) = (c.hess(u), p.hess(u));
        assert!((hc.xx - hp.xx).abs() + (hc.xy - hp.xy).abs() + (hc.yy - hp.yy).abs() < 1e-10 * (1.0 + hc.norm()));
    }
}

#[test]
fn canonical_certifies_with_exact_curvature() {
    let ws = canonical_wellsystem(1.0).unwrap();
    let (ws, violations) = certify_constants(&ws, &DEFAULT_DELTA_GRID, 720).unwrap();
    assert!(violations.is_empty(), "{violations:?}");
    let c = ws.constants;
    assert!(c.certified);
    assert!((c.c1 - 18.0).abs() < 1e-9 && (c.c2 - 18.0).abs() < 1e-9);
    assert_eq!(c.m, 1.0);
    assert!(c.delta_w > 0.0 && c.c_w > 0.0 && c.cap_c_w >= c.c_w);
    let report = ws.report(vec![]);
    let json = serde_json::to_value(&report).unwrap();
    for key in ["wells", "c1", "c2", "M", "deltaW", "cW", "CW", "violations"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn sandwich_bound_holds_on_spheres() {
    let ws = canonical_wellsystem(1.0).unwrap();
    let (ws, _) = certify_constants(&ws, &DEFAULT_DELTA_GRID, 720).unwrap();
    let c = ws.constants;
    for a in ws.wells {
        for d in [0.5 * c.delta_w, c.delta_w] {
            for k in 0..97 {
                let w = ws.eval(a + Vec2::polar(d, k as f64 * 0.0648));
                assert!(w >= 0.5 * c.c_w * d * d * (1.0 - 1e-9));
                assert!(w <= 0.5 * c.cap_c_w * d * d * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn custom_potential_with_moved_wells_certifies() {
    let wells = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.7, 1.5)];
    let ws = product_wellsystem(wells, 1.0).unwrap();
    let (ws, violations) = certify_constants(&ws, &[0.01, 0.05, 0.1], 360).unwrap();
    assert!(violations.is_empty(), "{violations:?}");
    assert!(ws.constants.c1 > 0.0);
    assert!(product_wellsystem([wells[0], wells[0], wells[1]], 1.0).is_err());
}

#[test]
fn rejects_bad_parameters() {
    assert!(canonical_wellsystem(0.0).is_err());
    assert!(canonical_wellsystem(f64::NAN).is_err());
    let ws = canonical_wellsystem(1.0).unwrap();
    assert!(certify_constants(&ws, &[0.1, 0.05], 100).is_err());
    assert!(certify_constants(&ws, &[0.1, 0.9], 100).is_err());
}

proptest! {
    #[test]
    fn potential_is_nonnegative_and_matches_oracle(x in -2.0f64..2.0, y in -2.0f64..2.0, s in 0.1f64..5.0) {
        let ws = canonical_wellsystem(s).unwrap();
        let u = Vec2::new(x, y);
        let w = ws.eval(u);
        prop_assert!(w >= 0.0);
        prop_assert!((w - w_oracle(s, u)).abs() <= 1e-12 * (1.0 + w));
    }

    #[test]
    fn gradient_matches_finite_differences(x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let ws = canonical_wellsystem(1.0).unwrap();
        let u = Vec2::new(x, y);
        let g = ws.grad(u);
        let fd = fd_grad(&ws, u, 1e-6);
        prop_assert!((g - fd).norm() <= 1e-6 * (1.0 + g.norm()));
        let (w, g2) = ws.eval_grad(u);
        prop_assert_eq!(w, ws.eval(u));
        prop_assert_eq!(g2, g);
    }

    #[test]
    fn threefold_symmetry(x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let ws = canonical_wellsystem(1.0).unwrap();
        let u = Vec2::new(x, y);
        let r = u.rotate(std::f64::consts::TAU / 3.0);
        prop_assert!((ws.eval(u) - ws.eval(r)).abs() <= 1e-12 * (1.0 + ws.eval(u)));
    }
}
