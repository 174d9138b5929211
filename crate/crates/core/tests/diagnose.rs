use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use trijunction::connection::canonical_sigma;
use trijunction::diagnose::*;
use trijunction::field::*;
use trijunction::geometry::{JunctionMap, Triod};
use trijunction::potential::*;
use trijunction::vec2::Vec2;

fn ws() -> WellSystem {
    canonical_wellsystem(1.0).unwrap()
}

fn jm_field(triod: Triod, r: f64, h: f64) -> Field2D {
    let jm = JunctionMap::new(triod, ws().wells);
    Field2D::from_global_fn(Grid::new(r, h).unwrap(), |z| jm.eval(z))
}

/// A junction map smoothed across each branch by a tanh of the signed
/// distance, so that every circle sees genuine transition arcs.
fn smooth_field(triod: Triod, r: f64, h: f64) -> Field2D {
    let w = ws().wells;
    Field2D::from_global_fn(Grid::new(r, h).unwrap(), move |z| {
        let i = triod.classify(z);
        let s = triod.distance(z);
        let t = 0.5 * (1.0 + (2.0 * s).tanh());
        let centroid = (w[0] + w[1] + w[2]) / 3.0;
        centroid.lerp(w[i], t)
    })
}

#[test]
fn junction_map_trace_has_empty_transitions() {
    let ws = ws();
    let tri = Triod::symmetric(20.0);
    let jm = JunctionMap::new(tri, ws.wells);
    let r = 10.0;
    let pd = phase_decomposition_fn(&|t| jm.eval(Vec2::polar(r, t)), &ws, Vec2::ZERO, r, 0.1, 4000).unwrap();
    assert!((pd.coverage() - 1.0).abs() < 1e-12);
    for len in pd.transition_lengths() {
        assert!(len.abs() < 1e-9, "{len}");
    }
    for (k, m) in pd.midpoints.iter().enumerate() {
        assert!(m.dist(tri.anchors()[k] * 0.5) < 1e-9, "{k}: {m:?}");
    }
    assert!(pd.fitted_c < 1e-12);
    let total: f64 = pd.y_lengths.iter().sum();
    assert!((total - TAU * r).abs() < TAU * r / 4000.0 * 3.0);
}

#[test]
fn decomposition_of_a_smooth_field_tiles_the_circle() {
    let ws = ws();
    let tri = Triod::new(Vec2::polar(24.0, 1.9), Vec2::polar(24.0, 3.7), Vec2::polar(24.0, 5.8)).unwrap();
    let f = smooth_field(tri, 24.0, 0.25);
    let pd = phase_decomposition(&f, &ws, 16.0, 0.1).unwrap();
    assert!((pd.coverage() - 1.0).abs() < 1e-9);
    assert!(pd.d1 > 0.0 && pd.d2 >= pd.d1);
    for k in 0..3 {
        // Midpoints sit on the triod branches.
        assert!(tri.distance(pd.midpoints[k]) < 0.1, "{k}");
    }
    assert!(phase_decomposition(&f, &ws, 30.0, 0.1).is_err());
    assert!(phase_decomposition(&f, &ws, 16.0, 0.9).is_err());
}

#[test]
fn constant_field_fails_decomposition_and_has_no_interface() {
    let ws = ws();
    let f = Field2D::from_global_fn(Grid::new(8.0, 0.25).unwrap(), |_| ws.wells[1]);
    assert!(phase_decomposition(&f, &ws, 6.0, 0.1).is_err());
    let rep = diffuse_interface(&f, &ws, 0.1, &Triod::symmetric(8.0), None).unwrap();
    assert!(rep.empty && rep.points.is_empty());
    assert_eq!(rep.localization_radius, 0.0);
}

#[test]
fn interface_of_a_smooth_field_hugs_the_triod() {
    let ws = ws();
    let tri = Triod::symmetric(24.0);
    let f = smooth_field(tri, 24.0, 0.25);
    let rep = diffuse_interface(&f, &ws, 0.1, &tri, None).unwrap();
    assert!(!rep.empty);
    // Wells at unit distance from the centroid: gamma-far only where tanh(2s) < 1 - 2 gamma.
    let s_max = 0.5 * (1.0 - 2.0 * 0.1f64).atanh();
    assert!(rep.localization_radius <= s_max + f.h(), "{}", rep.localization_radius);
    for fit in &rep.decay_fits {
        assert!(fit.rate > 0.0, "{fit:?}");
    }
    let near = junction_center(&f, &ws, 24.0);
    assert!(near.norm() <= f.h() * 1.5);
}

#[test]
fn sector_region_excludes_the_interface() {
    let tri = Triod::symmetric(10.0);
    for i in 0..3 {
        let region = sector_region(tri, i, 1.0, 8.0);
        for k in 0..200 {
            let z = Vec2::polar(0.04 * k as f64, 0.37 * k as f64);
            if region(z) {
                assert_eq!(tri.classify(z), i);
                assert!(tri.distance(z) > 1.0 && z.norm() <= 8.0);
            }
        }
    }
}

#[test]
fn slices_of_the_junction_map_find_ystar_at_the_junction() {
    let ws = ws();
    let (r, h) = (16.0, 0.125);
    let tri = Triod::symmetric(r);
    let f = jm_field(tri, r, h);
    let th = SliceThresholds { amplitude: Some(0.1), slack: Some(2.0 * h), margin: Some(1.0) };
    let sp = slice_profile(&f, &ws, &tri, 1.0, th).unwrap();
    let ystar = sp.ystar.unwrap();
    assert!(ystar.abs() <= 2.0 * h, "{ystar}");
    assert!(sp.y_d.abs() < 1e-12);
    for k in 0..sp.y_grid.len() {
        let sum: f64 = (0..3).map(|i| sp.lambda[i][k]).sum();
        assert!(sum <= sp.chord[k] + 1e-9);
    }
    // At y* = y_D the lower bound is sigma times the extended triod length.
    let sigma = canonical_sigma(1.0);
    let lb = lower_bound_for(&sp, &tri, r + h, sigma).unwrap();
    let at_d = sigma * appendix_at(&tri, r + h, ystar);
    assert!((lb - at_d).abs() < 1e-9 * lb);
    assert!(lb >= sigma * 3.0 * (r + h) * (1.0 - 1e-12));
}

fn appendix_at(tri: &Triod, rho: f64, y: f64) -> f64 {
    let p = primed_anchors(tri, rho).unwrap();
    let rot = frame_rotation(tri);
    let q = p.map(|z| z.rotate(rot));
    // Sum of distances from (0, y) to the rotated primed anchors, written out.
    q.iter().map(|z| (z.x * z.x + (z.y - y).powi(2)).sqrt()).sum()
}

#[test]
fn constant_slices_measure_the_whole_chord() {
    let ws = ws();
    let f = Field2D::from_global_fn(Grid::new(8.0, 0.25).unwrap(), |_| ws.wells[0]);
    let th = SliceThresholds { amplitude: Some(0.1), slack: Some(0.5), margin: Some(0.5) };
    let sp = slice_profile(&f, &ws, &Triod::symmetric(8.0), 0.5, th).unwrap();
    for k in 0..sp.y_grid.len() {
        assert!((sp.lambda[0][k] - sp.chord[k]).abs() <= f.h(), "{k}");
        assert_eq!(sp.lambda[1][k], 0.0);
    }
    assert!(sp.ystar.is_some());
}

#[test]
fn missing_ystar_is_reported() {
    let ws = ws();
    let f = Field2D::from_global_fn(Grid::new(8.0, 0.25).unwrap(), |_| ws.wells[2]);
    let tri = Triod::symmetric(8.0);
    let th = SliceThresholds { amplitude: Some(0.1), slack: Some(0.1), margin: Some(0.5) };
    let sp = slice_profile(&f, &ws, &tri, 0.5, th).unwrap();
    assert!(sp.ystar.is_none());
    assert!(lower_bound_for(&sp, &tri, 8.25, 1.0).is_err());
}

#[test]
fn primed_anchors_lie_on_the_rays() {
    let tri = Triod::new(Vec2::polar(10.0, 1.7), Vec2::polar(10.0, 3.6), Vec2::polar(10.0, 5.9)).unwrap();
    let p = primed_anchors(&tri, 12.0).unwrap();
    for k in 0..3 {
        assert!((p[k].norm() - 12.0).abs() < 1e-12);
        assert!((p[k] - tri.d).normalized().dist(tri.ray(k)) < 1e-12);
    }
    assert!(primed_anchors(&tri, tri.d.norm() * 0.5).is_err());
}

#[test]
fn self_similar_field_has_a_constant_blowdown() {
    let ws = ws();
    let tri = Triod::symmetric(64.0);
    let f = smooth_field(tri, 64.0, 0.25);
    let bd = blowdown(&f, &ws, &[8.0, 16.0, 32.0, 64.0], 0.1, 0.1).unwrap();
    assert!(bd.failure.is_none());
    assert_eq!(bd.records.len(), 4);
    for rec in &bd.records {
        assert!(angle_gap(rec.theta, tri.theta()) < 1e-3, "{}", rec.theta);
        assert!(rec.d.norm() < 0.05 * rec.radius);
    }
    // The L1 distance to the junction map is interface width over radius.
    let l1 = bd.beta1_fit.unwrap();
    assert!((l1.exponent + 1.0).abs() < 0.15, "{l1:?}");
    assert!(bd.cauchy.summable);
}

#[test]
fn junction_map_has_zero_l1_distance_to_itself() {
    let tri = Triod::symmetric(16.0);
    let f = jm_field(tri, 16.0, 0.25);
    let jm = JunctionMap::new(tri, ws().wells);
    for r in [4.0, 8.0, 16.0] {
        assert_eq!(blowdown_l1(&f, &jm, r), 0.0);
    }
}

fn blowdown_l1(f: &Field2D, jm: &JunctionMap, r: f64) -> f64 {
    trijunction::diagnose::blowdown::unit_l1_distance(f, jm, r)
}

#[test]
fn blowdown_rejects_bad_ladders_and_reports_failures() {
    let ws = ws();
    let tri = Triod::new(Vec2::polar(32.0, 2.2), Vec2::polar(32.0, 3.6), Vec2::polar(32.0, 5.2)).unwrap();
    let f = smooth_field(tri, 32.0, 0.25);
    assert!(blowdown(&f, &ws, &[], 0.1, 0.1).is_err());
    assert!(blowdown(&f, &ws, &[16.0, 8.0], 0.1, 0.1).is_err());
    assert!(blowdown(&f, &ws, &[16.0, 64.0], 0.1, 0.1).is_err());
    // The junction sits far from the origin: small circles see only two phases.
    let d = tri.d.norm();
    assert!(d > 4.0);
    let bd = blowdown(&f, &ws, &[0.5 * d, 32.0], 0.1, 0.1).unwrap();
    assert!(bd.failure.is_some());
    assert!(bd.records.is_empty());
}

#[test]
fn junction_angles_of_an_asymmetric_triod() {
    let ws = ws();
    let tri = Triod::new(Vec2::polar(32.0, 1.5), Vec2::polar(32.0, 3.5), Vec2::polar(32.0, 5.6)).unwrap();
    let f = smooth_field(tri, 32.0, 0.125);
    let a = junction_angles(&f, &ws, tri.d, 6.0).unwrap();
    for t in a {
        assert!((t.to_degrees() - 120.0).abs() < 1.0, "{a:?}");
    }
    let c = Field2D::from_global_fn(Grid::new(8.0, 0.25).unwrap(), |_| ws.wells[0]);
    assert!(junction_angles(&c, &ws, Vec2::ZERO, 3.0).is_err());
}

#[test]
fn power_fit_and_cauchy_tail() {
    let radii = [16.0, 32.0, 64.0, 128.0];
    let ys: Vec<f64> = radii.iter().map(|r: &f64| 3.0 * r.powf(-0.5)).collect();
    let f = power_fit(&radii, &ys).unwrap();
    assert!((f.exponent + 0.5).abs() < 1e-12 && (f.prefactor - 3.0).abs() < 1e-12);
    assert!(power_fit(&[1.0], &[1.0]).is_none());
    // theta diffs 0.1 * (R / 16)^-1: geometric with ratio 1/2.
    let thetas = [1.0, 1.1, 1.15, 1.175, 1.1875];
    let rungs = [16.0, 32.0, 64.0, 128.0, 256.0];
    let c = cauchy_report(&rungs, &thetas);
    assert!(c.decreasing && c.summable);
    // Full geometric tail from the first rung: 0.1 / (1 - 1/2).
    assert!((c.tail_bound.unwrap() - 0.2).abs() < 1e-9);
    let flat = cauchy_report(&rungs, &[2.0; 5]);
    assert_eq!(flat.tail_bound, Some(0.0));
    let growing = cauchy_report(&rungs[..3], &[0.0, 0.1, 0.4]);
    assert!(!growing.decreasing && !growing.summable);
    assert!((angle_gap(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    assert!((angle_gap(0.0, PI) - PI).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_invariants(t0 in 0.0f64..TAU, s1 in 1.6f64..2.6, s2 in 1.6f64..2.6, r in 4.0f64..15.0) {
        let ws = ws();
        let tri = Triod::new(Vec2::polar(16.0, t0), Vec2::polar(16.0, t0 + s1), Vec2::polar(16.0, t0 + s1 + s2)).unwrap();
        prop_assume!(tri.d.norm() < 0.5 * r);
        let w = ws.wells;
        let trace = move |t: f64| {
            let z = Vec2::polar(r, t);
            let s = tri.distance(z);
            let c = (w[0] + w[1] + w[2]) / 3.0;
            c.lerp(w[tri.classify(z)], 0.5 * (1.0 + (2.0 * s).tanh()))
        };
        let pd = phase_decomposition_fn(&trace, &ws, Vec2::ZERO, r, 0.1, 2000).unwrap();
        prop_assert!((pd.coverage() - 1.0).abs() < 1e-9);
        prop_assert!(pd.fitted_c <= 1.0 + 1e-12);
        for k in 0..3 {
            prop_assert!(pd.transitions[k].1 >= pd.transitions[k].0);
            prop_assert!((pd.midpoints[k].norm() - r).abs() < 1e-9);
        }
    }
}

#[test]
fn boundary_trace_transitions_fit_inside_the_width() {
    use trijunction::connection::minimize_connection;
    use trijunction::construct::{anchors_from_arcs, boundary_data, Profiles};
    let ws = ws();
    let [a, b, c] = [(0, 1), (0, 2), (1, 2)].map(|(i, j)| minimize_connection(&ws, i, j, 20.0, 2001).unwrap());
    let profiles = Profiles::new(a, b, c).unwrap();
    let (r, width) = (32.0, 12.0);
    let tri = anchors_from_arcs(r, [100.0, 130.0, 130.0], PI / 2.0).unwrap();
    let tr = boundary_data(&tri, r, &profiles, width, &ws).unwrap();
    let pd = phase_decomposition_fn(&|t| tr.at(t), &ws, Vec2::ZERO, r, 0.1, 8000).unwrap();
    let lens = pd.transition_lengths();
    let total: f64 = lens.iter().sum();
    assert!(total <= 3.0 * width, "{lens:?}");
    for len in lens {
        assert!(len > 0.0 && len <= width, "{len}");
    }
}
