use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;
use trijunction::connection::minimize_connection;
use trijunction::construct::*;
use trijunction::field::*;
use trijunction::geometry::Triod;
use trijunction::potential::*;
use trijunction::vec2::Vec2;

fn ws() -> &'static WellSystem {
    static W: OnceLock<WellSystem> = OnceLock::new();
    W.get_or_init(|| canonical_wellsystem(1.0).unwrap())
}

fn profiles() -> &'static Profiles {
    static P: OnceLock<Profiles> = OnceLock::new();
    P.get_or_init(|| {
        let ws = ws();
        let [a, b, c] = [(0, 1), (0, 2), (1, 2)].map(|(i, j)| minimize_connection(ws, i, j, 20.0, 4001).unwrap());
        Profiles::new(a, b, c).unwrap()
    })
}

#[test]
fn boundary_line_energy_brackets_three_sigma_at_r64() {
    let r = 64.0;
    let h = 0.125;
    let tri = anchors_from_arcs(r, [120.0; 3], PI / 2.0).unwrap();
    let tr = boundary_data(&tri, r, profiles(), 12.0, ws()).unwrap();
    let le = trace_line_energy(&tr, ws(), r, circle_samples(r, h), h);
    let target = 3.0 * profiles().sigma();
    assert!(le.smooth);
    assert!(le.total >= 0.97 * target && le.total <= 1.03 * target, "{} vs {target}", le.total);
    // The same number read off a field carrying the trace on its band.
    let f = Field2D::from_fn(Grid::new(r, 0.25).unwrap(), |_| ws().wells[0], &tr);
    let on_field = boundary_line_energy(&f, ws(), r).unwrap();
    assert!((on_field.total - le.total).abs() < 0.01 * target);
}

#[test]
fn trace_is_constant_on_arcs_and_switches_at_anchors() {
    let r = 40.0;
    let tri = anchors_from_arcs(r, [100.0, 130.0, 130.0], PI / 2.0).unwrap();
    let tr = boundary_data(&tri, r, profiles(), 12.0, ws()).unwrap();
    let w = ws().wells;
    // Counterclockwise from A: I_1 (phase 1), B, I_3 (phase 3), C, I_2 (phase 2).
    let mid = |a: f64, b: f64| a + 0.5 * (b - a).rem_euclid(TAU);
    let ang = tri.anchors().map(|p| p.angle());
    assert_eq!(tr.at(mid(ang[0], ang[1])), w[0]);
    assert_eq!(tr.at(mid(ang[1], ang[2])), w[2]);
    assert_eq!(tr.at(mid(ang[2], ang[0])), w[1]);
    // At each anchor the value is the profile centre: equidistant from its pair.
    for (k, (p, q)) in ANCHOR_PAIRS.iter().enumerate() {
        let u = tr.at(ang[k]);
        assert!((u.dist(w[*p]) - u.dist(w[*q])).abs() < 0.05, "anchor {k}: {u:?}");
    }
    // Continuity at the transition ends.
    for k in 0..3 {
        for s in [-1.0, 1.0] {
            let t = ang[k] + s * 6.0 / r;
            assert!(tr.at(t - 1e-9).dist(tr.at(t + 1e-9)) < 1e-6);
        }
    }
}

#[test]
fn boundary_data_rejects_bad_layouts() {
    let tri = Triod::symmetric(10.0);
    assert!(boundary_data(&tri, 11.0, profiles(), 4.0, ws()).is_err());
    assert!(boundary_data(&tri, 10.0, profiles(), 0.0, ws()).is_err());
    assert!(boundary_data(&tri, 10.0, profiles(), 25.0, ws()).is_err());
}

#[test]
fn triple_competitor_energy_is_close_to_three_sigma_r() {
    let r = 32.0;
    let tri = anchors_from_arcs(r, [120.0; 3], PI / 2.0).unwrap();
    let tr = boundary_data(&tri, r, profiles(), 12.0, ws()).unwrap();
    let rep = triple_competitor(&tri, Grid::new(r, 0.25).unwrap(), ws(), profiles(), 0.5, &tr, None).unwrap();
    let ratio = rep.energy.total / (3.0 * profiles().sigma() * r);
    assert!(ratio > 0.95 && ratio < 1.05, "{ratio}");
    assert!(rep.slack.abs() < 1e-9 * rep.energy.total);
    assert!(rep.energy.per_region["junction_ball"] > 0.0);
    // Reusing the calibration at another radius gives a real prediction.
    let r2 = 24.0;
    let tri2 = anchors_from_arcs(r2, [120.0; 3], PI / 2.0).unwrap();
    let tr2 = boundary_data(&tri2, r2, profiles(), 12.0, ws()).unwrap();
    let rep2 = triple_competitor(&tri2, Grid::new(r2, 0.25).unwrap(), ws(), profiles(), 0.5, &tr2, Some(rep.params.calibration)).unwrap();
    assert!((rep2.predicted_bound - rep2.energy.total).abs() < 0.05 * rep2.energy.total);
}

#[test]
fn triple_competitor_rejects_bad_alpha_and_small_disks() {
    let tri = anchors_from_arcs(8.0, [120.0; 3], 0.0).unwrap();
    let tr = boundary_data(&tri, 8.0, profiles(), 4.0, ws()).unwrap();
    let g = Grid::new(8.0, 0.25).unwrap();
    assert!(triple_competitor(&tri, g, ws(), profiles(), 1.0, &tr, None).is_err());
    assert!(triple_competitor(&tri, g, ws(), profiles(), 0.9, &tr, None).is_err());
}

#[test]
fn two_phase_competitor_costs_one_diameter() {
    let r = 32.0;
    let rep = two_phase_competitor(Grid::new(r, 0.25).unwrap(), 0.0, ws(), profiles().pair(0, 1), None).unwrap();
    let ratio = rep.energy.total / (2.0 * r * profiles().sigma());
    assert!(ratio > 0.97 && ratio < 1.03, "{ratio}");
    assert!(rep.slack >= -1e-9 * rep.energy.total);
    let parts: f64 = ["core", "layers", "bulk"].iter().map(|k| rep.energy.per_region[*k]).sum();
    assert!((parts - rep.energy.total).abs() < 1e-9 * rep.energy.total);
    assert!(two_phase_competitor(Grid::new(r, 0.25).unwrap(), 30.0, ws(), profiles().pair(0, 1), None).is_err());
    assert!(two_phase_competitor(Grid::new(r, 0.25).unwrap(), 0.0, ws(), profiles().pair(1, 2), None).is_err());
}

#[test]
fn radial_competitor_respects_its_bound() {
    let tri = anchors_from_arcs(16.0, [120.0; 3], PI / 2.0).unwrap();
    let tr = boundary_data(&tri, 16.0, profiles(), 12.0, ws()).unwrap();
    let rep = radial_competitor(&tr, Grid::new(16.0, 0.25).unwrap(), ws(), 0, None).unwrap();
    assert!(rep.slack > 0.0);
    let centre = rep.field.sample(Vec2::ZERO);
    assert_eq!(centre, ws().wells[0]);
    assert!(radial_competitor(&tr, Grid::new(16.0, 0.25).unwrap(), ws(), 3, None).is_err());
}

#[test]
fn triod_field_is_a_well_deep_in_each_sector() {
    let tri = Triod::symmetric(30.0);
    let tf = TriodField::new(&tri, profiles(), ws(), 4.0).unwrap();
    for k in 0..3 {
        let bis = -tri.ray(k);
        let z = tri.d + bis * 20.0;
        let phase = tri.classify(z);
        assert_eq!(tf.eval(z), ws().wells[phase]);
    }
}

#[test]
fn arcs_must_sum_to_full_turn() {
    let t = anchors_from_arcs(10.0, [100.0, 130.0, 130.0], PI / 2.0).unwrap();
    for p in t.anchors() {
        assert!((p.norm() - 10.0).abs() < 1e-12);
    }
    let bc = (t.c.angle() - t.b.angle()).rem_euclid(TAU).to_degrees();
    assert!((bc - 130.0).abs() < 1e-9);
    assert!(anchors_from_arcs(10.0, [0.0, 180.0, 180.0], 0.0).is_err());
}
