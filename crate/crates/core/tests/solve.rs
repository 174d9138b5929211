use std::f64::consts::PI;
use std::sync::OnceLock;
use trijunction::connection::minimize_connection;
use trijunction::construct::*;
use trijunction::field::*;
use trijunction::potential::*;
use trijunction::solve::*;
use trijunction::vec2::Vec2;

struct Case {
    ws: WellSystem,
    trace: PhaseTrace,
    seed: Field2D,
    solved: SolveResult,
}

const R: f64 = 12.0;
const H: f64 = 0.25;

fn case() -> &'static Case {
    static C: OnceLock<Case> = OnceLock::new();
    C.get_or_init(|| {
        let ws = canonical_wellsystem(1.0).unwrap();
        let ws = certify_constants(&ws, &DEFAULT_DELTA_GRID, 360).unwrap().0;
        let [a, b, c] = [(0, 1), (0, 2), (1, 2)].map(|(i, j)| minimize_connection(&ws, i, j, 20.0, 2001).unwrap());
        let profiles = Profiles::new(a, b, c).unwrap();
        let tri = anchors_from_arcs(R, [120.0; 3], PI / 2.0).unwrap();
        let trace = boundary_data(&tri, R, &profiles, 8.0, &ws).unwrap();
        let seed = triple_competitor(&tri, Grid::new(R, H).unwrap(), &ws, &profiles, 0.5, &trace, None).unwrap().field;
        let cfg = SolveConfig::new(R, H);
        let solved = solve(&cfg, &trace, &ws, seed.clone()).unwrap();
        Case { ws, trace, seed, solved }
    })
}

#[test]
fn lbfgs_converges_and_lowers_the_energy() {
    let c = case();
    let s = &c.solved;
    assert!(s.converged, "{}", s.stop_reason);
    assert!(s.residual <= 1e-5);
    assert!(s.energy < s.seed_energy);
    assert!((euler_lagrange_residual(&s.field, &c.ws) - s.residual).abs() < 1e-9);
    assert!((energy_total(&s.field, &c.ws) - s.energy).abs() < 1e-9 * s.energy);
    for w in s.log.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy);
    }
}

#[test]
fn band_is_untouched_by_the_solver() {
    let c = case();
    for k in 0..c.seed.grid.len() {
        if c.seed.dirichlet[k] {
            assert_eq!(c.seed.values[k], c.solved.field.values[k]);
        }
    }
}

#[test]
fn converged_field_passes_the_probes() {
    let c = case();
    let f = &c.solved.field;
    let p = local_minimality_probe(f, &c.ws, 100, 2.0, 1).unwrap();
    assert!(p.passed && p.min_margin >= -1e-8, "{}", p.min_margin);
    assert_eq!(p.margins.len(), 100);
    assert!(perturbation_margin(f, &c.ws, Vec2::ZERO, 2.0, |_, _| Vec2::ZERO).abs() < 1e-15);
    // The probe also sees that a nonconverged seed is not a minimizer.
    let d = c.seed.grid.h;
    let g = energy_gradient(&c.seed, &c.ws);
    let worst = c.seed.free_nodes().max_by(|&a, &b| g[a].norm().total_cmp(&g[b].norm())).unwrap();
    let at = c.seed.grid.pos(worst);
    assert!(descent_margin(&c.seed, &c.ws, at, 4.0 * d, 1e-3) < 0.0);
}

#[test]
fn maximum_principle_near_a_well() {
    let c = case();
    let f = &c.solved.field;
    for i in 0..3 {
        // Deep part of the sector of phase i, away from the band.
        let dir = -Vec2::polar(1.0, PI / 2.0 + [1.0, -1.0, 3.0][i] * PI / 3.0);
        let centre = dir * 6.0;
        let rep = maximum_principle_check(f, &c.ws, |z| z.dist(centre) < 3.0, i).unwrap();
        assert!(rep.interior_nodes > 0 && rep.boundary_nodes > 0);
        assert!(rep.passed, "well {i}: {rep:?}");
    }
    assert!(maximum_principle_check(f, &c.ws, |_| false, 0).is_err());
}

#[test]
fn first_order_rules_decrease_the_energy() {
    let c = case();
    for rule in [StepRule::Fixed, StepRule::Adaptive] {
        let cfg = SolveConfig { max_iter: 200, step_rule: rule, ..SolveConfig::new(R, H) };
        let res = solve(&cfg, &c.trace, &c.ws, c.seed.clone()).unwrap();
        assert!(res.energy < res.seed_energy, "{rule:?}");
        assert!(res.iterations <= 200);
        assert!(res.energy >= c.solved.energy - 1e-6 * c.solved.energy);
    }
}

#[test]
fn config_validation() {
    let ws = &case().ws;
    assert!(SolveConfig::new(R, 0.5).validate(ws).is_err());
    assert!(SolveConfig { tol_gradient: 0.0, ..SolveConfig::new(R, H) }.validate(ws).is_err());
    assert!(SolveConfig { max_iter: 0, ..SolveConfig::new(R, H) }.validate(ws).is_err());
    assert!(SolveConfig::new(R, H).validate(ws).is_ok());
    assert!("bogus".parse::<StepRule>().is_err());
    assert_eq!("junction".parse::<SeedKind>().unwrap(), SeedKind::JunctionMap);
    // Interface width of the canonical potential: 2 ln 20 / sqrt(18).
    assert!((interface_width(ws) - 2.0 * 20f64.ln() / 18f64.sqrt()).abs() < 1e-9);
}

#[test]
fn summary_serializes_with_camel_case_keys() {
    let c = case();
    let v = serde_json::to_value(c.solved.summary(&SolveConfig::new(R, H))).unwrap();
    for key in ["converged", "iterations", "energy", "residual", "seedEnergy", "stopReason"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["config"]["stepRule"], "lbfgs");
}

#[test]
fn probe_rejects_oversized_bumps() {
    let c = case();
    assert!(local_minimality_probe(&c.solved.field, &c.ws, 10, 20.0, 1).is_err());
}
