//! Single-stage operations shared by the subcommands and the run pipeline.

use crate::config::PotentialKind;
use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use trijunction::connection::{minimize_connection, Profile1D};
use trijunction::construct::{
    anchors_from_arcs, boundary_data, radial_competitor, triple_competitor, two_phase_competitor, CompetitorReport,
    PhaseTrace, Profiles,
};
use trijunction::diagnose::{
    blowdown, diffuse_interface, phase_decomposition, slice_profile, BlowdownTrace, InterfaceReport, PhaseDecomposition,
    SliceProfile, SliceThresholds,
};
use trijunction::field::{energy, Field2D, Grid};
use trijunction::geometry::{appendix_ystar_min, fermat_point, JunctionMap, Triod};
use trijunction::potential::{
    canonical_wellsystem, certify_constants, product_wellsystem, CertificationReport, WellSystem, DEFAULT_DELTA_GRID,
};
use trijunction::solve::{solve, SeedKind, SolveConfig, SolveResult};
use trijunction::vec2::Vec2;

/// Samples per sphere used by certification.
pub const CERTIFY_SAMPLES: usize = 720;

pub fn build_potential(kind: &PotentialKind, scale: f64) -> CliResult<(WellSystem, CertificationReport)> {
    let ws = match kind {
        PotentialKind::Canonical => canonical_wellsystem(scale)?,
        PotentialKind::Custom(w) => product_wellsystem(*w, scale)?,
    };
    let (ws, violations) = certify_constants(&ws, &DEFAULT_DELTA_GRID, CERTIFY_SAMPLES)?;
    let report = ws.report(violations);
    Ok((ws, report))
}

/// Parses `"12"`, `"13"` or `"23"` into zero-based well indices.
pub fn parse_pair(s: &str) -> CliResult<(usize, usize)> {
    match s {
        "12" => Ok((0, 1)),
        "13" => Ok((0, 2)),
        "23" => Ok((1, 2)),
        _ => Err(CliError::Usage(format!("pair must be 12, 13 or 23, got '{s}'"))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectSummary {
    pub pair: String,
    pub sigma: f64,
    #[serde(rename = "decayK")]
    pub decay_amp: f64,
    #[serde(rename = "decayk")]
    pub decay_rate: f64,
    #[serde(rename = "fitResidual")]
    pub fit_residual: f64,
    #[serde(rename = "equipartitionDefect")]
    pub equipartition_defect: f64,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub n: usize,
    pub iterations: usize,
}

pub fn connect_summary(p: &Profile1D) -> ConnectSummary {
    ConnectSummary {
        pair: format!("{}{}", p.pair.0 + 1, p.pair.1 + 1),
        sigma: p.sigma,
        decay_amp: p.decay_amp,
        decay_rate: p.decay_rate,
        fit_residual: p.fit_residual,
        equipartition_defect: p.equipartition_defect,
        half_length: p.half_length,
        n: p.len(),
        iterations: p.iterations,
    }
}

/// Profile as CSV rows `eta,u1,u2`.
pub fn write_profile_csv(p: &Profile1D, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "eta,u1,u2")?;
    for (k, v) in p.values.iter().enumerate() {
        writeln!(w, "{},{},{}", p.eta(k), v.x, v.y)?;
    }
    w.flush()?;
    Ok(())
}

pub fn all_profiles(ws: &WellSystem, l: f64, n: usize) -> CliResult<Profiles> {
    let p12 = minimize_connection(ws, 0, 1, l, n)?;
    let p13 = minimize_connection(ws, 0, 2, l, n)?;
    let p23 = minimize_connection(ws, 1, 2, l, n)?;
    Ok(Profiles::new(p12, p13, p23)?)
}

/// Geometry shared by the 2D stages.
pub struct Setup {
    pub triod: Triod,
    pub trace: PhaseTrace,
    pub grid: Grid,
}

pub fn setup(ws: &WellSystem, profiles: &Profiles, radius: f64, h: f64, arcs: [f64; 3], start_deg: f64, width: f64) -> CliResult<Setup> {
    let triod = anchors_from_arcs(radius, arcs, start_deg.to_radians())?;
    let trace = boundary_data(&triod, radius, profiles, width, ws)?;
    let grid = Grid::new(radius, h)?;
    Ok(Setup { triod, trace, grid })
}

pub fn fermat_json(points: [Vec2; 3]) -> CliResult<Value> {
    let fp = fermat_point(points[0], points[1], points[2])?;
    let t = Triod::new(points[0], points[1], points[2])?;
    Ok(json!({
        "D": fp.point,
        "lengths": t.lengths(),
        "totalLength": t.total_length(),
        "anglesDeg": t.angles_at_d().map(f64::to_degrees),
        "vertex": fp.vertex,
        "degenerate": fp.degenerate,
    }))
}

/// `params = [yA, yB, yC, xB, xC]`.
pub fn ystar_json(params: &[f64]) -> CliResult<Value> {
    let [ya, yb, yc, xb, xc] = <[f64; 5]>::try_from(params)
        .map_err(|_| CliError::Usage("ystar needs five values yA,yB,yC,xB,xC".into()))?;
    let m = appendix_ystar_min(ya, yb, yc, xb, xc)?;
    Ok(json!({
        "ystar": m.ystar,
        "fmin": m.fmin,
        "stationarityResidual": m.stationarity_residual,
        "degenerate": m.degenerate,
    }))
}

pub fn build_competitor(kind: &str, ws: &WellSystem, profiles: &Profiles, s: &Setup, alpha: f64) -> CliResult<CompetitorReport> {
    Ok(match kind {
        "triple" => triple_competitor(&s.triod, s.grid, ws, profiles, alpha, &s.trace, None)?,
        "radial" => radial_competitor(&s.trace, s.grid, ws, 0, None)?,
        "twophase" => two_phase_competitor(s.grid, 0.0, ws, profiles.pair(0, 1), None)?,
        _ => return Err(CliError::Usage(format!("unknown competitor kind '{kind}'"))),
    })
}

pub fn seed_field(kind: SeedKind, ws: &WellSystem, profiles: &Profiles, s: &Setup, alpha: f64) -> CliResult<Field2D> {
    match kind {
        SeedKind::TripleCompetitor => Ok(build_competitor("triple", ws, profiles, s, alpha)?.field),
        SeedKind::JunctionMap => {
            let jm = JunctionMap::new(s.triod, ws.wells);
            Ok(Field2D::from_fn(s.grid, |z| jm.eval(z), &s.trace))
        }
        SeedKind::Custom => Err(CliError::Usage("custom seeds are only available through the library".into())),
    }
}

pub fn run_solve(cfg: &SolveConfig, ws: &WellSystem, s: &Setup, seed: Field2D) -> CliResult<SolveResult> {
    Ok(solve(cfg, &s.trace, ws, seed)?)
}

pub fn write_field(f: &Field2D, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> CliResult<Field2D> {
    Ok(Field2D::read_csv(BufReader::new(File::open(path)?))?)
}

pub fn write_log(res: &SolveResult, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in &res.log {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(v: &T, path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Triod read off a field's own boundary circle.
pub fn field_triod(f: &Field2D, ws: &WellSystem, delta: f64) -> CliResult<(Triod, PhaseDecomposition)> {
    let pd = phase_decomposition(f, ws, f.radius(), delta)?;
    let [a, b, c] = pd.midpoints;
    Ok((Triod::new(a, b, c)?, pd))
}

pub fn diagnose_phases(f: &Field2D, ws: &WellSystem, delta: f64) -> CliResult<PhaseDecomposition> {
    Ok(phase_decomposition(f, ws, f.radius(), delta)?)
}

pub fn diagnose_interface(f: &Field2D, ws: &WellSystem, delta: f64, gamma: f64) -> CliResult<InterfaceReport> {
    let (triod, _) = field_triod(f, ws, delta)?;
    Ok(diffuse_interface(f, ws, gamma, &triod, None)?)
}

pub fn write_points_csv(points: &[Vec2], path: &Path) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y")?;
    for p in points {
        writeln!(w, "{},{}", p.x, p.y)?;
    }
    w.flush()?;
    Ok(())
}

pub fn diagnose_slices(f: &Field2D, ws: &WellSystem, delta: f64, th: SliceThresholds) -> CliResult<(SliceProfile, Triod)> {
    let (triod, pd) = field_triod(f, ws, delta)?;
    Ok((slice_profile(f, ws, &triod, pd.d2, th)?, triod))
}

pub fn diagnose_blowdown(f: &Field2D, ws: &WellSystem, ladder: &[f64], delta: f64, gamma: f64) -> CliResult<BlowdownTrace> {
    Ok(blowdown(f, ws, ladder, delta, gamma)?)
}

/// Energy of a field with its split into gradient and potential parts.
pub fn energy_json(f: &Field2D, ws: &WellSystem) -> Value {
    serde_json::to_value(energy(f, ws, None)).unwrap_or(Value::Null)
}
