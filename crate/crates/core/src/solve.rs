//! Minimization of the discrete energy with frozen Dirichlet band, plus the
//! local-minimality and maximum-principle probes.

use crate::error::{Error, Result};
use crate::field::{energy_and_gradient, Field2D, Trace};
use crate::par;
use crate::potential::WellSystem;
use crate::vec2::{as_flat, as_flat_mut, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Gradient descent at the explicit stability step.
    Fixed,
    /// Barzilai-Borwein steps, halved until the energy decreases.
    Adaptive,
    /// Limited-memory BFGS with backtracking (monotone) line search.
    Lbfgs,
}

impl std::str::FromStr for StepRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(StepRule::Fixed),
            "adaptive" => Ok(StepRule::Adaptive),
            "lbfgs" => Ok(StepRule::Lbfgs),
            _ => Err(Error::InvalidParameter(format!("unknown step rule '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    TripleCompetitor,
    JunctionMap,
    Custom,
}

impl std::str::FromStr for SeedKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triple" | "triple_competitor" => Ok(SeedKind::TripleCompetitor),
            "junction" | "junction_map" => Ok(SeedKind::JunctionMap),
            "custom" => Ok(SeedKind::Custom),
            _ => Err(Error::InvalidParameter(format!("unknown seed kind '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveConfig {
    #[serde(rename = "R")]
    pub radius: f64,
    pub h: f64,
    #[serde(rename = "maxIter")]
    pub max_iter: usize,
    #[serde(rename = "stepRule")]
    pub step_rule: StepRule,
    /// Bound on `max |−Δ_h u + W_u(u)|` over free nodes.
    #[serde(rename = "tolGradient")]
    pub tol_gradient: f64,
    /// Stop (unconverged) when the relative energy decrease over the last 50
    /// iterations falls below this.
    #[serde(rename = "tolEnergyRate")]
    pub tol_energy_rate: f64,
    #[serde(rename = "seedKind")]
    pub seed_kind: SeedKind,
    /// Stored correction pairs for the quasi-Newton rule.
    pub memory: usize,
}

impl SolveConfig {
    pub fn new(radius: f64, h: f64) -> SolveConfig {
        SolveConfig {
            radius,
            h,
            max_iter: 20_000,
            step_rule: StepRule::Lbfgs,
            tol_gradient: 1e-5,
            tol_energy_rate: 1e-15,
            seed_kind: SeedKind::TripleCompetitor,
            memory: 8,
        }
    }

    /// Checks the config; `h` may not exceed a quarter of the interface width
    /// estimate `2 ln(20) / sqrt(c1)` (the span over which both exponential
    /// tails fall to 5%).
    pub fn validate(&self, ws: &WellSystem) -> Result<()> {
        if !(self.tol_gradient > 0.0) {
            return Err(Error::InvalidParameter("tolGradient must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("maxIter must be positive".into()));
        }
        let width = interface_width(ws);
        if !(self.h > 0.0) || self.h > 0.25 * width {
            return Err(Error::InvalidParameter(format!(
                "h = {} must be positive and at most a quarter of the interface width {width}",
                self.h
            )));
        }
        Ok(())
    }
}

/// Interface width estimate `2 ln(20) / sqrt(c1)`.
pub fn interface_width(ws: &WellSystem) -> f64 {
    let c1 = if ws.constants.c1 > 0.0 { ws.constants.c1 } else { ws.hess(ws.wells[0]).eigenvalues().0 };
    2.0 * 20f64.ln() / c1.sqrt()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    pub energy: f64,
    /// Max Euler-Lagrange residual over free nodes.
    #[serde(rename = "gradNorm")]
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub field: Field2D,
    pub log: Vec<LogEntry>,
    pub converged: bool,
    pub iterations: usize,
    pub energy: f64,
    pub residual: f64,
    pub seed_energy: f64,
    /// Why the iteration ended.
    pub stop_reason: String,
}

/// JSON summary of a solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub energy: f64,
    pub residual: f64,
    #[serde(rename = "seedEnergy")]
    pub seed_energy: f64,
    #[serde(rename = "stopReason")]
    pub stop_reason: String,
    pub config: SolveConfig,
}

impl SolveResult {
    pub fn summary(&self, cfg: &SolveConfig) -> SolveSummary {
        SolveSummary {
            converged: self.converged,
            iterations: self.iterations,
            energy: self.energy,
            residual: self.residual,
            seed_energy: self.seed_energy,
            stop_reason: self.stop_reason.clone(),
            config: cfg.clone(),
        }
    }
}

/// Minimizes the discrete energy starting from `seed`, with the band frozen
/// to `trace`.
pub fn solve(cfg: &SolveConfig, trace: &dyn Trace, ws: &WellSystem, seed: Field2D) -> Result<SolveResult> {
    cfg.validate(ws)?;
    if (seed.grid.radius - cfg.radius).abs() > 1e-12 * cfg.radius || (seed.grid.h - cfg.h).abs() > 1e-15 {
        return Err(Error::InvalidParameter("seed grid does not match the config".into()));
    }
    let mut f = seed;
    f.impose_trace(trace);
    let h2 = cfg.h * cfg.h;
    let amp_limit = ws.constants.m.max(ws.well_radius()) + 1.0;
    let hb = ws.hess_bound(amp_limit);
    // Explicit stability step in gradient units.
    let gd_step = 1.0 / (4.0 + h2 * hb);
    let nflat = 2 * f.grid.len();

    let mut g = vec![Vec2::ZERO; f.grid.len()];
    let mut e = energy_and_gradient(&f, ws, Some(&mut g));
    let seed_energy = e;
    let exact_residual = |g: &[Vec2]| g.iter().map(|v| v.norm()).fold(0.0, f64::max) / h2;
    let mut res = exact_residual(&g);
    let mut log = vec![LogEntry { iter: 0, energy: e, grad_norm: res, step: 0.0 }];

    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut rho_hist: VecDeque<f64> = VecDeque::new();
    let mut dir = vec![0.0; nflat];
    let mut x_old = vec![0.0; nflat];
    let mut g_old = vec![0.0; nflat];
    let mut trial_g = vec![Vec2::ZERO; f.grid.len()];
    let mut gf = vec![0.0; nflat];
    // Retired curvature pairs, reused to avoid reallocating each iteration.
    let mut spare: Vec<Vec<f64>> = Vec::new();
    let mut bb_step = gd_step;
    let mut stop_reason = String::from("iteration cap reached");
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        if res <= cfg.tol_gradient {
            converged = true;
            stop_reason = "gradient tolerance met".into();
            break;
        }
        iterations = it;
        gf.copy_from_slice(as_flat(&g));
        // Search direction.
        let mut initial = 1.0;
        match cfg.step_rule {
            StepRule::Fixed => {
                dir.copy_from_slice(&gf);
                par::scale(-1.0, &mut dir);
                initial = gd_step;
            }
            StepRule::Adaptive => {
                dir.copy_from_slice(&gf);
                par::scale(-1.0, &mut dir);
                initial = bb_step;
            }
            StepRule::Lbfgs => {
                dir.copy_from_slice(&gf);
                let m = s_hist.len();
                let mut alphas = vec![0.0; m];
                for k in (0..m).rev() {
                    let a = rho_hist[k] * par::dot(&s_hist[k], &dir);
                    alphas[k] = a;
                    par::axpy(-a, &y_hist[k], &mut dir);
                }
                if m > 0 {
                    let yy = par::dot(&y_hist[m - 1], &y_hist[m - 1]);
                    par::scale(1.0 / (rho_hist[m - 1] * yy), &mut dir);
                } else {
                    par::scale(gd_step, &mut dir);
                }
                for k in 0..m {
                    let b = rho_hist[k] * par::dot(&y_hist[k], &dir);
                    par::axpy(alphas[k] - b, &s_hist[k], &mut dir);
                }
                par::scale(-1.0, &mut dir);
                if par::dot(&dir, &gf) >= 0.0 {
                    s_hist.clear();
                    y_hist.clear();
                    rho_hist.clear();
                    dir.copy_from_slice(&gf);
                    par::scale(-gd_step, &mut dir);
                }
            }
        }
        let slope = par::dot(&dir, &gf);
        x_old.copy_from_slice(as_flat(&f.values));
        g_old.copy_from_slice(&gf);

        // Monotone backtracking.
        let mut t = initial;
        let mut accepted = None;
        for _ in 0..60 {
            {
                let xv = as_flat_mut(&mut f.values);
                xv.copy_from_slice(&x_old);
                par::axpy(t, &dir, xv);
            }
            let et = energy_and_gradient(&f, ws, Some(&mut trial_g));
            if et.is_finite() && et < e && et <= e + 1e-4 * t * slope {
                accepted = Some(et);
                break;
            }
            if et.is_finite() && et < e && cfg.step_rule == StepRule::Fixed {
                accepted = Some(et);
                break;
            }
            t *= 0.5;
        }
        let Some(e_new) = accepted else {
            as_flat_mut(&mut f.values).copy_from_slice(&x_old);
            stop_reason = "line search could not decrease the energy".into();
            break;
        };
        std::mem::swap(&mut g, &mut trial_g);
        let amp = f.max_amplitude();
        if amp > amp_limit {
            return Err(Error::AmplitudeViolation(format!(
                "|u| = {amp} exceeds M + 1 = {amp_limit} at iteration {it}"
            )));
        }
        // Curvature pair.
        let mut s = spare.pop().unwrap_or_else(|| vec![0.0; nflat]);
        s.copy_from_slice(as_flat(&f.values));
        par::axpy(-1.0, &x_old, &mut s);
        let mut y = spare.pop().unwrap_or_else(|| vec![0.0; nflat]);
        y.copy_from_slice(as_flat(&g));
        par::axpy(-1.0, &g_old, &mut y);
        let sy = par::dot(&s, &y);
        match cfg.step_rule {
            StepRule::Lbfgs => {
                if sy > 1e-14 * par::dot(&y, &y).sqrt() * par::dot(&s, &s).sqrt() {
                    if s_hist.len() == cfg.memory.max(1) {
                        spare.extend(s_hist.pop_front());
                        spare.extend(y_hist.pop_front());
                        rho_hist.pop_front();
                    }
                    s_hist.push_back(s);
                    y_hist.push_back(y);
                    rho_hist.push_back(1.0 / sy);
                } else {
                    spare.push(s);
                    spare.push(y);
                }
            }
            StepRule::Fixed | StepRule::Adaptive => {
                if cfg.step_rule == StepRule::Adaptive && sy > 0.0 {
                    bb_step = par::dot(&s, &s) / sy;
                }
                spare.push(s);
                spare.push(y);
            }
        }
        e = e_new;
        res = exact_residual(&g);
        log.push(LogEntry { iter: it, energy: e, grad_norm: res, step: t });
        if log.len() > 50 {
            let past = log[log.len() - 51].energy;
            if (past - e) <= cfg.tol_energy_rate * e.abs() {
                stop_reason = "energy rate below tolerance".into();
                break;
            }
        }
    }
    if !converged && res <= cfg.tol_gradient {
        converged = true;
        stop_reason = "gradient tolerance met".into();
    }
    let residual = exact_residual(&g);
    Ok(SolveResult { field: f, log, converged, iterations, energy: e, residual, seed_energy, stop_reason })
}

/// C-infinity bump `exp(1 − 1/(1 − s²))` on `s < 1`.
fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Energy of the index box `[i0, i1] × [j0, j1]`: its active nodes and the
/// edges with both ends inside it.
fn box_energy(f: &Field2D, ws: &WellSystem, i0: usize, i1: usize, j0: usize, j1: usize, delta: Option<&dyn Fn(usize) -> Vec2>) -> f64 {
    let g = &f.grid;
    let h2 = g.h * g.h;
    let val = |k: usize| match delta {
        Some(d) => f.values[k] + d(k),
        None => f.values[k],
    };
    let mut e = 0.0;
    for i in i0..=i1 {
        for j in j0..=j1 {
            let k = g.idx(i, j);
            if !f.active[k] {
                continue;
            }
            let u = val(k);
            e += h2 * ws.eval(u);
            if i < i1 && f.active[k + g.n] {
                e += 0.5 * (val(k + g.n) - u).norm2();
            }
            if j < j1 && f.active[k + 1] {
                e += 0.5 * (val(k + 1) - u).norm2();
            }
        }
    }
    e
}

/// `E(f + v) − E(f)` for a perturbation supported in the disk `|z − c| < rho`
/// (which must avoid the Dirichlet band).
pub fn perturbation_margin<V>(f: &Field2D, ws: &WellSystem, c: Vec2, rho: f64, v: V) -> f64
where
    V: Fn(Vec2, usize) -> Vec2,
{
    let g = &f.grid;
    let lo = |x: f64| (((x + g.radius) / g.h).floor() as isize - 1).max(0) as usize;
    let hi = |x: f64| ((((x + g.radius) / g.h).ceil() as isize + 1) as usize).min(g.n - 1);
    let (i0, i1, j0, j1) = (lo(c.x - rho), hi(c.x + rho), lo(c.y - rho), hi(c.y + rho));
    let d = |k: usize| {
        if f.active[k] && !f.dirichlet[k] {
            v(g.pos(k), k)
        } else {
            Vec2::ZERO
        }
    };
    box_energy(f, ws, i0, i1, j0, j1, Some(&d)) - box_energy(f, ws, i0, i1, j0, j1, None)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub trials: usize,
    #[serde(rename = "minMargin")]
    pub min_margin: f64,
    pub margins: Vec<f64>,
    pub radius: f64,
    /// Amplitude range of the random bumps.
    pub amplitudes: (f64, f64),
    pub passed: bool,
    pub tolerance: f64,
}

/// Amplitude range of the probe bumps.
pub const PROBE_AMPLITUDES: (f64, f64) = (0.02, 0.2);

/// Random smooth bumps `v = a φ(|z − c| / radius)` with `|a|` in
/// [`PROBE_AMPLITUDES`]; reports the smallest `E(f + v) − E(f)`.
pub fn local_minimality_probe(f: &Field2D, ws: &WellSystem, trials: usize, radius: f64, seed: u64) -> Result<ProbeReport> {
    let room = f.grid.band_radius() - radius - f.grid.h;
    if !(radius > 0.0) || room <= 0.0 {
        return Err(Error::InvalidParameter(format!("bump radius {radius} does not fit in the disk")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = Vec::with_capacity(trials);
    for _ in 0..trials {
        let c = Vec2::polar(room * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>());
        let amp = rng.gen_range(PROBE_AMPLITUDES.0..=PROBE_AMPLITUDES.1);
        let a = Vec2::polar(amp, TAU * rng.gen::<f64>());
        margins.push(perturbation_margin(f, ws, c, radius, |z, _| a * bump(z.dist(c) / radius)));
    }
    let tol = 1e-8;
    let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_margin = if trials == 0 { 0.0 } else { min_margin };
    Ok(ProbeReport {
        trials,
        min_margin,
        margins,
        radius,
        amplitudes: PROBE_AMPLITUDES,
        passed: min_margin >= -tol,
        tolerance: tol,
    })
}

/// Margin of the perturbation `−eps · g · φ` built from the energy gradient,
/// localized by a bump of the given radius around `c`. Negative at any point
/// where the gradient is not negligible.
pub fn descent_margin(f: &Field2D, ws: &WellSystem, c: Vec2, radius: f64, eps: f64) -> f64 {
    let g = crate::field::energy_gradient(f, ws);
    perturbation_margin(f, ws, c, radius, |z, k| g[k] * (-eps * bump(z.dist(c) / radius)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub well: usize,
    #[serde(rename = "rBoundary")]
    pub r_bd: f64,
    #[serde(rename = "rInterior")]
    pub r_in: f64,
    pub lipschitz: f64,
    pub slack: f64,
    pub passed: bool,
    #[serde(rename = "interiorNodes")]
    pub interior_nodes: usize,
    #[serde(rename = "boundaryNodes")]
    pub boundary_nodes: usize,
}

/// Compares `max |u − a_i|` inside a node set against its discrete boundary.
pub fn maximum_principle_check<P>(f: &Field2D, ws: &WellSystem, subdomain: P, i: usize) -> Result<MaxPrincipleReport>
where
    P: Fn(Vec2) -> bool,
{
    let g = &f.grid;
    let n = g.n;
    let inside: Vec<bool> = (0..g.len()).map(|k| f.active[k] && subdomain(g.pos(k))).collect();
    let a = ws.wells[i];
    let (mut r_bd, mut r_in, mut lip) = (0.0f64, 0.0f64, 0.0f64);
    let (mut nb, mut ni) = (0, 0);
    for ii in 0..n {
        for jj in 0..n {
            let k = g.idx(ii, jj);
            if !inside[k] {
                continue;
            }
            let nbrs = [
                (ii > 0).then(|| k - n),
                (ii + 1 < n).then(|| k + n),
                (jj > 0).then(|| k - 1),
                (jj + 1 < n).then(|| k + 1),
            ];
            let mut boundary = false;
            for q in nbrs {
                match q {
                    Some(q) if inside[q] => {
                        lip = lip.max((f.values[q] - f.values[k]).norm() / g.h);
                    }
                    _ => boundary = true,
                }
            }
            let d = f.values[k].dist(a);
            if boundary {
                r_bd = r_bd.max(d);
                nb += 1;
            } else {
                r_in = r_in.max(d);
                ni += 1;
            }
        }
    }
    if ni == 0 {
        return Err(Error::InvalidParameter("subdomain has no interior nodes".into()));
    }
    let slack = 2.0 * g.h * lip;
    Ok(MaxPrincipleReport {
        well: i,
        r_bd,
        r_in,
        lipschitz: lip,
        slack,
        passed: r_in <= r_bd + slack,
        interior_nodes: ni,
        boundary_nodes: nb,
    })
}
