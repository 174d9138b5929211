//! One-dimensional heteroclinic connections and their action.
//!
//! The discrete action of a sampled path is the exact action of the piecewise
//! linear interpolant: kinetic term `|dU|^2 / (2 d_eta)` per segment plus the
//! potential integrated along the segment with 4-point Gauss-Legendre, which is
//! exact for polynomial potentials up to degree 7 along lines (the canonical
//! potential is degree 6). Consequently the discrete minimum is an upper bound
//! for sigma and decreases under nested refinement.

use crate::error::{Error, Result};
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

const GL_X: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GL_W: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// Action of the straight segment `p -> q` traversed in time `dt`.
#[inline]
pub fn segment_action(ws: &WellSystem, p: Vec2, q: Vec2, dt: f64) -> f64 {
    let d = q - p;
    let mut pot = 0.0;
    for k in 0..4 {
        pot += GL_W[k] * ws.eval(p + d * GL_X[k]);
    }
    0.5 * d.norm2() / dt + dt * pot
}

/// Action of a path sampled at increasing times `etas`.
pub fn path_action(ws: &WellSystem, etas: &[f64], values: &[Vec2]) -> f64 {
    etas.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| segment_action(ws, v[0], v[1], t[1] - t[0]))
        .sum()
}

/// Sampled path with arbitrary increasing times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledPath {
    pub etas: Vec<f64>,
    pub values: Vec<Vec2>,
}

/// Minimizing connection `U_ij` sampled on a uniform grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Profile1D {
    pub pair: (usize, usize),
    pub wells: (Vec2, Vec2),
    /// First sample time; samples sit at `eta0 + k * deta`.
    pub eta0: f64,
    pub deta: f64,
    pub values: Vec<Vec2>,
    pub sigma: f64,
    #[serde(rename = "decayK")]
    pub decay_amp: f64,
    #[serde(rename = "decayk")]
    pub decay_rate: f64,
    pub fit_residual: f64,
    pub half_length: f64,
    pub equipartition_defect: f64,
    pub iterations: usize,
    pub grad_max: f64,
}

impl Profile1D {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.eta0 + self.deta * k as f64
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.eta(k)).collect()
    }

    /// Linear interpolation, extended by the end wells outside the sampled range.
    pub fn value_at(&self, eta: f64) -> Vec2 {
        let s = (eta - self.eta0) / self.deta;
        if s <= 0.0 {
            return self.wells.0;
        }
        let n = self.len();
        if s >= (n - 1) as f64 {
            return self.wells.1;
        }
        let k = s.floor() as usize;
        let t = s - k as f64;
        self.values[k].lerp(self.values[k + 1], t)
    }

    /// Largest sampled speed `|U'|`.
    pub fn max_speed(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).norm() / self.deta)
            .fold(0.0, f64::max)
    }

    /// Time interval outside which `U` is within `delta` of its end wells.
    pub fn core_interval(&self, delta: f64) -> (f64, f64) {
        let (a, b) = self.wells;
        let first = self.values.iter().position(|v| v.dist(a) > delta).unwrap_or(0);
        let last = self
            .values
            .iter()
            .rposition(|v| v.dist(b) > delta)
            .unwrap_or(self.len() - 1);
        (self.eta(first), self.eta(last))
    }

    /// Recomputes the action of the stored samples.
    pub fn action(&self, ws: &WellSystem) -> f64 {
        path_action(ws, &self.etas(), &self.values)
    }

    /// Restriction to the part between the first exit from the `delta`-ball of
    /// the start well and the last entry into the `delta`-ball of the end well;
    /// endpoints lie exactly on the spheres.
    pub fn truncate(&self, delta: f64) -> Result<SampledPath> {
        let (a, b) = self.wells;
        let n = self.len();
        let start = (0..n - 1)
            .find(|&k| self.values[k].dist(a) <= delta && self.values[k + 1].dist(a) > delta)
            .ok_or_else(|| Error::InvalidPath(format!("profile never leaves the {delta}-ball")))?;
        let end = (0..n - 1)
            .rev()
            .find(|&k| self.values[k].dist(b) > delta && self.values[k + 1].dist(b) <= delta)
            .ok_or_else(|| Error::InvalidPath(format!("profile never enters the {delta}-ball")))?;
        if end < start {
            return Err(Error::InvalidPath("delta-balls overlap along the profile".into()));
        }
        let cross = |k: usize, c: Vec2| {
            let t = sphere_crossing(self.values[k], self.values[k + 1], c, delta);
            (self.eta(k) + t * self.deta, self.values[k].lerp(self.values[k + 1], t))
        };
        let (e0, v0) = cross(start, a);
        let (e1, v1) = cross(end, b);
        let mut etas = vec![e0];
        let mut values = vec![v0];
        for k in start + 1..=end {
            etas.push(self.eta(k));
            values.push(self.values[k]);
        }
        etas.push(e1);
        values.push(v1);
        Ok(SampledPath { etas, values })
    }
}

/// Parameter `t` in [0, 1] where the segment `p + t (q - p)` meets `|x - c| = r`.
fn sphere_crossing(p: Vec2, q: Vec2, c: Vec2, r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let f = |t: f64| p.lerp(q, t).dist(c) - r;
    let flo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Options for [`minimize_connection_with`].
#[derive(Clone, Copy, Debug)]
pub struct ConnectionOptions {
    pub tol_grad: f64,
    pub max_iter: usize,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        ConnectionOptions { tol_grad: 1e-10, max_iter: 200_000 }
    }
}

/// Minimizes the discrete action between wells `i` and `j` on `[-L, L]`.
pub fn minimize_connection(ws: &WellSystem, i: usize, j: usize, l: f64, n: usize) -> Result<Profile1D> {
    minimize_connection_with(ws, i, j, l, n, ConnectionOptions::default())
}

pub fn minimize_connection_with(
    ws: &WellSystem,
    i: usize,
    j: usize,
    l: f64,
    n: usize,
    opts: ConnectionOptions,
) -> Result<Profile1D> {
    if i > 2 || j > 2 || i == j {
        return Err(Error::InvalidParameter(format!("invalid well pair ({i}, {j})")));
    }
    if n < 200 {
        return Err(Error::InvalidParameter(format!("need at least 200 samples, got {n}")));
    }
    let c1 = if ws.constants.c1 > 0.0 {
        ws.constants.c1
    } else {
        ws.hess(ws.wells[i]).eigenvalues().0
    };
    let width = 1.0 / c1.sqrt();
    if l < 10.0 * width {
        return Err(Error::InvalidParameter(format!(
            "L = {l} is shorter than 10 interface widths ({})",
            10.0 * width
        )));
    }
    let (a, b) = (ws.wells[i], ws.wells[j]);
    let deta = 2.0 * l / (n - 1) as f64;
    let k0 = c1.sqrt();
    // Straight segment a -> b with a tanh parametrization.
    let mut u: Vec<Vec2> = (0..n)
        .map(|k| {
            let eta = -l + deta * k as f64;
            a.lerp(b, 0.5 * (1.0 + (0.5 * k0 * eta).tanh()))
        })
        .collect();
    u[0] = a;
    u[n - 1] = b;

    let (iterations, grad_max) = bb_descent(ws, &mut u, deta, opts)?;

    let mut prof = Profile1D {
        pair: (i, j),
        wells: (a, b),
        eta0: -l,
        deta,
        values: u,
        sigma: 0.0,
        decay_amp: 0.0,
        decay_rate: 0.0,
        fit_residual: 0.0,
        half_length: l,
        equipartition_defect: 0.0,
        iterations,
        grad_max,
    };
    prof.sigma = prof.action(ws);
    prof.eta0 -= center_time(&prof);
    prof.equipartition_defect = equipartition_defect(ws, &prof, 0.05);
    let fit = fit_decay(&prof);
    prof.decay_amp = fit.amplitude;
    prof.decay_rate = fit.rate;
    prof.fit_residual = fit.residual;
    Ok(prof)
}

/// Action gradient with respect to the interior samples (ends are clamped).
fn action_gradient(ws: &WellSystem, u: &[Vec2], deta: f64, g: &mut [Vec2]) -> f64 {
    let n = u.len();
    g.iter_mut().for_each(|v| *v = Vec2::ZERO);
    let mut total = 0.0;
    for k in 0..n - 1 {
        let d = u[k + 1] - u[k];
        let mut pot = 0.0;
        let mut g0 = d / -deta;
        let mut g1 = d / deta;
        for q in 0..4 {
            let (w, gw) = ws.eval_grad(u[k] + d * GL_X[q]);
            pot += GL_W[q] * w;
            g0 += gw * (deta * GL_W[q] * (1.0 - GL_X[q]));
            g1 += gw * (deta * GL_W[q] * GL_X[q]);
        }
        total += 0.5 * d.norm2() / deta + deta * pot;
        g[k] += g0;
        g[k + 1] += g1;
    }
    g[0] = Vec2::ZERO;
    g[n - 1] = Vec2::ZERO;
    total
}

fn action_only(ws: &WellSystem, u: &[Vec2], deta: f64) -> f64 {
    u.windows(2).map(|w| segment_action(ws, w[0], w[1], deta)).sum()
}

/// Nonmonotone Barzilai-Borwein descent with a max-of-recent-values Armijo test.
fn bb_descent(ws: &WellSystem, u: &mut [Vec2], deta: f64, opts: ConnectionOptions) -> Result<(usize, f64)> {
    let n = u.len();
    let mut g = vec![Vec2::ZERO; n];
    let mut g_new = vec![Vec2::ZERO; n];
    let mut trial = u.to_vec();
    let mut f = action_gradient(ws, u, deta, &mut g);
    let mut recent: VecDeque<f64> = VecDeque::from(vec![f]);
    let mut alpha = 0.25 * deta;
    let gmax = |g: &[Vec2]| g.iter().fold(0.0f64, |m, v| m.max(v.x.abs()).max(v.y.abs()));
    for it in 0..opts.max_iter {
        let gm = gmax(&g);
        if gm < opts.tol_grad {
            return Ok((it, gm));
        }
        let g2: f64 = g.iter().map(|v| v.norm2()).sum();
        let f_ref = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut step = alpha;
        let f_new = loop {
            for k in 0..n {
                trial[k] = u[k] - g[k] * step;
            }
            let ft = action_only(ws, &trial, deta);
            if ft <= f_ref - 1e-4 * step * g2 + 1e-15 * f_ref.abs() {
                break ft;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(Error::NonConverged(format!(
                    "line search failed at iteration {it}, max gradient {gm:e}"
                )));
            }
        };
        let f_new = {
            let fg = action_gradient(ws, &trial, deta, &mut g_new);
            debug_assert!((fg - f_new).abs() <= 1e-9 * fg.abs().max(1.0));
            fg
        };
        let mut sy = 0.0;
        let mut ss = 0.0;
        for k in 0..n {
            let s = trial[k] - u[k];
            let y = g_new[k] - g[k];
            sy += s.dot(y);
            ss += s.norm2();
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e6) } else { 0.25 * deta };
        u.copy_from_slice(&trial);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        recent.push_back(f);
        if recent.len() > 10 {
            recent.pop_front();
        }
    }
    Err(Error::NonConverged(format!(
        "iteration cap {} reached, max gradient {:e}, action {f}",
        opts.max_iter,
        gmax(&g)
    )))
}

/// Time at which `|U - a| = |U - b|`, by linear interpolation.
fn center_time(p: &Profile1D) -> f64 {
    let (a, b) = p.wells;
    let s = |v: Vec2| v.dist(a) - v.dist(b);
    for k in 0..p.len() - 1 {
        let (s0, s1) = (s(p.values[k]), s(p.values[k + 1]));
        if s0 < 0.0 && s1 >= 0.0 {
            return p.eta(k) + p.deta * (-s0 / (s1 - s0));
        }
    }
    0.0
}

/// Max of `|½|U'|² − W(U)|` with central differences, skipping a fraction
/// `trim` of the samples at each end.
pub fn equipartition_defect(ws: &WellSystem, p: &Profile1D, trim: f64) -> f64 {
    let n = p.len();
    let skip = ((n as f64) * trim).ceil() as usize;
    let mut m: f64 = 0.0;
    for k in skip.max(1)..n - skip.max(1) {
        let du = (p.values[k + 1] - p.values[k - 1]) / (2.0 * p.deta);
        m = m.max((0.5 * du.norm2() - ws.eval(p.values[k])).abs());
    }
    m
}

/// Exponential tail fit `|U - b| ≈ K e^{-k eta}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// Smallest K with `|U - b| <= K e^{-k eta}` over the fitted range.
    pub amplitude: f64,
    pub rate: f64,
    /// RMS relative deviation from the least-squares exponential.
    pub residual: f64,
    pub samples: usize,
    pub eta_range: (f64, f64),
}

/// Tail band used by [`fit_decay`]: the linearized regime above the
/// convergence noise of the descent.
pub const DECAY_FIT_BAND: (f64, f64) = (1e-7, 1e-2);

/// Least-squares fit of `log|U - b|` against `eta` past the center.
pub fn fit_decay(p: &Profile1D) -> DecayFit {
    let b = p.wells.1;
    let pts: Vec<(f64, f64)> = (0..p.len())
        .filter(|&k| p.eta(k) > 0.0)
        .filter_map(|k| {
            let d = p.values[k].dist(b);
            (d >= DECAY_FIT_BAND.0 && d <= DECAY_FIT_BAND.1).then(|| (p.eta(k), d))
        })
        .collect();
    fit_exponential(&pts)
}

/// Fits `d ≈ K e^{-k x}` to `(x, d)` pairs with `d > 0`.
pub fn fit_exponential(pts: &[(f64, f64)]) -> DecayFit {
    let m = pts.len();
    if m < 3 {
        return DecayFit { amplitude: f64::NAN, rate: f64::NAN, residual: f64::INFINITY, samples: m, eta_range: (0.0, 0.0) };
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rate = -slope;
    let residual = (pts
        .iter()
        .map(|&(x, d)| ((intercept + slope * x).exp() / d - 1.0).powi(2))
        .sum::<f64>()
        / mf)
        .sqrt();
    let amplitude = pts
        .iter()
        .map(|&(x, d)| d * (rate * x).exp())
        .fold(0.0, f64::max);
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    DecayFit { amplitude, rate, residual, samples: m, eta_range: (lo, hi) }
}

/// Discrete `J` functional of a path whose ends sit on the `delta`-spheres of
/// wells `i` and `j` respectively.
pub fn j_energy(ws: &WellSystem, path: &SampledPath, i: usize, j: usize) -> Result<f64> {
    let n = path.values.len();
    if n < 2 || path.etas.len() != n {
        return Err(Error::InvalidPath("path needs at least two samples".into()));
    }
    if path.etas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidPath("times must increase".into()));
    }
    let d0 = path.values[0].dist(ws.wells[i]);
    let d1 = path.values[n - 1].dist(ws.wells[j]);
    if (d0 - d1).abs() > 1e-9 * d0.max(d1).max(1e-12) {
        return Err(Error::InvalidPath(format!("endpoint distances differ: {d0} vs {d1}")));
    }
    if ws.constants.certified && d0 >= ws.constants.delta_w {
        return Err(Error::InvalidPath(format!("delta = {d0} is not below deltaW = {}", ws.constants.delta_w)));
    }
    Ok(path_action(ws, &path.etas, &path.values))
}

/// Options for the Agmon-metric geodesic oracle.
#[derive(Clone, Copy, Debug)]
pub struct GeodesicOptions {
    /// Grid spacing in the target plane.
    pub h: f64,
    /// Stencil radius in grid steps (all primitive lattice vectors up to it).
    pub stencil: i32,
    /// Padding of the grid box beyond the well radius.
    pub margin: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions { h: 0.005, stencil: 10, margin: 0.4 }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Length of the shortest grid path between wells `i` and `j` in the metric
/// `sqrt(2 W) |du|`, by Dijkstra over a many-direction lattice stencil.
pub fn geodesic_sigma(ws: &WellSystem, i: usize, j: usize, opts: GeodesicOptions) -> f64 {
    let ext = ws.well_radius() + opts.margin;
    let half = (ext / opts.h).ceil() as i32;
    let side = (2 * half + 1) as usize;
    let node = |ix: i32, iy: i32| Vec2::new(ix as f64 * opts.h, iy as f64 * opts.h);
    let snap = |a: Vec2| ((a.x / opts.h).round() as i32, (a.y / opts.h).round() as i32);
    let idx = |ix: i32, iy: i32| (ix + half) as usize * side + (iy + half) as usize;
    let mut dirs = Vec::new();
    for dx in -opts.stencil..=opts.stencil {
        for dy in -opts.stencil..=opts.stencil {
            if (dx, dy) != (0, 0) && gcd(dx, dy) == 1 {
                dirs.push((dx, dy));
            }
        }
    }
    let metric = |u: Vec2| (2.0 * ws.eval(u)).max(0.0).sqrt();
    let nodal: Vec<f64> = (0..side * side)
        .map(|k| {
            let ix = (k / side) as i32 - half;
            let iy = (k % side) as i32 - half;
            metric(node(ix, iy))
        })
        .collect();
    let (sx, sy) = snap(ws.wells[i]);
    let target = snap(ws.wells[j]);
    let mut dist = vec![f64::INFINITY; side * side];
    let mut heap = BinaryHeap::new();
    dist[idx(sx, sy)] = 0.0;
    heap.push(HeapItem(0.0, idx(sx, sy)));
    let tidx = idx(target.0, target.1);
    while let Some(HeapItem(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        if k == tidx {
            break;
        }
        let ix = (k / side) as i32 - half;
        let iy = (k % side) as i32 - half;
        let p = node(ix, iy);
        for &(dx, dy) in &dirs {
            let (jx, jy) = (ix + dx, iy + dy);
            if jx.abs() > half || jy.abs() > half {
                continue;
            }
            let kk = idx(jx, jy);
            let q = node(jx, jy);
            // Simpson's rule along the edge.
            let len = p.dist(q);
            let c = len * (nodal[k] + 4.0 * metric(p.lerp(q, 0.5)) + nodal[kk]) / 6.0;
            let nd = d + c;
            if nd < dist[kk] {
                dist[kk] = nd;
                heap.push(HeapItem(nd, kk));
            }
        }
    }
    dist[tidx]
}

/// Closed-form sigma for the canonical potential `s |z^3 - 1|^2`.
///
/// The Agmon length between wells equals `sqrt(2 s) |F(a_j) - F(a_i)|` with
/// `F(z) = z^4 / 4 - z`, a primitive of the holomorphic `z^3 - 1`.
pub fn canonical_sigma(scale: f64) -> f64 {
    scale.sqrt() * 3.0 * 6f64.sqrt() / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::canonical_wellsystem;

    #[test]
    fn segment_action_exact_for_sextic() {
        // Compare GL4 with a fine Simpson rule on one segment.
        let ws = canonical_wellsystem(1.0).unwrap();
        let (p, q) = (Vec2::new(0.9, 0.1), Vec2::new(-0.2, 0.7));
        let n = 2000;
        let mut s = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * ws.eval(p.lerp(q, k as f64 / n as f64));
        }
        s /= 3.0 * n as f64;
        let expect = 0.5 * (q - p).norm2() / 0.3 + 0.3 * s;
        assert!((segment_action(&ws, p, q, 0.3) - expect).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ws = canonical_wellsystem(1.0).unwrap();
        let n = 30;
        let deta = 0.2;
        let u: Vec<Vec2> = (0..n)
            .map(|k| Vec2::new((k as f64 * 0.3).cos(), (k as f64 * 0.17).sin()))
            .collect();
        let mut g = vec![Vec2::ZERO; n];
        action_gradient(&ws, &u, deta, &mut g);
        let eps = 1e-6;
        for k in [1, 7, 20, 28] {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k].y += eps;
            um[k].y -= eps;
            let fd = (action_only(&ws, &up, deta) - action_only(&ws, &um, deta)) / (2.0 * eps);
            assert!((fd - g[k].y).abs() < 1e-6 * fd.abs().max(1.0), "{fd} vs {}", g[k].y);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let ws = canonical_wellsystem(1.0).unwrap();
        assert!(minimize_connection(&ws, 1, 1, 20.0, 400).is_err());
        assert!(minimize_connection(&ws, 0, 1, 20.0, 100).is_err());
        assert!(minimize_connection(&ws, 0, 1, 1.0, 400).is_err());
    }
}
