use crate::error::{Error, Result};
use crate::field::{circle_samples, Field2D};
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Decomposition of a circle into the three phase arcs `I_i` and the three
/// transition arcs `I_12, I_13, I_23` between them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub delta: f64,
    pub radius: f64,
    pub center: Vec2,
    /// Counterclockwise angle intervals `(start, end)` with `end >= start`
    /// (angles not reduced mod 2π).
    pub arcs: [(f64, f64); 3],
    /// Transition arcs for the pairs 12, 13, 23.
    pub transitions: [(f64, f64); 3],
    /// Total sampled length of each `Y_i`.
    #[serde(rename = "yLengths")]
    pub y_lengths: [f64; 3],
    pub d1: f64,
    pub d2: f64,
    /// Transition midpoints A (12), B (13), C (23).
    pub midpoints: [Vec2; 3],
    /// Smallest `C` with `|u − a_i| <= C δ` on every sampled `I_i`.
    #[serde(rename = "fittedC")]
    pub fitted_c: f64,
}

impl PhaseDecomposition {
    pub fn arc_length(iv: (f64, f64), r: f64) -> f64 {
        r * (iv.1 - iv.0)
    }

    pub fn transition_lengths(&self) -> [f64; 3] {
        self.transitions.map(|t| Self::arc_length(t, self.radius))
    }

    /// Sum of all six arc lengths over the circumference (1 when they tile
    /// the circle).
    pub fn coverage(&self) -> f64 {
        let total: f64 = self
            .arcs
            .iter()
            .chain(self.transitions.iter())
            .map(|&t| t.1 - t.0)
            .sum();
        total / TAU
    }
}

/// Phase decomposition of `|z| = r` for a field.
pub fn phase_decomposition(f: &Field2D, ws: &WellSystem, r: f64, delta: f64) -> Result<PhaseDecomposition> {
    if r > f.radius() * (1.0 + 1e-12) || r <= 0.0 {
        return Err(Error::InvalidParameter(format!("circle radius {r} outside (0, R]")));
    }
    let m = circle_samples(r, f.h());
    phase_decomposition_fn(&|t| f.sample(Vec2::polar(r, t)), ws, Vec2::ZERO, r, delta, m)
}

/// Phase decomposition of a circle trace given as a function of angle,
/// sampled at `m` angles and refined by bisection.
pub fn phase_decomposition_fn(
    trace: &dyn Fn(f64) -> Vec2,
    ws: &WellSystem,
    center: Vec2,
    r: f64,
    delta: f64,
    m: usize,
) -> Result<PhaseDecomposition> {
    if !(delta > 0.0) || delta >= 0.5 * ws.min_separation() {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must lie in (0, half the minimal well separation)"
        )));
    }
    let m = m.max(16);
    let dt = TAU / m as f64;
    let u: Vec<Vec2> = (0..m).map(|k| trace(k as f64 * dt)).collect();
    let dist = |i: usize, v: Vec2| v.dist(ws.wells[i]);
    let mut arcs = [(0.0, 0.0); 3];
    let mut y_lengths = [0.0; 3];
    let mut fitted_c: f64 = 0.0;
    for i in 0..3 {
        let inside: Vec<bool> = u.iter().map(|&v| dist(i, v) <= delta).collect();
        let count = inside.iter().filter(|&&b| b).count();
        y_lengths[i] = count as f64 * dt * r;
        if count == 0 {
            return Err(Error::DecompositionFailed(format!("phase {} never within {delta} on the circle", i + 1)));
        }
        if count == m {
            return Err(Error::DecompositionFailed(format!("phase {} covers the whole circle", i + 1)));
        }
        let kmin = (0..m).min_by(|&a, &b| dist(i, u[a]).total_cmp(&dist(i, u[b]))).unwrap();
        // Walk to the last inside sample in each direction.
        let mut hi = kmin;
        while inside[(hi + 1) % m] {
            hi += 1;
        }
        let mut lo = kmin as isize;
        while inside[(lo - 1).rem_euclid(m as isize) as usize] {
            lo -= 1;
        }
        let g = |t: f64| dist(i, trace(t)) - delta;
        let end = bisect(&g, hi as f64 * dt, (hi + 1) as f64 * dt);
        let start = bisect(&g, lo as f64 * dt, (lo - 1) as f64 * dt);
        arcs[i] = (start, end);
        for k in lo..=hi as isize {
            let v = u[k.rem_euclid(m as isize) as usize];
            fitted_c = fitted_c.max(dist(i, v) / delta);
        }
    }
    // Order arcs counterclockwise by start angle (mod 2π).
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| arcs[a].0.rem_euclid(TAU).total_cmp(&arcs[b].0.rem_euclid(TAU)));
    let mut normalized = arcs;
    for k in 0..3 {
        let s = arcs[k].0.rem_euclid(TAU);
        normalized[k] = (s, s + (arcs[k].1 - arcs[k].0));
    }
    let mut transitions = [(0.0, 0.0); 3];
    let mut midpoints = [Vec2::ZERO; 3];
    for k in 0..3 {
        let p = order[k];
        let q = order[(k + 1) % 3];
        let gap_start = normalized[p].1;
        let mut gap_end = normalized[q].0;
        while gap_end < gap_start - 1e-12 {
            gap_end += TAU;
        }
        if gap_end - gap_start > TAU {
            return Err(Error::DecompositionFailed("phase arcs are not in cyclic order".into()));
        }
        let slot = match (p.min(q), p.max(q)) {
            (0, 1) => 0,
            (0, 2) => 1,
            _ => 2,
        };
        transitions[slot] = (gap_start, gap_end.max(gap_start));
        midpoints[slot] = center + Vec2::polar(r, 0.5 * (gap_start + gap_end));
    }
    let lens = transitions.map(|t| r * (t.1 - t.0));
    let d1 = lens.iter().cloned().fold(f64::INFINITY, f64::min);
    let d2 = lens.iter().cloned().fold(0.0, f64::max);
    let out = PhaseDecomposition {
        delta,
        radius: r,
        center,
        arcs: normalized,
        transitions,
        y_lengths,
        d1,
        d2,
        midpoints,
        fitted_c,
    };
    if (out.coverage() - 1.0).abs() > 1e-9 {
        return Err(Error::DecompositionFailed(format!("arcs cover {} of the circle", out.coverage())));
    }
    Ok(out)
}

/// Root of `g` between `a` (where `g <= 0`) and `b` (where `g > 0`).
fn bisect(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    if g(b) <= 0.0 {
        return b;
    }
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if g(mid) <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}
