use super::interface::diffuse_interface;
use super::phases::phase_decomposition;
use crate::error::{Error, Result};
use crate::field::{energy, Field2D};
use crate::geometry::{to_half_open, JunctionMap, Triod};
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowdownRecord {
    pub radius: f64,
    pub theta: f64,
    pub d: Vec2,
    pub anchors: [Vec2; 3],
    #[serde(rename = "l1Distance")]
    pub l1_distance: f64,
    #[serde(rename = "energyPerR")]
    pub energy_per_r: f64,
    #[serde(rename = "localizationRadius")]
    pub localization_radius: f64,
    #[serde(rename = "transitionArcs")]
    pub transition_arcs: [f64; 3],
}

/// Least-squares fit of `y = C x^p` in log-log coordinates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual in `ln y`.
    pub residual: f64,
    pub samples: usize,
}

/// Geometric tail bound for `|θ_i − θ_{i+1}|` on a doubling ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CauchyReport {
    pub diffs: Vec<f64>,
    pub decreasing: bool,
    pub fit: Option<PowerFit>,
    /// `C R_0^p / (1 − 2^p)`; `None` unless the fitted `p < 0`. Zero when
    /// every difference vanishes.
    #[serde(rename = "tailBound")]
    pub tail_bound: Option<f64>,
    pub summable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowdownTrace {
    pub records: Vec<BlowdownRecord>,
    /// Exponent of `localizationRadius` against `R`.
    #[serde(rename = "betaFit")]
    pub beta_fit: Option<PowerFit>,
    /// Exponent of the L1 distance against `R`.
    #[serde(rename = "beta1Fit")]
    pub beta1_fit: Option<PowerFit>,
    pub cauchy: CauchyReport,
    /// Set when a rung failed; the records stop before it.
    pub failure: Option<String>,
}

/// Power-law fit; `None` with fewer than two positive samples.
pub fn power_fit(xs: &[f64], ys: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Some(PowerFit {
        exponent: slope,
        prefactor: icpt.exp(),
        residual: (rss / nf).sqrt(),
        samples: n,
    })
}

/// Smallest absolute difference of two angles.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Cauchy report for angles `thetas` taken at radii `radii`.
pub fn cauchy_report(radii: &[f64], thetas: &[f64]) -> CauchyReport {
    let diffs: Vec<f64> = thetas.windows(2).map(|w| angle_gap(w[0], w[1])).collect();
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    let fit = power_fit(&radii[..diffs.len()], &diffs);
    let scale = thetas.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    let tail_bound = if diffs.iter().all(|&d| d <= 64.0 * f64::EPSILON * scale) {
        Some(0.0)
    } else {
        match (fit, radii.first()) {
            (Some(f), Some(&r0)) if f.exponent < 0.0 => {
                Some(f.prefactor * r0.powf(f.exponent) / (1.0 - 2f64.powf(f.exponent)))
            }
            _ => None,
        }
    };
    let summable = tail_bound.is_some();
    CauchyReport {
        diffs,
        decreasing,
        fit,
        tail_bound,
        summable,
    }
}

/// Triod fitted to the transition midpoints on `|z| = r`.
pub fn rung_triod(f: &Field2D, ws: &WellSystem, r: f64, delta: f64) -> Result<(Triod, [f64; 3])> {
    let pd = phase_decomposition(f, ws, r, delta)?;
    let [a, b, c] = pd.midpoints;
    Ok((Triod::new(a, b, c)?, pd.transition_lengths()))
}

/// Blowdown of a solved field along `ladder`.
pub fn blowdown(f: &Field2D, ws: &WellSystem, ladder: &[f64], delta: f64, gamma: f64) -> Result<BlowdownTrace> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("ladder must be non-empty and strictly increasing".into()));
    }
    if ladder[ladder.len() - 1] > f.radius() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "ladder exceeds the field radius {}",
            f.radius()
        )));
    }
    let mut records = Vec::new();
    let mut failure = None;
    for &r in ladder {
        match rung(f, ws, r, delta, gamma) {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failure = Some(format!("R = {r}: {e}"));
                break;
            }
        }
    }
    let radii: Vec<f64> = records.iter().map(|r| r.radius).collect();
    let loc: Vec<f64> = records.iter().map(|r| r.localization_radius).collect();
    let l1: Vec<f64> = records.iter().map(|r| r.l1_distance).collect();
    let thetas: Vec<f64> = records.iter().map(|r| r.theta).collect();
    Ok(BlowdownTrace {
        beta_fit: power_fit(&radii, &loc),
        beta1_fit: power_fit(&radii, &l1),
        cauchy: cauchy_report(&radii, &thetas),
        records,
        failure,
    })
}

fn rung(f: &Field2D, ws: &WellSystem, r: f64, delta: f64, gamma: f64) -> Result<BlowdownRecord> {
    let (triod, transition_arcs) = rung_triod(f, ws, r, delta)?;
    let iface = diffuse_interface(f, ws, gamma, &triod, Some(r))?;
    let inside = move |z: Vec2| z.norm() <= r;
    let e = energy(f, ws, Some(&inside)).total;
    let l1 = unit_l1_distance(f, &JunctionMap::new(triod, ws.wells), r);
    Ok(BlowdownRecord {
        radius: r,
        theta: triod.theta(),
        d: triod.d,
        anchors: triod.anchors(),
        l1_distance: l1,
        energy_per_r: e / r,
        localization_radius: iface.localization_radius,
        transition_arcs,
    })
}

/// `‖u_r − U_r‖_{L1(B_1)}` with `u_r(z) = u(r z)`, evaluated on the nodes of
/// `f` inside `B_r` after the change of variables `z -> r z` (no resampling).
pub fn unit_l1_distance(f: &Field2D, jm: &JunctionMap, r: f64) -> f64 {
    let g = &f.grid;
    let w = g.h * g.h / (r * r);
    let mut s = 0.0;
    for k in 0..g.len() {
        let z = g.pos(k);
        if f.active[k] && z.norm() <= r {
            s += w * (f.values[k] - jm.eval(z)).norm();
        }
    }
    s
}

/// Angles between consecutive interface branches on a circle of radius
/// `rho` around `center`, measured where the nearest well changes; sorted
/// counterclockwise starting from the branch closest to `+x`.
pub fn junction_angles(f: &Field2D, ws: &WellSystem, center: Vec2, rho: f64) -> Result<[f64; 3]> {
    let m = ((TAU * rho / (0.25 * f.h())).ceil() as usize).max(256);
    let phase = |t: f64| ws.nearest_well(f.sample(center + Vec2::polar(rho, t))).0;
    let dt = TAU / m as f64;
    let mut crossings = Vec::new();
    let mut prev = phase(0.0);
    for k in 1..=m {
        let cur = phase(k as f64 * dt);
        if cur != prev {
            // Refine the switch point.
            let (mut lo, mut hi) = ((k - 1) as f64 * dt, k as f64 * dt);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if phase(mid) == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(to_half_open(0.5 * (lo + hi)));
        }
        prev = cur;
    }
    if crossings.len() != 3 {
        return Err(Error::DecompositionFailed(format!(
            "expected 3 interface branches at radius {rho}, found {}",
            crossings.len()
        )));
    }
    crossings.sort_by(f64::total_cmp);
    let a = [
        crossings[1] - crossings[0],
        crossings[2] - crossings[1],
        TAU - (crossings[2] - crossings[0]),
    ];
    debug_assert!((a.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-9);
    Ok(a)
}
