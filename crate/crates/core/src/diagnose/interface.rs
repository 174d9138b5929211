use crate::connection::{fit_exponential, DecayFit};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::geometry::Triod;
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Diffuse interface `{min_i |u − a_i| >= γ}` and its distance to a triod.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterfaceReport {
    pub gamma: f64,
    /// Disk radius the measurement was restricted to.
    pub radius: f64,
    pub points: Vec<Vec2>,
    #[serde(rename = "localizationRadius")]
    pub localization_radius: f64,
    pub empty: bool,
    /// Per-region fits of the envelope `max |u − a_i|` against distance to
    /// the triod.
    #[serde(rename = "decayFits")]
    pub decay_fits: Vec<DecayFit>,
}

/// Envelope band used for the per-region decay fits.
pub const INTERFACE_FIT_BAND: (f64, f64) = (1e-5, 0.05);

/// Interface nodes within `|z| <= radius`, the largest distance from them
/// to `triod`, and exponential fits of `|u − a_i|` in each region `D_i`
/// (nodes inside the Dirichlet band are skipped in the fits).
pub fn diffuse_interface(f: &Field2D, ws: &WellSystem, gamma: f64, triod: &Triod, radius: Option<f64>) -> Result<InterfaceReport> {
    if !(gamma > 0.0) || gamma >= 0.5 * ws.min_separation() {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must lie in (0, half the minimal well separation)"
        )));
    }
    let g = &f.grid;
    let rr = radius.unwrap_or(g.radius).min(g.radius);
    let rb = g.band_radius();
    let mut points = Vec::new();
    let mut loc: f64 = 0.0;
    let bin = g.h;
    let nbins = (2.0 * rr / bin).ceil() as usize + 2;
    let mut env = vec![vec![0.0f64; nbins]; 3];
    for k in 0..g.len() {
        if !f.active[k] {
            continue;
        }
        let z = g.pos(k);
        if z.norm() > rr * (1.0 + 1e-12) {
            continue;
        }
        let u = f.values[k];
        let (_, dmin) = ws.nearest_well(u);
        let s = triod.distance(z);
        if dmin >= gamma {
            points.push(z);
            loc = loc.max(s);
        }
        if z.norm() <= rb.min(rr) {
            let i = triod.classify(z);
            let b = ((s / bin) as usize).min(nbins - 1);
            env[i][b] = env[i][b].max(u.dist(ws.wells[i]));
        }
    }
    let decay_fits = env
        .iter()
        .map(|e| {
            let pts: Vec<(f64, f64)> = e
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= INTERFACE_FIT_BAND.0 && v <= INTERFACE_FIT_BAND.1)
                .map(|(b, &v)| ((b as f64 + 0.5) * bin, v))
                .collect();
            fit_exponential(&pts)
        })
        .collect();
    Ok(InterfaceReport {
        gamma,
        radius: rr,
        empty: points.is_empty(),
        points,
        localization_radius: loc,
        decay_fits,
    })
}

/// Node closest to the well centroid, used as a junction locator.
pub fn junction_center(f: &Field2D, ws: &WellSystem, radius: f64) -> Vec2 {
    let c = (ws.wells[0] + ws.wells[1] + ws.wells[2]) / 3.0;
    let g = &f.grid;
    let mut best = (f64::INFINITY, Vec2::ZERO);
    for k in 0..g.len() {
        let z = g.pos(k);
        if f.active[k] && z.norm() <= radius {
            let d = f.values[k].dist(c);
            if d < best.0 {
                best = (d, z);
            }
        }
    }
    best.1
}

/// Sector `i` of `triod` inside `|z| <= radius`, minus the `margin`
/// neighbourhood of the triod (the region where only phase `i` should be
/// present once `margin` exceeds the localization radius).
pub fn sector_region(triod: Triod, i: usize, margin: f64, radius: f64) -> impl Fn(Vec2) -> bool {
    move |z: Vec2| z.norm() <= radius && triod.classify(z) == i && triod.distance(z) > margin
}
