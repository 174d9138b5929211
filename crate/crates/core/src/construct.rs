//! Explicit fields: smoothed three-phase boundary data and the energy
//! competitors (radial, two-phase strip, diffuse triod).

use crate::connection::Profile1D;
use crate::error::{Error, Result};
use crate::field::{energy, EnergyBreakdown, Field2D, Grid, Trace};
use crate::geometry::Triod;
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// The three connections ordered as `U_12, U_13, U_23`.
#[derive(Clone, Debug)]
pub struct Profiles(pub [Arc<Profile1D>; 3]);

impl Profiles {
    pub fn new(p12: Profile1D, p13: Profile1D, p23: Profile1D) -> Result<Profiles> {
        for (p, want) in [(&p12, (0, 1)), (&p13, (0, 2)), (&p23, (1, 2))] {
            if p.pair != want {
                return Err(Error::InvalidParameter(format!(
                    "profile for pair {:?} given where {want:?} expected",
                    p.pair
                )));
            }
        }
        Ok(Profiles([Arc::new(p12), Arc::new(p13), Arc::new(p23)]))
    }

    /// Profile joining wells `p < q`.
    pub fn pair(&self, p: usize, q: usize) -> &Profile1D {
        match (p.min(q), p.max(q)) {
            (0, 1) => &self.0[0],
            (0, 2) => &self.0[1],
            _ => &self.0[2],
        }
    }

    /// Mean action of the three connections.
    pub fn sigma(&self) -> f64 {
        self.0.iter().map(|p| p.sigma).sum::<f64>() / 3.0
    }
}

/// Well pairs joined at the anchors A, B, C.
pub const ANCHOR_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn wrap_pi(t: f64) -> f64 {
    let r = (t + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Boundary data built from three anchors on a circle: constant wells on the
/// arcs, profile transitions of a given width centred at the anchors.
#[derive(Clone, Debug)]
pub struct PhaseTrace {
    pub radius: f64,
    pub width: f64,
    pub anchor_angles: [f64; 3],
    /// +1 when the arclength coordinate increasing counterclockwise runs
    /// from the first to the second well of the anchor's pair.
    orientation: [f64; 3],
    profiles: Profiles,
    wells: [Vec2; 3],
    /// Profile values at the ends of the transition window.
    ends: [(Vec2, Vec2); 3],
}

impl PhaseTrace {
    /// Which phase occupies the arc counterclockwise after anchor `k`.
    fn ccw_phase(&self, k: usize) -> usize {
        let (p, q) = ANCHOR_PAIRS[k];
        if self.orientation[k] > 0.0 {
            q
        } else {
            p
        }
    }

    /// Phase of the constant arc containing `angle` (ignoring transitions).
    pub fn arc_phase(&self, angle: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for k in 0..3 {
            let cw = (angle - self.anchor_angles[k]).rem_euclid(TAU);
            if cw < best.1 {
                best = (k, cw);
            }
        }
        self.ccw_phase(best.0)
    }
}

impl Trace for PhaseTrace {
    fn at(&self, angle: f64) -> Vec2 {
        let half = 0.5 * self.width;
        for k in 0..3 {
            let s = self.radius * wrap_pi(angle - self.anchor_angles[k]);
            if s.abs() <= half {
                let (p, q) = ANCHOR_PAIRS[k];
                let eta = self.orientation[k] * s;
                let t = (eta + half) / self.width;
                let (lo, hi) = self.ends[k];
                let u = self.profiles.pair(p, q).value_at(eta);
                return u - (lo - self.wells[p]) * (1.0 - t) - (hi - self.wells[q]) * t;
            }
        }
        self.wells[self.arc_phase(angle)]
    }
}

/// Smoothed triple-junction boundary data with transitions of arclength
/// `width` centred at the triod anchors (which must lie on `|z| = R`).
pub fn boundary_data(triod: &Triod, radius: f64, profiles: &Profiles, width: f64, ws: &WellSystem) -> Result<PhaseTrace> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("transition width must be positive, got {width}")));
    }
    let anchors = triod.anchors();
    for p in &anchors {
        if (p.norm() - radius).abs() > 1e-9 * radius {
            return Err(Error::InvalidGeometry(format!("anchor {p:?} is not on the circle of radius {radius}")));
        }
    }
    let ang: [f64; 3] = [anchors[0].angle(), anchors[1].angle(), anchors[2].angle()];
    for k in 0..3 {
        for l in k + 1..3 {
            let sep = radius * wrap_pi(ang[k] - ang[l]).abs();
            if sep < width {
                return Err(Error::InvalidGeometry(format!(
                    "anchors {k} and {l} are {sep} apart along the circle, less than the transition width {width}"
                )));
            }
        }
    }
    // Neighbour on the side of the lower-index phase: A (1|2) faces B across
    // phase 1, B (1|3) faces A across phase 1, C (2|3) faces A across phase 2.
    let low_neighbour = [1usize, 0, 0];
    let mut orientation = [0.0; 3];
    for k in 0..3 {
        let third = 3 - k - low_neighbour[k];
        let to_n = (ang[low_neighbour[k]] - ang[k]).rem_euclid(TAU);
        let to_t = (ang[third] - ang[k]).rem_euclid(TAU);
        // If the low-phase neighbour comes first counterclockwise, the low
        // phase sits on the counterclockwise side, i.e. at negative eta.
        orientation[k] = if to_n < to_t { -1.0 } else { 1.0 };
    }
    let half = 0.5 * width;
    let ends = ANCHOR_PAIRS.map(|(p, q)| {
        let pr = profiles.pair(p, q);
        (pr.value_at(-half), pr.value_at(half))
    });
    Ok(PhaseTrace {
        radius,
        width,
        anchor_angles: ang,
        orientation,
        profiles: profiles.clone(),
        wells: ws.wells,
        ends,
    })
}

/// Boundary data of a two-phase strip: `U_12(y − y0)` read on the circle.
#[derive(Clone, Debug)]
pub struct StripTrace {
    pub radius: f64,
    pub strip: StripProfile,
}

impl Trace for StripTrace {
    fn at(&self, angle: f64) -> Vec2 {
        self.strip.eval(Vec2::polar(self.radius, angle).y)
    }
}

/// `U_12(y − y0)` on `|y − y0| <= w`, linear to the wells on `w < |y − y0| <= 2w`,
/// constant beyond.
#[derive(Clone, Debug)]
pub struct StripProfile {
    pub y0: f64,
    pub half_width: f64,
    profile: Arc<Profile1D>,
}

impl StripProfile {
    pub fn new(profile: &Profile1D, y0: f64, half_width: f64) -> StripProfile {
        StripProfile { y0, half_width, profile: Arc::new(profile.clone()) }
    }

    pub fn eval(&self, y: f64) -> Vec2 {
        let eta = y - self.y0;
        let w = self.half_width;
        let (lo, hi) = self.profile.wells;
        if eta.abs() <= w {
            self.profile.value_at(eta)
        } else if eta.abs() <= 2.0 * w {
            let t = (eta.abs() - w) / w;
            if eta > 0.0 {
                self.profile.value_at(w).lerp(hi, t)
            } else {
                self.profile.value_at(-w).lerp(lo, t)
            }
        } else if eta > 0.0 {
            hi
        } else {
            lo
        }
    }
}

/// Construction parameters recorded with a competitor.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CompetitorParams {
    pub kind: String,
    pub alpha: Option<f64>,
    #[serde(rename = "stripWidth")]
    pub strip_width: Option<f64>,
    pub y0: Option<f64>,
    pub h: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    /// Constant in front of the lower-order term of the predicted bound.
    pub calibration: f64,
}

/// A constructed field with its energy and the bound it is meant to honour.
#[derive(Clone, Debug)]
pub struct CompetitorReport {
    pub field: Field2D,
    pub energy: EnergyBreakdown,
    pub predicted_bound: f64,
    pub slack: f64,
    pub params: CompetitorParams,
}

/// JSON view of a [`CompetitorReport`] without the field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompetitorSummary {
    pub energy: EnergyBreakdown,
    #[serde(rename = "predictedBound")]
    pub predicted_bound: f64,
    pub slack: f64,
    pub parameters: CompetitorParams,
}

impl CompetitorReport {
    pub fn summary(&self) -> CompetitorSummary {
        CompetitorSummary {
            energy: self.energy.clone(),
            predicted_bound: self.predicted_bound,
            slack: self.slack,
            parameters: self.params.clone(),
        }
    }
}

/// Trace on `r >= R − 2h`, linear blend to `a_target` over one unit inside,
/// constant `a_target` in the interior. The predicted bound is `1.5 × E_ref`
/// where `E_ref` is `calibration` if given (energy at the smallest radius
/// tested) and the field's own energy otherwise.
pub fn radial_competitor(trace: &dyn Trace, grid: Grid, ws: &WellSystem, target: usize, calibration: Option<f64>) -> Result<CompetitorReport> {
    if target > 2 {
        return Err(Error::InvalidParameter(format!("well index {target} out of range")));
    }
    let rb = grid.band_radius();
    let a = ws.wells[target];
    let field = Field2D::from_fn(
        grid,
        |z| {
            let r = z.norm();
            if r <= rb - 1.0 {
                a
            } else {
                let t = 1.0 + r - rb;
                trace.at(z.angle()) * t + a * (1.0 - t)
            }
        },
        trace,
    );
    let e = energy(&field, ws, None);
    let reference = calibration.unwrap_or(e.total);
    let predicted = 1.5 * reference;
    Ok(CompetitorReport {
        slack: predicted - e.total,
        predicted_bound: predicted,
        energy: e,
        params: CompetitorParams {
            kind: "radial".into(),
            h: grid.h,
            radius: grid.radius,
            calibration: reference,
            ..Default::default()
        },
        field,
    })
}

/// Two-phase strip competitor `U_12(y − y0)` with half-width `h_width`
/// (default `R^{1/3}`). The predicted bound is `2Rσ + c R^{1/3}` with
/// `c R^{1/3}` the measured energy outside the core strip.
pub fn two_phase_competitor(grid: Grid, y0: f64, ws: &WellSystem, profile: &Profile1D, h_width: Option<f64>) -> Result<CompetitorReport> {
    let r = grid.radius;
    let w = h_width.unwrap_or_else(|| r.cbrt());
    if !(w > 0.0) || y0.abs() >= r - 3.0 * w {
        return Err(Error::InvalidParameter(format!(
            "need |y0| < R − 3 hWidth, got y0 = {y0}, hWidth = {w}, R = {r}"
        )));
    }
    if profile.pair != (0, 1) {
        return Err(Error::InvalidParameter("two-phase competitor uses U_12".into()));
    }
    let strip = StripProfile::new(profile, y0, w);
    let trace = StripTrace { radius: r, strip: strip.clone() };
    let field = Field2D::from_fn(grid, |z| strip.eval(z.y), &trace);
    let mut e = energy(&field, ws, None);
    let core = |z: Vec2| (z.y - y0).abs() <= w;
    let layers = |z: Vec2| (z.y - y0).abs() > w && (z.y - y0).abs() <= 2.0 * w;
    let e_core = energy(&field, ws, Some(&core)).total;
    let e_layers = energy(&field, ws, Some(&layers)).total;
    e.per_region.insert("core".into(), e_core);
    e.per_region.insert("layers".into(), e_layers);
    e.per_region.insert("bulk".into(), e.total - e_core - e_layers);
    let outside = e.total - e_core;
    let c = outside / r.cbrt();
    let predicted = 2.0 * r * profile.sigma + c * r.cbrt();
    Ok(CompetitorReport {
        slack: predicted - e.total,
        predicted_bound: predicted,
        energy: e,
        params: CompetitorParams {
            kind: "twophase".into(),
            strip_width: Some(w),
            y0: Some(y0),
            h: grid.h,
            radius: r,
            calibration: c,
            ..Default::default()
        },
        field,
    })
}

/// Pointwise description of the diffuse-triod competitor inside `r <= R_b`.
#[derive(Clone, Debug)]
pub struct TriodField {
    pub triod: Triod,
    pub half_width: f64,
    pub core_radius: f64,
    profiles: Profiles,
    wells: [Vec2; 3],
}

/// Anchor segments bounding each phase sector.
const SECTOR_SEGMENTS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl TriodField {
    pub fn new(triod: &Triod, profiles: &Profiles, ws: &WellSystem, half_width: f64) -> Result<TriodField> {
        let ang = triod.angles_at_d();
        if ang.iter().any(|&t| t < 0.5 * PI - 1e-9) {
            return Err(Error::InvalidGeometry(format!(
                "junction angles {ang:?} below 90 degrees make the profile rectangles overlap"
            )));
        }
        Ok(TriodField {
            triod: *triod,
            half_width,
            core_radius: 1.0,
            profiles: profiles.clone(),
            wells: ws.wells,
        })
    }

    /// Distance to segment `k` and the profile value it prescribes for a
    /// point in phase sector `phase`.
    fn segment_value(&self, k: usize, z: Vec2, phase: usize) -> (f64, Vec2) {
        let d = self.triod.d;
        let end = self.triod.anchors()[k];
        let dist = crate::geometry::segment_distance(z, d, end);
        let (p, q) = ANCHOR_PAIRS[k];
        let sign = if phase == q { 1.0 } else { -1.0 };
        let w = self.half_width;
        let prof = self.profiles.pair(p, q);
        let v = if dist <= w {
            prof.value_at(sign * dist)
        } else if dist <= 2.0 * w {
            prof.value_at(sign * w).lerp(self.wells[phase], (dist - w) / w)
        } else {
            self.wells[phase]
        };
        (dist, v)
    }

    pub fn eval(&self, z: Vec2) -> Vec2 {
        let phase = self.triod.classify(z);
        let (s0, s1) = SECTOR_SEGMENTS[phase];
        let (d0, v0) = self.segment_value(s0, z, phase);
        let (d1, v1) = self.segment_value(s1, z, phase);
        let rho = z.dist(self.triod.d);
        let v = if rho < 2.0 * self.half_width && d0 + d1 > 0.0 {
            (v0 * d1 + v1 * d0) / (d0 + d1)
        } else if d0 <= d1 {
            v0
        } else {
            v1
        };
        if rho < self.core_radius {
            let centroid = (self.wells[0] + self.wells[1] + self.wells[2]) / 3.0;
            centroid.lerp(v, rho / self.core_radius)
        } else {
            v
        }
    }
}

/// Diffuse-triod competitor: profiles across the three segments, wells in the
/// sectors, a distance-weighted blend in the junction ball of radius `2R^α`,
/// and a linear blend to the boundary data across the annulus of width `R^α`
/// inside the Dirichlet band. The predicted bound is `σ L + C R^α`; without a
/// given `C` it is calibrated so that the slack is zero at this radius.
pub fn triple_competitor(
    triod: &Triod,
    grid: Grid,
    ws: &WellSystem,
    profiles: &Profiles,
    alpha: f64,
    trace: &dyn Trace,
    calibration: Option<f64>,
) -> Result<CompetitorReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let r = grid.radius;
    let w = r.powf(alpha);
    let rb = grid.band_radius();
    if rb - w <= 2.0 * w {
        return Err(Error::InvalidGeometry(format!("radius {r} too small for collar width {w}")));
    }
    let tf = TriodField::new(triod, profiles, ws, w)?;
    let field = Field2D::from_fn(
        grid,
        |z| {
            let rr = z.norm();
            let inner = tf.eval(z);
            if rr <= rb - w {
                inner
            } else {
                let t = (rr - (rb - w)) / w;
                inner.lerp(trace.at(z.angle()), t)
            }
        },
        trace,
    );
    let mut e = energy(&field, ws, None);
    let d = triod.d;
    let ball = |z: Vec2| z.dist(d) < 2.0 * w;
    let annulus = |z: Vec2| z.norm() > rb - w;
    e.per_region.insert("junction_ball".into(), energy(&field, ws, Some(&ball)).total);
    e.per_region.insert("outer_annulus".into(), energy(&field, ws, Some(&annulus)).total);
    let sigma = profiles.sigma();
    let line = sigma * triod.total_length();
    let c = calibration.unwrap_or((e.total - line) / w);
    let predicted = line + c * w;
    Ok(CompetitorReport {
        slack: predicted - e.total,
        predicted_bound: predicted,
        energy: e,
        params: CompetitorParams {
            kind: "triple".into(),
            alpha: Some(alpha),
            strip_width: Some(w),
            h: grid.h,
            radius: r,
            calibration: c,
            ..Default::default()
        },
        field,
    })
}

/// Anchors on `|z| = R` producing arcs `I_1, I_2, I_3` of the given angular
/// lengths (degrees, summing to 360), with A at angle `start`.
pub fn anchors_from_arcs(radius: f64, arcs_deg: [f64; 3], start: f64) -> Result<Triod> {
    let total: f64 = arcs_deg.iter().sum();
    if (total - 360.0).abs() > 1e-9 || arcs_deg.iter().any(|&a| a <= 0.0) {
        return Err(Error::InvalidParameter(format!("arcs must be positive and sum to 360, got {arcs_deg:?}")));
    }
    let rad = arcs_deg.map(f64::to_radians);
    // Counterclockwise: A, then I_1, then B, then I_3, then C, then I_2.
    let ta = start;
    let tb = ta + rad[0];
    let tc = tb + rad[2];
    Triod::new(Vec2::polar(radius, ta), Vec2::polar(radius, tb), Vec2::polar(radius, tc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_pi_range() {
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_pi(PI), PI);
        assert_eq!(wrap_pi(-PI), PI);
    }

    #[test]
    fn arcs_layout() {
        let t = anchors_from_arcs(10.0, [100.0, 130.0, 130.0], PI / 2.0).unwrap();
        let ab = (t.b.angle() - t.a.angle()).rem_euclid(TAU).to_degrees();
        assert!((ab - 100.0).abs() < 1e-9);
        assert!(anchors_from_arcs(10.0, [100.0, 100.0, 100.0], 0.0).is_err());
    }
}
