use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::geometry::{appendix_f, Triod};
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Threshold overrides for [`slice_profile`]; `None` selects the defaults
/// `R^{−1/6}` (amplitude) and `R^{2/3}` (slack).
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct SliceThresholds {
    pub amplitude: Option<f64>,
    pub slack: Option<f64>,
    /// Margin above the lower primed anchors for the admissible `y*` range;
    /// defaults to the largest transition arc length `d2`.
    pub margin: Option<f64>,
}

/// Horizontal slices of a field in the frame where `D → A` points along `+y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceProfile {
    #[serde(rename = "yGrid")]
    pub y_grid: Vec<f64>,
    /// `λ_1, λ_2, λ_3` per slice.
    pub lambda: [Vec<f64>; 3],
    /// `H¹(γ_y)` per slice.
    pub chord: Vec<f64>,
    pub ystar: Option<f64>,
    /// Rotation applied to the field (radians).
    pub rotation: f64,
    pub amplitude: f64,
    pub slack: f64,
    /// Admissible interval searched for `y*`.
    pub admissible: (f64, f64),
    /// Rotated junction ordinate.
    #[serde(rename = "yD")]
    pub y_d: f64,
}

/// Rotation angle taking `D → A` to the `+y` direction.
pub fn frame_rotation(triod: &Triod) -> f64 {
    FRAC_PI_2 - (triod.a - triod.d).angle()
}

/// Slice measures `λ_i(y)` = length of `{x : |u(x, y) − a_i| <= amplitude}`
/// on the chord at height `y`, and `y*` = the smallest admissible `y` with
/// `λ_1 + λ_2 >= H¹(γ_y) − slack`.
pub fn slice_profile(f: &Field2D, ws: &WellSystem, triod: &Triod, d2: f64, th: SliceThresholds) -> Result<SliceProfile> {
    let r = f.radius();
    let h = f.h();
    let rot = frame_rotation(triod);
    let amplitude = th.amplitude.unwrap_or(r.powf(-1.0 / 6.0));
    let slack = th.slack.unwrap_or(r.powf(2.0 / 3.0));
    let margin = th.margin.unwrap_or(d2);
    let primed = primed_anchors(triod, r + h)?;
    let rp: Vec<Vec2> = primed.iter().map(|p| p.rotate(rot)).collect();
    let lower = rp[1].y.max(rp[2].y) + margin;
    let upper = rp[0].y - margin;
    let y_d = triod.d.rotate(rot).y;
    let ny = (2.0 * r / h).floor() as usize;
    let mut y_grid = Vec::with_capacity(ny);
    let mut lambda = [Vec::with_capacity(ny), Vec::with_capacity(ny), Vec::with_capacity(ny)];
    let mut chord = Vec::with_capacity(ny);
    for k in 1..ny {
        let y = -r + h * k as f64;
        let half = (r * r - y * y).max(0.0).sqrt();
        let nx = (2.0 * half / h).floor() as usize;
        let mut counts = [0usize; 3];
        for ix in 0..nx {
            let x = -half + h * (ix as f64 + 0.5);
            let z = Vec2::new(x, y).rotate(-rot);
            let u = f.sample(z);
            for i in 0..3 {
                if u.dist(ws.wells[i]) <= amplitude {
                    counts[i] += 1;
                }
            }
        }
        y_grid.push(y);
        chord.push(2.0 * half);
        for i in 0..3 {
            lambda[i].push(counts[i] as f64 * h);
        }
    }
    let ystar = (0..y_grid.len())
        .find(|&k| y_grid[k] > lower && y_grid[k] < upper && lambda[0][k] + lambda[1][k] >= chord[k] - slack)
        .map(|k| y_grid[k]);
    Ok(SliceProfile {
        y_grid,
        lambda,
        chord,
        ystar,
        rotation: rot,
        amplitude,
        slack,
        admissible: (lower, upper),
        y_d,
    })
}

/// Intersections of the rays `D → A`, `D → B`, `D → C` with `|z| = rho`.
pub fn primed_anchors(triod: &Triod, rho: f64) -> Result<[Vec2; 3]> {
    let d = triod.d;
    if d.norm() >= rho {
        return Err(Error::InvalidGeometry("junction outside the extension circle".into()));
    }
    let mut out = [Vec2::ZERO; 3];
    for k in 0..3 {
        let e = triod.ray(k);
        // |d + t e| = rho, t > 0.
        let b = d.dot(e);
        let t = -b + (b * b - d.norm2() + rho * rho).sqrt();
        out[k] = d + e * t;
    }
    Ok(out)
}

/// `σ f(y*)` with the primed anchors expressed in the slice frame.
pub fn lower_bound_value(ystar: f64, primed_rotated: &[Vec2; 3], sigma: f64) -> f64 {
    let [a, b, c] = *primed_rotated;
    let (pb, pc) = if b.x <= c.x { (b, c) } else { (c, b) };
    sigma * appendix_f(ystar, a.y, pb.y, pc.y, pb.x, pc.x)
}

/// Lower-bound value for a slice profile; fails when `y*` was not found.
pub fn lower_bound_for(sp: &SliceProfile, triod: &Triod, extension: f64, sigma: f64) -> Result<f64> {
    let ystar = sp
        .ystar
        .ok_or_else(|| Error::YstarNotFound(format!("no admissible y in {:?}", sp.admissible)))?;
    let p = primed_anchors(triod, extension)?;
    let rp = [p[0].rotate(sp.rotation), p[1].rotate(sp.rotation), p[2].rotate(sp.rotation)];
    Ok(lower_bound_value(ystar, &rp, sigma))
}
