//! Triple-well potentials and their certified constants.

use crate::error::{Error, Result};
use crate::vec2::{Sym2, Vec2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type ScalarFn = dyn Fn(Vec2) -> f64 + Send + Sync;
type VectorFn = dyn Fn(Vec2) -> Vec2 + Send + Sync;
type HessFn = dyn Fn(Vec2) -> Sym2 + Send + Sync;

#[derive(Clone)]
enum Kind {
    /// `scale * |z^3 - 1|^2` in complex notation.
    Canonical { scale: f64 },
    Custom {
        eval: Arc<ScalarFn>,
        grad: Arc<VectorFn>,
        hess: Arc<HessFn>,
    },
}

/// Constants attached to a potential by [`certify_constants`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "deltaW")]
    pub delta_w: f64,
    #[serde(rename = "cW")]
    pub c_w: f64,
    #[serde(rename = "CW")]
    pub cap_c_w: f64,
    pub certified: bool,
}

/// Potential W with three zeros `wells`.
#[derive(Clone)]
pub struct WellSystem {
    pub wells: [Vec2; 3],
    kind: Kind,
    pub constants: Constants,
}

impl fmt::Debug for WellSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Canonical { scale } => format!("canonical(scale={scale})"),
            Kind::Custom { .. } => "custom".to_string(),
        };
        f.debug_struct("WellSystem")
            .field("kind", &kind)
            .field("wells", &self.wells)
            .field("constants", &self.constants)
            .finish()
    }
}

/// Vertices of the equilateral triangle of circumradius 1 with `a_1 = (1, 0)`.
pub fn canonical_wells() -> [Vec2; 3] {
    let s = 0.75f64.sqrt();
    [Vec2::new(1.0, 0.0), Vec2::new(-0.5, s), Vec2::new(-0.5, -s)]
}

/// The sixth-degree product potential `scale * prod_i |u - a_i|^2`.
pub fn canonical_wellsystem(scale: f64) -> Result<WellSystem> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    let mut ws = WellSystem {
        wells: canonical_wells(),
        kind: Kind::Canonical { scale },
        constants: Constants::default(),
    };
    // Exact values; certification later confirms them by sampling.
    ws.constants.c1 = 18.0 * scale;
    ws.constants.c2 = 18.0 * scale;
    ws.constants.m = 1.0;
    Ok(ws)
}

/// `scale * prod_i |u - a_i|^2` for arbitrary distinct wells, as a custom
/// potential. With the canonical wells it coincides with
/// [`canonical_wellsystem`].
pub fn product_wellsystem(wells: [Vec2; 3], scale: f64) -> Result<WellSystem> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    for i in 0..3 {
        if !wells[i].is_finite() || wells[i].dist(wells[(i + 1) % 3]) < 1e-9 {
            return Err(Error::InvalidParameter(format!("wells must be finite and distinct: {wells:?}")));
        }
    }
    let parts = move |u: Vec2| {
        let d = wells.map(|a| u - a);
        (d, d.map(|v| v.norm2()))
    };
    let eval = move |u: Vec2| scale * parts(u).1.iter().product::<f64>();
    let grad = move |u: Vec2| {
        let (d, p) = parts(u);
        let mut g = Vec2::ZERO;
        for i in 0..3 {
            g += d[i] * (2.0 * p[(i + 1) % 3] * p[(i + 2) % 3]);
        }
        g * scale
    };
    let hess = move |u: Vec2| {
        let (d, p) = parts(u);
        let mut h = Sym2::default();
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let c = 2.0 * p[j] * p[k];
            h.xx += c;
            h.yy += c;
            // Cross terms 2 d_i ⊗ 2 d_j p_k, once per ordered pair.
            for (m, q) in [(j, k), (k, j)] {
                let w = 4.0 * p[q];
                h.xx += w * d[i].x * d[m].x;
                h.yy += w * d[i].y * d[m].y;
                h.xy += 0.5 * w * (d[i].x * d[m].y + d[i].y * d[m].x);
            }
        }
        Sym2 { xx: scale * h.xx, xy: scale * h.xy, yy: scale * h.yy }
    };
    Ok(WellSystem::custom(wells, eval, grad, hess))
}

impl WellSystem {
    /// Potential given by closed-form callbacks. Must be certified before use.
    pub fn custom<E, G, H>(wells: [Vec2; 3], eval: E, grad: G, hess: H) -> WellSystem
    where
        E: Fn(Vec2) -> f64 + Send + Sync + 'static,
        G: Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        H: Fn(Vec2) -> Sym2 + Send + Sync + 'static,
    {
        WellSystem {
            wells,
            kind: Kind::Custom {
                eval: Arc::new(eval),
                grad: Arc::new(grad),
                hess: Arc::new(hess),
            },
            constants: Constants::default(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.kind, Kind::Canonical { .. })
    }

    pub fn scale(&self) -> Option<f64> {
        match self.kind {
            Kind::Canonical { scale } => Some(scale),
            Kind::Custom { .. } => None,
        }
    }

    #[inline]
    pub fn eval(&self, u: Vec2) -> f64 {
        match &self.kind {
            Kind::Canonical { scale } => {
                let (fr, fi) = cubic_minus_one(u);
                scale * (fr * fr + fi * fi)
            }
            Kind::Custom { eval, .. } => eval(u),
        }
    }

    #[inline]
    pub fn grad(&self, u: Vec2) -> Vec2 {
        match &self.kind {
            Kind::Canonical { scale } => {
                // 2 s f conj(f') with f = z^3 - 1, f' = 3 z^2.
                let (fr, fi) = cubic_minus_one(u);
                let dr = 3.0 * (u.x * u.x - u.y * u.y);
                let di = 6.0 * u.x * u.y;
                let s2 = 2.0 * scale;
                Vec2::new(s2 * (fr * dr + fi * di), s2 * (fi * dr - fr * di))
            }
            Kind::Custom { grad, .. } => grad(u),
        }
    }

    /// Value and gradient together.
    #[inline]
    pub fn eval_grad(&self, u: Vec2) -> (f64, Vec2) {
        match &self.kind {
            Kind::Canonical { scale } => {
                let (fr, fi) = cubic_minus_one(u);
                let dr = 3.0 * (u.x * u.x - u.y * u.y);
                let di = 6.0 * u.x * u.y;
                let s2 = 2.0 * scale;
                (
                    scale * (fr * fr + fi * fi),
                    Vec2::new(s2 * (fr * dr + fi * di), s2 * (fi * dr - fr * di)),
                )
            }
            Kind::Custom { eval, grad, .. } => (eval(u), grad(u)),
        }
    }

    pub fn hess(&self, u: Vec2) -> Sym2 {
        match &self.kind {
            Kind::Canonical { scale } => {
                let (fr, fi) = cubic_minus_one(u);
                // W_zz = s f'' conj(f), W_{z zbar} = s |f'|^2.
                let (gr, gi) = (6.0 * u.x, 6.0 * u.y);
                let wzz_r = scale * (gr * fr + gi * fi);
                let wzz_i = scale * (gi * fr - gr * fi);
                let d2 = 9.0 * u.norm2() * u.norm2();
                let wzzb = scale * d2;
                Sym2 {
                    xx: 2.0 * wzzb + 2.0 * wzz_r,
                    yy: 2.0 * wzzb - 2.0 * wzz_r,
                    xy: -2.0 * wzz_i,
                }
            }
            Kind::Custom { hess, .. } => hess(u),
        }
    }

    /// Distance to the nearest well and its index.
    #[inline]
    pub fn nearest_well(&self, u: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, a) in self.wells.iter().enumerate() {
            let d = u.dist(*a);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn min_separation(&self) -> f64 {
        let w = &self.wells;
        w[0].dist(w[1]).min(w[0].dist(w[2])).min(w[1].dist(w[2]))
    }

    /// Radius of the smallest disk about the origin containing the wells.
    pub fn well_radius(&self) -> f64 {
        self.wells.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Bound on the Hessian norm over `|u| <= radius`, sampled.
    pub fn hess_bound(&self, radius: f64) -> f64 {
        let mut m: f64 = 0.0;
        let nr = 24;
        let na = 96;
        for ir in 0..=nr {
            let r = radius * ir as f64 / nr as f64;
            for ia in 0..na {
                let t = std::f64::consts::TAU * ia as f64 / na as f64;
                m = m.max(self.hess(Vec2::polar(r, t)).norm());
            }
        }
        m
    }

    pub fn report(&self, violations: Vec<String>) -> CertificationReport {
        CertificationReport {
            wells: self.wells,
            c1: self.constants.c1,
            c2: self.constants.c2,
            m: self.constants.m,
            delta_w: self.constants.delta_w,
            c_w: self.constants.c_w,
            cap_c_w: self.constants.cap_c_w,
            certified: self.constants.certified,
            violations,
        }
    }
}

#[inline]
fn cubic_minus_one(u: Vec2) -> (f64, f64) {
    let x2 = u.x * u.x;
    let y2 = u.y * u.y;
    (u.x * (x2 - 3.0 * y2) - 1.0, u.y * (3.0 * x2 - y2))
}

/// JSON form of a certified well system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationReport {
    pub wells: [Vec2; 3],
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "deltaW")]
    pub delta_w: f64,
    #[serde(rename = "cW")]
    pub c_w: f64,
    #[serde(rename = "CW")]
    pub cap_c_w: f64,
    pub certified: bool,
    pub violations: Vec<String>,
}

/// Default sphere radii tried by [`certify_constants`].
pub const DEFAULT_DELTA_GRID: [f64; 8] = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

/// Fills `c1, c2, M, deltaW, cW, CW` by sampling.
///
/// For each trial radius the ratio `W / (delta^2 / 2)` is sampled on the spheres
/// `|u - a_i| = delta`; a radius passes when that ratio stays positive and
/// `W >= cW delta^2 / 2` also holds on sampled points farther than `delta`
/// from every well. `deltaW` is the largest radius such that it and all
/// smaller grid radii pass.
pub fn certify_constants(
    ws: &WellSystem,
    delta_grid: &[f64],
    sample_count: usize,
) -> Result<(WellSystem, Vec<String>)> {
    if delta_grid.is_empty() || delta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("delta grid must be strictly increasing".into()));
    }
    if delta_grid[0] <= 0.0 || delta_grid[delta_grid.len() - 1] >= 0.5 * ws.min_separation() {
        return Err(Error::InvalidParameter(
            "delta grid must lie in (0, half the minimal well separation)".into(),
        ));
    }
    let n = sample_count.max(16);
    let mut out = ws.clone();
    let mut violations = Vec::new();

    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for a in &ws.wells {
        let (lo, hi) = ws.hess(*a).eigenvalues();
        c1 = c1.min(lo);
        c2 = c2.max(hi);
        let w0 = ws.eval(*a);
        let g0 = ws.grad(*a).norm();
        if w0.abs() > 1e-12 || g0 > 1e-10 {
            violations.push(format!("well {a:?}: W = {w0:e}, |W_u| = {g0:e}"));
        }
    }
    if c1 <= 0.0 {
        return Err(Error::CertificationFailed(format!(
            "Hessian at a well is not positive definite (smallest eigenvalue {c1})"
        )));
    }

    out.constants.c1 = c1;
    out.constants.c2 = c2;
    out.constants.m = certify_outer_radius(ws, n);

    // Far-field samples: a square grid covering |u| <= M + 1.
    let extent = out.constants.m + 1.0;
    let far: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let u = Vec2::new(
                -extent + 2.0 * extent * i as f64 / (n - 1) as f64,
                -extent + 2.0 * extent * j as f64 / (n - 1) as f64,
            );
            (ws.nearest_well(u).1, ws.eval(u))
        })
        .collect();

    let (mut c_w, mut cap_c_w) = (f64::INFINITY, 0.0f64);
    let mut delta_w = None;
    for &delta in delta_grid {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for a in &ws.wells {
            for k in 0..n {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                let u = *a + Vec2::polar(delta, t);
                let ratio = ws.eval(u) / (0.5 * delta * delta);
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        let c_try = c_w.min(lo);
        let mut first_violation = None;
        if c_try <= 0.0 {
            first_violation = Some(format!("W vanishes on the sphere of radius {delta}"));
        } else {
            for &(d, w) in &far {
                if d >= delta && w < 0.5 * c_try * delta * delta {
                    first_violation = Some(format!(
                        "W = {w:e} < cW delta^2/2 at distance {d} >= delta = {delta}"
                    ));
                    break;
                }
            }
        }
        match first_violation {
            None => {
                c_w = c_try;
                cap_c_w = cap_c_w.max(hi);
                delta_w = Some(delta);
            }
            Some(v) => {
                if delta_w.is_none() {
                    return Err(Error::CertificationFailed(v));
                }
                violations.push(v);
                break;
            }
        }
    }
    out.constants.delta_w = delta_w.unwrap_or(0.0);
    out.constants.c_w = c_w;
    out.constants.cap_c_w = cap_c_w;
    out.constants.certified = true;
    Ok((out, violations))
}

/// Smallest sampled radius beyond which `W_u(u) . u > 0` on every sampled
/// circle out to ten times the well radius.
fn certify_outer_radius(ws: &WellSystem, n: usize) -> f64 {
    let r0 = ws.well_radius();
    let r_max = 10.0 * r0.max(1.0);
    let steps = 400;
    let dr = (r_max - r0) / steps as f64;
    let mut m = r_max;
    for s in (0..=steps).rev() {
        let r = r0 + dr * s as f64;
        let ok = (0..n).all(|k| {
            let u = Vec2::polar(r, std::f64::consts::TAU * (k as f64 + 0.5) / n as f64);
            ws.grad(u).dot(u) > 0.0
        });
        if !ok {
            break;
        }
        m = r;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_must_be_positive() {
        assert!(canonical_wellsystem(0.0).is_err());
        assert!(canonical_wellsystem(-1.0).is_err());
    }

    #[test]
    fn hessian_at_wells_is_isotropic() {
        let ws = canonical_wellsystem(1.0).unwrap();
        for a in ws.wells {
            let h = ws.hess(a);
            assert!((h.xx - 18.0).abs() < 1e-12 && (h.yy - 18.0).abs() < 1e-12 && h.xy.abs() < 1e-12);
        }
    }

    #[test]
    fn eval_grad_consistent() {
        let ws = canonical_wellsystem(2.5).unwrap();
        let u = Vec2::new(0.3, -0.7);
        let (w, g) = ws.eval_grad(u);
        assert_eq!(w, ws.eval(u));
        assert_eq!(g, ws.grad(u));
    }
}
