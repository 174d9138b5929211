//! Fermat point, triods, the triple-junction map and the closed-form
//! one-variable minimization used by the slicing lower bound.

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Fermat point of three points and how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermatPoint {
    pub point: Vec2,
    /// Index of the vertex when an angle of the triangle is at least 120 degrees.
    pub vertex: Option<usize>,
    /// Collinear input: the middle point is returned.
    pub degenerate: bool,
}

fn sum_dist(p: Vec2, v: &[Vec2; 3]) -> f64 {
    v.iter().map(|q| p.dist(*q)).sum()
}

/// Interior angle of the triangle at vertex `p` with neighbours `q`, `r`.
fn corner_angle(p: Vec2, q: Vec2, r: Vec2) -> f64 {
    let (u, v) = (q - p, r - p);
    u.cross(v).abs().atan2(u.dot(v))
}

/// Point minimizing `|PA| + |PB| + |PC|`.
pub fn fermat_point(a: Vec2, b: Vec2, c: Vec2) -> Result<FermatPoint> {
    let v = [a, b, c];
    let scale = a.dist(b).max(b.dist(c)).max(a.dist(c));
    if !(scale.is_finite()) || a.dist(b) <= 1e-14 * scale || b.dist(c) <= 1e-14 * scale || a.dist(c) <= 1e-14 * scale || scale == 0.0 {
        return Err(Error::InvalidParameter("Fermat point needs three distinct finite points".into()));
    }
    if (b - a).cross(c - a).abs() <= 1e-12 * scale * scale {
        // The middle point of three collinear points.
        let dir = (b - a).normalized();
        let mut order = [(0.0, 0usize), ((b - a).dot(dir), 1), ((c - a).dot(dir), 2)];
        order.sort_by(|x, y| x.0.total_cmp(&y.0));
        let k = order[1].1;
        return Ok(FermatPoint { point: v[k], vertex: Some(k), degenerate: true });
    }
    for k in 0..3 {
        if corner_angle(v[k], v[(k + 1) % 3], v[(k + 2) % 3]) >= 2.0 * PI / 3.0 {
            return Ok(FermatPoint { point: v[k], vertex: Some(k), degenerate: false });
        }
    }
    // Torricelli: lines from each vertex to the apex of the outward equilateral
    // triangle on the opposite side meet at the Fermat point.
    let apex = |p: Vec2, q: Vec2, opposite: Vec2| {
        let e1 = p + (q - p).rotate(PI / 3.0);
        let e2 = p + (q - p).rotate(-PI / 3.0);
        let side = |e: Vec2| (q - p).cross(e - p).signum() != (q - p).cross(opposite - p).signum();
        if side(e1) {
            e1
        } else {
            e2
        }
    };
    let ea = apex(b, c, a);
    let eb = apex(c, a, b);
    let (d1, d2) = (ea - a, eb - b);
    let det = d1.cross(d2);
    let mut p = if det.abs() > 1e-300 {
        a + d1 * ((b - a).cross(d2) / det)
    } else {
        (a + b + c) / 3.0
    };
    if !p.is_finite() {
        p = (a + b + c) / 3.0;
    }
    p = polish(p, &v, scale);
    Ok(FermatPoint { point: p, vertex: None, degenerate: false })
}

/// Newton steps on the sum of distances, falling back to Weiszfeld steps when
/// Newton fails to decrease it.
fn polish(mut p: Vec2, v: &[Vec2; 3], scale: f64) -> Vec2 {
    for _ in 0..50 {
        let mut g = Vec2::ZERO;
        let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
        let mut near_vertex = false;
        for q in v {
            let d = p - *q;
            let r = d.norm();
            if r < 1e-15 * scale {
                near_vertex = true;
                break;
            }
            let u = d / r;
            g += u;
            hxx += (1.0 - u.x * u.x) / r;
            hxy += -u.x * u.y / r;
            hyy += (1.0 - u.y * u.y) / r;
        }
        if near_vertex || g.norm() < 1e-15 {
            break;
        }
        let det = hxx * hyy - hxy * hxy;
        let f0 = sum_dist(p, v);
        let newton = Vec2::new((hyy * g.x - hxy * g.y) / det, (-hxy * g.x + hxx * g.y) / det);
        let cand = p - newton;
        if det > 0.0 && cand.is_finite() && sum_dist(cand, v) <= f0 {
            if (cand - p).norm() <= 1e-16 * scale {
                p = cand;
                break;
            }
            p = cand;
            continue;
        }
        // Weiszfeld step.
        let (mut num, mut den) = (Vec2::ZERO, 0.0);
        for q in v {
            let w = 1.0 / p.dist(*q);
            num += *q * w;
            den += w;
        }
        let cand = num / den;
        if sum_dist(cand, v) < f0 {
            p = cand;
        } else {
            break;
        }
    }
    p
}

/// Three anchors joined to their Fermat point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triod {
    /// Midpoint of the 1-2 transition.
    pub a: Vec2,
    /// Midpoint of the 1-3 transition.
    pub b: Vec2,
    /// Midpoint of the 2-3 transition.
    pub c: Vec2,
    pub d: Vec2,
    pub vertex: Option<usize>,
    pub degenerate: bool,
}

impl Triod {
    pub fn new(a: Vec2, b: Vec2, c: Vec2) -> Result<Triod> {
        let f = fermat_point(a, b, c)?;
        Ok(Triod { a, b, c, d: f.point, vertex: f.vertex, degenerate: f.degenerate })
    }

    /// Symmetric triod with anchors at angles 90, 210 and 330 degrees on the
    /// circle of radius `r` (junction at the origin).
    pub fn symmetric(r: f64) -> Triod {
        let a = Vec2::polar(r, PI / 2.0);
        let b = Vec2::polar(r, PI / 2.0 + 2.0 * PI / 3.0);
        let c = Vec2::polar(r, PI / 2.0 - 2.0 * PI / 3.0);
        Triod { a, b, c, d: Vec2::ZERO, vertex: None, degenerate: false }
    }

    pub fn anchors(&self) -> [Vec2; 3] {
        [self.a, self.b, self.c]
    }

    /// `|DA|, |DB|, |DC|`.
    pub fn lengths(&self) -> [f64; 3] {
        [self.d.dist(self.a), self.d.dist(self.b), self.d.dist(self.c)]
    }

    pub fn total_length(&self) -> f64 {
        self.lengths().iter().sum()
    }

    /// Angle of `D -> A` in (0, 2 pi].
    pub fn theta(&self) -> f64 {
        to_half_open(self.ray(0).angle())
    }

    /// Angles `ADB`, `BDC`, `CDA` at the junction.
    pub fn angles_at_d(&self) -> [f64; 3] {
        let r = [self.ray(0), self.ray(1), self.ray(2)];
        let ang = |u: Vec2, v: Vec2| u.cross(v).abs().atan2(u.dot(v));
        [ang(r[0], r[1]), ang(r[1], r[2]), ang(r[2], r[0])]
    }

    /// Unit direction of the ray from D toward anchor `k`. When D coincides
    /// with that anchor, the exterior bisector at the vertex is used.
    pub fn ray(&self, k: usize) -> Vec2 {
        let v = self.anchors();
        let d = v[k] - self.d;
        let scale = v[0].dist(v[1]).max(v[1].dist(v[2])).max(v[0].dist(v[2]));
        if d.norm() > 1e-12 * scale {
            return d.normalized();
        }
        let p = (v[(k + 1) % 3] - v[k]).normalized();
        let q = (v[(k + 2) % 3] - v[k]).normalized();
        let bis = -(p + q);
        if bis.norm() > 1e-12 {
            bis.normalized()
        } else {
            p.perp()
        }
    }

    /// Region index (0, 1, 2 for the phases 1, 2, 3) of `z`: phase 1 lies
    /// between rays DA and DB, phase 2 between DA and DC, phase 3 between DB
    /// and DC. Points on a ray go to the lower index.
    pub fn classify(&self, z: Vec2) -> usize {
        let w = z - self.d;
        let r = w.norm();
        if r == 0.0 {
            return 0;
        }
        let rays = [self.ray(0), self.ray(1), self.ray(2)];
        let on_ray = |u: Vec2| u.cross(w).abs() <= 1e-12 * r && u.dot(w) > 0.0;
        if on_ray(rays[0]) || on_ray(rays[1]) {
            return 0;
        }
        if on_ray(rays[2]) {
            return 1;
        }
        let base = rays[0].angle();
        let rel = |u: Vec2| (u.angle() - base).rem_euclid(TAU);
        let (pz, pb, pc) = (rel(w), rel(rays[1]), rel(rays[2]));
        if pb < pc {
            if pz < pb {
                0
            } else if pz < pc {
                2
            } else {
                1
            }
        } else if pz < pc {
            1
        } else if pz < pb {
            2
        } else {
            0
        }
    }

    /// Distance from `z` to the union of the three segments.
    pub fn distance(&self, z: Vec2) -> f64 {
        self.anchors()
            .iter()
            .map(|&p| segment_distance(z, self.d, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when no perturbation of D by `h` in 16 directions decreases the
    /// total length.
    pub fn is_locally_minimal(&self, h: f64) -> bool {
        let v = self.anchors();
        let f0 = sum_dist(self.d, &v);
        (0..16).all(|k| sum_dist(self.d + Vec2::polar(h, TAU * k as f64 / 16.0), &v) >= f0 - 1e-12 * f0)
    }

    /// Image under `z -> s z`.
    pub fn scaled(&self, s: f64) -> Triod {
        Triod { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s, ..*self }
    }
}

/// Maps an angle to (0, 2 pi].
pub fn to_half_open(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r == 0.0 {
        TAU
    } else {
        r
    }
}

/// Distance from `z` to the segment `p q`.
pub fn segment_distance(z: Vec2, p: Vec2, q: Vec2) -> f64 {
    let d = q - p;
    let l2 = d.norm2();
    if l2 == 0.0 {
        return z.dist(p);
    }
    let t = ((z - p).dot(d) / l2).clamp(0.0, 1.0);
    z.dist(p + d * t)
}

/// The piecewise-constant triple-junction map `z -> a_{region(z)}`.
#[derive(Clone, Copy, Debug)]
pub struct JunctionMap {
    pub triod: Triod,
    pub wells: [Vec2; 3],
}

impl JunctionMap {
    pub fn new(triod: Triod, wells: [Vec2; 3]) -> Self {
        JunctionMap { triod, wells }
    }

    pub fn eval(&self, z: Vec2) -> Vec2 {
        self.wells[self.triod.classify(z)]
    }
}

/// `(yA - y*) + sqrt((xC - xB)^2 + (2 y* - yB - yC)^2)`.
pub fn appendix_f(ystar: f64, ya: f64, yb: f64, yc: f64, xb: f64, xc: f64) -> f64 {
    (ya - ystar) + ((xc - xb).powi(2) + (2.0 * ystar - yb - yc).powi(2)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YstarMin {
    pub ystar: f64,
    pub fmin: f64,
    /// `3 (2 y* - yB - yC)^2 - (xC - xB)^2`.
    #[serde(rename = "stationarityResidual")]
    pub stationarity_residual: f64,
    pub degenerate: bool,
}

/// Closed-form minimizer of [`appendix_f`] over `y*`.
pub fn appendix_ystar_min(ya: f64, yb: f64, yc: f64, xb: f64, xc: f64) -> Result<YstarMin> {
    if xc < xb {
        return Err(Error::InvalidParameter(format!("need xC >= xB, got xB = {xb}, xC = {xc}")));
    }
    let degenerate = xc == xb;
    let ystar = 0.5 * (yb + yc + (xc - xb) / 3f64.sqrt());
    let fmin = appendix_f(ystar, ya, yb, yc, xb, xc);
    let stationarity_residual = 3.0 * (2.0 * ystar - yb - yc).powi(2) - (xc - xb).powi(2);
    Ok(YstarMin { ystar, fmin, stationarity_residual, degenerate })
}

/// `1 - min(1/6, (1 - alpha)/2)`.
pub fn beta_of_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(1.0 - (1.0f64 / 6.0).min(0.5 * (1.0 - alpha)))
}
