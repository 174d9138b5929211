//! Vector fields on a Cartesian grid masked to a disk.
//!
//! The discrete energy is
//!
//! ```text
//! E(u) = sum over edges pq between active nodes of ½|u_p − u_q|²
//!      + sum over active nodes p of h² W(u_p)
//! ```
//!
//! so each edge stands for one `h × h` cell worth of one gradient component.
//! Its exact gradient at a node is `h² (−Δ_h u + W_u(u))` where the discrete
//! Laplacian only sees active neighbours.

use crate::error::{Error, Result};
use crate::par;
use crate::potential::WellSystem;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::{BufRead, Write};

/// Rows per work chunk in the grid kernels.
const ROW_CHUNK: usize = 4;

/// Width of the Dirichlet band in grid steps.
pub const BAND_CELLS: f64 = 2.0;

/// Boundary values as a function of the polar angle.
pub trait Trace: Send + Sync {
    fn at(&self, angle: f64) -> Vec2;
}

impl<F: Fn(f64) -> Vec2 + Send + Sync> Trace for F {
    fn at(&self, angle: f64) -> Vec2 {
        self(angle)
    }
}

/// Constant boundary data.
#[derive(Clone, Copy, Debug)]
pub struct ConstantTrace(pub Vec2);

impl Trace for ConstantTrace {
    fn at(&self, _angle: f64) -> Vec2 {
        self.0
    }
}

/// Square node grid on `[−R, R]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub radius: f64,
    pub h: f64,
    /// Nodes per side.
    pub n: usize,
}

impl Grid {
    pub fn new(radius: f64, h: f64) -> Result<Grid> {
        if !(radius > 0.0 && h > 0.0) {
            return Err(Error::InvalidParameter(format!("need R > 0 and h > 0, got R = {radius}, h = {h}")));
        }
        let cells = radius / h;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 4.0 {
            return Err(Error::InvalidParameter(format!("R / h must be an integer >= 4, got {cells}")));
        }
        Ok(Grid { radius, h, n: 2 * cells.round() as usize + 1 })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + self.h * i as f64
    }

    #[inline]
    pub fn pos(&self, k: usize) -> Vec2 {
        Vec2::new(self.coord(k / self.n), self.coord(k % self.n))
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Inner radius of the Dirichlet band.
    pub fn band_radius(&self) -> f64 {
        self.radius - BAND_CELLS * self.h
    }

    #[inline]
    pub fn is_active(&self, z: Vec2) -> bool {
        z.norm2() <= self.radius * self.radius * (1.0 + 1e-12)
    }
}

/// Grid function on a disk with a Dirichlet band.
#[derive(Clone, Debug)]
pub struct Field2D {
    pub grid: Grid,
    /// One value per node of the square; inactive nodes hold the radial
    /// extension of the boundary data so bilinear sampling works up to `r = R`.
    pub values: Vec<Vec2>,
    pub active: Vec<bool>,
    pub dirichlet: Vec<bool>,
    /// Boundary nodes (active nodes with an inactive 4-neighbour) with their
    /// angles in [0, 2π), strictly increasing.
    pub ring: Vec<(usize, f64)>,
}

impl Field2D {
    /// Builds a field with `interior` on free nodes and `trace` on the band and
    /// outside the disk.
    pub fn from_fn<F>(grid: Grid, interior: F, trace: &dyn Trace) -> Field2D
    where
        F: Fn(Vec2) -> Vec2 + Sync,
    {
        let rb = grid.band_radius();
        let values: Vec<Vec2> = par::map_chunks(grid.n, ROW_CHUNK, |rows| {
            let mut out = Vec::with_capacity(rows.len() * grid.n);
            for i in rows {
                for j in 0..grid.n {
                    let z = grid.pos(grid.idx(i, j));
                    out.push(if z.norm() > rb { trace.at(z.angle()) } else { interior(z) });
                }
            }
            out
        })
        .concat();
        Field2D::from_values(grid, values)
    }

    /// Field whose value at every node is `f(z)` (band included).
    pub fn from_global_fn<F>(grid: Grid, f: F) -> Field2D
    where
        F: Fn(Vec2) -> Vec2 + Sync,
    {
        let values: Vec<Vec2> = par::map_chunks(grid.n, ROW_CHUNK, |rows| {
            let mut out = Vec::with_capacity(rows.len() * grid.n);
            for i in rows {
                for j in 0..grid.n {
                    out.push(f(grid.pos(grid.idx(i, j))));
                }
            }
            out
        })
        .concat();
        Field2D::from_values(grid, values)
    }

    /// Wraps node values; masks and ring are derived from the grid.
    pub fn from_values(grid: Grid, values: Vec<Vec2>) -> Field2D {
        assert_eq!(values.len(), grid.len());
        let rb = grid.band_radius();
        let mut active = vec![false; grid.len()];
        let mut dirichlet = vec![false; grid.len()];
        for k in 0..grid.len() {
            let z = grid.pos(k);
            active[k] = grid.is_active(z);
            dirichlet[k] = active[k] && z.norm() > rb;
        }
        let n = grid.n;
        let mut ring: Vec<(usize, f64, f64)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let k = grid.idx(i, j);
                if !active[k] {
                    continue;
                }
                let edge = i == 0 || j == 0 || i == n - 1 || j == n - 1;
                let outside = edge
                    || !active[grid.idx(i - 1, j)]
                    || !active[grid.idx(i + 1, j)]
                    || !active[grid.idx(i, j - 1)]
                    || !active[grid.idx(i, j + 1)];
                if outside {
                    let z = grid.pos(k);
                    ring.push((k, z.angle().rem_euclid(TAU), z.norm()));
                }
            }
        }
        ring.sort_by(|a, b| a.1.total_cmp(&b.1).then(b.2.total_cmp(&a.2)));
        ring.dedup_by(|b, a| b.1 == a.1);
        let ring = ring.into_iter().map(|(k, t, _)| (k, t)).collect();
        Field2D { grid, values, active, dirichlet, ring }
    }

    pub fn radius(&self) -> f64 {
        self.grid.radius
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Bilinear interpolation of the node values (clamped to the square).
    pub fn sample(&self, z: Vec2) -> Vec2 {
        let g = &self.grid;
        let fx = ((z.x + g.radius) / g.h).clamp(0.0, (g.n - 1) as f64);
        let fy = ((z.y + g.radius) / g.h).clamp(0.0, (g.n - 1) as f64);
        let i = (fx.floor() as usize).min(g.n - 2);
        let j = (fy.floor() as usize).min(g.n - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v00 = self.values[g.idx(i, j)];
        let v10 = self.values[g.idx(i + 1, j)];
        let v01 = self.values[g.idx(i, j + 1)];
        let v11 = self.values[g.idx(i + 1, j + 1)];
        (v00 * (1.0 - tx) + v10 * tx) * (1.0 - ty) + (v01 * (1.0 - tx) + v11 * tx) * ty
    }

    /// Replaces band and outside values by `trace`.
    pub fn impose_trace(&mut self, trace: &dyn Trace) {
        let rb = self.grid.band_radius();
        for k in 0..self.grid.len() {
            let z = self.grid.pos(k);
            if z.norm() > rb {
                self.values[k] = trace.at(z.angle());
            }
        }
    }

    /// Largest `|u|` over active nodes.
    pub fn max_amplitude(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Free (active, non-Dirichlet) node indices.
    pub fn free_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(|&k| self.active[k] && !self.dirichlet[k])
    }

    /// Writes the text format: header `R h n`, then `x y u1 u2` per active node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.grid.radius, self.grid.h, self.active_count())?;
        for k in 0..self.grid.len() {
            if self.active[k] {
                let z = self.grid.pos(k);
                let v = self.values[k];
                writeln!(w, "{:.17e} {:.17e} {:.17e} {:.17e}", z.x, z.y, v.x, v.y)?;
            }
        }
        Ok(())
    }

    /// Reads the format of [`Field2D::write_csv`]. Nodes outside the disk take
    /// the value of the active node found by stepping radially inward.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Field2D> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
        let hv: Vec<&str> = header.split_whitespace().collect();
        if hv.len() != 3 {
            return Err(Error::Parse(format!("bad header '{header}'")));
        }
        let pf = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
        let grid = Grid::new(pf(hv[0])?, pf(hv[1])?)?;
        let count: usize = hv[2].parse().map_err(|e| Error::Parse(format!("'{}': {e}", hv[2])))?;
        let mut values = vec![Vec2::ZERO; grid.len()];
        let mut seen = vec![false; grid.len()];
        let mut rows = 0;
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let f: Vec<&str> = t.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("bad row '{t}'")));
            }
            let (x, y) = (pf(f[0])?, pf(f[1])?);
            let i = ((x + grid.radius) / grid.h).round();
            let j = ((y + grid.radius) / grid.h).round();
            if i < 0.0 || j < 0.0 || i as usize >= grid.n || j as usize >= grid.n {
                return Err(Error::Parse(format!("node ({x}, {y}) outside the grid")));
            }
            let k = grid.idx(i as usize, j as usize);
            values[k] = Vec2::new(pf(f[2])?, pf(f[3])?);
            seen[k] = true;
            rows += 1;
        }
        if rows != count {
            return Err(Error::Parse(format!("header announces {count} rows, found {rows}")));
        }
        let mut field = Field2D::from_values(grid, values);
        for k in 0..grid.len() {
            if field.active[k] && !seen[k] {
                return Err(Error::Parse(format!("missing active node {:?}", grid.pos(k))));
            }
        }
        let inner = grid.radius - grid.h;
        for k in 0..grid.len() {
            if !field.active[k] {
                let z = grid.pos(k);
                let p = z * (inner / z.norm());
                let i = ((p.x + grid.radius) / grid.h).round() as usize;
                let j = ((p.y + grid.radius) / grid.h).round() as usize;
                field.values[k] = field.values[grid.idx(i, j)];
            }
        }
        Ok(field)
    }
}

/// Energy split into parts.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    #[serde(rename = "dirichletPart")]
    pub dirichlet_part: f64,
    #[serde(rename = "potentialPart")]
    pub potential_part: f64,
    #[serde(rename = "perRegion")]
    pub per_region: BTreeMap<String, f64>,
    #[serde(rename = "boundaryLineEnergy")]
    pub boundary_line_energy: Option<f64>,
    /// Set when the region contains no active node.
    pub empty: bool,
}

/// Optional subregion selector for [`energy`].
pub type Region<'a> = &'a (dyn Fn(Vec2) -> bool + Sync);

/// Discrete energy over the active nodes and edges in `region` (edges are
/// assigned by midpoint, potential terms by node).
pub fn energy(f: &Field2D, ws: &WellSystem, region: Option<Region>) -> EnergyBreakdown {
    let g = &f.grid;
    let n = g.n;
    let h2 = g.h * g.h;
    let parts = par::map_chunks(n, ROW_CHUNK, |rows| {
        let (mut kin, mut pot, mut count) = (0.0, 0.0, 0usize);
        for i in rows {
            for j in 0..n {
                let k = g.idx(i, j);
                if !f.active[k] {
                    continue;
                }
                let z = g.pos(k);
                let u = f.values[k];
                if region.is_none_or(|r| r(z)) {
                    pot += h2 * ws.eval(u);
                    count += 1;
                }
                if i + 1 < n && f.active[k + n] {
                    let mid = Vec2::new(z.x + 0.5 * g.h, z.y);
                    if region.is_none_or(|r| r(mid)) {
                        kin += 0.5 * (f.values[k + n] - u).norm2();
                    }
                }
                if j + 1 < n && f.active[k + 1] {
                    let mid = Vec2::new(z.x, z.y + 0.5 * g.h);
                    if region.is_none_or(|r| r(mid)) {
                        kin += 0.5 * (f.values[k + 1] - u).norm2();
                    }
                }
            }
        }
        (kin, pot, count)
    });
    let (mut kin, mut pot, mut count) = (0.0, 0.0, 0);
    for (a, b, c) in parts {
        kin += a;
        pot += b;
        count += c;
    }
    EnergyBreakdown {
        total: kin + pot,
        dirichlet_part: kin,
        potential_part: pot,
        per_region: BTreeMap::new(),
        boundary_line_energy: None,
        empty: count == 0,
    }
}

/// Energy with the split over a three-region partition (labels `D1..D3`).
pub fn energy_partition<C>(f: &Field2D, ws: &WellSystem, classify: C) -> EnergyBreakdown
where
    C: Fn(Vec2) -> usize + Sync,
{
    let mut e = energy(f, ws, None);
    for r in 0..3 {
        let pred = |z: Vec2| classify(z) == r;
        e.per_region.insert(format!("D{}", r + 1), energy(f, ws, Some(&pred)).total);
    }
    e
}

/// Total energy only (fast path of [`energy`]).
pub fn energy_total(f: &Field2D, ws: &WellSystem) -> f64 {
    energy_and_gradient(f, ws, None)
}

/// Energy and, if requested, its gradient with respect to the free nodes
/// (zero on the band and outside the disk).
pub fn energy_and_gradient(f: &Field2D, ws: &WellSystem, grad: Option<&mut [Vec2]>) -> f64 {
    energy_and_gradient_values(&f.grid, &f.active, &f.dirichlet, &f.values, ws, grad)
}

/// Kernel behind [`energy_and_gradient`] on raw arrays.
pub fn energy_and_gradient_values(
    g: &Grid,
    active: &[bool],
    dirichlet: &[bool],
    values: &[Vec2],
    ws: &WellSystem,
    grad: Option<&mut [Vec2]>,
) -> f64 {
    let n = g.n;
    let h2 = g.h * g.h;
    let row_energy = |i: usize, mut gout: Option<&mut [Vec2]>| -> f64 {
        let mut e = 0.0;
        for j in 0..n {
            let k = i * n + j;
            if !active[k] {
                if let Some(go) = gout.as_deref_mut() {
                    go[j] = Vec2::ZERO;
                }
                continue;
            }
            let u = values[k];
            let (w, wu) = ws.eval_grad(u);
            e += h2 * w;
            if i + 1 < n && active[k + n] {
                e += 0.5 * (values[k + n] - u).norm2();
            }
            if j + 1 < n && active[k + 1] {
                e += 0.5 * (values[k + 1] - u).norm2();
            }
            if let Some(go) = gout.as_deref_mut() {
                if dirichlet[k] {
                    go[j] = Vec2::ZERO;
                } else {
                    let mut s = wu * h2;
                    if i > 0 && active[k - n] {
                        s += u - values[k - n];
                    }
                    if i + 1 < n && active[k + n] {
                        s += u - values[k + n];
                    }
                    if j > 0 && active[k - 1] {
                        s += u - values[k - 1];
                    }
                    if j + 1 < n && active[k + 1] {
                        s += u - values[k + 1];
                    }
                    go[j] = s;
                }
            }
        }
        e
    };
    match grad {
        None => par::sum_chunks(n, ROW_CHUNK, |rows| rows.map(|i| row_energy(i, None)).sum()),
        Some(gr) => {
            let chunk = ROW_CHUNK * n;
            let parts = std::sync::Mutex::new(vec![0.0; n.div_ceil(ROW_CHUNK)]);
            par::for_each_chunk_mut(gr, chunk, |start, slice| {
                let i0 = start / n;
                let mut e = 0.0;
                for (r, row) in slice.chunks_mut(n).enumerate() {
                    e += row_energy(i0 + r, Some(row));
                }
                parts.lock().unwrap()[i0 / ROW_CHUNK] = e;
            });
            parts.into_inner().unwrap().into_iter().sum()
        }
    }
}

/// Gradient of the discrete energy with respect to the free nodal values.
pub fn energy_gradient(f: &Field2D, ws: &WellSystem) -> Vec<Vec2> {
    let mut g = vec![Vec2::ZERO; f.grid.len()];
    energy_and_gradient(f, ws, Some(&mut g));
    g
}

/// Largest `|−Δ_h u + W_u(u)|` over free nodes.
pub fn euler_lagrange_residual(f: &Field2D, ws: &WellSystem) -> f64 {
    let g = energy_gradient(f, ws);
    let h2 = f.grid.h * f.grid.h;
    g.iter().map(|v| v.norm()).fold(0.0, f64::max) / h2
}

/// Result of [`boundary_line_energy`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LineEnergy {
    /// `∮ ½|∂_T u|² + W(u)`, or `+∞` for non-smooth data.
    pub total: f64,
    pub tangential: f64,
    pub potential: f64,
    pub smooth: bool,
    pub samples: usize,
}

/// Angular samples used on a circle of radius `r` at grid spacing `h`.
pub fn circle_samples(r: f64, h: f64) -> usize {
    ((TAU * r / (0.5 * h)).ceil() as usize).max(64)
}

/// Line energy of a closed curve sampled at equal spacing `ds`.
pub fn closed_curve_energy(ws: &WellSystem, u: &[Vec2], ds: f64, jump_limit: f64) -> LineEnergy {
    let m = u.len();
    let (mut tan, mut pot, mut max_slope) = (0.0, 0.0, 0.0f64);
    for k in 0..m {
        let d = u[(k + 1) % m] - u[k];
        tan += 0.5 * d.norm2() / ds;
        pot += ds * ws.eval(u[k]);
        max_slope = max_slope.max(d.norm() / ds);
    }
    let smooth = max_slope <= jump_limit;
    LineEnergy {
        total: if smooth { tan + pot } else { f64::INFINITY },
        tangential: tan,
        potential: pot,
        smooth,
        samples: m,
    }
}

/// `∮_{|z| = r} ½|∂_T u|² + W(u)` with bilinear sampling and the trapezoid
/// rule in angle. Data whose discrete slope exceeds half the minimal well
/// separation per grid step is reported as `+∞` and flagged non-smooth.
pub fn boundary_line_energy(f: &Field2D, ws: &WellSystem, r: f64) -> Result<LineEnergy> {
    let h = f.grid.h;
    if r < 4.0 * h || r > f.grid.radius * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("circle radius {r} outside [4h, R]")));
    }
    let m = circle_samples(r, h);
    let u: Vec<Vec2> = (0..m).map(|k| f.sample(Vec2::polar(r, TAU * k as f64 / m as f64))).collect();
    Ok(closed_curve_energy(ws, &u, TAU * r / m as f64, 0.5 * ws.min_separation() / h))
}

/// Line energy of a trace on the circle of radius `r`, sampled at `m` angles.
pub fn trace_line_energy(trace: &dyn Trace, ws: &WellSystem, r: f64, m: usize, h: f64) -> LineEnergy {
    let u: Vec<Vec2> = (0..m).map(|k| trace.at(TAU * k as f64 / m as f64)).collect();
    closed_curve_energy(ws, &u, TAU * r / m as f64, 0.5 * ws.min_separation() / h)
}

/// `u_R(z) = u(R z)` sampled onto a unit-disk grid with `target_n` cells per
/// unit length.
pub fn rescale_to_unit(f: &Field2D, target_n: usize) -> Result<Field2D> {
    if target_n < 64 {
        return Err(Error::InvalidParameter(format!("targetN must be at least 64, got {target_n}")));
    }
    let grid = Grid::new(1.0, 1.0 / target_n as f64)?;
    let r = f.grid.radius;
    Ok(Field2D::from_global_fn(grid, |z| {
        let z = if z.norm() > 1.0 { z / z.norm() } else { z };
        f.sample(z * r)
    }))
}

/// `∫ |f − g|` over the active nodes of `f` (node-centred midpoint rule).
pub fn l1_distance_fn<G>(f: &Field2D, g: G) -> f64
where
    G: Fn(Vec2) -> Vec2 + Sync,
{
    let gr = &f.grid;
    let h2 = gr.h * gr.h;
    par::sum_chunks(gr.n, ROW_CHUNK, |rows| {
        let mut s = 0.0;
        for i in rows {
            for j in 0..gr.n {
                let k = gr.idx(i, j);
                if f.active[k] {
                    s += h2 * (f.values[k] - g(gr.pos(k))).norm();
                }
            }
        }
        s
    })
}

/// `∫ |f − g|` for two fields on the same disk (`g` sampled bilinearly).
pub fn l1_distance(f: &Field2D, g: &Field2D) -> Result<f64> {
    if (f.grid.radius - g.grid.radius).abs() > 1e-12 * f.grid.radius {
        return Err(Error::InvalidParameter(format!(
            "radius mismatch: {} vs {}",
            f.grid.radius, g.grid.radius
        )));
    }
    if f.grid == g.grid {
        let h2 = f.grid.h * f.grid.h;
        return Ok((0..f.grid.len())
            .filter(|&k| f.active[k])
            .map(|k| h2 * (f.values[k] - g.values[k]).norm())
            .sum());
    }
    Ok(l1_distance_fn(f, |z| g.sample(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::canonical_wellsystem;

    #[test]
    fn grid_requires_integer_ratio() {
        assert!(Grid::new(8.0, 0.3).is_err());
        let g = Grid::new(8.0, 0.25).unwrap();
        assert_eq!(g.n, 65);
        assert_eq!(g.pos(g.idx(32, 32)), Vec2::ZERO);
    }

    #[test]
    fn ring_angles_strictly_increase() {
        let g = Grid::new(6.0, 0.25).unwrap();
        let f = Field2D::from_global_fn(g, |_| Vec2::ZERO);
        assert!(f.ring.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(f.ring.iter().all(|&(_, t)| (0.0..TAU).contains(&t)));
    }

    #[test]
    fn constant_well_has_zero_energy() {
        let ws = canonical_wellsystem(1.0).unwrap();
        let g = Grid::new(4.0, 0.25).unwrap();
        let f = Field2D::from_global_fn(g, |_| ws.wells[0]);
        assert_eq!(energy(&f, &ws, None).total, 0.0);
        assert!(energy_gradient(&f, &ws).iter().all(|v| v.norm() < 1e-14));
    }
}
