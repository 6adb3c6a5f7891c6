//! Effective potentials on the extended phase space.
//!
//! The all-orders form replaces the local potential by its symmetric average
//! over the `2^d` corner points `x_i +/- s_i`, plus the fluctuation barrier
//! `sum_i U / (2 s_i^2)`.

use crate::error::{Error, Result};
use crate::model::ClassicalPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffPotentialKind {
    SecondOrder,
    AllOrders,
}

/// 1-D potential with enough derivatives for the second-order form.
pub trait Potential1d {
    fn v(&self, x: f64) -> f64;
    fn dv(&self, x: f64) -> f64;
    fn d2v(&self, x: f64) -> f64;
}

/// Second-order or all-orders effective potential in one dimension.
pub fn v_eff_1d(kind: EffPotentialKind, pot: &dyn Potential1d, x: f64, s: f64, u: f64) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::domain("fluctuation coordinate s must be > 0"));
    }
    let barrier = 0.5 * u / (s * s);
    Ok(match kind {
        EffPotentialKind::SecondOrder => pot.v(x) + barrier + 0.5 * pot.d2v(x) * s * s,
        EffPotentialKind::AllOrders => barrier + 0.5 * (pot.v(x + s) + pot.v(x - s)),
    })
}

/// All-orders effective potential in `d` dimensions (exact `2^d`-corner average).
pub fn v_eff<P: ClassicalPotential + ?Sized>(pot: &P, x: &[f64], s: &[f64], u: f64) -> Result<f64> {
    let d = x.len();
    debug_assert_eq!(s.len(), d);
    let mut barrier = 0.0;
    for &si in s {
        if si <= 0.0 {
            return Err(Error::domain("fluctuation coordinate s must be > 0"));
        }
        barrier += 0.5 * u / (si * si);
    }
    let corners = 1usize << d;
    let mut corner = vec![0.0; d];
    let mut acc = 0.0;
    for mask in 0..corners {
        for i in 0..d {
            let sign = if mask & (1 << i) == 0 { 1.0 } else { -1.0 };
            corner[i] = x[i] + sign * s[i];
        }
        acc += pot.value(&corner)?;
    }
    Ok(barrier + acc / corners as f64)
}

/// Analytic gradient of the all-orders effective potential with respect to
/// the positions and the fluctuation coordinates.
pub fn grad_v_eff<P: ClassicalPotential + ?Sized>(
    pot: &P,
    x: &[f64],
    s: &[f64],
    u: f64,
    gx: &mut [f64],
    gs: &mut [f64],
) -> Result<()> {
    let d = x.len();
    debug_assert_eq!(s.len(), d);
    for i in 0..d {
        if s[i] <= 0.0 {
            return Err(Error::domain("fluctuation coordinate s must be > 0"));
        }
        gx[i] = 0.0;
        gs[i] = -u / (s[i] * s[i] * s[i]);
    }
    let corners = 1usize << d;
    let weight = 1.0 / corners as f64;
    let mut corner = vec![0.0; d];
    let mut grad = vec![0.0; d];
    for mask in 0..corners {
        for i in 0..d {
            let sign = if mask & (1 << i) == 0 { 1.0 } else { -1.0 };
            corner[i] = x[i] + sign * s[i];
        }
        pot.gradient(&corner, &mut grad)?;
        for i in 0..d {
            let sign = if mask & (1 << i) == 0 { 1.0 } else { -1.0 };
            gx[i] += weight * grad[i];
            gs[i] += weight * sign * grad[i];
        }
    }
    Ok(())
}

/// Effective potential of the 1-D Gaussian well `V = -D exp(-x^2)` with the
/// position fluctuation averaged exactly: for a normal spread of variance
/// `s^2`,
///
/// `<V>(x, s) = -D exp(-x^2 / (1 + 2 s^2)) / sqrt(1 + 2 s^2)`,
///
/// so `V_eff = U/(2 s^2) + <V>`. A term linear in the position (the field
/// coupling) is unchanged by the average and is added by the caller.
pub fn gaussian_well_v_eff(depth: f64, x: f64, s: f64, u: f64) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::domain("fluctuation coordinate s must be > 0"));
    }
    let q = 1.0 + 2.0 * s * s;
    Ok(0.5 * u / (s * s) - depth * (-x * x / q).exp() / q.sqrt())
}

/// Analytic `(dV_eff/dx, dV_eff/ds)` of [`gaussian_well_v_eff`].
pub fn gaussian_well_grad(depth: f64, x: f64, s: f64, u: f64) -> Result<(f64, f64)> {
    if s <= 0.0 {
        return Err(Error::domain("fluctuation coordinate s must be > 0"));
    }
    let q = 1.0 + 2.0 * s * s;
    let g = (-x * x / q).exp() / q.sqrt();
    let gx = 2.0 * depth * (x / q) * g;
    // d<V>/dq with dq/ds = 4s
    let dg_dq = g * (x * x / (q * q)) - 0.5 * g / q;
    let gs = -u / (s * s * s) - depth * dg_dq * 4.0 * s;
    Ok((gx, gs))
}

/// One level set of a scalar field on a rectangular grid, as polylines.
#[derive(Debug, Clone)]
pub struct ContourGrid {
    pub level: f64,
    /// Each polyline is a run of `(x, s)` vertices.
    pub polylines: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub nx: usize,
    pub ns: usize,
}

/// Marching-squares extraction of `f(x, s) = level` with linear root
/// placement along cell edges.
pub fn contour_lines<F: Fn(f64, f64) -> f64>(f: F, grid: &GridSpec, level: f64) -> ContourGrid {
    let (nx, ns) = (grid.nx, grid.ns);
    let dx = (grid.x_max - grid.x_min) / (nx - 1) as f64;
    let ds = (grid.s_max - grid.s_min) / (ns - 1) as f64;
    let mut vals = vec![0.0f64; nx * ns];
    for j in 0..ns {
        for i in 0..nx {
            vals[j * nx + i] = f(grid.x_min + i as f64 * dx, grid.s_min + j as f64 * ds);
        }
    }

    // Edge keys: (i, j, horizontal?) identifies the grid edge on which an
    // interpolated crossing lies, so shared segment endpoints can be chained.
    use std::collections::HashMap;
    type EdgeKey = (usize, usize, bool);
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();

    let interp = |a: f64, b: f64| {
        let t = (level - a) / (b - a);
        t.clamp(0.0, 1.0)
    };
    let edge_point = |key: EdgeKey, t: f64| -> (f64, f64) {
        let (i, j, horizontal) = key;
        if horizontal {
            (grid.x_min + (i as f64 + t) * dx, grid.s_min + j as f64 * ds)
        } else {
            (grid.x_min + i as f64 * dx, grid.s_min + (j as f64 + t) * ds)
        }
    };
    let mut edge_ts: HashMap<EdgeKey, f64> = HashMap::new();

    for j in 0..ns - 1 {
        for i in 0..nx - 1 {
            let v00 = vals[j * nx + i];
            let v10 = vals[j * nx + i + 1];
            let v01 = vals[(j + 1) * nx + i];
            let v11 = vals[(j + 1) * nx + i + 1];
            let b = |v: f64| v > level;
            let code = (b(v00) as u8) | (b(v10) as u8) << 1 | (b(v11) as u8) << 2 | (b(v01) as u8) << 3;
            if code == 0 || code == 15 {
                continue;
            }
            // cell edges: bottom (i,j,h), right (i+1,j,v), top (i,j+1,h), left (i,j,v)
            let bottom = (i, j, true);
            let right = (i + 1, j, false);
            let top = (i, j + 1, true);
            let left = (i, j, false);
            let mut crossings: Vec<(EdgeKey, f64)> = Vec::new();
            if b(v00) != b(v10) {
                crossings.push((bottom, interp(v00, v10)));
            }
            if b(v10) != b(v11) {
                crossings.push((right, interp(v10, v11)));
            }
            if b(v01) != b(v11) {
                crossings.push((top, interp(v01, v11)));
            }
            if b(v00) != b(v01) {
                crossings.push((left, interp(v00, v01)));
            }
            for (k, t) in &crossings {
                edge_ts.insert(*k, *t);
            }
            match crossings.len() {
                2 => segments.push((crossings[0].0, crossings[1].0)),
                4 => {
                    // saddle: resolve with the cell-center average
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    // crossings order: bottom, right, top, left
                    if (center > level) == b(v00) {
                        segments.push((crossings[0].0, crossings[1].0)); // bottom-right
                        segments.push((crossings[2].0, crossings[3].0)); // top-left
                    } else {
                        segments.push((crossings[0].0, crossings[3].0)); // bottom-left
                        segments.push((crossings[1].0, crossings[2].0)); // right-top
                    }
                }
                _ => {}
            }
        }
    }

    // chain segments that share an edge key into polylines
    let mut adjacency: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (idx, (a, b)) in segments.iter().enumerate() {
        adjacency.entry(*a).or_default().push(idx);
        adjacency.entry(*b).or_default().push(idx);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a0, b0) = segments[start];
        let mut chain = vec![a0, b0];
        // extend forward from b0, then backward from a0
        for dir in 0..2 {
            loop {
                let tip = if dir == 0 { *chain.last().unwrap() } else { chain[0] };
                let next = adjacency
                    .get(&tip)
                    .and_then(|ids| ids.iter().find(|&&id| !used[id]).copied());
                let Some(id) = next else { break };
                used[id] = true;
                let (a, b) = segments[id];
                let other = if a == tip { b } else { a };
                if dir == 0 {
                    chain.push(other);
                } else {
                    chain.insert(0, other);
                }
            }
        }
        let pts = chain
            .iter()
            .map(|k| edge_point(*k, *edge_ts.get(k).unwrap_or(&0.5)))
            .collect();
        polylines.push(pts);
    }

    ContourGrid { level, polylines }
}

#[cfg(test)]
pub mod testpot {
    use super::Potential1d;
    use crate::error::Result;
    use crate::model::ClassicalPotential;

    pub struct Free;
    impl Potential1d for Free {
        fn v(&self, _x: f64) -> f64 { 0.0 }
        fn dv(&self, _x: f64) -> f64 { 0.0 }
        fn d2v(&self, _x: f64) -> f64 { 0.0 }
    }
    impl ClassicalPotential for Free {
        fn dim(&self) -> usize { 1 }
        fn value(&self, _r: &[f64]) -> Result<f64> { Ok(0.0) }
        fn gradient(&self, _r: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = 0.0;
            Ok(())
        }
    }

    /// `V = k x^2 / 2`
    pub struct Harmonic(pub f64);
    impl Potential1d for Harmonic {
        fn v(&self, x: f64) -> f64 { 0.5 * self.0 * x * x }
        fn dv(&self, x: f64) -> f64 { self.0 * x }
        fn d2v(&self, _x: f64) -> f64 { self.0 }
    }
    impl ClassicalPotential for Harmonic {
        fn dim(&self) -> usize { 1 }
        fn value(&self, r: &[f64]) -> Result<f64> { Ok(0.5 * self.0 * r[0] * r[0]) }
        fn gradient(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = self.0 * r[0];
            Ok(())
        }
    }

    /// `V = c x`
    pub struct Linear(pub f64);
    impl Potential1d for Linear {
        fn v(&self, x: f64) -> f64 { self.0 * x }
        fn dv(&self, _x: f64) -> f64 { self.0 }
        fn d2v(&self, _x: f64) -> f64 { 0.0 }
    }
}
