//! The characteristic transform `f#(t, x, v) = f(t, x + v t, v)` on the
//! periodic spatial grid, its inverse, and the transformed collision term.
//!
//! Off-grid positions are evaluated by periodic multilinear interpolation.
//! Shifts within 1e-9 cells of an integer are snapped, so aligned shifts are
//! exact reindexing.

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::grid::{DistributionField, SpatialGrid, VelocityGrid};
use crate::par;

const SHIFT_SNAP: f64 = 1e-9;

/// Per-velocity integer shift and fractional weights along each axis.
struct ShiftPlan {
    whole: Vec<[i64; 3]>,
    frac: Vec<[f64; 3]>,
}

impl ShiftPlan {
    fn new(space: &SpatialGrid, velocity: &VelocityGrid, displacement_time: f64) -> Self {
        let h = space.spacing();
        let dim = space.dim();
        let mut whole = Vec::with_capacity(velocity.len());
        let mut frac = Vec::with_capacity(velocity.len());
        for iv in 0..velocity.len() {
            let v = velocity.node(iv);
            let mut k = [0i64; 3];
            let mut fr = [0.0; 3];
            for a in 0..dim {
                let mut s = v[a] * displacement_time / h;
                let r = s.round();
                if (s - r).abs() < SHIFT_SNAP {
                    s = r;
                }
                let fl = s.floor();
                k[a] = fl as i64;
                fr[a] = s - fl;
            }
            whole.push(k);
            frac.push(fr);
        }
        ShiftPlan { whole, frac }
    }
}

/// Evaluates `h(x + v tau, v)` for every node, periodic in `x`.
pub fn shift_slice(
    h: &[f64],
    space: &SpatialGrid,
    velocity: &VelocityGrid,
    tau: f64,
) -> Result<Vec<f64>> {
    let nv = velocity.len();
    let nx = space.len();
    if h.len() != nx * nv {
        return Err(Error::ShapeMismatch(format!(
            "slice has {} values, grid needs {}",
            h.len(),
            nx * nv
        )));
    }
    if space.is_homogeneous() || tau == 0.0 {
        return Ok(h.to_vec());
    }
    let plan = ShiftPlan::new(space, velocity, tau);
    let n = space.nodes_per_axis() as i64;
    let dim = space.dim();
    let corners = 1usize << dim;
    let mut out = vec![0.0; nx * nv];
    par::for_each_chunk(&mut out, nv, |ix, row| {
        let xi = space.multi_index(ix);
        for (iv, o) in row.iter_mut().enumerate() {
            let k = plan.whole[iv];
            let fr = plan.frac[iv];
            let mut acc = 0.0;
            for c in 0..corners {
                let mut weight = 1.0;
                let mut flat = 0usize;
                for a in 0..dim {
                    let bit = (c >> (dim - 1 - a)) & 1;
                    weight *= if bit == 1 { fr[a] } else { 1.0 - fr[a] };
                    let j = (xi[a] as i64 + k[a] + bit as i64).rem_euclid(n) as usize;
                    flat = flat * n as usize + j;
                }
                if weight != 0.0 {
                    acc += weight * h[flat * nv + iv];
                }
            }
            *o = acc;
        }
    });
    Ok(out)
}

/// `f#(t_m, x, v) = f(t_m, x + v t_m, v)` as a space-velocity slice.
pub fn sharp(f: &DistributionField, t_index: usize) -> Result<Vec<f64>> {
    if t_index >= f.time_count() {
        return Err(Error::InvalidArgument(format!(
            "time index {t_index} out of range (field has {} nodes)",
            f.time_count()
        )));
    }
    shift_slice(
        f.slice(t_index),
        f.spatial_grid(),
        f.velocity_grid(),
        f.times()[t_index],
    )
}

/// Inverse transform: laboratory slice `h(x - v t, v)`.
pub fn unsharp(
    h: &[f64],
    t: f64,
    space: &SpatialGrid,
    velocity: &VelocityGrid,
) -> Result<Vec<f64>> {
    shift_slice(h, space, velocity, -t)
}

/// Laboratory-frame `Q(f, f)` at time node `m` on every spatial node.
pub fn q_lab(f: &DistributionField, t_index: usize, op: &CollisionOperator) -> Result<Vec<f64>> {
    check_operator(f, op)?;
    let nx = f.spatial_grid().len();
    let rows = par::map_range(nx, |ix| op.quadratic(f.velocity_slice(t_index, ix)));
    let mut out = Vec::with_capacity(f.slice_len());
    for r in rows {
        out.extend_from_slice(&r?.total);
    }
    Ok(out)
}

/// `Q#(f, f)(t_m, x, v) = Q(f, f)(t_m, x + v t_m, v)`: the collision term is
/// evaluated per spatial node in the laboratory frame and then transformed.
pub fn q_sharp(f: &DistributionField, t_index: usize, op: &CollisionOperator) -> Result<Vec<f64>> {
    let lab = q_lab(f, t_index, op)?;
    shift_slice(&lab, f.spatial_grid(), f.velocity_grid(), f.times()[t_index])
}

pub(crate) fn check_operator(f: &DistributionField, op: &CollisionOperator) -> Result<()> {
    if f.velocity_grid() != op.velocity_grid() {
        return Err(Error::ShapeMismatch(
            "field and collision operator use different velocity grids".into(),
        ));
    }
    Ok(())
}
