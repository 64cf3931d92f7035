use serde::{Deserialize, Serialize};

use super::Vector;
use crate::error::{Error, Result};

/// Points this close (in cell units) to a node are snapped onto it, so
/// roundoff in `u'`/`v'` cannot flip a boundary node in or out of the box.
pub(crate) const NODE_SNAP: f64 = 1e-9;

/// Uniform tensor grid on `[-V, V]^dim` with an odd number of nodes per axis,
/// so the origin is a node and the grid is symmetric under `v -> -v`.
///
/// Flat indices are row-major with axis 0 slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    dim: usize,
    extent: f64,
    nodes_per_axis: usize,
    spacing: f64,
}

impl VelocityGrid {
    pub fn new(dim: usize, extent: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!(
                "velocity dimension must be 2 or 3, got {dim}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "velocity extent must be positive, got {extent}"
            )));
        }
        if nodes_per_axis < 4 {
            return Err(Error::InvalidGrid(format!(
                "velocity nodes_per_axis must be at least 4, got {nodes_per_axis}"
            )));
        }
        if nodes_per_axis % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "velocity nodes_per_axis must be odd so the origin is a node, got {nodes_per_axis}"
            )));
        }
        Ok(VelocityGrid {
            dim,
            extent,
            nodes_per_axis,
            spacing: 2.0 * extent / (nodes_per_axis - 1) as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `dv^dim`, the quadrature weight of a node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of axis position `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing
    }

    /// Row-major stride of `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.nodes_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let n = self.nodes_per_axis;
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.nodes_per_axis + idx[a])
    }

    pub fn node(&self, flat: usize) -> Vector {
        let idx = self.multi_index(flat);
        let mut v = [0.0; 3];
        for a in 0..self.dim {
            v[a] = self.coord(idx[a]);
        }
        v
    }

    pub fn nodes(&self) -> Vec<Vector> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Flat index of `-v` for the node with flat index `flat`.
    pub fn mirror(&self, flat: usize) -> usize {
        let mut idx = self.multi_index(flat);
        for a in 0..self.dim {
            idx[a] = self.nodes_per_axis - 1 - idx[a];
        }
        self.flat_index(&idx)
    }

    /// Interpolation stencil at a point given in index units
    /// (`s_a = (p_a + V) / dv`). `None` when the point is outside the box.
    #[inline]
    pub fn stencil_at_index(&self, s: &[f64; 3]) -> Option<Stencil> {
        let top = (self.nodes_per_axis - 1) as f64;
        let last_cell = self.nodes_per_axis - 2;
        let mut base = 0usize;
        let mut frac = [0.0; 3];
        for a in 0..self.dim {
            let x = snap_to_node(s[a]);
            if !(x >= 0.0 && x <= top) {
                return None;
            }
            // non-negative, so truncation is the floor
            let i = (x as usize).min(last_cell);
            frac[a] = x - i as f64;
            base = base * self.nodes_per_axis + i;
        }
        Some(Stencil {
            base,
            frac,
            dim: self.dim,
            n: self.nodes_per_axis,
        })
    }

    /// Interpolation stencil at a physical velocity.
    pub fn stencil(&self, p: &Vector) -> Option<Stencil> {
        let mut s = [0.0; 3];
        for a in 0..self.dim {
            s[a] = (p[a] + self.extent) / self.spacing;
        }
        self.stencil_at_index(&s)
    }

    /// Multilinear interpolation of nodal `values` at `p`; zero outside the box.
    pub fn interpolate(&self, values: &[f64], p: &Vector) -> f64 {
        self.stencil(p).map_or(0.0, |st| st.apply(values))
    }
}

/// `x` rounded to the nearest integer when within [`NODE_SNAP`] of it.
#[inline]
pub(crate) fn snap_to_node(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= NODE_SNAP {
        r
    } else {
        x
    }
}

/// Multilinear interpolation weights for one point of a [`VelocityGrid`].
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    base: usize,
    frac: [f64; 3],
    dim: usize,
    n: usize,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, f: &[f64]) -> f64 {
        let b = self.base;
        let n = self.n;
        if self.dim == 2 {
            let [fx, fy, _] = self.frac;
            let r0 = f[b] + fy * (f[b + 1] - f[b]);
            let r1 = f[b + n] + fy * (f[b + n + 1] - f[b + n]);
            r0 + fx * (r1 - r0)
        } else {
            let [fx, fy, fz] = self.frac;
            let sx = n * n;
            let lerp = |i: usize| f[i] + fz * (f[i + 1] - f[i]);
            let c00 = lerp(b);
            let c01 = lerp(b + n);
            let c10 = lerp(b + sx);
            let c11 = lerp(b + sx + n);
            let c0 = c00 + fy * (c01 - c00);
            let c1 = c10 + fy * (c11 - c10);
            c0 + fx * (c1 - c0)
        }
    }
}
