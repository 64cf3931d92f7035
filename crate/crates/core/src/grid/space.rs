use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic spatial grid on `[0, X)^dim`. A single node per axis is the
/// spatially homogeneous mode, where free transport is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dim: usize,
    period: f64,
    nodes_per_axis: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, period: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 2 or 3, got {dim}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spatial period must be positive, got {period}"
            )));
        }
        if nodes_per_axis == 0 {
            return Err(Error::InvalidGrid(
                "spatial nodes_per_axis must be at least 1".into(),
            ));
        }
        Ok(SpatialGrid {
            dim,
            period,
            nodes_per_axis,
        })
    }

    pub fn homogeneous(dim: usize) -> Result<Self> {
        SpatialGrid::new(dim, 1.0, 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn is_homogeneous(&self) -> bool {
        self.nodes_per_axis == 1
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.nodes_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a spatial node; 1 in homogeneous mode.
    pub fn cell_volume(&self) -> f64 {
        if self.is_homogeneous() {
            1.0
        } else {
            self.spacing().powi(self.dim as i32)
        }
    }

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

    pub fn node(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = idx[a] as f64 * h;
        }
        x
    }
}
