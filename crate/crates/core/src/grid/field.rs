use serde::Serialize;

use super::{SpatialGrid, Vector, VelocityGrid};
use crate::error::{Error, Result};

/// Phase-space density sampled on `time x space x velocity`.
///
/// Values are stored with velocity fastest, then space, then time. Fields
/// are treated as immutable values: operations return new fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    velocity: VelocityGrid,
    space: SpatialGrid,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl DistributionField {
    pub fn new(
        velocity: VelocityGrid,
        space: SpatialGrid,
        times: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if velocity.dim() != space.dim() {
            return Err(Error::ShapeMismatch(format!(
                "velocity dimension {} differs from spatial dimension {}",
                velocity.dim(),
                space.dim()
            )));
        }
        if times.is_empty() {
            return Err(Error::ShapeMismatch("field needs at least one time node".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "time nodes must be strictly increasing".into(),
            ));
        }
        let expected = times.len() * space.len() * velocity.len();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("distribution field value #{i}"),
            });
        }
        Ok(DistributionField {
            velocity,
            space,
            times,
            values,
        })
    }

    pub fn zeros(velocity: VelocityGrid, space: SpatialGrid, times: Vec<f64>) -> Result<Self> {
        let n = times.len() * space.len() * velocity.len();
        DistributionField::new(velocity, space, times, vec![0.0; n])
    }

    /// Samples `f(time_index, x, v)` on every node.
    pub fn from_fn<F>(
        velocity: VelocityGrid,
        space: SpatialGrid,
        times: Vec<f64>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(usize, &[f64; 3], &Vector) -> f64,
    {
        let vnodes = velocity.nodes();
        let mut values = Vec::with_capacity(times.len() * space.len() * velocity.len());
        for m in 0..times.len() {
            for ix in 0..space.len() {
                let x = space.node(ix);
                for v in &vnodes {
                    values.push(f(m, &x, v));
                }
            }
        }
        DistributionField::new(velocity, space, times, values)
    }

    /// Repeats one space-velocity slice at every time node.
    pub fn constant_in_time(
        velocity: VelocityGrid,
        space: SpatialGrid,
        times: Vec<f64>,
        slice: &[f64],
    ) -> Result<Self> {
        if slice.len() != space.len() * velocity.len() {
            return Err(Error::ShapeMismatch(format!(
                "slice has {} values, grid needs {}",
                slice.len(),
                space.len() * velocity.len()
            )));
        }
        let values = slice.repeat(times.len());
        DistributionField::new(velocity, space, times, values)
    }

    /// Builds a field from per-time slices without re-validating finiteness
    /// beyond the constructor's checks.
    pub fn from_slices(
        velocity: VelocityGrid,
        space: SpatialGrid,
        times: Vec<f64>,
        slices: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let values = slices.concat();
        DistributionField::new(velocity, space, times, values)
    }

    pub fn velocity_grid(&self) -> &VelocityGrid {
        &self.velocity
    }

    pub fn spatial_grid(&self) -> &SpatialGrid {
        &self.space
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time_count(&self) -> usize {
        self.times.len()
    }

    /// Number of values per time node.
    pub fn slice_len(&self) -> usize {
        self.space.len() * self.velocity.len()
    }

    /// Space-velocity slice at time node `m`.
    pub fn slice(&self, m: usize) -> &[f64] {
        let n = self.slice_len();
        &self.values[m * n..(m + 1) * n]
    }

    /// Velocity slice at time node `m` and spatial node `ix`.
    pub fn velocity_slice(&self, m: usize, ix: usize) -> &[f64] {
        let nv = self.velocity.len();
        let start = m * self.slice_len() + ix * nv;
        &self.values[start..start + nv]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks that `other` lives on the same grids and time nodes.
    pub fn check_compatible(&self, other: &DistributionField) -> Result<()> {
        if self.velocity != other.velocity || self.space != other.space {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        if self.times != other.times {
            return Err(Error::ShapeMismatch(
                "fields have different time nodes".into(),
            ));
        }
        Ok(())
    }

    /// Same grids, new values (validated).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        DistributionField::new(self.velocity, self.space, self.times.clone(), values)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        self.with_values(self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        self.check_compatible(other)?;
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        self.map(|a| alpha * a)
    }

    /// Composite trapezoid weights of the time nodes (1 for a single node).
    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.times)
    }
}

pub(crate) fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    if m == 1 {
        return vec![1.0];
    }
    (0..m)
        .map(|i| {
            let left = if i > 0 { times[i] - times[i - 1] } else { 0.0 };
            let right = if i + 1 < m { times[i + 1] - times[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// L1 norm over `[0, T] x space x velocity`: trapezoid weights in time,
/// `dx^n` in space (1 in homogeneous mode) and `dv^n` in velocity.
pub fn l1_norm(f: &DistributionField) -> f64 {
    let phase = f.space.cell_volume() * f.velocity.cell_volume();
    let weights = f.time_weights();
    let n = f.slice_len();
    let total: f64 = weights
        .iter()
        .enumerate()
        .map(|(m, w)| w * f.values[m * n..(m + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
        .sum();
    total * phase
}

/// L1 norm of one space-velocity slice.
pub fn slice_l1_norm(slice: &[f64], space: &SpatialGrid, velocity: &VelocityGrid) -> f64 {
    slice.iter().map(|x| x.abs()).sum::<f64>() * space.cell_volume() * velocity.cell_volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mass: f64,
    pub momentum: Vector,
    pub energy: f64,
}

/// Mass, momentum and energy (`sum |v|^2 f dv^n`) of a velocity slice.
pub fn compute_moments(f: &[f64], vg: &VelocityGrid) -> Moments {
    let mut mass = 0.0;
    let mut momentum = [0.0; 3];
    let mut energy = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        let v = vg.node(i);
        mass += fi;
        for a in 0..3 {
            momentum[a] += v[a] * fi;
        }
        energy += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * fi;
    }
    let w = vg.cell_volume();
    Moments {
        mass: mass * w,
        momentum: [momentum[0] * w, momentum[1] * w, momentum[2] * w],
        energy: energy * w,
    }
}
