//! Initial data and smooth random fields used by the experiments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{l1_norm, DistributionField, SpatialGrid, Vector, VelocityGrid};

/// `amplitude * exp(-|v - drift|^2 / width)` on every velocity node.
pub fn maxwellian(vg: &VelocityGrid, amplitude: f64, width: f64, drift: Vector) -> Vec<f64> {
    vg.nodes()
        .iter()
        .map(|v| {
            let r2: f64 = (0..3).map(|a| (v[a] - drift[a]).powi(2)).sum();
            amplitude * (-r2 / width).exp()
        })
        .collect()
}

/// Space-velocity slice `M(v) (1 + modulation * prod_a cos(2 pi x_a / X))`.
pub fn modulated_maxwellian(
    space: &SpatialGrid,
    vg: &VelocityGrid,
    amplitude: f64,
    width: f64,
    drift: Vector,
    modulation: f64,
) -> Vec<f64> {
    let m = maxwellian(vg, amplitude, width, drift);
    let k = 2.0 * std::f64::consts::PI / space.period();
    let mut out = Vec::with_capacity(space.len() * vg.len());
    for ix in 0..space.len() {
        let x = space.node(ix);
        let s = if space.is_homogeneous() {
            1.0
        } else {
            1.0 + modulation * (0..space.dim()).map(|a| (k * x[a]).cos()).product::<f64>()
        };
        out.extend(m.iter().map(|mv| mv * s));
    }
    out
}

/// A few random plane-wave modes in velocity, `sum_j a_j cos(k_j.v + p_j)`,
/// normalised so the sum of `|a_j|` is one.
#[derive(Debug, Clone)]
pub struct VelocityModes {
    modes: Vec<(f64, Vector, f64)>,
}

impl VelocityModes {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, count: usize, max_wavenumber: f64) -> Self {
        let mut modes = Vec::with_capacity(count);
        for _ in 0..count {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let mut k = [0.0; 3];
            for ka in k.iter_mut().take(dim) {
                *ka = rng.gen_range(-max_wavenumber..max_wavenumber);
            }
            let p = rng.gen_range(0.0..std::f64::consts::TAU);
            modes.push((a, k, p));
        }
        let norm: f64 = modes.iter().map(|m| m.0.abs()).sum::<f64>().max(1e-300);
        for m in &mut modes {
            m.0 /= norm;
        }
        VelocityModes { modes }
    }

    pub fn eval(&self, v: &Vector) -> f64 {
        self.modes
            .iter()
            .map(|(a, k, p)| a * (k[0] * v[0] + k[1] * v[1] + k[2] * v[2] + p).cos())
            .sum()
    }
}

/// Positive smooth density `exp(-|v|^2) (1 + contrast * modes(v))` with
/// `contrast < 1`.
pub fn smooth_random_density(vg: &VelocityGrid, rng: &mut ChaCha8Rng, contrast: f64) -> Vec<f64> {
    let modes = VelocityModes::random(rng, vg.dim(), 4, 1.2);
    vg.nodes()
        .iter()
        .map(|v| {
            let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            (-r2).exp() * (1.0 + contrast * modes.eval(v))
        })
        .collect()
}

/// Smooth random perturbation `g(t, x, v)` with `g(0) = 0`, Gaussian
/// envelope `exp(-|v|^2 / width)`, scaled to the given L1 norm.
pub fn smooth_perturbation(
    velocity: &VelocityGrid,
    space: &SpatialGrid,
    times: &[f64],
    width: f64,
    target_l1: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DistributionField> {
    let modes = VelocityModes::random(rng, velocity.dim(), 4, 1.5);
    let c1: f64 = rng.gen_range(0.5..1.0);
    let c2: f64 = rng.gen_range(-0.5..0.5);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let spatial_amp: f64 = rng.gen_range(0.0..0.5);
    let horizon = *times.last().unwrap_or(&1.0);
    let horizon = if horizon > 0.0 { horizon } else { 1.0 };
    let k = 2.0 * std::f64::consts::PI / space.period();
    let raw = DistributionField::from_fn(*velocity, *space, times.to_vec(), |m, x, v| {
        let s = times[m] / horizon;
        let time_profile = c1 * s + c2 * s * s;
        let spatial = if space.is_homogeneous() {
            1.0
        } else {
            1.0 + spatial_amp * (k * x[0] + phase).sin()
        };
        let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        time_profile * spatial * (-r2 / width).exp() * modes.eval(v)
    })?;
    let norm = l1_norm(&raw);
    if norm == 0.0 {
        return Ok(raw);
    }
    raw.scale(target_l1 / norm)
}
