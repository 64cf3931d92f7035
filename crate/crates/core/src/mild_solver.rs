//! Picard iteration for the mild formulation
//! `f#(t) = f0 + int_0^t Q#(f, f) dtau`.
//!
//! Iterates are stored in laboratory coordinates; the characteristic
//! transform is applied on the fly. Time integrals use the composite
//! trapezoid rule on uniform nodes.

use serde::Serialize;

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::grid::{l1_norm, DistributionField, SpatialGrid, SphereQuadrature, VelocityGrid};
use crate::kernel::KernelSpec;
use crate::par;
use crate::transport::{q_sharp, unsharp};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub horizon: f64,
    pub time_steps: usize,
    pub max_picard_iters: usize,
    pub residual_tol: f64,
    space: SpatialGrid,
    sphere: SphereQuadrature,
    operator: CollisionOperator,
}

impl SolverConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: f64,
        time_steps: usize,
        max_picard_iters: usize,
        residual_tol: f64,
        space: SpatialGrid,
        velocity: VelocityGrid,
        sphere: SphereQuadrature,
        kernel: KernelSpec,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if time_steps < 1 {
            return Err(Error::InvalidArgument("time_steps must be at least 1".into()));
        }
        if max_picard_iters < 1 {
            return Err(Error::InvalidArgument("max_picard_iters must be at least 1".into()));
        }
        if !(residual_tol.is_finite() && residual_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "residual_tol must be positive, got {residual_tol}"
            )));
        }
        if space.dim() != velocity.dim() {
            return Err(Error::ShapeMismatch(
                "spatial and velocity dimensions differ".into(),
            ));
        }
        let operator = CollisionOperator::new(&kernel, &velocity, &sphere)?;
        Ok(SolverConfig {
            horizon,
            time_steps,
            max_picard_iters,
            residual_tol,
            space,
            sphere,
            operator,
        })
    }

    /// Same configuration with another kernel.
    pub fn with_kernel(&self, kernel: KernelSpec) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.operator = CollisionOperator::new(&kernel, self.operator.velocity_grid(), &self.sphere)?;
        Ok(cfg)
    }

    pub fn with_tolerance(&self, residual_tol: f64, max_picard_iters: usize) -> Self {
        SolverConfig {
            residual_tol,
            max_picard_iters,
            ..self.clone()
        }
    }

    /// Uniform nodes `t_m = m T / M`, `m = 0..=M`.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.horizon / self.time_steps as f64;
        (0..=self.time_steps).map(|m| m as f64 * dt).collect()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.space
    }

    pub fn velocity(&self) -> &VelocityGrid {
        self.operator.velocity_grid()
    }

    pub fn sphere(&self) -> &SphereQuadrature {
        &self.sphere
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.operator.kernel()
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.operator
    }

    /// Checks that `f` lives on this configuration's grids and time nodes.
    pub fn check_field(&self, f: &DistributionField) -> Result<()> {
        if f.velocity_grid() != self.velocity() || f.spatial_grid() != &self.space {
            return Err(Error::ShapeMismatch(
                "field grids differ from solver configuration".into(),
            ));
        }
        let times = self.times();
        if f.times().len() != times.len()
            || f.times().iter().zip(&times).any(|(a, b)| (a - b).abs() > 1e-12 * self.horizon)
        {
            return Err(Error::ShapeMismatch(
                "field time nodes differ from solver configuration".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_slice(&self, f0: &[f64]) -> Result<()> {
        let expected = self.space.len() * self.velocity().len();
        if f0.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "initial slice has {} values, grid needs {expected}",
                f0.len()
            )));
        }
        if f0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "initial data".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    /// L1 distance between successive iterates.
    pub residuals: Vec<f64>,
    /// `residual[k + 1] / residual[k]`.
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    pub iters_used: usize,
    /// Minimum value of each iterate; mild iterates may undershoot zero.
    pub min_values: Vec<f64>,
}

/// `Q#(f, f)` on every time node.
pub fn q_sharp_all(f: &DistributionField, cfg: &SolverConfig) -> Result<Vec<Vec<f64>>> {
    par::map_range(f.time_count(), |m| q_sharp(f, m, cfg.operator()))
        .into_iter()
        .collect()
}

/// Running trapezoid integrals `int_0^{t_m}` of per-node slices.
pub fn cumulative_trapezoid(times: &[f64], slices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let len = slices.first().map_or(0, |s| s.len());
    let mut acc = vec![0.0; len];
    let mut out = Vec::with_capacity(slices.len());
    out.push(acc.clone());
    for m in 1..slices.len() {
        let half = 0.5 * (times[m] - times[m - 1]);
        for ((a, p), c) in acc.iter_mut().zip(&slices[m - 1]).zip(&slices[m]) {
            *a += half * (p + c);
        }
        out.push(acc.clone());
    }
    out
}

/// Assembles a laboratory-frame field from characteristic-frame slices.
pub(crate) fn from_sharp_slices(
    sharp_slices: Vec<Vec<f64>>,
    cfg: &SolverConfig,
) -> Result<DistributionField> {
    let times = cfg.times();
    let lab: Result<Vec<Vec<f64>>> = sharp_slices
        .iter()
        .zip(&times)
        .map(|(h, t)| unsharp(h, *t, cfg.space(), cfg.velocity()))
        .collect();
    DistributionField::from_slices(*cfg.velocity(), *cfg.space(), times, lab?)
}

fn step(prev: &DistributionField, f0: &[f64], cfg: &SolverConfig, iteration: usize) -> Result<DistributionField> {
    cfg.check_field(prev)?;
    cfg.check_slice(f0)?;
    let q = q_sharp_all(prev, cfg).map_err(|e| match e {
        Error::NonFinite { context } => Error::BlowUp {
            iteration,
            detail: context,
        },
        other => other,
    })?;
    let integrals = cumulative_trapezoid(prev.times(), &q);
    let sharp_next: Vec<Vec<f64>> = integrals
        .into_iter()
        .map(|acc| acc.iter().zip(f0).map(|(a, f)| f + a).collect())
        .collect();
    if let Some(m) = sharp_next
        .iter()
        .position(|s| s.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::BlowUp {
            iteration,
            detail: format!("non-finite value at time node {m}"),
        });
    }
    from_sharp_slices(sharp_next, cfg)
}

/// One Picard update: `next#(t_m) = f0 + int_0^{t_m} Q#(prev, prev) dtau`.
pub fn picard_step(prev: &DistributionField, f0: &[f64], cfg: &SolverConfig) -> Result<DistributionField> {
    step(prev, f0, cfg, 0)
}

/// `f0` carried along the characteristics, i.e. the constant-in-time
/// extension of `f0` in the characteristic frame.
pub fn free_streaming_extension(f0: &[f64], cfg: &SolverConfig) -> Result<DistributionField> {
    cfg.check_slice(f0)?;
    from_sharp_slices(vec![f0.to_vec(); cfg.time_steps + 1], cfg)
}

/// Picard iteration from the free-streaming extension of `f0`.
pub fn solve(f0: &[f64], cfg: &SolverConfig) -> Result<(DistributionField, IterationReport)> {
    let start = free_streaming_extension(f0, cfg)?;
    solve_from(start, f0, cfg)
}

/// Picard iteration from an arbitrary first iterate. Stops when the L1
/// distance between successive iterates is at most `residual_tol`;
/// running out of iterations is reported, not raised.
pub fn solve_from(
    initial: DistributionField,
    f0: &[f64],
    cfg: &SolverConfig,
) -> Result<(DistributionField, IterationReport)> {
    cfg.check_slice(f0)?;
    if let Some(x) = f0.iter().find(|x| **x < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "initial data must be nonnegative, found {x}"
        )));
    }
    cfg.check_field(&initial)?;
    let mut current = initial;
    let mut residuals = Vec::new();
    let mut min_values = Vec::new();
    let mut converged = false;
    for k in 1..=cfg.max_picard_iters {
        let next = step(&current, f0, cfg, k)?;
        let r = l1_norm(&next.sub(&current)?);
        residuals.push(r);
        min_values.push(next.min_value());
        current = next;
        if r <= cfg.residual_tol {
            converged = true;
            break;
        }
    }
    let contraction_ratios = residuals
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let iters_used = residuals.len();
    Ok((
        current,
        IterationReport {
            residuals,
            contraction_ratios,
            converged,
            iters_used,
            min_values,
        },
    ))
}

/// L1 defect of the mild equation, `|| Phi(f) - f ||_1`, where `Phi` is the
/// Picard map. Zero exactly at a fixed point.
pub fn residual(f: &DistributionField, f0: &[f64], cfg: &SolverConfig) -> Result<f64> {
    let next = picard_step(f, f0, cfg)?;
    Ok(l1_norm(&next.sub(f)?))
}
