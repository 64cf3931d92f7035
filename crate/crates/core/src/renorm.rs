//! Renormalization functions `beta` with `|beta'(t)| <= c / (1 + t)`, the
//! strong-form defect of `d_t beta(f) + v.grad_x beta(f) = beta'(f) Q(f, f)`,
//! and the renormalized uniqueness conditions and map.
//!
//! `beta` is only defined on `t >= 0`; field values below zero (mild
//! iterates can undershoot slightly) are clipped before evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l1_norm, slice_l1_norm, DistributionField};
use crate::mild_solver::{cumulative_trapezoid, from_sharp_slices, solve_from, SolverConfig};
use crate::par;
use crate::transport::{q_lab, shift_slice};
use crate::uniqueness_lab::{starting_iterates, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BetaForm {
    /// `ln(1 + t)`.
    Log1p,
    /// `shift + scale ln(1 + t)`.
    ScaledLog1p { scale: f64, shift: f64 },
    /// `k t / (k + t)`; close to the identity for `t << k`.
    CustomRational { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFunction {
    pub form: BetaForm,
    pub c: f64,
}

impl BetaFunction {
    pub fn log1p() -> Self {
        BetaFunction {
            form: BetaForm::Log1p,
            c: 1.0,
        }
    }

    pub fn scaled_log1p(scale: f64, shift: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && shift.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scaled_log1p needs scale > 0 and finite shift, got {scale}, {shift}"
            )));
        }
        Ok(BetaFunction {
            form: BetaForm::ScaledLog1p { scale, shift },
            c: scale,
        })
    }

    /// `sup (1 + t) k^2 / (k + t)^2` is attained at `t = k - 2` when `k > 2`.
    pub fn custom_rational(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidArgument(format!("custom_rational needs k > 0, got {k}")));
        }
        let c = if k > 2.0 { k * k / (4.0 * (k - 1.0)) } else { 1.0 };
        Ok(BetaFunction {
            form: BetaForm::CustomRational { k },
            c,
        })
    }

    /// Parses `log1p`, `scaled_log1p` and `custom_rational` with their parameters.
    pub fn from_name(name: &str, scale: f64, shift: f64, k: f64) -> Result<Self> {
        match name {
            "log1p" => Ok(Self::log1p()),
            "scaled_log1p" => Self::scaled_log1p(scale, shift),
            "custom_rational" => Self::custom_rational(k),
            other => Err(Error::InvalidArgument(format!("unknown beta form `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.form {
            BetaForm::Log1p => "log1p",
            BetaForm::ScaledLog1p { .. } => "scaled_log1p",
            BetaForm::CustomRational { .. } => "custom_rational",
        }
    }

    #[inline]
    fn value(&self, t: f64) -> f64 {
        match self.form {
            BetaForm::Log1p => t.ln_1p(),
            BetaForm::ScaledLog1p { scale, shift } => shift + scale * t.ln_1p(),
            BetaForm::CustomRational { k } => k * t / (k + t),
        }
    }

    #[inline]
    fn derivative(&self, t: f64) -> f64 {
        match self.form {
            BetaForm::Log1p => 1.0 / (1.0 + t),
            BetaForm::ScaledLog1p { scale, .. } => scale / (1.0 + t),
            BetaForm::CustomRational { k } => k * k / ((k + t) * (k + t)),
        }
    }

    /// `sup beta'`; every built-in form has a decreasing derivative.
    pub fn lipschitz(&self) -> f64 {
        self.derivative(0.0)
    }
}

fn check_arg(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("beta is defined on t >= 0, got {t}")));
    }
    Ok(())
}

pub fn beta_eval(b: &BetaFunction, t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(b.value(t))
}

pub fn beta_prime(b: &BetaFunction, t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(b.derivative(t))
}

/// `0` followed by 241 logarithmically spaced points in `[1e-6, 1e6]`.
pub fn sample_points() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..=240).map(|i| 10f64.powf(-6.0 + i as f64 * 0.05)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaSweep {
    /// `max |beta'(t)| (1 + t)` over the sample points.
    pub max_ratio: f64,
    pub c: f64,
    pub bound_ok: bool,
    pub nondecreasing: bool,
}

pub fn verify_beta(b: &BetaFunction) -> BetaSweep {
    let ts = sample_points();
    let max_ratio = ts
        .iter()
        .map(|t| b.derivative(*t).abs() * (1.0 + t))
        .fold(0.0, f64::max);
    let nondecreasing = ts.windows(2).all(|w| b.value(w[1]) >= b.value(w[0]));
    BetaSweep {
        max_ratio,
        c: b.c,
        bound_ok: max_ratio <= b.c * (1.0 + 1e-12),
        nondecreasing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridResolution {
    pub dt: f64,
    pub dx: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormResidualReport {
    pub residual_l1: f64,
    pub grid_resolution: GridResolution,
    pub beta_used: BetaFunction,
    pub clipped_values: usize,
}

fn clip(x: f64) -> f64 {
    x.max(0.0)
}

/// L1 norm of `D_t beta(f) + v.D_x beta(f) - beta'(f) Q(f, f)` with centred
/// differences: second-order one-sided at the ends of `[0, T]`, periodic in
/// `x`. `Q` is evaluated on `f` as given. Needs at least two time steps.
pub fn renorm_residual(
    f: &DistributionField,
    b: &BetaFunction,
    cfg: &SolverConfig,
) -> Result<RenormResidualReport> {
    cfg.check_field(f)?;
    let mt = f.time_count();
    if mt < 3 {
        return Err(Error::InvalidArgument(
            "time derivative needs at least two time steps".into(),
        ));
    }
    let clipped_values = f.values().iter().filter(|x| **x < 0.0).count();
    let beta: Vec<f64> = f.values().iter().map(|x| b.value(clip(*x))).collect();
    let space = *f.spatial_grid();
    let vg = *f.velocity_grid();
    let nv = vg.len();
    let nx = space.len();
    let sl = f.slice_len();
    let dt = cfg.dt();
    let dx = if space.is_homogeneous() { 0.0 } else { space.spacing() };
    let nodes = vg.nodes();

    let rows = par::map_range(mt, |m| -> Result<Vec<f64>> {
        let q = q_lab(f, m, cfg.operator())?;
        let at = |k: usize, i: usize| beta[k * sl + i];
        let mut out = vec![0.0; sl];
        for (i, o) in out.iter_mut().enumerate() {
            let d_t = if m == 0 {
                (-3.0 * at(0, i) + 4.0 * at(1, i) - at(2, i)) / (2.0 * dt)
            } else if m == mt - 1 {
                (3.0 * at(m, i) - 4.0 * at(m - 1, i) + at(m - 2, i)) / (2.0 * dt)
            } else {
                (at(m + 1, i) - at(m - 1, i)) / (2.0 * dt)
            };
            let iv = i % nv;
            let mut adv = 0.0;
            if !space.is_homogeneous() {
                let ix = i / nv;
                let xi = space.multi_index(ix);
                let n = space.nodes_per_axis();
                for a in 0..space.dim() {
                    let mut up = xi;
                    let mut dn = xi;
                    up[a] = (xi[a] + 1) % n;
                    dn[a] = (xi[a] + n - 1) % n;
                    let iu = space.flat_index(&up) * nv + iv;
                    let id = space.flat_index(&dn) * nv + iv;
                    adv += nodes[iv][a] * (at(m, iu) - at(m, id)) / (2.0 * dx);
                }
            }
            let fv = clip(f.values()[m * sl + i]);
            *o = d_t + adv - b.derivative(fv) * q[i];
        }
        debug_assert_eq!(out.len(), nx * nv);
        Ok(out)
    });
    let mut values = Vec::with_capacity(f.values().len());
    for r in rows {
        values.extend(r?);
    }
    Ok(RenormResidualReport {
        residual_l1: l1_norm(&f.with_values(values)?),
        grid_resolution: GridResolution {
            dt,
            dx,
            dv: vg.spacing(),
        },
        beta_used: *b,
        clipped_values,
    })
}

/// Characteristic-frame slices of a per-spatial-node velocity operator
/// applied to the rows of `a` and `b`.
fn sharp_slices<F>(a: &DistributionField, b: &DistributionField, op: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Sync,
{
    let nx = a.spatial_grid().len();
    par::map_range(a.time_count(), |m| -> Result<Vec<f64>> {
        let mut lab = Vec::with_capacity(a.slice_len());
        for ix in 0..nx {
            lab.extend(op(a.velocity_slice(m, ix), b.velocity_slice(m, ix))?);
        }
        shift_slice(&lab, a.spatial_grid(), a.velocity_grid(), a.times()[m])
    })
    .into_iter()
    .collect()
}

fn final_integral_norm(f: &DistributionField, integrand: &[Vec<f64>]) -> f64 {
    let acc = cumulative_trapezoid(f.times(), integrand);
    slice_l1_norm(acc.last().map_or(&[][..], |s| s), f.spatial_grid(), f.velocity_grid())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenormConditions {
    pub ordering_ok: bool,
    /// `min (beta1 - beta2)` over the sample points.
    pub min_gap: f64,
    pub sqrt_c: f64,
    pub q_integral: f64,
    pub q_ok: bool,
}

/// `beta1 >= beta2 + sqrt(c)` pointwise on the sample points, with `c` the
/// larger of the two constants, and `|| int_0^T Q#(g, g) dt ||_1 < 1`.
pub fn theorem2_condition_check(
    b1: &BetaFunction,
    b2: &BetaFunction,
    g: &DistributionField,
    cfg: &SolverConfig,
) -> Result<RenormConditions> {
    cfg.check_field(g)?;
    let sqrt_c = b1.c.max(b2.c).sqrt();
    let ts = sample_points();
    let min_gap = ts
        .iter()
        .map(|t| b1.value(*t) - b2.value(*t))
        .fold(f64::INFINITY, f64::min);
    // roundoff of the subtraction must not flip an exact construction
    let ordering_ok = ts
        .iter()
        .all(|t| b1.value(*t) - b2.value(*t) >= sqrt_c - 1e-12 * (1.0 + b2.value(*t).abs()));
    let op = cfg.operator();
    let q = sharp_slices(g, g, |a, _| Ok(op.quadratic(a)?.total))?;
    let q_integral = final_integral_norm(g, &q);
    Ok(RenormConditions {
        ordering_ok,
        min_gap,
        sqrt_c,
        q_integral,
        q_ok: q_integral < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossTermReport {
    /// `|| 2 int_0^T Q#(f2, g) dt ||_1` (symmetrised bilinear form).
    pub cross_term_l1: f64,
    /// `|| int_0^T Q#(g, g) dt ||_1`.
    pub self_term_l1: f64,
    /// `|| int_0^T Q#(f2 + g, f2 + g) - Q#(f2, f2) dt ||_1`.
    pub difference_l1: f64,
}

/// The expansion `Q(f2+g) - Q(f2) = 2 Q(f2, g) + Q(g, g)` with each part
/// integrated and measured separately.
pub fn cross_term_report(
    f2: &DistributionField,
    g: &DistributionField,
    cfg: &SolverConfig,
) -> Result<CrossTermReport> {
    cfg.check_field(f2)?;
    f2.check_compatible(g)?;
    let op = cfg.operator();
    let cross = sharp_slices(f2, g, |a, b| {
        Ok(op.bilinear(a, b)?.total.iter().map(|x| 2.0 * x).collect())
    })?;
    let own = sharp_slices(g, g, |a, _| Ok(op.quadratic(a)?.total))?;
    let diff = sharp_slices(f2, g, |a, b| {
        let h: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        let qh = op.quadratic(&h)?.total;
        let qa = op.quadratic(a)?.total;
        Ok(qh.iter().zip(&qa).map(|(x, y)| x - y).collect())
    })?;
    Ok(CrossTermReport {
        cross_term_l1: final_integral_norm(f2, &cross),
        self_term_l1: final_integral_norm(f2, &own),
        difference_l1: final_integral_norm(f2, &diff),
    })
}

/// Laboratory-frame field whose slice at `t_m` is
/// `beta#(f2+g)(0) - beta#(f2)(0)
///  + int_0^{t_m} beta'#(f2+g) Q#(f2+g, f2+g) - beta'#(f2) Q#(f2, f2) dt`;
/// the last slice is the map at `T`.
pub fn renorm_f_map(
    g: &DistributionField,
    f2: &DistributionField,
    b: &BetaFunction,
    cfg: &SolverConfig,
) -> Result<DistributionField> {
    cfg.check_field(f2)?;
    f2.check_compatible(g)?;
    let op = cfg.operator();
    let integrand = sharp_slices(f2, g, |a, d| {
        let h: Vec<f64> = a.iter().zip(d).map(|(x, y)| x + y).collect();
        let qh = op.quadratic(&h)?.total;
        let qa = op.quadratic(a)?.total;
        Ok((0..h.len())
            .map(|i| b.derivative(clip(h[i])) * qh[i] - b.derivative(clip(a[i])) * qa[i])
            .collect())
    })?;
    let initial: Vec<f64> = f2
        .slice(0)
        .iter()
        .zip(g.slice(0))
        .map(|(a, d)| b.value(clip(a + d)) - b.value(clip(*a)))
        .collect();
    let slices = cumulative_trapezoid(f2.times(), &integrand)
        .into_iter()
        .map(|acc| acc.iter().zip(&initial).map(|(x, y)| x + y).collect())
        .collect();
    from_sharp_slices(slices, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenormUniquenessReport {
    pub converged: [bool; 2],
    pub residuals: [f64; 2],
    pub beta_distance: f64,
    pub raw_distance: f64,
    pub tolerance: f64,
    /// Conditions evaluated on the difference of the two first iterates, with
    /// `beta1 = beta + sqrt(c)`.
    pub conditions: RenormConditions,
    pub cross_terms: CrossTermReport,
    pub beta_used: BetaFunction,
    pub outcome: Outcome,
}

/// Two Picard runs from distinct first iterates, compared after applying
/// `beta`; the tolerance is `10 * residual_tol * sup beta'`.
pub fn renorm_uniqueness_experiment(
    f0: &[f64],
    cfg: &SolverConfig,
    b: &BetaFunction,
    seed: u64,
) -> Result<(Vec<DistributionField>, RenormUniquenessReport)> {
    let starts = starting_iterates(f0, cfg, 2, seed)?;
    let g = starts[1].sub(&starts[0])?;
    let shifted = match b.form {
        BetaForm::ScaledLog1p { scale, shift } => {
            BetaFunction::scaled_log1p(scale, shift + b.c.sqrt())?
        }
        _ => BetaFunction::scaled_log1p(1.0, b.c.max(1.0).sqrt())?,
    };
    let conditions = theorem2_condition_check(&shifted, b, &g, cfg)?;
    let cross_terms = cross_term_report(&starts[0], &g, cfg)?;

    let mut solutions = Vec::with_capacity(2);
    let mut converged = [false; 2];
    let mut residuals = [0.0; 2];
    for (k, s) in starts.into_iter().enumerate() {
        let (sol, rep) = solve_from(s, f0, cfg)?;
        converged[k] = rep.converged;
        residuals[k] = rep.residuals.last().copied().unwrap_or(0.0);
        solutions.push(sol);
    }
    let beta_a = solutions[0].map(|x| b.value(clip(x)))?;
    let beta_b = solutions[1].map(|x| b.value(clip(x)))?;
    let beta_distance = l1_norm(&beta_a.sub(&beta_b)?);
    let raw_distance = l1_norm(&solutions[0].sub(&solutions[1])?);
    let tolerance = 10.0 * cfg.residual_tol * b.lipschitz();
    let outcome = if !(converged[0] && converged[1]) || !conditions.q_ok {
        Outcome::Inconclusive
    } else if beta_distance <= tolerance {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok((
        solutions,
        RenormUniquenessReport {
            converged,
            residuals,
            beta_distance,
            raw_distance,
            tolerance,
            conditions,
            cross_terms,
            beta_used: *b,
            outcome,
        },
    ))
}
