//! The perturbation map
//! `F(g)(t) = int_0^t Q#(f2 + g, f2 + g) - Q#(f2, f2) dtau`
//! and experiments measuring its Lipschitz constant and the uniqueness of
//! Picard fixed points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{l1_norm, slice_l1_norm, DistributionField};
use crate::kernel::{certify_theorem1_hypotheses, Certification};
use crate::mild_solver::{
    cumulative_trapezoid, free_streaming_extension, from_sharp_slices, q_sharp_all, solve_from,
    IterationReport, SolverConfig,
};
use crate::par;
use crate::profiles::smooth_perturbation;
use crate::transport::shift_slice;

/// Allowance on top of the certified constant for interpolation and
/// time-quadrature error.
pub const CONTRACTION_SLACK: f64 = 0.15;

/// Pairs closer than this in L1 carry no information about the ratio.
pub const DEGENERATE_PAIR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 2,
        }
    }
}

fn check_pair(a: &DistributionField, b: &DistributionField, cfg: &SolverConfig) -> Result<()> {
    cfg.check_field(a)?;
    a.check_compatible(b)
}

/// Lab-frame `F(g)` given the precomputed `Q#(f2, f2)` slices.
fn f_map_with(
    g: &DistributionField,
    f2: &DistributionField,
    q_f2: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<DistributionField> {
    let sum = f2.add(g)?;
    let q_sum = q_sharp_all(&sum, cfg)?;
    let diff: Vec<Vec<f64>> = q_sum
        .iter()
        .zip(q_f2)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    from_sharp_slices(cumulative_trapezoid(f2.times(), &diff), cfg)
}

/// `F(g)` in laboratory coordinates; time integral by the trapezoid rule.
pub fn f_map(g: &DistributionField, f2: &DistributionField, cfg: &SolverConfig) -> Result<DistributionField> {
    check_pair(f2, g, cfg)?;
    let q_f2 = q_sharp_all(f2, cfg)?;
    f_map_with(g, f2, &q_f2, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// L1 norm of the difference between the two sides.
    pub discrepancy: f64,
    /// L1 norm of the sum of absolute values of the regrouped terms.
    pub scale: f64,
}

impl IdentityCheck {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.discrepancy / self.scale
        } else {
            self.discrepancy
        }
    }
}

/// Compares `Q#(f2+g1, f2+g1) - Q#(f2+g2, f2+g2)` with its regrouping into
/// four terms linear in `d = g1 - g2` with an `f2` factor and four with a
/// `g1` or `g2` factor:
///
/// `G(f2, d) + G(d, f2) - L(f2, d) - L(d, f2)
///  + G(g1, d) + G(d, g2) - L(g2, d) - L(d, g1)`,
///
/// where `G(a, b)` has `a` at `u'`, `b` at `v'` and `L(a, b)` has `a` at `u`,
/// `b` at `v`.
pub fn bilinear_difference_identity_check(
    g1: &DistributionField,
    g2: &DistributionField,
    f2: &DistributionField,
    cfg: &SolverConfig,
) -> Result<IdentityCheck> {
    check_pair(f2, g1, cfg)?;
    f2.check_compatible(g2)?;
    let op = cfg.operator();
    let nx = f2.spatial_grid().len();
    let nv = f2.velocity_grid().len();
    let cells = f2.time_count() * nx;
    let rows = par::map_range(cells, |c| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (m, ix) = (c / nx, c % nx);
        let f = f2.velocity_slice(m, ix);
        let a = g1.velocity_slice(m, ix);
        let b = g2.velocity_slice(m, ix);
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let h1: Vec<f64> = f.iter().zip(a).map(|(x, y)| x + y).collect();
        let h2: Vec<f64> = f.iter().zip(b).map(|(x, y)| x + y).collect();
        let q1 = op.quadratic(&h1)?.total;
        let q2 = op.quadratic(&h2)?.total;
        let lhs: Vec<f64> = q1.iter().zip(&q2).map(|(x, y)| x - y).collect();
        let terms = [
            op.gain(f, &d)?,
            op.gain(&d, f)?,
            op.loss(f, &d).iter().map(|x| -x).collect(),
            op.loss(&d, f).iter().map(|x| -x).collect(),
            op.gain(a, &d)?,
            op.gain(&d, b)?,
            op.loss(b, &d).iter().map(|x| -x).collect(),
            op.loss(&d, a).iter().map(|x| -x).collect::<Vec<f64>>(),
        ];
        let mut rhs = vec![0.0; nv];
        let mut abs = vec![0.0; nv];
        for t in &terms {
            for i in 0..nv {
                rhs[i] += t[i];
                abs[i] += t[i].abs();
            }
        }
        Ok((lhs, rhs, abs))
    });
    let mut lhs = vec![Vec::with_capacity(f2.slice_len()); f2.time_count()];
    let mut rhs = lhs.clone();
    let mut abs = lhs.clone();
    for (c, row) in rows.into_iter().enumerate() {
        let (l, r, s) = row?;
        let m = c / nx;
        lhs[m].extend(l);
        rhs[m].extend(r);
        abs[m].extend(s);
    }
    let mut diff = Vec::with_capacity(f2.values().len());
    let mut scale = Vec::with_capacity(f2.values().len());
    for (m, t) in f2.times().iter().enumerate() {
        let l = shift_slice(&lhs[m], f2.spatial_grid(), f2.velocity_grid(), *t)?;
        let r = shift_slice(&rhs[m], f2.spatial_grid(), f2.velocity_grid(), *t)?;
        let s = shift_slice(&abs[m], f2.spatial_grid(), f2.velocity_grid(), *t)?;
        diff.extend(l.iter().zip(&r).map(|(x, y)| x - y));
        scale.extend(s);
    }
    Ok(IdentityCheck {
        discrepancy: l1_norm(&f2.with_values(diff)?),
        scale: l1_norm(&f2.with_values(scale)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub hypothesis_l: f64,
    pub certification: Certification,
    pub empirical_ratios: Vec<f64>,
    pub max_ratio: f64,
    pub pairs_tested: usize,
    pub pairs_skipped: usize,
    pub slack: f64,
    pub passed: bool,
}

/// `||F(g1) - F(g2)||_1 / ||g1 - g2||_1` over all non-degenerate pairs,
/// together with the certified constant for `f2` and every `g`.
pub fn empirical_contraction(
    pairs: &[(DistributionField, DistributionField)],
    f2: &DistributionField,
    cfg: &SolverConfig,
) -> Result<ContractionReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no perturbation pairs".into()));
    }
    for (a, b) in pairs {
        check_pair(f2, a, cfg)?;
        f2.check_compatible(b)?;
    }
    let g_list: Vec<DistributionField> = pairs
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    let certification =
        certify_theorem1_hypotheses(cfg.kernel(), f2, &g_list, cfg.velocity(), cfg.sphere())?;
    let q_f2 = q_sharp_all(f2, cfg)?;
    let ratios = par::map_range(pairs.len(), |p| -> Result<Option<f64>> {
        let (a, b) = &pairs[p];
        let denom = l1_norm(&a.sub(b)?);
        if denom < DEGENERATE_PAIR {
            return Ok(None);
        }
        let fa = f_map_with(a, f2, &q_f2, cfg)?;
        let fb = f_map_with(b, f2, &q_f2, cfg)?;
        Ok(Some(l1_norm(&fa.sub(&fb)?) / denom))
    });
    let mut empirical_ratios = Vec::new();
    for r in ratios {
        if let Some(x) = r? {
            empirical_ratios.push(x);
        }
    }
    if empirical_ratios.is_empty() {
        return Err(Error::InvalidArgument(
            "every perturbation pair is degenerate".into(),
        ));
    }
    let max_ratio = empirical_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hypothesis_l = certification.l_estimate;
    Ok(ContractionReport {
        hypothesis_l,
        certification,
        pairs_tested: empirical_ratios.len(),
        pairs_skipped: pairs.len() - empirical_ratios.len(),
        max_ratio,
        empirical_ratios,
        slack: CONTRACTION_SLACK,
        passed: hypothesis_l < 1.0 && max_ratio <= hypothesis_l + CONTRACTION_SLACK,
    })
}

/// `count` independent smooth perturbation pairs with L1 norm `size`,
/// vanishing at `t = 0`.
pub fn random_pairs(
    cfg: &SolverConfig,
    count: usize,
    size: f64,
    seed: u64,
) -> Result<Vec<(DistributionField, DistributionField)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = cfg.times();
    (0..count)
        .map(|_| {
            let a = smooth_perturbation(cfg.velocity(), cfg.space(), &times, 1.0, size, &mut rng)?;
            let b = smooth_perturbation(cfg.velocity(), cfg.space(), &times, 1.0, size, &mut rng)?;
            Ok((a, b))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// Factor applied to the kernel strength.
    pub alpha: f64,
    pub strength: f64,
    pub before: f64,
    pub after: f64,
}

/// Rescales the kernel so the certified constant for `f2` and `g_list` is
/// `target`. The constant is quadratic in the kernel scale.
pub fn calibrate_kernel(
    cfg: &SolverConfig,
    f2: &DistributionField,
    g_list: &[DistributionField],
    target: f64,
) -> Result<(SolverConfig, Calibration)> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidArgument(format!("target must be positive, got {target}")));
    }
    let before = certify_theorem1_hypotheses(cfg.kernel(), f2, g_list, cfg.velocity(), cfg.sphere())?;
    if before.l_estimate <= 0.0 {
        return Err(Error::InvalidArgument(
            "fields vanish; the kernel cannot be calibrated".into(),
        ));
    }
    let alpha = (target / before.l_estimate).sqrt();
    let kernel = cfg.kernel().scaled(alpha);
    let scaled = cfg.with_kernel(kernel)?;
    let after = certify_theorem1_hypotheses(&kernel, f2, g_list, cfg.velocity(), cfg.sphere())?;
    Ok((
        scaled,
        Calibration {
            alpha,
            strength: kernel.strength,
            before: before.l_estimate,
            after: after.l_estimate,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDistance {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub runs: Vec<IterationReport>,
    pub distances: Vec<PairDistance>,
    pub max_distance: f64,
    pub tolerance: f64,
    pub certification: Certification,
    pub outcome: Outcome,
}

/// Distinct first iterates: the free-streaming extension of `f0`, then
/// rescaled copies with a smooth perturbation added.
pub fn starting_iterates(
    f0: &[f64],
    cfg: &SolverConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<DistributionField>> {
    let base = free_streaming_extension(f0, cfg)?;
    let size = 0.05 * l1_norm(&base).max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = cfg.times();
    let mut out = vec![base.clone()];
    for k in 1..count {
        let bump = smooth_perturbation(cfg.velocity(), cfg.space(), &times, 1.0, size, &mut rng)?;
        out.push(base.scale(1.0 + 0.1 * k as f64)?.add(&bump)?);
    }
    out.truncate(count);
    Ok(out)
}

/// Runs the solver from `n` distinct first iterates and compares the fixed
/// points pairwise against `10 * residual_tol`.
pub fn uniqueness_experiment(
    f0: &[f64],
    cfg: &SolverConfig,
    n: usize,
    seed: u64,
) -> Result<(Vec<DistributionField>, UniquenessReport)> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let starts = starting_iterates(f0, cfg, n, seed)?;
    let mut solutions = Vec::with_capacity(n);
    let mut runs = Vec::with_capacity(n);
    for s in starts {
        let (sol, rep) = solve_from(s, f0, cfg)?;
        solutions.push(sol);
        runs.push(rep);
    }
    let certification =
        certify_theorem1_hypotheses(cfg.kernel(), &solutions[0], &[], cfg.velocity(), cfg.sphere())?;
    let mut distances = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            distances.push(PairDistance {
                a,
                b,
                distance: l1_norm(&solutions[a].sub(&solutions[b])?),
            });
        }
    }
    let max_distance = distances.iter().map(|d| d.distance).fold(0.0, f64::max);
    let tolerance = 10.0 * cfg.residual_tol;
    let outcome = if runs.iter().any(|r| !r.converged) {
        Outcome::Inconclusive
    } else if max_distance <= tolerance {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok((
        solutions,
        UniquenessReport {
            runs,
            distances,
            max_distance,
            tolerance,
            certification,
            outcome,
        },
    ))
}

/// L1 norm of one time slice of `F(g)`, used by continuity checks.
pub fn final_slice_norm(f: &DistributionField) -> f64 {
    let last = f.time_count() - 1;
    slice_l1_norm(f.slice(last), f.spatial_grid(), f.velocity_grid())
}
