//! Collision kernels `B(w, |u - v|)`, their structural bound checks, and the
//! numeric certification of the small-data contraction hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, norm, sub, DistributionField, SphereQuadrature, Vector, VelocityGrid};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    HardSphere,
    Maxwell,
    VariableHardSphere,
}

impl KernelForm {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "hard_sphere" => Some(KernelForm::HardSphere),
            "maxwell" => Some(KernelForm::Maxwell),
            "variable_hard_sphere" | "vhs" => Some(KernelForm::VariableHardSphere),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelForm::HardSphere => "hard_sphere",
            KernelForm::Maxwell => "maxwell",
            KernelForm::VariableHardSphere => "variable_hard_sphere",
        }
    }
}

/// A collision kernel together with the constants `b1`, `b`, `mu` of its
/// upper (`B <= b1 |(g,w)| (1 + |g|^mu) / |g|`) and lower
/// (`int B dw >= b |g| / (1 + |g|^mu)`) bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub form: KernelForm,
    /// Overall strength `C >= 0`.
    pub strength: f64,
    /// Relative-speed exponent; only used by the variable hard sphere form.
    pub exponent: f64,
    pub b1: f64,
    pub b: f64,
    pub mu: f64,
}

impl KernelSpec {
    /// `C |(u - v).w|`, with `b1 = C`, `mu = 1` and `b = C int |cos| dw`.
    pub fn hard_sphere(strength: f64, dim: usize) -> Self {
        KernelSpec {
            form: KernelForm::HardSphere,
            strength,
            exponent: 1.0,
            b1: strength.max(f64::MIN_POSITIVE),
            b: strength * abs_cos_integral(dim),
            mu: 1.0,
        }
    }

    /// `C |cos(theta)|`, zero for coincident velocities.
    pub fn maxwell(strength: f64) -> Self {
        KernelSpec {
            form: KernelForm::Maxwell,
            strength,
            exponent: 0.0,
            b1: strength.max(f64::MIN_POSITIVE),
            b: strength,
            mu: 1.0,
        }
    }

    /// `C |u - v|^lambda |cos(theta)|`.
    pub fn variable_hard_sphere(strength: f64, exponent: f64) -> Self {
        KernelSpec {
            form: KernelForm::VariableHardSphere,
            strength,
            exponent,
            b1: strength.max(f64::MIN_POSITIVE),
            b: strength,
            mu: exponent.max(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, x: f64| {
            Err(Error::InvalidArgument(format!("kernel {what} invalid: {x}")))
        };
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return bad("strength", self.strength);
        }
        if !self.exponent.is_finite() {
            return bad("exponent", self.exponent);
        }
        if !(self.b1.is_finite() && self.b1 >= 0.0) {
            return bad("b1", self.b1);
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return bad("b", self.b);
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return bad("mu", self.mu);
        }
        Ok(())
    }

    /// Same form with strength and both bound constants multiplied by `alpha`,
    /// so the bound ratios are unchanged.
    pub fn scaled(&self, alpha: f64) -> Self {
        KernelSpec {
            strength: self.strength * alpha,
            b1: self.b1 * alpha,
            b: self.b * alpha,
            ..*self
        }
    }

    /// Factor `phi(r)` with `B(w, g) = phi(|g|) |g.w|`.
    #[inline]
    pub fn radial_factor(&self, r: f64) -> f64 {
        match self.form {
            KernelForm::HardSphere => self.strength,
            KernelForm::Maxwell => {
                if r > 0.0 {
                    self.strength / r
                } else {
                    0.0
                }
            }
            KernelForm::VariableHardSphere => {
                if r > 0.0 {
                    self.strength * r.powf(self.exponent - 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// `B(w, |u - v|)` for a unit vector `w`.
    pub fn evaluate(&self, w: &Vector, u: &Vector, v: &Vector) -> f64 {
        let g = sub(u, v);
        self.radial_factor(norm(&g)) * dot(&g, w).abs()
    }

    /// Right-hand side of the upper bound at relative velocity `g`, direction `w`.
    pub fn upper_bound(&self, w: &Vector, g: &Vector) -> f64 {
        let r = norm(g);
        if r == 0.0 {
            return 0.0;
        }
        self.b1 * dot(g, w).abs() * (1.0 + r.powf(self.mu)) / r
    }

    /// Right-hand side of the lower bound on `int B dw` at relative speed `r`.
    pub fn lower_bound(&self, r: f64) -> f64 {
        self.b * r / (1.0 + r.powf(self.mu))
    }
}

/// `int |cos(theta)| dw` over the unit circle (4) or sphere (2 pi).
pub fn abs_cos_integral(dim: usize) -> f64 {
    if dim == 2 {
        4.0
    } else {
        2.0 * std::f64::consts::PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub b2_satisfied: bool,
    pub b3_satisfied: bool,
    pub worst_b2_ratio: f64,
    pub worst_b3_ratio: f64,
    pub sample_count: usize,
}

/// Samples the upper bound at every (speed, quadrature node) and the lower
/// bound on the quadrature of `int B dw` at every speed. The relative
/// velocity points along the last coordinate axis.
pub fn check_bounds(k: &KernelSpec, sq: &SphereQuadrature, speeds: &[f64]) -> Result<BoundReport> {
    if speeds.is_empty() {
        return Err(Error::InvalidArgument("speed list is empty".into()));
    }
    if let Some(r) = speeds.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidArgument(format!("speeds must be positive, got {r}")));
    }
    let axis = sq.dim() - 1;
    let mut worst_b2: f64 = 0.0;
    let mut worst_b3 = f64::INFINITY;
    let mut samples = 0;
    for &r in speeds {
        let mut g = [0.0; 3];
        g[axis] = r;
        let origin = [0.0; 3];
        let mut integral = 0.0;
        for (w, q) in sq.nodes().iter().zip(sq.weights()) {
            let b = k.evaluate(w, &g, &origin);
            integral += q * b;
            samples += 1;
            // B and the bound both carry the factor |(g, w)|; skip grazing nodes.
            if dot(&g, w).abs() <= 1e-12 * r {
                continue;
            }
            worst_b2 = worst_b2.max(b / k.upper_bound(w, &g));
        }
        worst_b3 = worst_b3.min(integral / k.lower_bound(r));
    }
    Ok(BoundReport {
        b2_satisfied: worst_b2 <= 1.0,
        b3_satisfied: worst_b3 >= 1.0,
        worst_b2_ratio: worst_b2,
        worst_b3_ratio: worst_b3,
        sample_count: samples,
    })
}

/// `int_u int_w |h(u)| B(w, |u - v|) dw du` by quadrature, at any velocity `v`.
pub fn hypothesis_integral(
    k: &KernelSpec,
    h: &[f64],
    vg: &VelocityGrid,
    sq: &SphereQuadrature,
    v: &Vector,
) -> f64 {
    let mut total = 0.0;
    for (i, hu) in h.iter().enumerate() {
        if *hu == 0.0 {
            continue;
        }
        let u = vg.node(i);
        let s: f64 = sq
            .nodes()
            .iter()
            .zip(sq.weights())
            .map(|(w, q)| q * k.evaluate(w, &u, v))
            .sum();
        total += hu.abs() * s;
    }
    total * vg.cell_volume()
}

/// `dv^n sum_k w_k B(w_k, g)` tabulated on every difference `g = u - v` of two
/// grid nodes. Serves the loss term and the hypothesis sweep.
#[derive(Debug, Clone)]
pub struct KernelTable {
    vg: VelocityGrid,
    side: usize,
    table: Vec<f64>,
}

impl KernelTable {
    pub fn new(k: &KernelSpec, vg: &VelocityGrid, sq: &SphereQuadrature) -> Self {
        let n = vg.nodes_per_axis();
        let side = 2 * n - 1;
        let dim = vg.dim();
        let len = side.pow(dim as u32);
        let h = vg.spacing();
        let vol = vg.cell_volume();
        let table = (0..len)
            .map(|flat| {
                let mut rest = flat;
                let mut g = [0.0; 3];
                for a in (0..dim).rev() {
                    g[a] = ((rest % side) as f64 - (n - 1) as f64) * h;
                    rest /= side;
                }
                let phi = k.radial_factor(norm(&g));
                let s: f64 = sq
                    .nodes()
                    .iter()
                    .zip(sq.weights())
                    .map(|(w, q)| q * dot(&g, w).abs())
                    .sum();
                vol * phi * s
            })
            .collect();
        KernelTable {
            vg: *vg,
            side,
            table,
        }
    }

    /// Table entry for the node pair `(u, v)` given as flat indices.
    #[inline]
    pub fn pair(&self, u: usize, v: usize) -> f64 {
        let iu = self.vg.multi_index(u);
        let iv = self.vg.multi_index(v);
        let off = self.vg.nodes_per_axis() - 1;
        let mut idx = 0;
        for a in 0..self.vg.dim() {
            idx = idx * self.side + (iu[a] + off - iv[a]);
        }
        self.table[idx]
    }

    /// `sum_u a(u) T(u - v)` for every node `v`.
    pub fn convolve(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vg.len()];
        par::fill(&mut out, |v| self.convolve_at(a, v));
        out
    }

    /// `sum_u a(u) T(u - v)` at the node `v`.
    pub fn convolve_at(&self, a: &[f64], v: usize) -> f64 {
        let n = self.vg.nodes_per_axis();
        let side = self.side;
        let iv = self.vg.multi_index(v);
        let mut acc = 0.0;
        if self.vg.dim() == 2 {
            for i0 in 0..n {
                let row = (i0 + n - 1 - iv[0]) * side + (n - 1 - iv[1]);
                let arow = &a[i0 * n..(i0 + 1) * n];
                let trow = &self.table[row..row + n];
                acc += arow.iter().zip(trow).map(|(x, t)| x * t).sum::<f64>();
            }
        } else {
            for i0 in 0..n {
                for i1 in 0..n {
                    let row =
                        ((i0 + n - 1 - iv[0]) * side + (i1 + n - 1 - iv[1])) * side + (n - 1 - iv[2]);
                    let start = (i0 * n + i1) * n;
                    let arow = &a[start..start + n];
                    let trow = &self.table[row..row + n];
                    acc += arow.iter().zip(trow).map(|(x, t)| x * t).sum::<f64>();
                }
            }
        }
        acc
    }

    /// Sequential variant of [`KernelTable::convolve`] for callers that already
    /// parallelise over slices.
    pub fn convolve_serial(&self, a: &[f64]) -> Vec<f64> {
        (0..self.vg.len()).map(|v| self.convolve_at(a, v)).collect()
    }
}

/// Outcome of sweeping the contraction hypotheses over a field family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certification {
    pub l_estimate: f64,
    pub satisfied: bool,
    /// Velocity nodes skipped because `|v| < dv / 2` (counted per sampled slice).
    pub excluded_nodes: usize,
    pub samples: usize,
}

/// For each field, time node, spatial node and velocity node with
/// `|v| >= dv / 2` computes `L_h(v) = I_h(v) b1 (1 + |v|^mu) / |v|`, where
/// `I_h` is [`hypothesis_integral`]; the estimate is the maximum.
pub fn certify_theorem1_hypotheses(
    k: &KernelSpec,
    f2: &DistributionField,
    g_list: &[DistributionField],
    vg: &VelocityGrid,
    sq: &SphereQuadrature,
) -> Result<Certification> {
    for g in g_list {
        f2.check_compatible(g)?;
    }
    if f2.velocity_grid() != vg {
        return Err(Error::ShapeMismatch("field and velocity grid differ".into()));
    }
    let table = KernelTable::new(k, vg, sq);
    let nodes = vg.nodes();
    let cutoff = 0.5 * vg.spacing();
    let weight: Vec<Option<f64>> = nodes
        .iter()
        .map(|v| {
            let r = norm(v);
            (r >= cutoff).then(|| k.b1 * (1.0 + r.powf(k.mu)) / r)
        })
        .collect();
    let excluded_per_slice = weight.iter().filter(|w| w.is_none()).count();

    let fields: Vec<&DistributionField> = std::iter::once(f2).chain(g_list.iter()).collect();
    let nx = f2.spatial_grid().len();
    let per_field = f2.time_count() * nx;
    let slices = fields.len() * per_field;
    let maxima = par::map_range(slices, |s| {
        let field = fields[s / per_field];
        let m = (s % per_field) / nx;
        let ix = s % nx;
        let abs: Vec<f64> = field.velocity_slice(m, ix).iter().map(|x| x.abs()).collect();
        let integral = table.convolve_serial(&abs);
        integral
            .iter()
            .zip(&weight)
            .filter_map(|(i, w)| w.map(|w| i * w))
            .fold(0.0, f64::max)
    });
    let l_estimate = maxima.into_iter().fold(0.0, f64::max);
    Ok(Certification {
        l_estimate,
        satisfied: l_estimate < 1.0,
        excluded_nodes: excluded_per_slice * slices,
        samples: (vg.len() - excluded_per_slice) * slices,
    })
}
