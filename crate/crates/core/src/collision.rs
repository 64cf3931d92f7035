//! Quadrature evaluation of the quadratic and bilinear collision operators on
//! a velocity grid. Post-collision velocities generally fall between nodes and
//! are evaluated by multilinear interpolation (zero outside the box).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    compute_moments, norm, snap_to_node, Moments, SphereQuadrature, Vector, VelocityGrid,
};
use crate::kernel::{KernelSpec, KernelTable};
use crate::par;

/// Gain and loss parts of a collision operator evaluated on every grid node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionResult {
    pub gain: Vec<f64>,
    pub loss: Vec<f64>,
    pub total: Vec<f64>,
}

impl CollisionResult {
    fn from_parts(gain: Vec<f64>, loss: Vec<f64>) -> Self {
        let total = gain.iter().zip(&loss).map(|(g, l)| g - l).collect();
        CollisionResult { gain, loss, total }
    }
}

/// Collision operator with its kernel tables precomputed for one grid,
/// quadrature and kernel.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    vg: VelocityGrid,
    kernel: KernelSpec,
    /// Directions with antipodal pairs merged; the kernel and the
    /// post-collision map are both even in `w`.
    dirs: Vec<Vector>,
    dir_weights: Vec<f64>,
    /// `phi(|g|)` on the difference lattice.
    radial: Vec<f64>,
    side: usize,
    table: KernelTable,
}

impl CollisionOperator {
    pub fn new(kernel: &KernelSpec, vg: &VelocityGrid, sq: &SphereQuadrature) -> Result<Self> {
        kernel.validate()?;
        if sq.dim() != vg.dim() {
            return Err(Error::ShapeMismatch(format!(
                "sphere quadrature dimension {} differs from velocity dimension {}",
                sq.dim(),
                vg.dim()
            )));
        }
        let mut dirs: Vec<Vector> = Vec::with_capacity(sq.len());
        let mut dir_weights: Vec<f64> = Vec::with_capacity(sq.len());
        for (w, q) in sq.nodes().iter().zip(sq.weights()) {
            let twin = dirs
                .iter()
                .position(|d| (0..3).all(|a| (d[a] + w[a]).abs() < 1e-12));
            match twin {
                Some(j) => dir_weights[j] += q,
                None => {
                    dirs.push(*w);
                    dir_weights.push(*q);
                }
            }
        }

        let n = vg.nodes_per_axis();
        let side = 2 * n - 1;
        let dim = vg.dim();
        let h = vg.spacing();
        let radial = (0..side.pow(dim as u32))
            .map(|flat| {
                let mut rest = flat;
                let mut g = [0.0; 3];
                for a in (0..dim).rev() {
                    g[a] = ((rest % side) as f64 - (n - 1) as f64) * h;
                    rest /= side;
                }
                kernel.radial_factor(norm(&g))
            })
            .collect();

        Ok(CollisionOperator {
            vg: *vg,
            kernel: *kernel,
            dirs,
            dir_weights,
            radial,
            side,
            table: KernelTable::new(kernel, vg, sq),
        })
    }

    pub fn velocity_grid(&self) -> &VelocityGrid {
        &self.vg
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    fn check(&self, f: &[f64], what: &str) -> Result<()> {
        if f.len() != self.vg.len() {
            return Err(Error::ShapeMismatch(format!(
                "{what} has {} values, velocity grid has {}",
                f.len(),
                self.vg.len()
            )));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("collision operator input {what}"),
            });
        }
        Ok(())
    }

    /// `Q(f, f)`: gain `f(u')f(v')`, loss `f(u)f(v)`.
    pub fn quadratic(&self, f: &[f64]) -> Result<CollisionResult> {
        self.check(f, "f")?;
        if self.kernel.strength == 0.0 {
            return Ok(self.zero());
        }
        let gain = self.gain_map(&[(f, f, 1.0)]);
        let loss = self.loss(f, f);
        Ok(CollisionResult::from_parts(gain, loss))
    }

    /// Symmetrised bilinear form
    /// `1/2 [f(v')g(u') + f(u')g(v') - f(u)g(v) - f(v)g(u)]`.
    pub fn bilinear(&self, f: &[f64], g: &[f64]) -> Result<CollisionResult> {
        self.check(f, "f")?;
        self.check(g, "g")?;
        if self.kernel.strength == 0.0 {
            return Ok(self.zero());
        }
        let gain = self.gain_map(&[(g, f, 0.5), (f, g, 0.5)]);
        let conv_f = self.table.convolve(f);
        let conv_g = self.table.convolve(g);
        let loss = (0..self.vg.len())
            .map(|v| 0.5 * (g[v] * conv_f[v] + f[v] * conv_g[v]))
            .collect();
        Ok(CollisionResult::from_parts(gain, loss))
    }

    /// Asymmetric gain integral with `a` at `u'` and `b` at `v'`.
    pub fn gain(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.check(a, "a")?;
        self.check(b, "b")?;
        Ok(self.gain_map(&[(a, b, 1.0)]))
    }

    /// Asymmetric loss integral `b(v) int int B a(u) dw du`.
    pub fn loss(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let conv = self.table.convolve(a);
        conv.iter().zip(b).map(|(c, bv)| c * bv).collect()
    }

    fn zero(&self) -> CollisionResult {
        let z = vec![0.0; self.vg.len()];
        CollisionResult {
            gain: z.clone(),
            loss: z.clone(),
            total: z,
        }
    }

    /// `sum_j c_j sum_u sum_k w_k dv^n B(w_k, u - v) a_j(u') b_j(v')` for
    /// every node `v`, over the `(a_j, b_j, c_j)` in `terms`.
    ///
    /// In index units, with `g = i_u - i_v` and `d = g.w`, the post-collision
    /// points are `i_v + (g - w d)` and `i_v + w d`, and
    /// `B = phi(|g|) dv |d|`. The offsets from `v` do not depend on `v`, so
    /// the loops run over `(g, w)` outside and sweep `v` inside with one fixed
    /// interpolation stencil per pair of offsets. Every output cell is summed
    /// in the same `(g, w)` order whatever the thread count.
    fn gain_map(&self, terms: &[(&[f64], &[f64], f64)]) -> Vec<f64> {
        if self.vg.dim() == 2 {
            self.gain_sweep::<2>(terms)
        } else {
            self.gain_sweep::<3>(terms)
        }
    }

    fn gain_sweep<const D: usize>(&self, terms: &[(&[f64], &[f64], f64)]) -> Vec<f64> {
        let vg = self.vg;
        let n = vg.nodes_per_axis();
        let top = n as isize - 1;
        let side = self.side as isize;
        let prefactor = vg.cell_volume() * vg.spacing();
        let mut stride = [0isize; 3];
        for (a, s) in stride.iter_mut().enumerate().take(D) {
            *s = n.pow((D - 1 - a) as u32) as isize;
        }
        let plane = stride[0] as usize;
        let mut out = vec![0.0; vg.len()];
        par::for_each_chunk(&mut out, plane, |c0, row| {
            let c0 = c0 as isize;
            let mut buf_u = vec![0.0; n];
            let mut buf_v = vec![0.0; n];
            let mut visit = |g: [isize; 3]| {
                let mut flat = 0;
                for ga in g.iter().take(D) {
                    flat = flat * side + ga + top;
                }
                let phi = self.radial[flat as usize];
                if phi == 0.0 {
                    return;
                }
                let gf = [g[0] as f64, g[1] as f64, g[2] as f64];
                for (w, q) in self.dirs.iter().zip(&self.dir_weights) {
                    let d = gf[0] * w[0] + gf[1] * w[1] + gf[2] * w[2];
                    if d == 0.0 {
                        continue;
                    }
                    let mut lo = [0isize; 3];
                    let mut hi = [0isize; 3];
                    let mut pu = Probe::default();
                    let mut pv = Probe::default();
                    let (mut off_u, mut off_v) = (0isize, 0isize);
                    for a in 0..D {
                        let (ku, su, fu) = split_offset(gf[a] - w[a] * d);
                        let (kv, sv, fv) = split_offset(w[a] * d);
                        lo[a] = 0.max(-ku).max(-kv).max(-g[a]);
                        hi[a] = top.min(top - ku - su).min(top - kv - sv).min(top - g[a]);
                        pu.step[a] = (su * stride[a]) as usize;
                        pu.frac[a] = fu;
                        pv.step[a] = (sv * stride[a]) as usize;
                        pv.frac[a] = fv;
                        off_u += ku * stride[a];
                        off_v += kv * stride[a];
                    }
                    if c0 < lo[0] || c0 > hi[0] || (1..D).any(|a| lo[a] > hi[a]) {
                        continue;
                    }
                    pu.dim = D;
                    pv.dim = D;
                    let weight = prefactor * phi * q * d.abs();
                    let cell0 = c0 * stride[0];
                    let last = D - 1;
                    let len = (hi[last] - lo[last] + 1) as usize;
                    let (bu, bv) = (&mut buf_u[..len], &mut buf_v[..len]);
                    let mut sweep = |local: isize| {
                        let cell = cell0 + local;
                        let iu = (cell + off_u) as usize;
                        let iv = (cell + off_v) as usize;
                        let dest = &mut row[local as usize..local as usize + len];
                        for (a, b, c) in terms {
                            pu.row(a, iu, bu);
                            pv.row(b, iv, bv);
                            let wc = weight * c;
                            for ((o, x), y) in dest.iter_mut().zip(bu.iter()).zip(bv.iter()) {
                                *o += wc * x * y;
                            }
                        }
                    };
                    if D == 2 {
                        sweep(lo[1]);
                    } else {
                        for c1 in lo[1]..=hi[1] {
                            sweep(c1 * stride[1] + lo[2]);
                        }
                    }
                }
            };
            for g0 in -c0..=top - c0 {
                for g1 in -top..=top {
                    if D == 2 {
                        visit([g0, g1, 0]);
                    } else {
                        for g2 in -top..=top {
                            visit([g0, g1, g2]);
                        }
                    }
                }
            }
        });
        out
    }
}

/// Splits an offset in cells into whole cells, the neighbour step (0 when
/// the offset sits on a node) and the fractional part.
#[inline]
fn split_offset(x: f64) -> (isize, isize, f64) {
    let x = snap_to_node(x);
    let k = x.floor();
    if x == k {
        (k as isize, 0, 0.0)
    } else {
        (k as isize, 1, x - k)
    }
}

/// Fixed multilinear stencil: neighbour steps (flat) and fractions per axis.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Probe {
    step: [usize; 3],
    frac: [f64; 3],
    dim: usize,
}

impl Probe {
    /// Interpolated values at `out.len()` consecutive cells from flat index `i`.
    #[inline(always)]
    fn row(&self, f: &[f64], i: usize, out: &mut [f64]) {
        let len = out.len();
        let [s0, s1, s2] = self.step;
        let [f0, f1, f2] = self.frac;
        let at = |o: usize| &f[i + o..i + o + len];
        if self.dim == 2 {
            let (a, b, c, d) = (at(0), at(s1), at(s0), at(s0 + s1));
            for j in 0..len {
                let r0 = a[j] + f1 * (b[j] - a[j]);
                let r1 = c[j] + f1 * (d[j] - c[j]);
                out[j] = r0 + f0 * (r1 - r0);
            }
        } else {
            let (a, b) = (at(0), at(s2));
            let (c, d) = (at(s1), at(s1 + s2));
            let (e, g) = (at(s0), at(s0 + s2));
            let (h, k) = (at(s0 + s1), at(s0 + s1 + s2));
            for j in 0..len {
                let c00 = a[j] + f2 * (b[j] - a[j]);
                let c01 = c[j] + f2 * (d[j] - c[j]);
                let c10 = e[j] + f2 * (g[j] - e[j]);
                let c11 = h[j] + f2 * (k[j] - h[j]);
                let c0 = c00 + f1 * (c01 - c00);
                let c1 = c10 + f1 * (c11 - c10);
                out[j] = c0 + f0 * (c1 - c0);
            }
        }
    }
}

/// `Q(f, f)` on one velocity slice.
pub fn q_quadratic(
    f: &[f64],
    k: &KernelSpec,
    vg: &VelocityGrid,
    sq: &SphereQuadrature,
) -> Result<CollisionResult> {
    CollisionOperator::new(k, vg, sq)?.quadratic(f)
}

/// Symmetrised `Q(f, g)` on one velocity slice.
pub fn q_bilinear(
    f: &[f64],
    g: &[f64],
    k: &KernelSpec,
    vg: &VelocityGrid,
    sq: &SphereQuadrature,
) -> Result<CollisionResult> {
    CollisionOperator::new(k, vg, sq)?.bilinear(f, g)
}

/// Mass, momentum and energy of `r.total`; zero for the continuum operator.
pub fn conservation_defect(r: &CollisionResult, vg: &VelocityGrid) -> Moments {
    compute_moments(&r.total, vg)
}
