//! Brute-force reference implementations. Everything here works in physical
//! coordinates with plain loops and shares no code with the library beyond
//! grid descriptors and field containers.

#![allow(dead_code)]

use kfix::grid::{DistributionField, SpatialGrid, SphereQuadrature, VelocityGrid};
use kfix::kernel::{KernelForm, KernelSpec};

/// Tolerances that are part of the discrete definitions (node snapping for
/// post-collision points, integer snapping for spatial shifts).
const NODE_SNAP: f64 = 1e-9;
const SHIFT_SNAP: f64 = 1e-9;

pub fn kernel_value(k: &KernelSpec, w: &[f64; 3], u: &[f64; 3], v: &[f64; 3]) -> f64 {
    let g = [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
    let r = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    let c = (g[0] * w[0] + g[1] * w[1] + g[2] * w[2]).abs();
    if r == 0.0 {
        return 0.0;
    }
    match k.form {
        KernelForm::HardSphere => k.strength * c,
        KernelForm::Maxwell => k.strength * c / r,
        KernelForm::VariableHardSphere => k.strength * r.powf(k.exponent) * c / r,
    }
}

/// Multilinear interpolation at a physical velocity; zero outside the box.
pub fn interp(vg: &VelocityGrid, f: &[f64], p: &[f64; 3]) -> f64 {
    let n = vg.nodes_per_axis();
    let top = (n - 1) as f64;
    let dim = vg.dim();
    let mut lo = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..dim {
        let mut x = (p[a] + vg.extent()) / vg.spacing();
        if (x - x.round()).abs() <= NODE_SNAP {
            x = x.round();
        }
        if x < 0.0 || x > top {
            return 0.0;
        }
        let i = (x.floor() as usize).min(n - 2);
        lo[a] = i;
        t[a] = x - i as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..dim {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { t[a] } else { 1.0 - t[a] };
            idx = idx * n + lo[a] + bit;
        }
        acc += w * f[idx];
    }
    acc
}

fn node(vg: &VelocityGrid, i: usize) -> [f64; 3] {
    let n = vg.nodes_per_axis();
    let dim = vg.dim();
    let mut rest = i;
    let mut out = [0.0; 3];
    for a in (0..dim).rev() {
        out[a] = -vg.extent() + (rest % n) as f64 * vg.spacing();
        rest /= n;
    }
    out
}

/// Gain and loss of the symmetrised bilinear form
/// `1/2 [f(v')g(u') + f(u')g(v') - f(u)g(v) - f(v)g(u)]`.
pub fn bilinear(
    f: &[f64],
    g: &[f64],
    k: &KernelSpec,
    vg: &VelocityGrid,
    sq: &SphereQuadrature,
) -> (Vec<f64>, Vec<f64>) {
    let len = vg.len();
    let vol = vg.spacing().powi(vg.dim() as i32);
    let mut gain = vec![0.0; len];
    let mut loss = vec![0.0; len];
    for iv in 0..len {
        let v = node(vg, iv);
        for iu in 0..len {
            let u = node(vg, iu);
            for (w, q) in sq.nodes().iter().zip(sq.weights()) {
                let b = kernel_value(k, w, &u, &v);
                if b == 0.0 {
                    continue;
                }
                let d = (0..3).map(|a| (u[a] - v[a]) * w[a]).sum::<f64>();
                let up = [u[0] - w[0] * d, u[1] - w[1] * d, u[2] - w[2] * d];
                let vp = [v[0] + w[0] * d, v[1] + w[1] * d, v[2] + w[2] * d];
                let (fu, fv) = (interp(vg, f, &up), interp(vg, f, &vp));
                let (gu, gv) = (interp(vg, g, &up), interp(vg, g, &vp));
                gain[iv] += q * vol * b * 0.5 * (fv * gu + fu * gv);
                loss[iv] += q * vol * b * 0.5 * (f[iu] * g[iv] + f[iv] * g[iu]);
            }
        }
    }
    (gain, loss)
}

pub fn quadratic(f: &[f64], k: &KernelSpec, vg: &VelocityGrid, sq: &SphereQuadrature) -> (Vec<f64>, Vec<f64>) {
    bilinear(f, f, k, vg, sq)
}

pub fn q_total(f: &[f64], k: &KernelSpec, vg: &VelocityGrid, sq: &SphereQuadrature) -> Vec<f64> {
    let (g, l) = quadratic(f, k, vg, sq);
    g.iter().zip(&l).map(|(a, b)| a - b).collect()
}

/// `sum_u sum_w q dv^n |h(u)| B(w, u - v)` at any velocity `v`.
pub fn hypothesis_integral(
    k: &KernelSpec,
    h: &[f64],
    vg: &VelocityGrid,
    sq: &SphereQuadrature,
    v: &[f64; 3],
) -> f64 {
    let vol = vg.spacing().powi(vg.dim() as i32);
    let mut acc = 0.0;
    for (iu, hu) in h.iter().enumerate() {
        let u = node(vg, iu);
        for (w, q) in sq.nodes().iter().zip(sq.weights()) {
            acc += q * vol * hu.abs() * kernel_value(k, w, &u, v);
        }
    }
    acc
}

/// `h(x + v tau, v)` by periodic multilinear interpolation in `x`.
pub fn shift(h: &[f64], space: &SpatialGrid, vg: &VelocityGrid, tau: f64) -> Vec<f64> {
    if space.nodes_per_axis() == 1 || tau == 0.0 {
        return h.to_vec();
    }
    let n = space.nodes_per_axis();
    let dim = space.dim();
    let dx = space.period() / n as f64;
    let nv = vg.len();
    let mut out = vec![0.0; h.len()];
    for ix in 0..space.len() {
        let mut xi = [0usize; 3];
        let mut rest = ix;
        for a in (0..dim).rev() {
            xi[a] = rest % n;
            rest /= n;
        }
        for iv in 0..nv {
            let v = node(vg, iv);
            let mut lo = [0i64; 3];
            let mut t = [0.0; 3];
            for a in 0..dim {
                let s = xi[a] as f64 + v[a] * tau / dx;
                let mut fl = s.floor();
                let mut fr = s - fl;
                if fr < SHIFT_SNAP {
                    fr = 0.0;
                } else if 1.0 - fr < SHIFT_SNAP {
                    fr = 0.0;
                    fl += 1.0;
                }
                lo[a] = fl as i64;
                t[a] = fr;
            }
            let mut acc = 0.0;
            for corner in 0..(1usize << dim) {
                let mut w = 1.0;
                let mut idx = 0usize;
                for a in 0..dim {
                    let bit = (corner >> a) & 1;
                    w *= if bit == 1 { t[a] } else { 1.0 - t[a] };
                    idx = idx * n + (lo[a] + bit as i64).rem_euclid(n as i64) as usize;
                }
                if w != 0.0 {
                    acc += w * h[idx * nv + iv];
                }
            }
            out[ix * nv + iv] = acc;
        }
    }
    out
}

fn per_x<F: Fn(&[f64], &[f64]) -> Vec<f64>>(a: &[f64], b: &[f64], nv: usize, op: F) -> Vec<f64> {
    a.chunks(nv).zip(b.chunks(nv)).flat_map(|(x, y)| op(x, y)).collect()
}

/// Lab-frame field from characteristic-frame running trapezoid sums of
/// `integrand(m)`, with `initial` added to every slice.
fn accumulate(
    like: &DistributionField,
    integrand: &[Vec<f64>],
    initial: Option<&[f64]>,
) -> Vec<f64> {
    let times = like.times();
    let (sg, vg) = (like.spatial_grid(), like.velocity_grid());
    let len = like.slice_len();
    let mut acc = vec![0.0; len];
    let mut out = Vec::new();
    for m in 0..times.len() {
        if m > 0 {
            let h = 0.5 * (times[m] - times[m - 1]);
            for i in 0..len {
                acc[i] += h * (integrand[m - 1][i] + integrand[m][i]);
            }
        }
        let sharp: Vec<f64> = match initial {
            Some(init) => acc.iter().zip(init).map(|(a, b)| a + b).collect(),
            None => acc.clone(),
        };
        out.extend(shift(&sharp, sg, vg, -times[m]));
    }
    out
}

/// Lab-frame `F(g)(t_m) = int_0^{t_m} Q#(f2+g) - Q#(f2)`.
pub fn f_map(
    g: &DistributionField,
    f2: &DistributionField,
    k: &KernelSpec,
    sq: &SphereQuadrature,
) -> Vec<f64> {
    let (sg, vg) = (f2.spatial_grid(), f2.velocity_grid());
    let nv = vg.len();
    let integrand: Vec<Vec<f64>> = (0..f2.time_count())
        .map(|m| {
            let lab = per_x(f2.slice(m), g.slice(m), nv, |a, b| {
                let h: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let qh = q_total(&h, k, vg, sq);
                let qa = q_total(a, k, vg, sq);
                qh.iter().zip(&qa).map(|(x, y)| x - y).collect()
            });
            shift(&lab, sg, vg, f2.times()[m])
        })
        .collect();
    accumulate(f2, &integrand, None)
}

/// Lab-frame renormalized map with `beta(t) = ln(1 + t)` evaluated on
/// values clipped at zero.
pub fn renorm_f_map_log1p(
    g: &DistributionField,
    f2: &DistributionField,
    k: &KernelSpec,
    sq: &SphereQuadrature,
) -> Vec<f64> {
    let (sg, vg) = (f2.spatial_grid(), f2.velocity_grid());
    let nv = vg.len();
    let beta = |x: f64| x.max(0.0).ln_1p();
    let dbeta = |x: f64| 1.0 / (1.0 + x.max(0.0));
    let integrand: Vec<Vec<f64>> = (0..f2.time_count())
        .map(|m| {
            let lab = per_x(f2.slice(m), g.slice(m), nv, |a, b| {
                let h: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let qh = q_total(&h, k, vg, sq);
                let qa = q_total(a, k, vg, sq);
                (0..nv).map(|i| dbeta(h[i]) * qh[i] - dbeta(a[i]) * qa[i]).collect()
            });
            shift(&lab, sg, vg, f2.times()[m])
        })
        .collect();
    let initial: Vec<f64> = f2
        .slice(0)
        .iter()
        .zip(g.slice(0))
        .map(|(a, d)| beta(a + d) - beta(*a))
        .collect();
    accumulate(f2, &integrand, Some(&initial))
}

pub fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `||a - b||_1 / ||b||_1` (absolute when `b` vanishes).
pub fn rel_l1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    let norm = l1(b);
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

/// Deterministic pseudo-random values in `[lo, hi)` (splitmix64).
pub fn noise(len: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut s = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    (0..len)
        .map(|_| {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            lo + (hi - lo) * (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}
