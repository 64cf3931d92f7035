use std::f64::consts::PI;

use super::{sphere_measure, Vector};
use crate::error::{Error, Result};

/// Nodes and weights for integrals over the unit circle (dim 2) or the unit
/// sphere (dim 3).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    dim: usize,
    nodes: Vec<Vector>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    /// `order` equally spaced angles for dim 2. For dim 3 the product of an
    /// `order`-point Gauss-Legendre rule in `cos(theta)` with `order` uniform
    /// azimuths.
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if order < 4 {
            return Err(Error::InvalidQuadrature(format!(
                "order must be at least 4, got {order}"
            )));
        }
        match dim {
            2 => {
                let w = 2.0 * PI / order as f64;
                let nodes = (0..order)
                    .map(|k| {
                        let a = 2.0 * PI * k as f64 / order as f64;
                        [a.cos(), a.sin(), 0.0]
                    })
                    .collect();
                Ok(SphereQuadrature {
                    dim,
                    nodes,
                    weights: vec![w; order],
                })
            }
            3 => {
                let (xs, ws) = gauss_legendre(order);
                let dphi = 2.0 * PI / order as f64;
                let mut nodes = Vec::with_capacity(order * order);
                let mut weights = Vec::with_capacity(order * order);
                for (x, w) in xs.iter().zip(&ws) {
                    let s = (1.0 - x * x).sqrt();
                    for k in 0..order {
                        let phi = dphi * k as f64;
                        let p = [s * phi.cos(), s * phi.sin(), *x];
                        let r = super::norm(&p);
                        nodes.push([p[0] / r, p[1] / r, p[2] / r]);
                        weights.push(w * dphi);
                    }
                }
                Ok(SphereQuadrature {
                    dim,
                    nodes,
                    weights,
                })
            }
            _ => Err(Error::InvalidQuadrature(format!(
                "dimension must be 2 or 3, got {dim}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Vector] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&Vector) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(w, q)| q * f(w))
            .sum()
    }

    /// Surface measure the weights must sum to.
    pub fn measure(&self) -> f64 {
        sphere_measure(self.dim)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
