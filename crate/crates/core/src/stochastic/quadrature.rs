use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Quadrature rule for `E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(z_i)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

/// Orthonormal Hermite values `(h_n(z), h_{n-1}(z))` scaled by `exp(−z²/2)`
/// so the recurrence neither overflows nor underflows for n ≤ 200.
fn hermite_scaled(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25) * (-0.5 * z * z).exp();
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = (j + 1) as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - (j as f64 / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Gauss–Hermite rule in the probabilists' normalization.
///
/// The positive roots of the physicists' Hermite polynomial are bracketed
/// by a sign-change scan, and refined by bisection to machine precision. Nodes
/// are rescaled by √2 so the weights sum to one against the standard normal
/// density.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if !(1..=200).contains(&n) {
        return invalid(format!("gauss_hermite needs 1 <= n <= 200, got {n}"));
    }
    let nf = n as f64;
    let h = 0.005;
    let z_max = (2.0 * nf + 1.0).sqrt() + 1.0;
    let mut roots = Vec::with_capacity(n / 2);
    let mut a = 0.5 * h;
    let mut fa = hermite_scaled(n, a).0;
    while a < z_max && roots.len() < n / 2 {
        let b = a + h;
        let fb = hermite_scaled(n, b).0;
        if fa == 0.0 || fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                let fm = hermite_scaled(n, m).0;
                if fm.signum() == flo.signum() && fm != 0.0 {
                    lo = m;
                    flo = fm;
                } else {
                    hi = m;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    if roots.len() != n / 2 {
        return invalid(format!("gauss_hermite: found {} of {} positive roots", roots.len(), n / 2));
    }
    let weight = |z: f64| {
        let (_, pm1) = hermite_scaled(n, z);
        let pp = (2.0 * nf).sqrt() * pm1;
        2.0 * (-z * z).exp() / (pp * pp)
    };
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for z in &roots {
        let w = weight(*z);
        pairs.push((*z, w));
        pairs.push((-*z, w));
    }
    if n % 2 == 1 {
        pairs.push((0.0, weight(0.0)));
    }
    let s2 = std::f64::consts::SQRT_2;
    let rpi = std::f64::consts::PI.sqrt();
    for p in pairs.iter_mut() {
        *p = (p.0 * s2, p.1 / rpi);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}
