//! Small numerical kernels shared by the engines: Gauss–Legendre quadrature,
//! bracketed root finding, Hermite interpolation and Richardson extrapolation.

use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl10();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    x.iter().zip(w).map(|(xi, wi)| wi * f(c + h * xi)).sum::<f64>() * h
}

/// Adaptive 10-point Gauss–Legendre quadrature of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl_panel(f, a, m);
        let right = gl_panel(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= tol {
            return left + right;
        }
        rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
    }
    let whole = gl_panel(f, a, b);
    rec(f, a, b, whole, tol, 30)
}

/// Root of a function with a sign change on [lo, hi]: bisection down to
/// `tol`, then Newton polish steps that are kept only if they stay in the
/// final bracket.
pub fn bisect_newton<F, D>(f: F, df: D, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::BracketFailure { lo, hi, f_lo: fa, f_hi: fb });
    }
    let increasing = fb > fa;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == increasing {
            b = m;
        } else {
            a = m;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..2 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - f(x) / d;
        if next >= a - tol && next <= b + tol {
            x = next;
        } else {
            break;
        }
    }
    Ok(x)
}

/// Cubic Hermite interpolation on [x0, x1] from values and slopes.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of the cubic Hermite interpolant.
#[inline]
pub fn hermite_deriv(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1
}

/// Polynomial extrapolation of `values[i] = F(steps[i])` to step 0 (Neville).
pub fn extrapolate_to_zero(steps: &[f64], values: &[f64]) -> f64 {
    assert_eq!(steps.len(), values.len());
    let n = steps.len();
    let mut p = values.to_vec();
    for k in 1..n {
        for i in 0..n - k {
            let (hi, hk) = (steps[i], steps[i + k]);
            p[i] = (hk * p[i] - hi * p[i + 1]) / (hk - hi);
        }
    }
    p[0]
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(|| Normal::new(0.0, 1.0).expect("standard normal"))
}

/// Standard normal quantile.
#[inline]
pub fn norm_inv(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Numerically stable `log(sum_i w_i exp(a_i))` for positive weights.
pub fn log_sum_exp(a: &[f64], w: &[f64]) -> f64 {
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = a.iter().zip(w).map(|(ai, wi)| wi * (ai - m).exp()).sum();
    m + s.ln()
}

/// Cubic Lagrange interpolation on a uniform grid, using the four nodes
/// around `x` (clamped at the ends).
pub fn lagrange4(values: &[f64], lo: f64, dy: f64, x: f64) -> f64 {
    let n = values.len();
    if n < 4 {
        let s = ((x - lo) / dy).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let w = s - k as f64;
        return values[k] * (1.0 - w) + values[k + 1] * w;
    }
    let s = (x - lo) / dy;
    let k = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let u = s - k as f64;
    let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    l0 * values[k] + l1 * values[k + 1] + l2 * values[k + 2] + l3 * values[k + 3]
}

/// Derivative at `x` of the polynomial interpolating `(xs, ys)`.
pub fn lagrange_deriv(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut out = 0.0;
    for j in 0..n {
        let mut denom = 1.0;
        for m in 0..n {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        // d/dx of prod_{m != j} (x - x_m)
        let mut num = 0.0;
        for i in 0..n {
            if i == j {
                continue;
            }
            let mut p = 1.0;
            for m in 0..n {
                if m != j && m != i {
                    p *= x - xs[m];
                }
            }
            num += p;
        }
        out += ys[j] * num / denom;
    }
    out
}

/// Time derivative at node `i` of a tabulated function, from the five-node
/// stencil centered on `i` (shifted inward at the ends).
pub fn node_time_derivative<F: Fn(usize) -> f64>(nodes: &[f64], i: usize, val: F) -> f64 {
    let nt = nodes.len() - 1;
    let w = nt.min(4);
    let start = i.saturating_sub(w / 2).min(nt - w);
    let xs = &nodes[start..=start + w];
    let ys: Vec<f64> = (start..=start + w).map(val).collect();
    lagrange_deriv(xs, &ys, nodes[i])
}
