use serde::{Deserialize, Serialize};

use super::{GenPoint, Generator};
use crate::error::Result;
use crate::stochastic::{sample_paths, TimeGrid};

/// Sampling box for [`audit_assumptions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditGrid {
    pub horizon: f64,
    pub n_t: usize,
    pub y_max: f64,
    pub n_y: usize,
    pub z_max: f64,
    pub n_z: usize,
    /// Paths sampled for random generators.
    pub n_paths: usize,
    pub seed: u64,
    /// Number of `|y|` levels in the `ℓ̂` profile.
    pub n_levels: usize,
}

impl Default for AuditGrid {
    fn default() -> Self {
        AuditGrid { horizon: 1.0, n_t: 16, y_max: 3.0, n_y: 25, z_max: 4.0, n_z: 33, n_paths: 32, seed: 1, n_levels: 6 }
    }
}

/// Empirical constants and flags from a sampled audit. Sampling can
/// certify a failure; a pass is only evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub generator: String,
    pub note: String,
    /// `sup |g(t, y, 0)|`
    pub kappa_hat: f64,
    /// `(|y| level, ℓ̂)` rows, `ℓ̂` covering both the growth and the `∂_z g` bound.
    pub ell_profile: Vec<[f64; 2]>,
    pub a1_finite: bool,
    /// At most quadratic growth in `z` (superquadratic drivers are rejected).
    pub a2_quadratic_growth: bool,
    pub a3_linear_dz: bool,
    /// `−sup (|z|² coefficient of ∂_y g)`; non-negative means (A4) holds.
    pub a4_margin: f64,
    pub a4: bool,
    /// `−sup |z|² coefficient of |∂_y g|`; non-negative means (A4*) holds.
    pub a4_star_margin: f64,
    pub a4_star: bool,
    /// `∂_z g(t, y, z) = 0` only at `z = 0`.
    pub a5: bool,
    /// `∂_y f ≤ 0` for the `|z|²` coefficient, where that coefficient exists.
    pub dyf_sign: Option<bool>,
    /// `g(t, y, z) = k(y)|z|²` on the samples.
    pub k_form: bool,
    pub flags: Vec<String>,
}

const TOL: f64 = 1e-12;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

pub fn audit_assumptions(g: &Generator, grid: &AuditGrid) -> Result<AuditReport> {
    let tg = TimeGrid::uniform(0.0, grid.horizon, grid.n_t.max(1))?;
    let ts = tg.nodes().to_vec();
    let ys = linspace(-grid.y_max, grid.y_max, grid.n_y.max(2));
    let zs = linspace(-grid.z_max, grid.z_max, grid.n_z.max(3));
    let zm = grid.z_max;

    // One evaluator per scenario: a single one for deterministic generators,
    // one per sampled path otherwise.
    let batch = if g.is_deterministic() { None } else { Some(sample_paths(&tg, 1, grid.n_paths.max(1), grid.seed)?) };
    let n_scen = batch.as_ref().map_or(1, |b| b.n_paths);
    let point = |s: usize, t: f64, y: f64, z: f64| -> Result<GenPoint> {
        match &batch {
            None => g.point(t, y, z),
            Some(b) => g.point_pathwise(b.path(s), t, y, z),
        }
    };

    let mut kappa: f64 = 0.0;
    let mut finite = true;
    let mut c4: f64 = f64::NEG_INFINITY;
    let mut c4_abs: f64 = 0.0;
    let mut a5 = true;
    let mut growth_ok = true;
    let mut dz_ok = true;
    let mut t_dep = false;
    let mut zero_drift = true;
    let mut homogeneous = true;
    let levels = linspace(0.0, grid.y_max, grid.n_levels.max(2));
    let mut ell = vec![0.0f64; levels.len()];

    for s in 0..n_scen {
        for &t in &ts {
            for &y in &ys {
                let p0 = point(s, t, y, 0.0)?;
                kappa = kappa.max(p0.g.abs());
                zero_drift &= p0.g.abs() <= TOL;
                a5 &= p0.gz.abs() <= 1e-9;
                let pm = point(s, t, y, zm)?;
                let ph = point(s, t, y, 0.5 * zm)?;
                let coef = (pm.gy - p0.gy) / (zm * zm);
                c4 = c4.max(coef);
                c4_abs = c4_abs.max(coef.abs());
                // Growth: the |z|² ratio must not increase at the box edge.
                let r_m = (pm.g.abs() - p0.g.abs()).max(0.0) / (zm * zm);
                let r_h = (ph.g.abs() - p0.g.abs()).max(0.0) / (0.25 * zm * zm);
                if r_m > r_h * (1.0 + 1e-6) + 1e-9 {
                    growth_ok = false;
                }
                let d_m = pm.gz.abs() / (1.0 + zm);
                let d_h = ph.gz.abs() / (1.0 + 0.5 * zm);
                if d_m > 2.0 * d_h + 1e-9 {
                    dz_ok = false;
                }
                for &z in &zs {
                    let p = point(s, t, y, z)?;
                    finite &= p.g.is_finite() && p.gy.is_finite() && p.gz.is_finite();
                    if z != 0.0 {
                        a5 &= p.gz * z.signum() > 0.0;
                        let l = ((p.g.abs() - kappa).max(0.0) / (z * z)).max(p.gz.abs() / (1.0 + z.abs()));
                        for (lv, e) in levels.iter().zip(ell.iter_mut()) {
                            if y.abs() <= *lv + 1e-12 {
                                *e = e.max(l);
                            }
                        }
                        // k(y)|z|² form: homogeneity, no time or path dependence.
                        let unit = point(s, t, y, 1.0)?.g;
                        if (p.g - z * z * unit).abs() > 1e-9 * (1.0 + p.g.abs()) {
                            homogeneous = false;
                        }
                        if (p.g - point(0, ts[0], y, z)?.g).abs() > 1e-12 * (1.0 + p.g.abs()) {
                            t_dep = true;
                        }
                    }
                }
            }
        }
    }

    let dyf_sign = match g {
        Generator::PureQuadratic { k } => Some(ys.iter().all(|&y| k.d1(y) <= TOL)),
        Generator::DriftQuadratic { f, .. } => {
            use crate::transforms::ScalarField;
            Some(ts.iter().all(|&t| ys.iter().all(|&y| f.dy(t, y) <= 1e-9)))
        }
        Generator::Entropic { .. } | Generator::TimeVaryingQuadratic { .. } => Some(true),
        _ => None,
    };

    let mut flags = Vec::new();
    if !zero_drift {
        flags.push("g(t, y, 0) is not identically zero".to_string());
    }
    if t_dep {
        flags.push("time or path dependence detected: not of the k(y)|z|² form".to_string());
    }
    if !homogeneous {
        flags.push("not quadratically homogeneous in z".to_string());
    }
    if !growth_ok {
        flags.push("superquadratic growth in z on the sampled box".to_string());
    }
    if dyf_sign == Some(false) {
        flags.push("∂_y f > 0 somewhere on the sampled box".to_string());
    }
    let c4 = if c4.is_finite() { c4 } else { 0.0 };
    Ok(AuditReport {
        generator: g.name().to_string(),
        note: "sampled audit: a failure is certain, a pass is evidence only".to_string(),
        kappa_hat: kappa,
        ell_profile: levels.iter().zip(&ell).map(|(a, b)| [*a, *b]).collect(),
        a1_finite: finite,
        a2_quadratic_growth: growth_ok,
        a3_linear_dz: dz_ok,
        a4_margin: -c4.max(0.0),
        a4: c4 <= TOL,
        a4_star_margin: -c4_abs,
        a4_star: c4_abs <= TOL,
        a5,
        dyf_sign,
        k_form: zero_drift && !t_dep && homogeneous,
        flags,
    })
}
