use super::scheme::{Boundary, SchemeParams, SpatialGrid};
use super::surface::ValueSurface;
use crate::error::{Error, Result};
use crate::functions::PayoffFn;
use crate::stochastic::TimeGrid;

/// A deterministic Markovian driver `g(t, y, z)`.
pub trait Driver: Sync {
    fn g(&self, t: f64, y: f64, z: f64) -> f64;
}

impl<F> Driver for F
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    fn g(&self, t: f64, y: f64, z: f64) -> f64 {
        self(t, y, z)
    }
}

/// Offset of the time arguments into the interior of a step, so that
/// coefficients jumping exactly at grid nodes are integrated exactly.
#[inline]
fn nudge(dt: f64) -> f64 {
    1e-9 * dt
}

/// One RK4 step of the `z = 0` flow `u' = −g(t, u, 0)` backward from `t1` to `t0`.
pub fn zero_z_step(g: &dyn Driver, t0: f64, t1: f64, u: f64) -> f64 {
    let h = t1 - t0;
    let e = nudge(h);
    let f = |s: f64, v: f64| g.g(t1 - s, v, 0.0);
    let k1 = f(e, u);
    let k2 = f(0.5 * h, u + 0.5 * h * k1);
    let k3 = f(0.5 * h, u + 0.5 * h * k2);
    let k4 = f(h - e, u + h * k3);
    u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// The `z = 0` flow of `u_end` from the last to the first of `nodes`.
pub fn zero_z_flow(g: &dyn Driver, nodes: &[f64], u_end: f64) -> f64 {
    let mut u = u_end;
    for w in nodes.windows(2).rev() {
        u = zero_z_step(g, w[0], w[1], u);
    }
    u
}

/// Solve `u_t + ½u_xx + g(t, u, u_x) = 0`, `u(T, ·) = φ`, backward on `tg × sg`.
pub fn solve_markov(
    g: &dyn Driver,
    phi: &PayoffFn,
    tg: &TimeGrid,
    sg: &SpatialGrid,
    sp: &SchemeParams,
) -> Result<ValueSurface> {
    let dx = sg.dx();
    let terminal: Vec<f64> = (0..sg.n_x()).map(|j| phi.cell_average(sg.x(j), dx)).collect();
    solve_terminal_values(g, terminal, phi.is_discontinuous(), tg, sg, sp)
}

/// As [`solve_markov`] with the terminal condition given on the grid nodes.
pub fn solve_terminal_values(
    g: &dyn Driver,
    terminal: Vec<f64>,
    discontinuous: bool,
    tg: &TimeGrid,
    sg: &SpatialGrid,
    sp: &SchemeParams,
) -> Result<ValueSurface> {
    sp.validate()?;
    let nx = sg.n_x();
    if terminal.len() != nx {
        return Err(Error::InvalidArgument("terminal values do not match the spatial grid".into()));
    }
    let sup = terminal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sup <= sp.sup_cap) {
        return Err(Error::UnboundedPayoff { sup, cap: sp.sup_cap });
    }
    let nt = tg.n_steps();
    let nodes = tg.nodes();
    let smoothing = sp.smoothing_steps.unwrap_or(if discontinuous { 2 } else { 0 }).min(nt);

    let mut u = vec![0.0; (nt + 1) * nx];
    u[nt * nx..].copy_from_slice(&terminal);

    // z = 0 flow of the payoff at the four outermost nodes: boundary data
    // for Dirichlet and the reference for the boundary-influence detector.
    let edge = [0, 1, nx - 2, nx - 1];
    let mut ext: [f64; 4] = edge.map(|j| terminal[j]);

    let mut stepper = Stepper::new(sg, sp);
    for n in (0..nt).rev() {
        let (t_lo, t_hi) = (nodes[n], nodes[n + 1]);
        let (done, rest) = u.split_at_mut((n + 1) * nx);
        let next = &rest[..nx];
        let out = &mut done[n * nx..];
        let ext_hi = ext;
        for e in ext.iter_mut() {
            *e = zero_z_step(g, t_lo, t_hi, *e);
        }
        let frozen = [terminal[0], terminal[nx - 1]];
        let bc = |t: f64, hi_vals: [f64; 4]| -> [f64; 2] {
            match sp.boundary {
                Boundary::Dirichlet => {
                    [zero_z_step(g, t, t_hi, hi_vals[0]), zero_z_step(g, t, t_hi, hi_vals[3])]
                }
                _ => frozen,
            }
        };
        if nt - 1 - n < smoothing {
            let t_mid = 0.5 * (t_lo + t_hi);
            let mut mid = vec![0.0; nx];
            let b_mid = bc(t_mid, ext_hi);
            stepper.step(g, t_mid, t_hi, next, 1.0, b_mid, &mut mid)?;
            let b_lo = match sp.boundary {
                Boundary::Dirichlet => [ext[0], ext[3]],
                _ => frozen,
            };
            stepper.step(g, t_lo, t_mid, &mid, 1.0, b_lo, out)?;
        } else {
            let b_lo = match sp.boundary {
                Boundary::Dirichlet => [ext[0], ext[3]],
                _ => frozen,
            };
            stepper.step(g, t_lo, t_hi, next, sp.theta, b_lo, out)?;
        }
    }

    if let Some(threshold) = sp.boundary_threshold {
        let row0 = &u[..nx];
        let deviation = edge
            .iter()
            .zip(&ext)
            .map(|(&j, e)| (row0[j] - e).abs())
            .fold(0.0, f64::max);
        if deviation > threshold {
            return Err(Error::DomainTooSmall { deviation, threshold });
        }
    }
    Ok(ValueSurface::from_values(tg.clone(), sg.clone(), u))
}

/// Reusable buffers for one backward step.
struct Stepper {
    nx: usize,
    dx: f64,
    boundary: Boundary,
    tol: f64,
    max_iters: usize,
    explicit: Vec<f64>,
    iterate: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    r: Vec<f64>,
    scratch: Vec<f64>,
}

impl Stepper {
    fn new(sg: &SpatialGrid, sp: &SchemeParams) -> Self {
        let nx = sg.n_x();
        Stepper {
            nx,
            dx: sg.dx(),
            boundary: sp.boundary,
            tol: sp.nonlinear_tol,
            max_iters: sp.max_nonlinear_iters,
            explicit: vec![0.0; nx],
            iterate: vec![0.0; nx],
            a: vec![0.0; nx],
            b: vec![0.0; nx],
            c: vec![0.0; nx],
            r: vec![0.0; nx],
            scratch: vec![0.0; nx],
        }
    }

    /// Advance from `u_hi` at `t_hi` to `out` at `t_lo`.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        g: &dyn Driver,
        t_lo: f64,
        t_hi: f64,
        u_hi: &[f64],
        theta: f64,
        bvals: [f64; 2],
        out: &mut [f64],
    ) -> Result<()> {
        let nx = self.nx;
        let dt = t_hi - t_lo;
        let (t_lo, t_hi) = (t_lo + nudge(dt), t_hi - nudge(dt));
        let dx = self.dx;
        let idx2 = 1.0 / (dx * dx);
        let neumann = self.boundary == Boundary::NeumannZero;

        // Explicit half of the θ-scheme.
        for j in 1..nx - 1 {
            let d2 = (u_hi[j + 1] - 2.0 * u_hi[j] + u_hi[j - 1]) * idx2;
            let d1 = (u_hi[j + 1] - u_hi[j - 1]) / (2.0 * dx);
            self.explicit[j] = u_hi[j]
                + (1.0 - theta) * dt * (0.5 * d2 + g.g(t_hi, u_hi[j], d1));
        }
        if neumann {
            for (j, nb) in [(0, 1), (nx - 1, nx - 2)] {
                let d2 = 2.0 * (u_hi[nb] - u_hi[j]) * idx2;
                self.explicit[j] = u_hi[j] + (1.0 - theta) * dt * (0.5 * d2 + g.g(t_hi, u_hi[j], 0.0));
            }
        }

        let off = -0.5 * theta * dt * idx2;
        let diag = 1.0 + theta * dt * idx2;
        self.iterate.copy_from_slice(u_hi);
        let iters = if theta == 0.0 { 1 } else { self.max_iters };
        let mut last_update = f64::INFINITY;
        for _ in 0..iters {
            let it = &self.iterate;
            for j in 1..nx - 1 {
                let d1 = (it[j + 1] - it[j - 1]) / (2.0 * dx);
                self.a[j] = off;
                self.b[j] = diag;
                self.c[j] = off;
                self.r[j] = self.explicit[j] + theta * dt * g.g(t_lo, it[j], d1);
            }
            match self.boundary {
                Boundary::Dirichlet | Boundary::Frozen => {
                    self.b[0] = 1.0;
                    self.c[0] = 0.0;
                    self.r[0] = bvals[0];
                    self.a[nx - 1] = 0.0;
                    self.b[nx - 1] = 1.0;
                    self.r[nx - 1] = bvals[1];
                }
                Boundary::NeumannZero => {
                    self.b[0] = diag;
                    self.c[0] = 2.0 * off;
                    self.r[0] = self.explicit[0] + theta * dt * g.g(t_lo, it[0], 0.0);
                    self.a[nx - 1] = 2.0 * off;
                    self.b[nx - 1] = diag;
                    self.r[nx - 1] =
                        self.explicit[nx - 1] + theta * dt * g.g(t_lo, it[nx - 1], 0.0);
                }
                Boundary::Linear => {
                    // U0 = 2U1 − U2 substituted into row 1 (and mirrored at
                    // the far end); the outer nodes are filled in afterwards.
                    let a1 = self.a[1];
                    self.b[1] += 2.0 * a1;
                    self.c[1] -= a1;
                    self.a[1] = 0.0;
                    let m = nx - 2;
                    let cm = self.c[m];
                    self.b[m] += 2.0 * cm;
                    self.a[m] -= cm;
                    self.c[m] = 0.0;
                    self.b[0] = 1.0;
                    self.c[0] = 0.0;
                    self.r[0] = 0.0;
                    self.a[nx - 1] = 0.0;
                    self.b[nx - 1] = 1.0;
                    self.r[nx - 1] = 0.0;
                }
            }
            thomas(&self.a, &self.b, &self.c, &self.r, &mut self.scratch, out);
            if self.boundary == Boundary::Linear {
                out[0] = 2.0 * out[1] - out[2];
                out[nx - 1] = 2.0 * out[nx - 2] - out[nx - 3];
            }
            let mut upd = 0.0f64;
            for j in 0..nx {
                if !out[j].is_finite() {
                    return Err(Error::Blowup { t: t_lo });
                }
                upd = upd.max((out[j] - self.iterate[j]).abs());
            }
            self.iterate.copy_from_slice(out);
            last_update = upd;
            if upd <= self.tol {
                return Ok(());
            }
        }
        if theta == 0.0 {
            return Ok(());
        }
        Err(Error::NonConvergence { t: t_lo, iters: self.max_iters, update: last_update })
    }
}

/// Thomas algorithm for a tridiagonal system; `cp` is scratch space.
fn thomas(a: &[f64], b: &[f64], c: &[f64], r: &[f64], cp: &mut [f64], x: &mut [f64]) {
    let n = b.len();
    cp[0] = c[0] / b[0];
    x[0] = r[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        x[i] = (r[i] - a[i] * x[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
}
