use serde::{Deserialize, Serialize};

/// The drift `h(t, y) = g(t, y, 0)` of a drift-quadratic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftFunction {
    Zero,
    /// `a·(y + b)`
    Linear {
        a: f64,
        #[serde(default)]
        b: f64,
    },
    /// `a·tanh(y)`
    Tanh { a: f64 },
    /// `a·cos(ω t)·tanh(y)`
    CosTanh { a: f64, omega: f64 },
}

fn tanh_derivs(y: f64) -> [f64; 4] {
    let th = y.tanh();
    let c = y.cosh();
    let s2 = if c.is_finite() { 1.0 / (c * c) } else { 0.0 };
    [th, s2, -2.0 * th * s2, -2.0 * s2 * s2 + 4.0 * th * th * s2]
}

impl DriftFunction {
    /// `[h, ∂_y h, ∂_yy h, ∂_yyy h]` at `(t, y)`.
    pub fn derivs(&self, t: f64, y: f64) -> [f64; 4] {
        match self {
            DriftFunction::Zero => [0.0; 4],
            DriftFunction::Linear { a, b } => [a * (y + b), *a, 0.0, 0.0],
            DriftFunction::Tanh { a } => tanh_derivs(y).map(|v| a * v),
            DriftFunction::CosTanh { a, omega } => {
                let s = a * (omega * t).cos();
                tanh_derivs(y).map(|v| s * v)
            }
        }
    }

    pub fn h(&self, t: f64, y: f64) -> f64 {
        self.derivs(t, y)[0]
    }

    pub fn hy(&self, t: f64, y: f64) -> f64 {
        self.derivs(t, y)[1]
    }

    pub fn hyy(&self, t: f64, y: f64) -> f64 {
        self.derivs(t, y)[2]
    }

    /// `H(t) = sup_y |∂_y h(t, y)|`.
    pub fn lipschitz_bound(&self, t: f64) -> f64 {
        match self {
            DriftFunction::Zero => 0.0,
            DriftFunction::Linear { a, .. } | DriftFunction::Tanh { a } => a.abs(),
            DriftFunction::CosTanh { a, omega } => (a * (omega * t).cos()).abs(),
        }
    }

    /// `B = sup |∂_yy h|`.
    pub fn curvature_bound(&self) -> f64 {
        // max of 2·tanh·sech² is 4/(3√3)
        let c = 4.0 / (3.0 * 3f64.sqrt());
        match self {
            DriftFunction::Zero | DriftFunction::Linear { .. } => 0.0,
            DriftFunction::Tanh { a } | DriftFunction::CosTanh { a, .. } => a.abs() * c,
        }
    }

    /// `∫_0^t H(s) ds` by trapezoid sums on `nodes` (exact for the constant bounds).
    pub fn lipschitz_integral(&self, nodes: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in nodes.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let (a, m, b) = (self.lipschitz_bound(w[0]), self.lipschitz_bound(mid), self.lipschitz_bound(w[1]));
            acc += (w[1] - w[0]) * (a + 4.0 * m + b) / 6.0;
            out.push(acc);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DriftFunction::Zero => true,
            DriftFunction::Linear { a, .. } | DriftFunction::Tanh { a } | DriftFunction::CosTanh { a, .. } => {
                *a == 0.0
            }
        }
    }
}
