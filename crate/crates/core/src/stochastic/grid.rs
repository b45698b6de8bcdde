use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sorted time nodes `t0 = nodes[0] < … < nodes[n_steps] = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    /// Uniform grid with `n_steps` steps of size `(t_end − t0)/n_steps`.
    pub fn uniform(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return invalid("time grid needs n_steps >= 1");
        }
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return invalid(format!("time grid needs t0 < T, got [{t0}, {t_end}]"));
        }
        let dt = (t_end - t0) / n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps).map(|i| t0 + i as f64 * dt).collect();
        nodes[n_steps] = t_end;
        Ok(TimeGrid { nodes, uniform: true })
    }

    /// Explicitly non-uniform grid.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("time grid needs at least two nodes");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|t| !t.is_finite()) {
            return invalid("time grid nodes must be finite and strictly increasing");
        }
        Ok(TimeGrid { nodes, uniform: false })
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Step size of step `i` (from node `i` to `i + 1`).
    pub fn dt(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    fn tol(&self) -> f64 {
        1e-9 * (self.t_end() - self.t0()).max(1.0)
    }

    /// Index of the node equal to `t` up to a relative 1e-9 tolerance.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = self.tol();
        let i = self.nodes.partition_point(|&s| s < t - tol);
        (i < self.nodes.len() && (self.nodes[i] - t).abs() <= tol).then_some(i)
    }

    /// Index of the node nearest to `t` (clamped to the grid).
    pub fn nearest(&self, t: f64) -> usize {
        let i = self.nodes.partition_point(|&s| s < t);
        if i == 0 {
            0
        } else if i >= self.nodes.len() {
            self.nodes.len() - 1
        } else if (t - self.nodes[i - 1]) <= (self.nodes[i] - t) {
            i - 1
        } else {
            i
        }
    }

    /// Index `i` of the step `[t_i, t_{i+1})` containing `t`, with node snapping.
    pub fn step_index(&self, t: f64) -> usize {
        if let Some(i) = self.index_of(t) {
            return i.min(self.n_steps() - 1);
        }
        let i = self.nodes.partition_point(|&s| s <= t);
        i.saturating_sub(1).min(self.n_steps() - 1)
    }

    /// The nodes between two grid nodes `a ≤ b`, as a grid of its own.
    pub fn sub_grid(&self, a: f64, b: f64) -> Result<TimeGrid> {
        let (Some(i), Some(j)) = (self.index_of(a), self.index_of(b)) else {
            return invalid(format!("sub-grid endpoints {a}, {b} must be grid nodes"));
        };
        if j <= i {
            return invalid("sub-grid needs a < b");
        }
        Ok(TimeGrid { nodes: self.nodes[i..=j].to_vec(), uniform: self.uniform })
    }
}
