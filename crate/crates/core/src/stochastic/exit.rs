use serde::{Deserialize, Serialize};

use super::paths::PathRef;
use crate::error::{invalid, Result};

/// Stopping rules evaluated on the discrete path grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StoppingTimeSpec {
    /// First node with `|W_s − c| > level`, where `c = center` when given
    /// and `c = W_{t_start}` otherwise; capped at the grid end.
    LevelExit {
        #[serde(default)]
        center: Option<f64>,
        level: f64,
    },
    /// `t_low` on `{W¹_{t_obs} ≥ 0}`, `t_high` otherwise.
    ThresholdBranch { t_obs: f64, t_low: f64, t_high: f64 },
}

impl StoppingTimeSpec {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            StoppingTimeSpec::LevelExit { level, .. } => {
                if !(*level > 0.0) {
                    return invalid("LevelExit needs level > 0");
                }
            }
            StoppingTimeSpec::ThresholdBranch { t_obs, t_low, t_high } => {
                if !(t_obs < t_low && t_low < t_high && *t_high <= horizon + 1e-12) {
                    return invalid("ThresholdBranch needs t_obs < t_low < t_high <= T");
                }
            }
        }
        Ok(())
    }
}

/// Stopping time of `path` started at the grid node `t_start`.
pub fn exit_time(path: PathRef<'_>, t_start: f64, spec: &StoppingTimeSpec) -> Result<f64> {
    let grid = path.grid;
    let Some(i0) = grid.index_of(t_start) else {
        return invalid(format!("exit_time: t_start = {t_start} is not a grid node"));
    };
    match spec {
        StoppingTimeSpec::LevelExit { center, level } => {
            let d = path.d;
            let origin: Vec<f64> = match center {
                Some(c) => vec![*c; d],
                None => path.at(i0).to_vec(),
            };
            let lev2 = level * level;
            for i in i0..=grid.n_steps() {
                let w = path.at(i);
                let r2: f64 = w.iter().zip(&origin).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 > lev2 {
                    return Ok(grid.nodes()[i]);
                }
            }
            Ok(grid.t_end())
        }
        StoppingTimeSpec::ThresholdBranch { t_obs, t_low, t_high } => {
            spec.validate(grid.t_end())?;
            let w = path.w1_at_time(*t_obs)?;
            Ok(if w >= 0.0 { *t_low } else { *t_high })
        }
    }
}

/// Index variant of [`exit_time`] for the `LevelExit` rule, scanning nodes
/// `i0..=i_end` and returning the stopping node index.
pub fn level_exit_index(path: PathRef<'_>, i0: usize, i_end: usize, level: f64) -> usize {
    let w0 = path.w1(i0);
    for i in i0..=i_end {
        if (path.w1(i) - w0).abs() > level {
            return i;
        }
    }
    i_end
}
