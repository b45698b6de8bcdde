use std::path::Path;

use serde::{Deserialize, Serialize};

use qbsde_core::generators::{AuditGrid, FlowGridSpec, GeneratorSpec};
use qbsde_core::lab::{EngineConfig, InvarianceParams, PayoffPair, PdeConfig};
use qbsde_core::risk::{MarkovPayoff, RiskMeasureSpec};
use qbsde_core::PayoffFn;

/// One experiment: a tagged descriptor plus the bookkeeping shared by all tags.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Stem of the report files; unique within a manifest.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Absolute tolerance of the verdict; each tag has a default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Output directory, used when neither `--out` nor `QBSDE_OUT` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub experiment: Experiment,
}

/// Whether the checked identity should hold or is expected to break.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Invariant,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
    A4Star,
    A5,
}

fn one() -> f64 {
    1.0
}

fn zero_state() -> Vec<f64> {
    vec![0.0]
}

fn default_cons1_paths() -> usize {
    2000
}

fn default_cons1_steps() -> usize {
    100
}

fn default_ks_paths() -> usize {
    100_000
}

fn default_require() -> Vec<Assumption> {
    vec![Assumption::A1, Assumption::A2, Assumption::A3, Assumption::A4, Assumption::A5]
}

/// Itô–Wentzell settings of the `transform` experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IwSettings {
    pub step_counts: Vec<usize>,
    pub n_paths: usize,
}

impl Default for IwSettings {
    fn default() -> Self {
        IwSettings { step_counts: vec![100, 200, 400], n_paths: 2000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// `u(0, x0)` of the PDE, optionally against a reference value.
    Solve {
        generator: GeneratorSpec,
        payoff: PayoffFn,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        pde: PdeConfig,
        #[serde(default)]
        reference: Option<f64>,
    },
    /// `ρ_{t,T}(X)` at each state; `reference` is compared with the first one.
    Risk {
        measure: RiskMeasureSpec,
        payoff: MarkovPayoff,
        #[serde(default)]
        t: f64,
        #[serde(default = "zero_state")]
        states: Vec<f64>,
        #[serde(default)]
        reference: Option<f64>,
    },
    LiTest {
        generator: GeneratorSpec,
        pair: PayoffPair,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default)]
        engine: EngineConfig,
        #[serde(default)]
        expect: Expect,
    },
    ClliTest {
        generator: GeneratorSpec,
        pair: PayoffPair,
        #[serde(default = "one")]
        horizon: f64,
        t_prime: f64,
        #[serde(default)]
        engine: EngineConfig,
        #[serde(default)]
        expect: Expect,
    },
    MliTest {
        generator: GeneratorSpec,
        phi: PayoffFn,
        ell: f64,
        tau: f64,
        tau_prime: f64,
        #[serde(default)]
        engine: EngineConfig,
        #[serde(default)]
        expect: Expect,
    },
    TcTest {
        measure: RiskMeasureSpec,
        payoff: MarkovPayoff,
        s: f64,
        #[serde(default)]
        expect: Expect,
    },
    ReprCheck {
        generator: GeneratorSpec,
        #[serde(default)]
        t: f64,
        y: f64,
        z: f64,
        eps: Vec<f64>,
        #[serde(default)]
        level: Option<f64>,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default)]
        pde: PdeConfig,
    },
    GateauxCheck {
        generator: GeneratorSpec,
        y: f64,
        payoff: MarkovPayoff,
        eps: Vec<f64>,
        #[serde(default)]
        pde: PdeConfig,
    },
    Cons1Check {
        generator: GeneratorSpec,
        y: f64,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default = "default_cons1_paths")]
        n_paths: usize,
        #[serde(default = "default_cons1_steps")]
        n_steps: usize,
        #[serde(default)]
        expect: Expect,
    },
    /// Drift-quadratic generators go through the characteristics transfer
    /// identity, Itô–Wentzell generators through the discrete BSDE check.
    Transform {
        generator: GeneratorSpec,
        payoff: PayoffFn,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default)]
        pde: PdeConfig,
        #[serde(default)]
        flow: FlowGridSpec,
        #[serde(default)]
        iw: IwSettings,
    },
    /// KS test of the pair's two laws when `pair` is given, of the Brownian
    /// scaling identity otherwise.
    InvarianceCheck {
        #[serde(default)]
        pair: Option<PayoffPair>,
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default = "default_ks_paths")]
        n_paths: usize,
        #[serde(default)]
        params: InvarianceParams,
        #[serde(default)]
        expect: Expect,
    },
    Audit {
        generator: GeneratorSpec,
        #[serde(default)]
        grid: AuditGrid,
        #[serde(default = "default_require")]
        require: Vec<Assumption>,
    },
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::Solve { .. } => "solve",
            Experiment::Risk { .. } => "risk",
            Experiment::LiTest { .. } => "li-test",
            Experiment::ClliTest { .. } => "clli-test",
            Experiment::MliTest { .. } => "mli-test",
            Experiment::TcTest { .. } => "tc-test",
            Experiment::ReprCheck { .. } => "repr-check",
            Experiment::GateauxCheck { .. } => "gateaux-check",
            Experiment::Cons1Check { .. } => "cons1-check",
            Experiment::Transform { .. } => "transform",
            Experiment::InvarianceCheck { .. } => "invariance-check",
            Experiment::Audit { .. } => "audit",
        }
    }

    pub fn default_tolerance(&self) -> f64 {
        match self {
            Experiment::Solve { .. } | Experiment::Risk { .. } => 1e-3,
            Experiment::LiTest { .. } | Experiment::ClliTest { .. } | Experiment::MliTest { .. } => 1e-3,
            Experiment::TcTest { .. } => 1e-6,
            Experiment::ReprCheck { .. } | Experiment::GateauxCheck { .. } => 1e-3,
            Experiment::Cons1Check { .. } => 1e-6,
            Experiment::Transform { .. } => 1e-3,
            // KS checks use their own critical value.
            Experiment::InvarianceCheck { .. } | Experiment::Audit { .. } => 0.0,
        }
    }

    /// Whether the experiment draws random numbers.
    pub fn is_random(&self) -> bool {
        match self {
            Experiment::LiTest { generator, .. }
            | Experiment::ClliTest { generator, .. }
            | Experiment::Transform { generator, .. } => {
                matches!(generator, GeneratorSpec::RandomDriftQuadratic { .. } | GeneratorSpec::ItoWentzell { .. })
            }
            Experiment::Cons1Check { .. } | Experiment::InvarianceCheck { .. } | Experiment::Audit { .. } => true,
            _ => false,
        }
    }
}

/// A config failed to load or validate.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn describe(source: &str, e: &serde_json::Error) -> ConfigError {
    if e.line() == 0 {
        ConfigError(format!("{source}: {e}"))
    } else {
        // serde_json already appends "at line L column C" to the message.
        ConfigError(format!("{source}:{}:{}: {e}", e.line(), e.column()))
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| describe(&path.display().to_string(), &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(format!("{}: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad("name must be a non-empty file stem".into());
        }
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0 && tol.is_finite()) {
                return bad(format!("tolerance must be finite and non-negative, got {tol}"));
            }
        }
        match &self.experiment {
            Experiment::ReprCheck { eps, .. } | Experiment::GateauxCheck { eps, .. } if eps.is_empty() => {
                bad("eps must not be empty".into())
            }
            Experiment::Risk { states, .. } if states.is_empty() => bad("states must not be empty".into()),
            Experiment::Transform { iw, .. } if iw.step_counts.is_empty() => bad("iw.step_counts must not be empty".into()),
            _ => Ok(()),
        }
    }

    /// Fill in the effective seed and tolerance so the embedded config is
    /// fully resolved.
    pub fn resolve(mut self, seed: Option<u64>, tolerance_scale: f64) -> Self {
        if seed.is_some() {
            self.seed = seed;
        }
        if self.experiment.is_random() && self.seed.is_none() {
            self.seed = Some(1);
        }
        if let Some(s) = self.seed {
            match &mut self.experiment {
                Experiment::LiTest { engine, .. }
                | Experiment::ClliTest { engine, .. }
                | Experiment::MliTest { engine, .. } => engine.mc.seed = s,
                Experiment::InvarianceCheck { params, .. } => params.seed = s,
                Experiment::Audit { grid, .. } => grid.seed = s,
                _ => {}
            }
        }
        let tol = self.tolerance.unwrap_or_else(|| self.experiment.default_tolerance());
        self.tolerance = Some(tol * tolerance_scale);
        self
    }
}

/// Load a manifest: a JSON array (or `{"experiments": [...]}`) whose entries
/// are inline configs or paths relative to the manifest.
pub fn load_manifest(path: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let source = path.display().to_string();
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| describe(&source, &e))?;
    let entries = match value {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(mut o) if o.len() == 1 && o.contains_key("experiments") => {
            match o.remove("experiments") {
                Some(serde_json::Value::Array(a)) => a,
                _ => return Err(ConfigError(format!("{source}: \"experiments\" must be an array"))),
            }
        }
        _ => return Err(ConfigError(format!("{source}: expected an array of experiments or {{\"experiments\": [...]}}"))),
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let mut configs = Vec::with_capacity(entries.len());
    for (i, entry) in entries.into_iter().enumerate() {
        let cfg = match entry {
            serde_json::Value::String(p) => ExperimentConfig::load(&base.join(p))?,
            v => {
                let cfg: ExperimentConfig =
                    serde_json::from_value(v).map_err(|e| describe(&format!("{source}: entry {i}"), &e))?;
                cfg.validate()?;
                cfg
            }
        };
        configs.push(cfg);
    }
    let mut names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(ConfigError(format!("{source}: duplicate experiment name {:?}", w[0])));
    }
    Ok(configs)
}
