use serde::{Deserialize, Serialize};

use super::{CondLaw, MarkovPayoff, PayoffStructure, RiskMeasure};
use crate::error::{invalid, Result};

/// Payoffs of `W_T` (same horizon) plus constants and mixing weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomSamples {
    pub payoffs: Vec<MarkovPayoff>,
    #[serde(default = "default_constants")]
    pub constants: Vec<f64>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

fn default_constants() -> Vec<f64> {
    vec![-0.5, 0.25, 0.5, 1.0]
}

fn default_lambdas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomResult {
    pub pass: bool,
    /// Worst violation (or smallest margin for the strict test).
    pub gap: f64,
    pub worst_witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomsReport {
    pub measure: String,
    pub monotone: AxiomResult,
    pub convex: AxiomResult,
    /// `gap` is `sup |ρ(X + c) − ρ(X) − c|`.
    pub cash_additive: AxiomResult,
    pub normalized: AxiomResult,
    /// Sampling can only exhibit witnesses, not certify the axiom.
    pub strict_monotone: AxiomResult,
}

const TOL: f64 = 1e-10;

struct Worst {
    gap: f64,
    witness: Option<String>,
}

impl Worst {
    fn new() -> Self {
        Worst { gap: f64::NEG_INFINITY, witness: None }
    }

    fn offer(&mut self, gap: f64, witness: impl FnOnce() -> String) {
        if gap > self.gap {
            self.gap = gap;
            self.witness = Some(witness());
        }
    }

    fn result(self, pass: impl Fn(f64) -> bool) -> AxiomResult {
        let gap = if self.gap.is_finite() { self.gap } else { 0.0 };
        AxiomResult { pass: pass(gap), gap, worst_witness: self.witness }
    }
}

/// Check the risk-measure axioms at time 0 on node values of the samples.
pub fn axioms_audit(rm: &RiskMeasure, samples: &AxiomSamples) -> Result<AxiomsReport> {
    let Some(first) = samples.payoffs.first() else {
        return invalid("axiom audit needs at least one payoff");
    };
    let horizon = first.horizon;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for p in &samples.payoffs {
        if p.structure != PayoffStructure::Terminal || (p.horizon - horizon).abs() > 1e-12 {
            return invalid("axiom audit needs terminal payoffs with a common horizon");
        }
        p.validate()?;
        let (v, w) = p.node_values()?;
        weights = w;
        nodes.push(v);
    }
    let rho = |v: &[f64]| rm.rho_law(&CondLaw::Atoms { values: v.to_vec(), weights: weights.clone() }, 0.0, horizon);
    let base: Vec<f64> = nodes.iter().map(|v| rho(v)).collect::<Result<_>>()?;
    let shift = |v: &[f64], c: f64| v.iter().map(|x| x + c).collect::<Vec<f64>>();

    let mut mono = Worst::new();
    let mut strict = Worst::new();
    let mut convex = Worst::new();
    let mut cash = Worst::new();

    // Ordered pairs: sample pairs that happen to be ordered, and X ≤ X + c.
    let mut ordered: Vec<(String, Vec<f64>, f64, Vec<f64>, f64)> = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate() {
            if i != j && a.iter().zip(b).all(|(x, y)| x <= y) {
                ordered.push((format!("payoff {i} <= payoff {j}"), a.clone(), base[i], b.clone(), base[j]));
            }
        }
        for &c in &samples.constants {
            let moved = shift(a, c);
            let r = rho(&moved)?;
            cash.offer((r - base[i] - c).abs(), || format!("payoff {i}, c = {c}"));
            if c > 0.0 {
                ordered.push((format!("payoff {i} <= payoff {i} + {c}"), a.clone(), base[i], moved, r));
            }
        }
    }
    for (name, a, ra, b, rb) in &ordered {
        mono.offer(ra - rb, || name.clone());
        if a.iter().zip(b).zip(&weights).any(|((x, y), w)| y > &(x + 1e-12) && *w > 0.0) {
            // Smallest strict margin; negative values are the worst.
            strict.offer(ra - rb, || name.clone());
        }
    }
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate().skip(i + 1) {
            for &l in &samples.lambdas {
                let mix: Vec<f64> = a.iter().zip(b).map(|(x, y)| l * x + (1.0 - l) * y).collect();
                let r = rho(&mix)?;
                convex.offer(r - (l * base[i] + (1.0 - l) * base[j]), || format!("payoffs {i}, {j}, lambda = {l}"));
            }
        }
    }
    let zero = rho(&vec![0.0; weights.len()])?;
    Ok(AxiomsReport {
        measure: rm.name().to_string(),
        monotone: mono.result(|g| g <= TOL),
        convex: convex.result(|g| g <= TOL),
        cash_additive: cash.result(|g| g <= 1e-8),
        normalized: AxiomResult { pass: zero.abs() <= TOL, gap: zero.abs(), worst_witness: Some("rho(0)".into()) },
        strict_monotone: strict.result(|g| g < 0.0),
    })
}
