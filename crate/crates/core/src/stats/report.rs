use std::fmt::Write as _;

use serde::Serialize;

use super::Thresholds;
use crate::sim::Summary;

pub const CAVEAT: &str = "A true verdict is statistical evidence at the sample sizes and tolerances \
below. It is not a proof that the pair is an equilibrium.";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// None when the statistic could not be computed.
    pub statistic: Option<f64>,
    /// Standard error or p-value, whichever the threshold refers to.
    pub se_or_pvalue: Option<f64>,
    pub threshold: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Check {
    pub fn new(name: impl Into<String>, statistic: f64, se_or_pvalue: Option<f64>, threshold: impl Into<String>, pass: bool) -> Check {
        let statistic = finite(statistic);
        let se_or_pvalue = se_or_pvalue.and_then(finite);
        Check {
            name: name.into(),
            pass: pass && statistic.is_some(),
            statistic,
            se_or_pvalue,
            threshold: threshold.into(),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }

    /// |statistic - target| <= se_mult * se.
    pub fn near(name: impl Into<String>, value: f64, se: f64, target: f64, se_mult: f64) -> Check {
        let pass = (value - target).abs() <= se_mult * se;
        Check::new(name, value, Some(se), format!("|x - {target}| <= {se_mult} SE"), pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Supporting tables, e.g. binned conditional means.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl Block {
    pub fn new(name: impl Into<String>, checks: Vec<Check>) -> Block {
        Block {
            name: name.into(),
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            checks,
            error: None,
            detail: None,
        }
    }

    pub fn failed(name: impl Into<String>, error: impl std::fmt::Display) -> Block {
        Block {
            name: name.into(),
            pass: false,
            checks: Vec::new(),
            error: Some(error.to_string()),
            detail: None,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub caveat: &'static str,
    pub scenario: String,
    pub rule: &'static str,
    pub strategy: &'static str,
    pub gamma: f64,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub blocks: Vec<Block>,
    pub summary: Summary,
    pub verdict: bool,
}

impl EquilibriumReport {
    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.caveat);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "scenario {}  rule {}  strategy {}  gamma {}  paths {}  steps {}  seed {}",
            self.scenario, self.rule, self.strategy, self.gamma, self.paths, self.steps, self.seed
        );
        let _ = writeln!(s);
        let num = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        for b in &self.blocks {
            let _ = writeln!(s, "[{}] {}", if b.pass { "PASS" } else { "FAIL" }, b.name);
            if let Some(e) = &b.error {
                let _ = writeln!(s, "    error: {e}");
            }
            for c in &b.checks {
                let _ = writeln!(
                    s,
                    "    {:<4} {:<34} {:>14} {:>14}  {}{}",
                    if c.pass { "ok" } else { "FAIL" },
                    c.name,
                    num(c.statistic),
                    num(c.se_or_pvalue),
                    c.threshold,
                    c.note.as_deref().map(|n| format!("  ({n})")).unwrap_or_default()
                );
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "verdict: {}", if self.verdict { "PASS" } else { "FAIL" });
        s
    }
}
