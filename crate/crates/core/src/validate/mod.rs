//! Structural (S1–S6) and ergonomic (R1–R5) rule engine.
//!
//! [`check`] runs every rule and returns a [`LintReport`] whose findings are
//! sorted by rule, first node and message. Each rule is also exposed on its
//! own; `check` is exactly the union of them.

mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Model;

pub use rules::{
    rule_continuity, rule_loop, rule_mixed_groups, rule_observability, rule_transducers, rule_virtual_places,
    rule_world, rule_wysiwis,
};

pub const LINT_SCHEMA: &str = "irvo-lint/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    R1,
    R2,
    /// Reported under S3 and S4; never emitted.
    R3,
    R4,
    R5,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: RuleId,
    pub severity: Severity,
    pub message: String,
    /// Entity, relation (`rel#N`) or merge-node ids.
    pub nodes: Vec<String>,
}

impl Finding {
    pub(crate) fn new(rule: RuleId, severity: Severity, message: impl Into<String>, nodes: Vec<String>) -> Self {
        Finding { rule, severity, message: message.into(), nodes }
    }

    fn sort_key(&self) -> (RuleId, &str, &str) {
        (self.rule, self.nodes.first().map_or("", String::as_str), &self.message)
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.severity, self.rule, self.message)?;
        if !self.nodes.is_empty() {
            write!(f, " [{}]", self.nodes.join(", "))?;
        }
        Ok(())
    }
}

pub(crate) fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub errors: usize,
    pub warnings: usize,
    pub infos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub model: String,
    pub findings: Vec<Finding>,
    pub summary: Summary,
    pub schema: String,
}

impl LintReport {
    /// Builds a report, sorting the findings and counting severities.
    pub fn new(model: impl Into<String>, mut findings: Vec<Finding>) -> Self {
        sort_findings(&mut findings);
        let mut summary = Summary::default();
        for f in &findings {
            match f.severity {
                Severity::Error => summary.errors += 1,
                Severity::Warning => summary.warnings += 1,
                Severity::Info => summary.infos += 1,
            }
        }
        LintReport { model: model.into(), findings, summary, schema: LINT_SCHEMA.into() }
    }

    pub fn has_errors(&self) -> bool {
        self.summary.errors > 0
    }

    pub fn of_rule(&self, rule: RuleId) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(move |f| f.rule == rule)
    }

    /// Single-line `irvo-lint/1` JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports are always serializable")
    }

    pub fn from_json(text: &str) -> Result<LintReport, serde_json::Error> {
        let r: LintReport = serde_json::from_str(text)?;
        if r.schema != LINT_SCHEMA {
            return Err(serde::de::Error::custom(format!("unsupported schema `{}`", r.schema)));
        }
        Ok(r)
    }

    /// Human-readable form: one line per finding, then a summary line.
    pub fn to_text(&self, threshold: Severity) -> String {
        let mut out = String::new();
        for f in self.findings.iter().filter(|f| f.severity <= threshold) {
            out.push_str(&format!("{}: {f}\n", self.model));
        }
        out.push_str(&format!(
            "{}: {} error(s), {} warning(s), {} info(s)\n",
            self.model, self.summary.errors, self.summary.warnings, self.summary.infos
        ));
        out
    }
}

/// Runs every rule against `model`.
pub fn check(model: &Model) -> LintReport {
    let rules: [fn(&Model) -> Vec<Finding>; 8] = [
        rule_world,
        rule_transducers,
        rule_mixed_groups,
        rule_virtual_places,
        rule_loop,
        rule_observability,
        rule_continuity,
        rule_wysiwis,
    ];
    let findings = rules.iter().flat_map(|r| r(model)).collect();
    LintReport::new(model.name(), findings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_round_trip() {
        let r = LintReport::new(
            "m",
            vec![
                Finding::new(RuleId::R5, Severity::Info, "single-user model", vec![]),
                Finding::new(RuleId::S3, Severity::Error, "x", vec!["cam".into()]),
            ],
        );
        assert_eq!(r.findings[0].rule, RuleId::S3);
        assert_eq!(r.summary, Summary { errors: 1, warnings: 0, infos: 1 });
        let text = r.to_json();
        assert!(text.starts_with(r#"{"model":"m","findings":[{"rule":"S3","severity":"error""#));
        assert!(text.ends_with(r#""schema":"irvo-lint/1"}"#));
        assert_eq!(LintReport::from_json(&text).unwrap(), r);
    }

    #[test]
    fn text_threshold_filters_display_only() {
        let r =
            LintReport::new("m", vec![Finding::new(RuleId::R2, Severity::Info, "dashed only", vec!["mouse".into()])]);
        assert!(!r.to_text(Severity::Warning).contains("dashed only"));
        assert!(r.to_text(Severity::Info).contains("info R2: dashed only [mouse]"));
        assert!(r.to_text(Severity::Error).ends_with("0 error(s), 0 warning(s), 1 info(s)\n"));
    }
}
