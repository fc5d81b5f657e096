use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Direction of a threshold check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Below,
    Above,
}

/// One measured quantity with its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub label: String,
    #[serde(skip_serializing_if = "Value::is_null", default)]
    pub params: Value,
    pub metric: String,
    /// `None` when the computation itself failed.
    pub value: Option<f64>,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl Case {
    pub fn below(label: impl Into<String>, metric: &str, value: f64, threshold: f64) -> Self {
        Case::new(label, metric, value, threshold, Relation::Below)
    }

    pub fn above(label: impl Into<String>, metric: &str, value: f64, threshold: f64) -> Self {
        Case::new(label, metric, value, threshold, Relation::Above)
    }

    fn new(label: impl Into<String>, metric: &str, value: f64, threshold: f64, relation: Relation) -> Self {
        let passed = match relation {
            Relation::Below => value < threshold,
            Relation::Above => value > threshold,
        };
        Case {
            label: label.into(),
            params: Value::Null,
            metric: metric.to_string(),
            value: Some(value),
            threshold,
            relation,
            passed,
            detail: None,
        }
    }

    /// A case whose computation returned an error.
    pub fn failed(label: impl Into<String>, metric: &str, threshold: f64, relation: Relation, err: impl ToString) -> Self {
        Case {
            label: label.into(),
            params: Value::Null,
            metric: metric.to_string(),
            value: None,
            threshold,
            relation,
            passed: false,
            detail: Some(err.to_string()),
        }
    }

    pub fn with_params(mut self, params: Value) -> Self {
        self.params = params;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Outcome of a verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub config: Value,
    pub cases: Vec<Case>,
    pub passed: bool,
    /// Wall time; only filled in on request so reports stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_secs: Option<f64>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, config: Value, seed: Option<u64>, cases: Vec<Case>) -> Self {
        let passed = cases.iter().all(|c| c.passed);
        VerificationReport {
            name: name.into(),
            seed,
            config,
            cases,
            passed,
            runtime_secs: None,
        }
    }

    /// Concatenates several reports under one name.
    pub fn combine(name: impl Into<String>, config: Value, seed: Option<u64>, parts: Vec<VerificationReport>) -> Self {
        let cases = parts
            .into_iter()
            .flat_map(|r| {
                let prefix = r.name;
                r.cases.into_iter().map(move |mut c| {
                    c.label = format!("{prefix}/{}", c.label);
                    c
                })
            })
            .collect();
        VerificationReport::new(name, config, seed, cases)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Case> {
        self.cases.iter().filter(|c| !c.passed)
    }

    /// Largest measured value among cases with the given metric.
    pub fn max_value(&self, metric: &str) -> Option<f64> {
        self.cases
            .iter()
            .filter(|c| c.metric == metric)
            .filter_map(|c| c.value)
            .reduce(f64::max)
    }

    /// Smallest measured value among cases with the given metric.
    pub fn min_value(&self, metric: &str) -> Option<f64> {
        self.cases
            .iter()
            .filter(|c| c.metric == metric)
            .filter_map(|c| c.value)
            .reduce(f64::min)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let status = if self.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status} {} ({} cases, {} failed)", self.name, self.cases.len(), self.failures().count());
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "  seed {seed}");
        }
        for c in &self.cases {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let op = match c.relation {
                Relation::Below => "<",
                Relation::Above => ">",
            };
            let value = c.value.map_or_else(|| "error".to_string(), |v| format!("{v:.3e}"));
            let _ = write!(out, "  {mark} {}: {} = {value} (need {op} {:.1e})", c.label, c.metric, c.threshold);
            if let Some(d) = &c.detail {
                let _ = write!(out, " [{d}]");
            }
            out.push('\n');
        }
        if let Some(t) = self.runtime_secs {
            let _ = writeln!(out, "  runtime {t:.2} s");
        }
        out
    }
}
