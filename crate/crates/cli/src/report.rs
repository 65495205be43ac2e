use std::collections::BTreeMap;

use odg_core::optimizer::CertificateReport;
use odg_core::CriterionValue;
use serde::Serialize;
use serde_json::{Number, Value};

/// One JSON document per invocation. Sections that do not apply are `null`.
#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub design: Option<Vec<f64>>,
    pub criterion: Option<CriterionValue>,
    pub spectrum: Option<Vec<f64>>,
    pub laplacian_spectrum: Option<Vec<f64>>,
    pub certificate: Option<CertificateJson>,
    pub optimization: Option<OptimizationJson>,
    pub symmetry: Option<Value>,
    pub oracle: Option<Value>,
}

#[derive(Debug, Serialize)]
pub struct CertificateJson {
    pub lhs_max: f64,
    pub rhs: f64,
    pub gap: f64,
    /// 1-indexed.
    pub witness: usize,
    pub degenerate: bool,
}

impl From<&CertificateReport> for CertificateJson {
    fn from(c: &CertificateReport) -> Self {
        Self {
            lhs_max: c.lhs_max,
            rhs: c.rhs,
            gap: c.gap,
            witness: c.witness_vertex + 1,
            degenerate: c.degenerate,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OptimizationJson {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    pub eigvec: Option<Vec<f64>>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.insert(key.to_string(), value.to_string());
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is serializable");
        serde_json::to_string_pretty(&with_full_precision(value)).expect("value is serializable")
    }
}

/// Rewrites every non-integer number with 17 significant digits.
pub fn with_full_precision(value: Value) -> Value {
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => match n.as_f64() {
            Some(x) if x.is_finite() => Value::Number(float17(x)),
            _ => Value::Null,
        },
        Value::Array(items) => Value::Array(items.into_iter().map(with_full_precision).collect()),
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| (k, with_full_precision(v)))
                .collect(),
        ),
        other => other,
    }
}

fn float17(x: f64) -> Number {
    format!("{x:.16e}")
        .parse()
        .expect("scientific notation is a valid JSON number")
}
