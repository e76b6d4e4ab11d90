//! Regression comparison of certificates against reference files.
//!
//! Every leaf of the reference must be present in the candidate. Numbers are
//! compared with a relative tolerance chosen by the longest matching path
//! prefix; strings, booleans and nulls must match exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Relative tolerances keyed by dotted path prefix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tolerances {
    /// Tolerance for paths without a matching prefix.
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub fields: BTreeMap<String, f64>,
}

impl Tolerances {
    /// Tolerance of the longest prefix of `path` (segment-aligned).
    pub fn for_path(&self, path: &str) -> f64 {
        self.fields
            .iter()
            .filter(|(k, _)| path == k.as_str() || path.starts_with(&format!("{k}.")))
            .max_by_key(|(k, _)| k.len())
            .map(|(_, &t)| t)
            .unwrap_or(self.default)
    }
}

/// One disagreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub path: String,
    pub reference: Value,
    pub candidate: Option<Value>,
    pub reason: String,
}

/// Outcome of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub passed: bool,
    pub compared: usize,
    pub mismatches: Vec<Mismatch>,
}

/// Leaves of a JSON value keyed by dotted path; array elements use their index.
pub fn flatten(v: &Value) -> BTreeMap<String, Value> {
    fn go(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, x)| go(&join(k), x, out)),
            Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| go(&join(&i.to_string()), x, out)),
            leaf => {
                out.insert(prefix.to_string(), leaf.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    go("", v, &mut out);
    out
}

/// Compares a candidate certificate with a reference.
pub fn compare_reports(candidate: &Value, reference: &Value, tolerances: &Tolerances) -> Result<CompareReport> {
    let version = |v: &Value| v.get("schema_version").and_then(Value::as_u64);
    match (version(candidate), version(reference)) {
        (Some(a), Some(b)) if a == b => {}
        (a, b) => {
            return Err(Error::SchemaMismatch(format!(
                "candidate schema_version {a:?}, reference {b:?}"
            )))
        }
    }
    let cand = flatten(candidate);
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for (path, r) in flatten(reference) {
        compared += 1;
        let Some(c) = cand.get(&path) else {
            mismatches.push(Mismatch {
                path,
                reference: r,
                candidate: None,
                reason: "missing in candidate".into(),
            });
            continue;
        };
        let reason = match (&r, c) {
            (Value::Number(a), Value::Number(b)) => {
                let (a, b) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
                let tol = tolerances.for_path(&path);
                let ok = if a == 0.0 { b.abs() <= tol } else { (a - b).abs() <= tol * a.abs() };
                (!ok).then(|| format!("relative difference {:.3e} exceeds {tol:e}", (a - b).abs() / a.abs()))
            }
            (a, b) if a == b => None,
            _ => Some("values differ".to_string()),
        };
        if let Some(reason) = reason {
            mismatches.push(Mismatch {
                path,
                reference: r,
                candidate: Some(c.clone()),
                reason,
            });
        }
    }
    Ok(CompareReport {
        passed: mismatches.is_empty(),
        compared,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tol() -> Tolerances {
        Tolerances {
            default: 0.0,
            fields: [("ledger".to_string(), 0.01)].into_iter().collect(),
        }
    }

    #[test]
    fn identical_files_pass() {
        let v = json!({"schema_version": 1, "verdict": "holds", "ledger": {"K1^(0)": {"value": 1.04846}}});
        assert!(compare_reports(&v, &v, &tol()).unwrap().passed);
    }

    #[test]
    fn half_percent_passes_under_one_percent() {
        let r = json!({"schema_version": 1, "ledger": {"K1^(0)": {"value": 1.04846}}});
        let c = json!({"schema_version": 1, "ledger": {"K1^(0)": {"value": 1.04846 * 1.005}}});
        assert!(compare_reports(&c, &r, &tol()).unwrap().passed);
        let c = json!({"schema_version": 1, "ledger": {"K1^(0)": {"value": 1.04846 * 1.02}}});
        assert!(!compare_reports(&c, &r, &tol()).unwrap().passed);
    }

    #[test]
    fn verdicts_compare_exactly() {
        let r = json!({"schema_version": 1, "verdict": "holds"});
        let c = json!({"schema_version": 1, "verdict": "inconclusive"});
        let rep = compare_reports(&c, &r, &tol()).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.mismatches[0].path, "verdict");
    }

    #[test]
    fn missing_fields_and_schema() {
        let r = json!({"schema_version": 1, "gram": {"K^(0)": {"value": -5.2}}});
        let c = json!({"schema_version": 1});
        assert_eq!(compare_reports(&c, &r, &tol()).unwrap().mismatches[0].reason, "missing in candidate");
        let c = json!({"schema_version": 2});
        assert!(matches!(compare_reports(&c, &r, &tol()), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn longest_prefix_wins() {
        let mut t = tol();
        t.fields.insert("ledger.J2^(e)".into(), 0.5);
        assert_eq!(t.for_path("ledger.J2^(e).value"), 0.5);
        assert_eq!(t.for_path("ledger.J1^(e).value"), 0.01);
        assert_eq!(t.for_path("ledgerx"), 0.0);
    }
}
