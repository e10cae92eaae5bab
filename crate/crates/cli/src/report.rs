//! Result files: the per-grid CSV and the JSON summary with its embedded
//! schema check.
//!
//! CSV numbers are written with 17 significant digits so reruns with the
//! same seed produce byte-identical files.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One row of the per-grid CSV. Columns that an experiment does not produce
/// are written as `nan`.
#[derive(Clone, Copy, Debug)]
pub struct GridRow {
    pub s: f64,
    pub variance: f64,
    pub var_ci_lo: f64,
    pub var_ci_hi: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub alpha_hat: f64,
    pub n_reps: u64,
    pub seed: u64,
}

pub const GRID_CSV_HEADER: &str =
    "s,variance,var_ci_lo,var_ci_hi,lower_bound,upper_bound,alpha_hat,n_reps,seed";

/// 17 significant digits; `nan`/`inf` normalized to lowercase.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "{GRID_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(r.s),
            fmt17(r.variance),
            fmt17(r.var_ci_lo),
            fmt17(r.var_ci_hi),
            fmt17(r.lower_bound),
            fmt17(r.upper_bound),
            fmt17(r.alpha_hat),
            r.n_reps,
            r.seed
        )?;
    }
    Ok(())
}

/// Geometry sweeps use a case-indexed CSV instead of the per-grid schema.
pub fn write_case_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "{header}")?;
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

/// One named acceptance rule and its verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl RuleResult {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// Machine-readable experiment summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub functionals: Vec<String>,
    pub s_grid: Vec<f64>,
    pub n_reps: u64,
    pub master_seed: u64,
    pub slope: Option<f64>,
    pub slope_std_error: Option<f64>,
    pub intercept: Option<f64>,
    pub rules: Vec<RuleResult>,
    pub pass: bool,
    pub wall_time_ms: f64,
    /// Experiment-specific payload (covariance matrix, eigenvalue CI, ...).
    pub extra: Value,
}

/// Schema the summary is validated against on every write.
pub const SUMMARY_SCHEMA: &str = r#"{
    "type": "object",
    "required": ["experiment", "functionals", "s_grid", "n_reps", "master_seed",
                 "rules", "pass", "wall_time_ms", "extra"],
    "properties": {
        "experiment": {"type": "string"},
        "functionals": {"type": "array", "items": {"type": "string"}},
        "s_grid": {"type": "array", "items": {"type": "number"}},
        "n_reps": {"type": "integer"},
        "master_seed": {"type": "integer"},
        "slope": {"type": "number", "nullable": true},
        "slope_std_error": {"type": "number", "nullable": true},
        "intercept": {"type": "number", "nullable": true},
        "rules": {"type": "array", "items": {
            "type": "object",
            "required": ["name", "pass", "detail"],
            "properties": {
                "name": {"type": "string"},
                "pass": {"type": "boolean"},
                "detail": {"type": "string"}
            }
        }},
        "pass": {"type": "boolean"},
        "wall_time_ms": {"type": "number"},
        "extra": {"type": "object"}
    }
}"#;

/// Structural validation against [`SUMMARY_SCHEMA`]: required properties,
/// primitive types, nullability and array item types.
pub fn validate_against_schema(value: &Value, schema: &Value) -> std::result::Result<(), String> {
    let type_name = schema.get("type").and_then(Value::as_str).unwrap_or("object");
    let nullable = schema.get("nullable").and_then(Value::as_bool).unwrap_or(false);
    if value.is_null() {
        return if nullable { Ok(()) } else { Err(format!("expected {type_name}, got null")) };
    }
    match type_name {
        "object" => {
            let obj = value.as_object().ok_or("expected object")?;
            if let Some(required) = schema.get("required").and_then(Value::as_array) {
                for key in required {
                    let key = key.as_str().unwrap_or_default();
                    if !obj.contains_key(key) {
                        return Err(format!("missing required property `{key}`"));
                    }
                }
            }
            if let Some(properties) = schema.get("properties").and_then(Value::as_object) {
                for (key, sub) in properties {
                    if let Some(v) = obj.get(key) {
                        validate_against_schema(v, sub)
                            .map_err(|e| format!("property `{key}`: {e}"))?;
                    }
                }
            }
            Ok(())
        }
        "array" => {
            let arr = value.as_array().ok_or("expected array")?;
            if let Some(items) = schema.get("items") {
                for (i, v) in arr.iter().enumerate() {
                    validate_against_schema(v, items).map_err(|e| format!("item {i}: {e}"))?;
                }
            }
            Ok(())
        }
        "string" => value.as_str().map(|_| ()).ok_or_else(|| "expected string".into()),
        "boolean" => value.as_bool().map(|_| ()).ok_or_else(|| "expected boolean".into()),
        "integer" => value.as_u64().map(|_| ()).ok_or_else(|| "expected integer".into()),
        "number" => value.as_f64().map(|_| ()).ok_or_else(|| "expected number".into()),
        other => Err(format!("unknown schema type `{other}`")),
    }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let value = serde_json::to_value(summary)?;
    let schema: Value = serde_json::from_str(SUMMARY_SCHEMA).expect("embedded schema parses");
    if let Err(e) = validate_against_schema(&value, &schema) {
        bail!("summary failed its schema check: {e}");
    }
    let mut out = create_file(path)?;
    serde_json::to_writer_pretty(&mut out, &value)?;
    writeln!(out)?;
    Ok(())
}
