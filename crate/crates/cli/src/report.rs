//! Run reports and their JSON and CSV renderings.
//!
//! CSV output is derived from the JSON value tree, so both renderings carry
//! the same shortest round-trip number text.

use ctp_core::{AkktTrend, CqReport, ResidualReport};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub horizon: f64,
    pub n_nodes: usize,
}

/// One row of the residual table: an outer iteration, a sequence index, or
/// a single evaluated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: u64,
    pub rho: Option<f64>,
    pub stationarity_l1: f64,
    pub stationarity_weak_max: f64,
    pub comp_sup: f64,
    pub comp_integral: f64,
    pub feas_eq_sup: f64,
    pub feas_ineq_sup: f64,
    pub sign_violation: f64,
    pub mult_sup: f64,
    pub inner_iterations: Option<usize>,
    /// Sup-node distance to the reference trajectory, when one exists.
    pub primal_error: Option<f64>,
}

impl IterationRow {
    pub fn new(k: u64, report: &ResidualReport, mult_sup: f64) -> Self {
        Self {
            k,
            rho: None,
            stationarity_l1: report.stationarity_l1,
            stationarity_weak_max: report.stationarity_weak_max,
            comp_sup: report.comp_sup,
            comp_integral: report.comp_integral,
            feas_eq_sup: report.feas_eq_sup,
            feas_ineq_sup: report.feas_ineq_sup,
            sign_violation: report.sign_violation,
            mult_sup,
            inner_iterations: None,
            primal_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub command: String,
    pub arguments: Vec<String>,
    pub grid: GridInfo,
    pub status: String,
    pub iterations: Vec<IterationRow>,
    /// Integrated distance to the multiplier cone at the limit or evaluated point.
    pub min_kkt_stationarity: Option<f64>,
    pub akkt: Option<AkktTrend>,
    pub cq: Option<CqReport>,
    pub notes: Vec<String>,
    /// Only filled with `--timing`, so default reports are reproducible byte for byte.
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String, String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    /// `field,value` lines for everything except the iteration table, a
    /// blank separator, then the table with a header row.
    pub fn to_csv(&self) -> Result<String, String> {
        let value = serde_json::to_value(self).map_err(|e| e.to_string())?;
        let Value::Object(mut top) = value else {
            return Err("report did not serialize to an object".into());
        };
        let table = top.remove("iterations").unwrap_or(Value::Array(Vec::new()));

        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let err = |e: csv::Error| e.to_string();
        w.write_record(["field", "value"]).map_err(err)?;
        let mut fields = Vec::new();
        flatten("", &Value::Object(top), &mut fields);
        for (k, v) in fields {
            w.write_record([k, v]).map_err(err)?;
        }
        w.write_record([""]).map_err(err)?;

        let header: Vec<String> = match serde_json::to_value(IterationRow::new(0, &ResidualReport::default(), 0.0)) {
            Ok(Value::Object(o)) => o.keys().cloned().collect(),
            _ => return Err("iteration row did not serialize to an object".into()),
        };
        w.write_record(&header).map_err(err)?;
        if let Value::Array(rows) = table {
            for row in rows {
                let cells: Vec<String> = header.iter().map(|h| scalar_text(&row[h.as_str()])).collect();
                w.write_record(&cells).map_err(err)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    }

    pub fn render(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Dotted paths to scalar leaves; array elements are indexed.
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, out);
            }
        }
        leaf => out.push((prefix.to_string(), scalar_text(leaf))),
    }
}
