//! Tables written as CSV or JSON, plus the metadata sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::config::{Format, Options};
use super::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Rounds to 12 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Decimal text with at most 12 significant digits, `inf` for infinity.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(v);
    if r == 0.0 {
        return "0".into();
    }
    format!("{r}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_num(*v),
                    Cell::Text(t) => t.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            w.write_record(&fields).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (k, c) in self.columns.iter().zip(row) {
                    let v = match c {
                        Cell::Num(v) if v.is_finite() => json!(round_sig(*v)),
                        Cell::Num(v) => json!(fmt_num(*v)),
                        Cell::Text(t) => json!(t),
                        Cell::Empty => Value::Null,
                    };
                    m.insert(k.clone(), v);
                }
                Value::Object(m)
            })
            .collect();
        Value::Array(rows)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let mut text = serde_json::to_vec_pretty(&self.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
                text.push(b'\n');
                Ok(text)
            }
        }
    }
}

/// Path of the metadata sidecar written next to `out`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

/// Writes the table to `out` (or stdout) and, for file output, a JSON
/// sidecar describing the run.
pub fn emit(table: &Table, opts: &Options, command: &str, extra: Value, out: Option<&Path>) -> Result<(), CliError> {
    let format = opts.format()?;
    let bytes = table.render(format)?;
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&bytes)
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))?;
        }
        Some(path) => {
            std::fs::write(path, &bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            let meta = json!({
                "tool": env!("CARGO_PKG_NAME"),
                "version": env!("CARGO_PKG_VERSION"),
                "command": command,
                "columns": table.columns,
                "config": effective_config(opts)?,
                "details": extra,
            });
            let side = sidecar_path(path);
            let mut text = serde_json::to_vec_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
            text.push(b'\n');
            std::fs::write(&side, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", side.display())))?;
        }
    }
    Ok(())
}

/// The fully resolved parameters, defaults filled in.
fn effective_config(opts: &Options) -> Result<Value, CliError> {
    let spec = opts.reward_spec()?;
    Ok(json!({
        "alpha": opts.alpha,
        "gamma": opts.gamma(),
        "beta": opts.beta.map(|b| if b.is_infinite() { json!("inf") } else { json!(b) }),
        "reward": spec,
        "objective": opts.objective.clone(),
        "seed": opts.seed(),
        "events": opts.events(),
        "replicas": opts.replicas(),
        "lambda-mode": opts.lambda_mode.clone().unwrap_or_else(|| "analytic".into()),
        "format": opts.format()?.extension(),
        "config-file": opts.config.as_ref().map(|p| p.display().to_string()),
    }))
}
