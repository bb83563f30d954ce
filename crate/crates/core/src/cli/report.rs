//! Report and table emission.
//!
//! Machine output writes every float with 17 significant digits, so values
//! round-trip exactly. Nothing time- or environment-dependent is included.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::stats;

#[derive(Debug, Clone, Serialize)]
pub struct Digest {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sigma: f64,
}

impl Digest {
    pub fn of(name: &str, values: &[f64]) -> crate::Result<Self> {
        Ok(Digest {
            name: name.to_string(),
            n: values.len(),
            mean: stats::mean(values)?,
            sigma: stats::population_variance(values)?.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub inputs: Vec<Digest>,
    pub results: Value,
}

/// `{:.16e}`, i.e. 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    serde_json::from_str(&fmt_float(x)).unwrap_or(Value::Null)
}

/// Rewrites every non-integer number to the 17-digit form.
pub fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = number(x);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize),
        Value::Object(map) => map.values_mut().for_each(normalize),
        _ => {}
    }
}

/// Serializes `value` into a normalized JSON tree.
pub fn to_value<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).unwrap_or(Value::Null);
    normalize(&mut v);
    v
}

impl Report {
    fn tree(&self) -> Value {
        to_value(self)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.tree()).unwrap_or_default();
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Value::Object(map) = self.tree() {
            render_object(&map, 0, &mut out);
        }
        out
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn render_object(map: &Map<String, Value>, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    for (k, v) in map {
        render_entry(&format!("{pad}{k}:"), v, indent, out);
    }
}

fn render_entry(label: &str, v: &Value, indent: usize, out: &mut String) {
    if let Some(s) = scalar(v) {
        out.push_str(&format!("{label} {s}\n"));
        return;
    }
    match v {
        Value::Array(items) if items.iter().all(|i| scalar(i).is_some()) => {
            let cells: Vec<String> = items.iter().filter_map(scalar).collect();
            out.push_str(&format!("{label} [{}]\n", cells.join(", ")));
        }
        Value::Array(items) => {
            out.push_str(label);
            out.push('\n');
            let pad = " ".repeat(indent + 2);
            for (i, item) in items.iter().enumerate() {
                render_entry(&format!("{pad}[{i}]"), item, indent + 2, out);
            }
        }
        Value::Object(map) => {
            out.push_str(label);
            out.push('\n');
            render_object(map, indent + 2, out);
        }
        _ => unreachable!("scalars handled above"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// Tabular output: comma-separated, header row, LF line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Num(x) if x.is_finite() => fmt_float(*x),
                    Cell::Num(_) | Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
