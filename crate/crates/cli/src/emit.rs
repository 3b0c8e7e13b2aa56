//! Report emission: compact JSON and CSV with 17 significant digits,
//! aligned text for people.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// `x` with 17 significant digits, enough to recover every `f64` exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        // serde_json maps non-finite floats to null before reaching here.
        w.write_all(format!("{value:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser).expect("report serializes");
    String::from_utf8(buf).expect("utf-8")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn machine(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn human(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.6e}"),
            other => other.machine(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::machine).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::human).collect()).collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |items: &[String]| -> String {
            let padded: Vec<String> = items.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.columns);
        for row in &cells {
            out.push_str(&line(row));
        }
        out
    }
}

/// One named report: a JSON document, its tables and a pass flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub pass: bool,
    pub json: Value,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = format!("== {} : {}\n", self.name, if self.pass { "PASS" } else { "FAIL" });
        if let Value::Object(map) = &self.json {
            let width = map.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, v) in map {
                if v.is_object() || v.is_array() {
                    continue;
                }
                out.push_str(&format!("{k:<width$}  {}\n", human_scalar(v)));
            }
        }
        for t in &self.tables {
            out.push_str(&format!("\n-- {}\n", t.name));
            out.push_str(&t.to_text());
        }
        out
    }
}

fn human_scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format!("{:.6e}", n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> io::Result<()> {
    let path = dir.join(name);
    fs::write(&path, body)?;
    files.push(PathBuf::from(name));
    Ok(())
}

/// Writes `<report>.json`, `<report>.txt` and `<report>_<table>.csv` per
/// report; returns the file names relative to `dir`, in write order.
pub fn emit_reports(reports: &[Report], dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    if reports.is_empty() {
        return Ok(files);
    }
    fs::create_dir_all(dir)?;
    for r in reports {
        write(dir, &format!("{}.json", r.name), &(to_json(&r.json) + "\n"), &mut files)?;
        write(dir, &format!("{}.txt", r.name), &r.to_text(), &mut files)?;
        for t in &r.tables {
            write(dir, &format!("{}_{}.csv", r.name, t.name), &t.to_csv(), &mut files)?;
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1 + 0.2, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e300, 5e-324, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let j = to_json(&json!({ "x": x }));
            let back: Value = serde_json::from_str(&j).unwrap();
            assert_eq!(back["x"].as_f64().unwrap().to_bits(), x.to_bits(), "{j}");
        }
    }

    #[test]
    fn non_finite_floats_become_null() {
        let j = to_json(&json!({ "x": f64::NAN }));
        assert_eq!(j, r#"{"x":null}"#);
    }

    #[test]
    fn csv_rows_have_constant_width() {
        let mut t = Table::new("t", &["a", "b", "c"]);
        t.push(vec![1usize.into(), 0.5.into(), "x".into()]);
        t.push(vec![2usize.into(), f64::NAN.into(), true.into()]);
        let csv = t.to_csv();
        assert!(csv.lines().all(|l| l.split(',').count() == 3));
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_are_refused() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1usize.into()]);
    }

    #[test]
    fn nothing_to_emit() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("never-created");
        assert!(emit_reports(&[], &sub).unwrap().is_empty());
        assert!(!sub.exists());
    }

    #[test]
    fn text_columns_align() {
        let mut t = Table::new("t", &["name", "v"]);
        t.push(vec!["long-name".into(), 1usize.into()]);
        t.push(vec!["x".into(), 22usize.into()]);
        let text = t.to_text();
        let widths: Vec<usize> = text.lines().map(|l| l.len()).collect();
        assert!(widths.iter().all(|&w| w == widths[0]), "{text}");
    }
}
