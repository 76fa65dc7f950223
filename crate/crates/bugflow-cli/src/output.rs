//! Columnar output shared by every subcommand: the same table renders as CSV
//! or as line-delimited JSON records with identical values, so the two
//! formats differ only in framing.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use bugflow::numeric::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Csv,
    Structured,
}

impl std::str::FromStr for OutFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutFormat::Csv),
            "structured" => Ok(OutFormat::Structured),
            other => Err(format!("unknown format {other:?} (csv, structured)")),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    Missing,
}

/// Rounds exactly like the text formatter so both formats carry the same
/// value.
fn rounded(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Table {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: OutFormat) -> anyhow::Result<String> {
        match format {
            OutFormat::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                writer.write_record(&self.columns)?;
                for row in &self.rows {
                    let record: Vec<String> = row
                        .iter()
                        .map(|cell| match cell {
                            Cell::Text(s) => s.clone(),
                            Cell::Num(x) => fmt_f64(*x),
                            Cell::Int(i) => i.to_string(),
                            Cell::Missing => String::new(),
                        })
                        .collect();
                    writer.write_record(&record)?;
                }
                Ok(String::from_utf8(writer.into_inner()?)?)
            }
            OutFormat::Structured => {
                let mut out = String::new();
                for row in &self.rows {
                    let mut object = serde_json::Map::new();
                    for (column, cell) in self.columns.iter().zip(row) {
                        let value = match cell {
                            Cell::Text(s) => serde_json::Value::String(s.clone()),
                            Cell::Num(x) => serde_json::json!(rounded(*x)),
                            Cell::Int(i) => serde_json::json!(i),
                            Cell::Missing => serde_json::Value::Null,
                        };
                        object.insert(column.clone(), value);
                    }
                    out.push_str(&serde_json::Value::Object(object).to_string());
                    out.push('\n');
                }
                Ok(out)
            }
        }
    }
}

/// Writes to `--out` when given, stdout otherwise.
pub fn write_output(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display())),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}
