//! Tabular data files with a schema header, and tracking of written files
//! so a failed run can remove them.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::OutputFormat;

pub const SCHEMA_PREFIX: &str = "kerr-cli";

pub fn schema_id(name: &str) -> String {
    format!("{SCHEMA_PREFIX}/{name}/v1")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // Non-finite values have no JSON number form.
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or_else(|| Value::String(v.to_string()), Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV: `# schema: …` line, then the header. JSON lines: a schema
    /// object listing the columns, then one object per row.
    pub fn write<W: Write>(&self, format: OutputFormat, mut w: W) -> io::Result<()> {
        match format {
            OutputFormat::Csv => {
                writeln!(w, "# schema: {}", schema_id(self.name))?;
                writeln!(w, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
            }
            OutputFormat::JsonLines => {
                let header = serde_json::json!({ "schema": schema_id(self.name), "columns": self.columns });
                writeln!(w, "{header}")?;
                for row in &self.rows {
                    let obj: serde_json::Map<String, Value> =
                        self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                    writeln!(w, "{}", Value::Object(obj))?;
                }
            }
        }
        w.flush()
    }
}

pub fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "csv",
        OutputFormat::JsonLines => "jsonl",
    }
}

/// Files written under the output directory during one run.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> io::Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> io::Result<()> {
        let path = self.dir.join(name);
        // Recorded before writing so a half-written file is also removed.
        self.files.push(name.to_string());
        let mut w = BufWriter::new(fs::File::create(&path)?);
        f(&mut w)?;
        w.flush()
    }

    pub fn write_table(&mut self, table: &Table, format: OutputFormat) -> io::Result<String> {
        let name = format!("{}.{}", table.name, extension(format));
        self.write_with(&name, |w| table.write(format, w))?;
        Ok(name)
    }

    /// Remove everything written so far, and the directory if this run
    /// created it and it is now empty.
    pub fn discard(self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(f));
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("demo", &["t", "x", "ok"]);
        t.push(vec![0.1.into(), f64::INFINITY.into(), true.into()]);
        t.push(vec![0.2.into(), Cell::Empty, None::<bool>.into()]);
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write(OutputFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# schema: kerr-cli/demo/v1\nt,x,ok\n0.1,inf,true\n0.2,,\n");
    }

    #[test]
    fn json_lines_layout() {
        let mut buf = Vec::new();
        sample().write(OutputFormat::JsonLines, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["schema"], "kerr-cli/demo/v1");
        assert_eq!(lines[1]["x"], "inf");
        assert_eq!(lines[2]["x"], Value::Null);
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn discard_removes_files_and_new_directory() {
        let root = std::env::temp_dir().join(format!("kerr-cli-artifacts-{}", std::process::id()));
        let dir = root.join("out");
        let mut a = Artifacts::create(&dir).unwrap();
        a.write_table(&sample(), OutputFormat::Csv).unwrap();
        assert!(dir.join("demo.csv").exists());
        a.discard();
        assert!(!dir.exists());
        let _ = fs::remove_dir(&root);
    }
}
