//! Reports: ordered metadata plus named tables of preformatted cells,
//! serialized as JSON or as CSV with `#` comment lines.
//!
//! CSV layout:
//!
//! ```text
//! # macphail-lab v1 <command>
//! # <key>=<value>
//! # table <name>
//! <header>
//! <rows>
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Format;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
const TAG: &str = "macphail-lab";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub meta: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            meta: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(self).map_err(|e| Error::Input(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "# {TAG} v{} {}", self.schema, self.command)?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}")?;
        }
        for table in &self.tables {
            writeln!(out, "# table {}", table.name)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.columns).map_err(csv_error)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_error)?;
            }
            out.extend(w.into_inner().map_err(|e| Error::Io(e.into_error()))?);
        }
        Ok(out)
    }

    /// Reads a report written by [`Report::to_bytes`] in either format.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))?;
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed report: {e}")));
        }
        Self::parse_csv(text)
    }

    fn parse_csv(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Input(format!("malformed report: {what}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let rest = header.strip_prefix(&format!("# {TAG} v")).ok_or_else(|| bad("missing header"))?;
        let (schema, command) = rest.split_once(' ').ok_or_else(|| bad("missing command"))?;
        let mut report = Report {
            schema: schema.parse().map_err(|_| bad("schema version"))?,
            command: command.to_string(),
            meta: Vec::new(),
            tables: Vec::new(),
        };
        let mut chunks: Vec<(String, String)> = Vec::new();
        for line in lines {
            if let Some(name) = line.strip_prefix("# table ") {
                chunks.push((name.to_string(), String::new()));
            } else if let Some((_, body)) = chunks.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad("metadata line"))?;
                report.meta(k, v);
            } else {
                return Err(bad("unexpected line before the first table"));
            }
        }
        for (name, body) in chunks {
            let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
            let columns = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
            let rows = r
                .records()
                .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
                .collect::<std::result::Result<Vec<Vec<String>>, _>>()
                .map_err(csv_error)?;
            report.tables.push(Table { name, columns, rows });
        }
        Ok(report)
    }

    /// Writes to `path` (creating parent directories) or to standard output.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<()> {
        let bytes = self.to_bytes(format)?;
        match path {
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                std::fs::write(path, bytes)?;
            }
            None => std::io::stdout().lock().write_all(&bytes)?,
        }
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}
