//! Result documents and their CSV, JSON and text encodings.
//!
//! Every document carries the schema version, the command name and the
//! fully resolved configuration (seed included, worker count excluded), so a
//! run can be reproduced from its output alone. The worker count is left out
//! on purpose: output bytes do not depend on it.
//!
//! CSV layout:
//!
//! ```text
//! # mixnorm schema_version=1 command=<name> config=<compact JSON>
//! <header>
//! <rows>
//! ```
//!
//! Nested result fields are flattened with dotted keys (`result.estimate`),
//! array elements with their index (`values.0`).

use std::io::{self, Write};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

const CSV_PREFIX: &str = "# mixnorm ";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected text, csv or json)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub results: Vec<Value>,
}

impl Document {
    pub fn new<C: Serialize>(command: &str, config: &C) -> anyhow::Result<Self> {
        Ok(Document {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            results: Vec::new(),
        })
    }

    pub fn push<R: Serialize>(&mut self, row: &R) -> anyhow::Result<()> {
        self.results.push(serde_json::to_value(row)?);
        Ok(())
    }

    pub fn write<W: Write>(&self, format: Format, out: &mut W) -> anyhow::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)?;
            }
            Format::Csv => {
                write_csv_preamble(out, &self.command, &self.config)?;
                let mut writer = csv::Writer::from_writer(&mut *out);
                let mut header: Option<Vec<String>> = None;
                for row in &self.results {
                    let fields = flatten(row);
                    let keys: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
                    match &header {
                        None => {
                            writer.write_record(&keys)?;
                            header = Some(keys);
                        }
                        Some(h) if *h != keys => bail!("result rows of '{}' do not share one header", self.command),
                        Some(_) => {}
                    }
                    writer.write_record(fields.iter().map(|(_, v)| v))?;
                }
                writer.flush()?;
            }
            Format::Text => {
                for (i, row) in self.results.iter().enumerate() {
                    if i > 0 {
                        writeln!(out)?;
                    }
                    for (k, v) in flatten(row) {
                        writeln!(out, "{k}: {v}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Writes the CSV comment line that carries the run's configuration.
pub fn write_csv_preamble<W: Write>(out: &mut W, command: &str, config: &Value) -> io::Result<()> {
    writeln!(out, "{CSV_PREFIX}schema_version={SCHEMA_VERSION} command={command} config={config}")
}

/// Renders a scalar the way CSV and text output show it.
pub fn scalar(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Flattens nested objects and arrays into `(dotted key, rendered value)` pairs.
pub fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
        let join = |key: &str| if prefix.is_empty() { key.to_string() } else { format!("{prefix}.{key}") };
        match value {
            Value::Object(map) => {
                for (k, v) in map {
                    walk(&join(k), v, out);
                }
            }
            Value::Array(items) => {
                for (i, v) in items.iter().enumerate() {
                    walk(&join(&i.to_string()), v, out);
                }
            }
            scalar_value => out.push((prefix.to_string(), scalar(scalar_value))),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

/// A parsed CSV document: the preamble plus the raw table.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvDocument {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDocument {
    /// The column named `key`, if present.
    pub fn column(&self, key: &str) -> Option<Vec<&str>> {
        let idx = self.header.iter().position(|h| h == key)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    /// Rows as key/value maps with string values.
    pub fn records(&self) -> Vec<Map<String, Value>> {
        self.rows
            .iter()
            .map(|r| self.header.iter().cloned().zip(r.iter().map(|v| Value::String(v.clone()))).collect())
            .collect()
    }
}

pub fn parse_json(text: &str) -> anyhow::Result<Document> {
    let doc: Document = serde_json::from_str(text).context("output is not a mixnorm JSON document")?;
    if doc.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema version {}", doc.schema_version);
    }
    Ok(doc)
}

pub fn parse_csv(text: &str) -> anyhow::Result<CsvDocument> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let preamble = first.strip_prefix(CSV_PREFIX).ok_or_else(|| anyhow!("missing '{CSV_PREFIX}' preamble"))?;
    let rest = preamble
        .strip_prefix("schema_version=")
        .ok_or_else(|| anyhow!("preamble lacks schema_version"))?;
    let (version, rest) = rest.split_once(' ').ok_or_else(|| anyhow!("truncated preamble"))?;
    let schema_version: u32 = version.parse().context("bad schema_version")?;
    if schema_version != SCHEMA_VERSION {
        bail!("unsupported schema version {schema_version}");
    }
    let rest = rest.strip_prefix("command=").ok_or_else(|| anyhow!("preamble lacks command"))?;
    let (command, rest) = rest.split_once(' ').ok_or_else(|| anyhow!("truncated preamble"))?;
    let config_text = rest.strip_prefix("config=").ok_or_else(|| anyhow!("preamble lacks config"))?;
    let config: Value = serde_json::from_str(config_text.trim_end_matches('\r')).context("bad config JSON")?;

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_string).collect());
    }
    Ok(CsvDocument { schema_version, command: command.to_string(), config, header, rows })
}
