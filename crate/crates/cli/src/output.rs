//! CSV data files with a JSON schema sidecar, and JSON-lines test reports.
//!
//! Floats are written in Rust's shortest round-trip form and nothing depends
//! on the clock, so identical configs produce byte-identical files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use multipd::verify::TestReport;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// A documented CSV column.
#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

pub fn col(name: impl Into<String>, description: impl Into<String>) -> Column {
    Column {
        name: name.into(),
        description: description.into(),
    }
}

/// `prefix1..prefixN`, all described the same way.
pub fn numbered(prefix: &str, n: usize, description: &str) -> Vec<Column> {
    (1..=n).map(|i| col(format!("{prefix}{i}"), description)).collect()
}

#[derive(Serialize)]
struct Schema<'a> {
    format: &'static str,
    columns: &'a [Column],
    config: &'a RunConfig,
}

/// `data.csv` -> `data.schema.json`.
pub fn schema_path(out: &Path) -> PathBuf {
    out.with_extension("schema.json")
}

/// RFC-4180 CSV sink on a file (with schema sidecar) or standard output.
pub struct CsvSink {
    writer: csv::Writer<Box<dyn Write>>,
    width: usize,
}

impl CsvSink {
    pub fn create(cfg: &RunConfig, columns: &[Column]) -> Result<Self, CliError> {
        let sink: Box<dyn Write> = match &cfg.out {
            Some(path) => {
                let schema = Schema {
                    format: "csv (RFC 4180), header row, one record per line",
                    columns,
                    config: cfg,
                };
                let mut f = BufWriter::new(File::create(schema_path(path))?);
                serde_json::to_writer_pretty(&mut f, &schema)?;
                writeln!(f)?;
                f.flush()?;
                Box::new(BufWriter::new(File::create(path)?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(columns.iter().map(|c| c.name.as_str()))?;
        Ok(Self {
            writer,
            width: columns.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(fields.len(), self.width, "row width does not match the header");
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Formats a float in shortest round-trip form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes one JSON object per report.
pub fn write_reports(path: &Path, reports: &[TestReport]) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    for r in reports {
        serde_json::to_writer(&mut f, r)?;
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}
