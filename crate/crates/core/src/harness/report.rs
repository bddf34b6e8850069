use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RunReport, FORMAT_VERSION};
use crate::error::{Error, Result};

const CSV_MAGIC: &str = "# jetgen-report";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<ReportFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

/// Writes `report` to `path`.
///
/// CSV has one row per (sample, singular point), or a single row with
/// empty point columns for a sample without points. Its first line is a
/// `#` comment carrying the format version and config hash.
pub fn write_report(report: &RunReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report).map_err(|e| Error::Serde(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        ReportFormat::Csv => {
            writeln!(
                out,
                "{CSV_MAGIC} format_version={} config_hash={} kind={}",
                report.format_version, report.config_hash, report.config.kind
            )
            .map_err(|e| Error::io(path, e))?;
            write_csv(report, &mut out).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Serde(format!("{other:?}")),
            })?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(report: &RunReport, out: &mut impl Write) -> csv::Result<()> {
    let dims = report
        .config
        .prepare()
        .map(|p| p.dims)
        .map_err(|e| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())))?;
    let n_alpha = dims.ell * dims.m;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sample_index".to_string()];
    header.extend((0..n_alpha).map(|i| format!("alpha_{i}")));
    header.extend((0..dims.n).map(|i| format!("x_{i}")));
    header.extend(["corank", "tb_symbol", "classification", "margin", "pass"].map(String::from));
    w.write_record(&header)?;
    for s in &report.samples {
        let mut prefix = vec![s.sample_index.to_string()];
        prefix.extend(s.alpha.flatten().iter().map(|v| v.to_string()));
        let pass = s.pass.to_string();
        if s.points.is_empty() {
            let mut row = prefix.clone();
            row.extend(std::iter::repeat_n(String::new(), dims.n + 4));
            row.push(pass.clone());
            w.write_record(&row)?;
        }
        for p in &s.points {
            let mut row = prefix.clone();
            row.extend(p.point.location.iter().map(|v| v.to_string()));
            row.push(p.point.corank.to_string());
            row.push(p.point.tb_symbol.to_string());
            row.push(p.point.classification.to_string());
            row.push(p.point.margin.to_string());
            row.push(pass.clone());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON report back.
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: RunReport = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
    check_version(report.format_version)?;
    Ok(report)
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Serde(format!(
            "report format version {v} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Headline numbers of a report, recoverable from either format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub config_hash: String,
    pub kind: String,
    pub n_samples: usize,
    pub failures: usize,
    pub min_margin: Option<f64>,
    pub classification_counts: BTreeMap<String, usize>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kind: {}", self.kind)?;
        writeln!(f, "config hash: {}", self.config_hash)?;
        writeln!(f, "samples: {}", self.n_samples)?;
        writeln!(f, "failures: {}", self.failures)?;
        match self.min_margin {
            Some(m) => writeln!(f, "min margin: {m:.3e}")?,
            None => writeln!(f, "min margin: n/a")?,
        }
        for (class, count) in &self.classification_counts {
            writeln!(f, "  {class}: {count}")?;
        }
        Ok(())
    }
}

/// Summarizes a report file, choosing the parser by extension (JSON when
/// the extension is unknown and the file does not start with the CSV
/// header comment).
pub fn summarize_path(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let csv = match ReportFormat::from_path(path) {
        Some(f) => f == ReportFormat::Csv,
        None => text.starts_with(CSV_MAGIC),
    };
    if !csv {
        let report: RunReport = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        check_version(report.format_version)?;
        return Ok(Summary {
            format_version: report.format_version,
            config_hash: report.config_hash,
            kind: report.config.kind.to_string(),
            n_samples: report.aggregate.n_samples,
            failures: report.aggregate.failures,
            min_margin: report.aggregate.min_margin,
            classification_counts: report.aggregate.classification_counts,
        });
    }
    summarize_csv(&text)
}

fn summarize_csv(text: &str) -> Result<Summary> {
    let (first, body) = text.split_once('\n').unwrap_or((text, ""));
    let fields: BTreeMap<&str, &str> = first
        .strip_prefix(CSV_MAGIC)
        .ok_or_else(|| Error::Serde("CSV report lacks its header comment".into()))?
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::Serde(format!("CSV header comment lacks `{k}`")))
    };
    let version: u32 = get("format_version")?
        .parse()
        .map_err(|_| Error::Serde("malformed format_version".into()))?;
    check_version(version)?;
    let serde_err = |e: csv::Error| Error::Serde(e.to_string());
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers().map_err(serde_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Serde(format!("CSV report lacks column `{name}`")))
    };
    let (c_index, c_class, c_margin, c_pass) = (col("sample_index")?, col("classification")?, col("margin")?, col("pass")?);
    let mut samples = BTreeSet::new();
    let mut failed = BTreeSet::new();
    let mut counts = BTreeMap::new();
    let mut min_margin: Option<f64> = None;
    for row in reader.records() {
        let row = row.map_err(serde_err)?;
        let index: usize = row[c_index]
            .parse()
            .map_err(|_| Error::Serde(format!("bad sample_index `{}`", &row[c_index])))?;
        samples.insert(index);
        if &row[c_pass] != "true" {
            failed.insert(index);
        }
        if !row[c_class].is_empty() {
            *counts.entry(row[c_class].to_string()).or_insert(0) += 1;
        }
        if let Ok(m) = row[c_margin].parse::<f64>() {
            min_margin = Some(min_margin.map_or(m, |a| a.min(m)));
        }
    }
    Ok(Summary {
        format_version: version,
        config_hash: get("config_hash")?.to_string(),
        kind: get("kind")?.to_string(),
        n_samples: samples.len(),
        failures: failed.len(),
        min_margin,
        classification_counts: counts,
    })
}
