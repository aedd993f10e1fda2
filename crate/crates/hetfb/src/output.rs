//! Result tables, their CSV/JSON encodings and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Empty, Value::Num)
    }
}

/// `x` rounded to 12 significant digits, printed in shortest form.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific notation parses");
    let magnitude = rounded.abs();
    let text = if magnitude != 0.0 && !(1e-6..1e15).contains(&magnitude) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    };
    if text == "-0" {
        "0".to_string()
    } else {
        text
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn text(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Num(v) => format_number(*v),
            Value::Text(s) => s.clone(),
            Value::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Int(v) => (*v).into(),
            Value::Num(v) => format_number(*v)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(serde_json::Value::Null, serde_json::Value::Number),
            Value::Text(s) => s.clone().into(),
            Value::Empty => serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub description: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: impl Into<String>, description: impl Into<String>, columns: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header of {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, AppError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| AppError::io(format!("encoding {}: {e}", self.name));
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::text)).map_err(fail)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| AppError::io(format!("encoding {}: {e}", self.name)))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let map: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                serde_json::Value::Object(map)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

/// Meaning and unit of every column any subcommand can emit.
pub const COLUMNS: &[(&str, &str)] = &[
    ("K", "total number of users"),
    ("K1", "users in the first cluster"),
    ("ratio", "fraction of users in the first cluster"),
    ("eta", "subband size in resource blocks"),
    ("M", "best-M value of the coarsest cluster"),
    ("gamma", "required fraction of the full-feedback sum rate"),
    ("M_exact", "smallest M reaching the fraction, exact sum rate"),
    (
        "M_approx",
        "smallest M reaching the fraction, closed-form approximation",
    ),
    ("snr_db", "signal-to-noise ratio in dB"),
    ("alpha", "feedback delay correlation"),
    ("est_err_var", "channel estimation error variance"),
    ("strategy", "perfect, fixed or variable rate transmission"),
    ("scheme", "feedback scheme being compared"),
    ("method", "exact expectation or Jensen approximation"),
    ("beta", "normalized parameter: beta1, or beta0/10"),
    ("beta0", "fixed-rate CQI threshold"),
    ("beta1", "variable-rate backoff factor"),
    ("beta0_opt", "goodput-maximizing fixed-rate threshold"),
    ("beta1_opt", "goodput-maximizing variable-rate backoff"),
    (
        "goodput0_opt",
        "full-feedback fixed-rate goodput at beta0_opt, bits/s/Hz per block",
    ),
    (
        "goodput1_opt",
        "full-feedback Jensen goodput at beta1_opt, bits/s/Hz per block",
    ),
    ("M_star", "smallest M reaching 99% of the full-feedback sum rate"),
    ("sum_rate", "average sum rate, bits/s/Hz per resource block"),
    (
        "full_feedback_rate",
        "average sum rate with full feedback, bits/s/Hz per block",
    ),
    ("goodput", "average goodput, bits/s/Hz per resource block"),
    ("outage", "probability a block is scheduled and its transmission fails"),
    ("quantity", "name of the estimated quantity"),
    ("mean", "Monte Carlo mean over trials"),
    ("std_error", "standard error of the mean"),
    ("trials", "number of Monte Carlo trials"),
    ("analytic", "analytic value of the same quantity"),
    ("z", "(mean - analytic) / std_error"),
];

pub fn describe_column(name: &str) -> Option<&'static str> {
    COLUMNS.iter().find(|(c, _)| *c == name).map(|(_, d)| *d)
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnInfo {
    pub name: &'static str,
    pub description: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesInfo {
    pub table: String,
    pub file: String,
    pub description: String,
    pub rows: usize,
    pub columns: Vec<ColumnInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Seconds since the Unix epoch; taken from SOURCE_DATE_EPOCH when set.
    pub created_unix: u64,
    pub seed: u64,
    pub trials: u64,
    pub format: Format,
    pub config: RunConfig,
    pub series: Vec<SeriesInfo>,
}

pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
    {
        return t;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn file_name(table: &Table, format: Format) -> String {
    match format {
        Format::Csv => format!("{}.csv", table.name),
        Format::Json => format!("{}.json", table.name),
    }
}

fn encode(table: &Table, format: Format) -> Result<String, AppError> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => Ok(serde_json::to_string_pretty(&table.to_json()).expect("json encodes") + "\n"),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    std::fs::write(path, contents).map_err(|e| AppError::io(format!("writing {}: {e}", path.display())))
}

/// Writes every table plus one manifest into `dir`, returning the paths.
pub fn emit(
    tables: &[Table],
    dir: &Path,
    format: Format,
    command: &str,
    config: &RunConfig,
) -> Result<Vec<PathBuf>, AppError> {
    if tables.is_empty() || tables.iter().all(|t| t.rows.is_empty()) {
        return Err(AppError::validation("nothing to emit: the result set is empty"));
    }
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(format!("creating {}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    let mut series = Vec::new();
    for table in tables {
        let name = file_name(table, format);
        let path = dir.join(&name);
        write_file(&path, &encode(table, format)?)?;
        paths.push(path);
        series.push(SeriesInfo {
            table: table.name.clone(),
            file: name,
            description: table.description.clone(),
            rows: table.rows.len(),
            columns: table
                .columns
                .iter()
                .map(|c| ColumnInfo {
                    name: c,
                    description: describe_column(c).unwrap_or(""),
                })
                .collect(),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        created_unix: timestamp(),
        seed: config.seed,
        trials: config.trials,
        format,
        config: config.clone(),
        series,
    };
    let path = dir.join(MANIFEST_FILE);
    write_file(
        &path,
        &(serde_json::to_string_pretty(&manifest).expect("manifest encodes") + "\n"),
    )?;
    paths.push(path);
    Ok(paths)
}

/// Prints the tables to `out`: CSV blocks headed by `# name`, or one JSON
/// object keyed by table name.
pub fn print(tables: &[Table], format: Format, out: &mut impl Write) -> Result<(), AppError> {
    if tables.is_empty() || tables.iter().all(|t| t.rows.is_empty()) {
        return Err(AppError::validation("nothing to emit: the result set is empty"));
    }
    let io = |e: std::io::Error| AppError::io(format!("writing to stdout: {e}"));
    match format {
        Format::Csv => {
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    writeln!(out).map_err(io)?;
                }
                writeln!(out, "# {}", t.name).map_err(io)?;
                write!(out, "{}", t.to_csv()?).map_err(io)?;
            }
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&map).expect("json encodes")).map_err(io)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_twelve_significant_digits() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(std::f64::consts::PI), "3.14159265359");
        assert_eq!(format_number(123_456_789.123_456_78), "123456789.123");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(2.5e-7), "2.5e-7");
        assert_eq!(format_number(0.000_012_5), "0.0000125");
        assert_eq!(format_number(1.234_567_890_123_4e20), "1.23456789012e20");
    }

    #[test]
    fn empty_results_are_rejected() {
        let t = Table::new("t", "", &["K"]);
        let dir = tempfile::tempdir().unwrap();
        let err = emit(
            std::slice::from_ref(&t),
            dir.path(),
            Format::Csv,
            "x",
            &RunConfig::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(print(&[], Format::Csv, &mut Vec::new()).is_err());
    }

    #[test]
    fn csv_round_trips_and_manifest_references_files() {
        let mut t = Table::new("rates", "demo", &["K", "sum_rate", "strategy", "analytic"]);
        t.push(vec![
            4usize.into(),
            2.345_678_901_234_5.into(),
            "perfect".into(),
            Value::Empty,
        ]);
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            seed: 77,
            ..RunConfig::default()
        };
        let paths = emit(&[t], dir.path(), Format::Csv, "analytic", &cfg).unwrap();
        assert_eq!(paths.len(), 2);
        let mut r = csv::Reader::from_path(&paths[0]).unwrap();
        let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
        assert!(header.iter().all(|h| describe_column(h).is_some()));
        let row = r.records().next().unwrap().unwrap();
        assert_eq!(row[0].parse::<usize>().unwrap(), 4);
        assert_eq!(row[1].parse::<f64>().unwrap(), 2.34567890123);
        assert_eq!(&row[2], "perfect");
        assert_eq!(&row[3], "");
        let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 77);
        assert_eq!(manifest["series"][0]["file"], "rates.csv");
    }

    #[test]
    fn every_documented_column_is_unique() {
        for (i, (a, _)) in COLUMNS.iter().enumerate() {
            assert!(COLUMNS[i + 1..].iter().all(|(b, _)| a != b), "{a}");
        }
    }
}
