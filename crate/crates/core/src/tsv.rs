//! Tab-separated interchange format helpers.
//!
//! All pipeline files are UTF-8 TSV with a header row, `NA` for missing
//! values, `inf` for infinite ones and `.` as the decimal separator.
//! Lines starting with `#` are comments (the CLI writes the build id there)
//! and are skipped on read.

use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Shortest round-trip decimal rendering of a float; `inf` for infinities.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", v)
    }
}

/// `NA` when absent, otherwise [`fmt_f64`].
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => fmt_f64(v),
        None => "NA".into(),
    }
}

pub fn parse_f64(field: &str) -> Option<f64> {
    match field {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => field.parse().ok(),
    }
}

/// `NA` maps to `None`; anything unparseable is a caller-side error.
pub fn parse_opt(field: &str) -> std::result::Result<Option<f64>, String> {
    if field == "NA" {
        return Ok(None);
    }
    parse_f64(field)
        .map(Some)
        .ok_or_else(|| format!("invalid number `{field}`"))
}

/// A parsed TSV file: header names plus data rows, with the source line
/// number retained for error messages.
#[derive(Debug)]
pub struct TsvFile {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl TsvFile {
    pub fn read(path: &Path) -> Result<TsvFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<TsvFile> {
        let mut header = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
            match &header {
                None => header = Some(fields),
                Some(h) => {
                    if fields.len() != h.len() {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("expected {} fields, found {}", h.len(), fields.len()),
                        ));
                    }
                    rows.push((lineno, fields));
                }
            }
        }
        let header = header.ok_or_else(|| Error::parse(path, 1, "missing header row"))?;
        Ok(TsvFile {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    /// Index of a required column.
    pub fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&self.path, 1, format!("missing column `{name}`")))
    }

    pub fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::parse(&self.path, line, message)
    }
}

/// Incremental TSV writer over a string buffer.
pub struct TsvWriter {
    buf: String,
}

impl TsvWriter {
    pub fn new(comment: Option<&str>, header: &[&str]) -> TsvWriter {
        let mut buf = String::new();
        if let Some(c) = comment {
            buf.push_str("# ");
            buf.push_str(c);
            buf.push('\n');
        }
        buf.push_str(&header.join("\t"));
        buf.push('\n');
        TsvWriter { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join("\t"));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }

    pub fn write(self, path: &Path) -> Result<()> {
        std::fs::write(path, self.buf).map_err(|e| Error::io(path, e))
    }
}
