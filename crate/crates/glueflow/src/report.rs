//! Report files. Numeric bodies are deterministic functions of the
//! resolved config; wall-clock data goes to `metadata.json` only.
//!
//! Numbers are written as the shortest decimal that round-trips to the
//! same `f64`. JSON uses the strings `"inf"`, `"-inf"` and `"nan"` for
//! non-finite values.
//!
//! Sparse triplet files (`*.triplets`) hold one comment line, a size
//! line `rows cols nnz` and then `row col value` lines with 0-based
//! indices, in row-major order.
use std::fs;
use std::path::{Path, PathBuf};

use glueflow_core::sparse::CsrMatrix;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::RunError;

/// Shortest round-trip decimal, `inf`, `-inf` or `nan`.
pub fn num(x: f64) -> String {
    match serde_json::Number::from_f64(x) {
        Some(n) => n.to_string(),
        None if x.is_nan() => "nan".into(),
        None if x > 0.0 => "inf".into(),
        None => "-inf".into(),
    }
}

/// JSON number, or a string tag for non-finite values.
pub fn jnum(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(num(x)))
}

pub fn jnums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| jnum(x)).collect())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the files of one run into a directory.
pub struct Reporter {
    dir: PathBuf,
    written: Vec<String>,
}

impl Reporter {
    pub fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Output { path: dir.to_path_buf(), source })?;
        Ok(Reporter { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// File names written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, body: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| RunError::Output { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(value).expect("JSON values serialise");
        s.push('\n');
        self.put(name, s.as_bytes())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), RunError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| RunError::Output { path: self.dir.join(name), source: e.into() };
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(&row).map_err(wrap)?;
        }
        let body = w.into_inner().expect("in-memory writer");
        self.put(name, &body)
    }

    pub fn triplets(&mut self, name: &str, m: &CsrMatrix) -> Result<(), RunError> {
        let n = m.dim();
        let mut s = String::with_capacity(32 * m.nnz() + 64);
        s.push_str("% glueflow sparse triplets: rows cols nnz, then row col value (0-based)\n");
        s.push_str(&format!("{n} {n} {}\n", m.nnz()));
        for (i, j, v) in m.triplets() {
            s.push_str(&format!("{i} {j} {}\n", num(v)));
        }
        self.put(name, s.as_bytes())
    }

    /// Diagonal matrix as triplets.
    pub fn diagonal_triplets(&mut self, name: &str, d: &[f64]) -> Result<(), RunError> {
        let triplets: Vec<(usize, usize, f64)> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        self.triplets(name, &CsrMatrix::from_triplets(d.len(), &triplets))
    }
}

/// Inputs a run depends on besides the config itself.
#[derive(Debug, Clone)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// The common head of every report body.
pub fn envelope(task: &str, config: &Value, config_sha256: &str, inputs: &[InputFile], results: Value) -> Value {
    json!({
        "task": task,
        "config_sha256": config_sha256,
        "config": config,
        "inputs": inputs.iter().map(|f| json!({ "path": f.path, "sha256": f.sha256 })).collect::<Vec<_>>(),
        "results": results,
    })
}

pub type Triplets = Vec<(usize, usize, f64)>;

/// Parses a triplet file back into `(n, triplets)`.
pub fn read_triplets(text: &str) -> Option<(usize, Triplets)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('%'));
    let head: Vec<usize> = lines.next()?.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
    let [n, m, nnz] = head[..] else { return None };
    if n != m {
        return None;
    }
    let rows: Vec<(usize, usize, f64)> = lines
        .map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            match t[..] {
                [i, j, v] => Some((i.parse().ok()?, j.parse().ok()?, v.parse().ok()?)),
                _ => None,
            }
        })
        .collect::<Option<_>>()?;
    (rows.len() == nnz).then_some((n, rows))
}
