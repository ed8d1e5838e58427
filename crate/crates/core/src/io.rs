//! Matrix and result file formats.
//!
//! Dense CSV is the primary interchange format (one row per line, comma
//! separated, optional non-numeric header line). MatrixMarket array and
//! coordinate files are accepted for ecosystem compatibility and expanded to
//! dense. Writers emit 17 significant digits so every f64 round-trips
//! exactly, and normalize negative zero away so nonnegative factors stay
//! nonnegative on disk.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::nmf::NmfFactors;
use crate::pipeline::{DiagonalHistogram, TrialResult};

/// Detected on load from the file contents, not the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    MatrixMarketArray,
    MatrixMarketCoordinate,
}

/// Loads a dense matrix, sniffing the format from the first line.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        lines.push(line?);
    }
    let name = path.display().to_string();
    if lines
        .first()
        .is_some_and(|l| l.trim_start().starts_with("%%MatrixMarket"))
    {
        parse_matrix_market(&name, &lines)
    } else {
        parse_csv(&name, &lines)
    }
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_csv(path: &str, lines: &[String]) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut started = false;
    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            if idx + 1 == lines.len() {
                continue; // trailing newline
            }
            return Err(parse_err(path, line_no, "blank line inside data"));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if let Some(w) = width {
                    if vals.len() != w {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!("expected {w} fields, found {}", vals.len()),
                        ));
                    }
                } else {
                    width = Some(vals.len());
                }
                if let Some(bad) = vals.iter().find(|v| !v.is_finite()) {
                    return Err(parse_err(path, line_no, format!("non-finite value {bad}")));
                }
                rows.push(vals);
                started = true;
            }
            Err(e) => {
                // A non-numeric first line is an auto-detected header.
                if !started && rows.is_empty() && idx == 0 {
                    continue;
                }
                return Err(parse_err(path, line_no, format!("malformed field: {e}")));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(path.to_string()));
    }
    let r = rows.len();
    let c = width.unwrap();
    DenseMatrix::from_vec(r, c, rows.into_iter().flatten().collect())
}

fn parse_matrix_market(path: &str, lines: &[String]) -> Result<DenseMatrix> {
    let header = lines[0].trim();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 4 || tokens[0] != "%%MatrixMarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "malformed MatrixMarket header"));
    }
    let layout = tokens[2];
    let dtype = tokens[3];
    let symmetry = tokens.get(4).copied().unwrap_or("general");
    if dtype != "real" && dtype != "integer" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported field type {dtype}"),
        ));
    }
    if symmetry != "general" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported symmetry {symmetry}"),
        ));
    }

    // Skip comment lines, find the size line.
    let mut it = lines
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_idx, size_line) = it
        .next()
        .ok_or_else(|| Error::EmptyInput(path.to_string()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, size_idx + 1, format!("bad size line: {e}")))?;

    match layout {
        "array" => {
            if dims.len() != 2 {
                return Err(parse_err(
                    path,
                    size_idx + 1,
                    "array size line needs 2 dims",
                ));
            }
            let (m, n) = (dims[0], dims[1]);
            let mut values = Vec::with_capacity(m * n);
            for (idx, line) in it {
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|e| parse_err(path, idx + 1, format!("bad value: {e}")))?;
                    values.push(v);
                }
            }
            if values.len() != m * n {
                return Err(parse_err(
                    path,
                    lines.len(),
                    format!("expected {} values, found {}", m * n, values.len()),
                ));
            }
            // Array files are column-major.
            let mut mat = DenseMatrix::zeros(m, n);
            for (pos, v) in values.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(parse_err(path, 1, "non-finite value"));
                }
                mat[(pos % m, pos / m)] = v;
            }
            Ok(mat)
        }
        "coordinate" => {
            if dims.len() != 3 {
                return Err(parse_err(
                    path,
                    size_idx + 1,
                    "coordinate size line needs rows cols nnz",
                ));
            }
            let (m, n, nnz) = (dims[0], dims[1], dims[2]);
            let mut mat = DenseMatrix::zeros(m, n);
            let mut seen = 0usize;
            for (idx, line) in it {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, idx + 1, "expected `i j value`"));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|e| parse_err(path, idx + 1, format!("bad row index: {e}")))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|e| parse_err(path, idx + 1, format!("bad col index: {e}")))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|e| parse_err(path, idx + 1, format!("bad value: {e}")))?;
                if i == 0 || i > m || j == 0 || j > n {
                    return Err(parse_err(path, idx + 1, "index out of bounds"));
                }
                if !v.is_finite() {
                    return Err(parse_err(path, idx + 1, "non-finite value"));
                }
                mat[(i - 1, j - 1)] = v;
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    lines.len(),
                    format!("expected {nnz} entries, found {seen}"),
                ));
            }
            Ok(mat)
        }
        other => Err(parse_err(path, 1, format!("unsupported layout {other}"))),
    }
}

/// Rejects matrices with negative entries; used by every entry point that
/// feeds a factorization.
pub fn require_nonnegative(x: &DenseMatrix) -> Result<()> {
    for i in 0..x.rows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// 17 significant digits: enough for every f64 to round-trip exactly.
/// Negative zero is normalized so nonnegative data stays nonnegative.
pub fn format_full(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{:.16e}", v)
}

pub fn save_matrix_csv(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let fields: Vec<String> = m.row(i).iter().map(|&v| format_full(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Everything needed to replay a run bit-identically on one platform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seed_list: Vec<u64>,
    pub dataset: Option<DatasetInfo>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub rows: usize,
    pub cols: usize,
    /// FNV-1a (64-bit) over the raw file bytes, hex encoded.
    pub checksum_fnv1a: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed_list: Vec::new(),
            dataset: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("manifest serialization: {e}")))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }
}

pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

pub fn dataset_info(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<DatasetInfo> {
    let bytes = fs::read(path.as_ref())?;
    Ok(DatasetInfo {
        path: path.as_ref().display().to_string(),
        rows: m.rows(),
        cols: m.cols(),
        checksum_fnv1a: fnv1a_hex(&bytes),
    })
}

/// Writes `W.csv`, `H.csv`, and `manifest.json` under `dir`.
pub fn save_factors(f: &NmfFactors, dir: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    save_matrix_csv(&f.w, dir.join("W.csv"))?;
    save_matrix_csv(&f.h, dir.join("H.csv"))?;
    let mut manifest = manifest.clone();
    for name in ["W.csv", "H.csv", "manifest.json"] {
        manifest.outputs.push(dir.join(name).display().to_string());
    }
    manifest.write(dir.join("manifest.json"))?;
    Ok(())
}

/// Trial table without wall times, so byte-identical reruns stay
/// byte-identical.
pub fn write_trials_csv(results: &[TrialResult], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(
        "trial_id,seed,fit_standard,fit_gsvd,iters_standard,iters_gsvd_stage1,iters_gsvd_stage2\n",
    );
    for t in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.trial_id,
            t.seed,
            format_full(t.fit_standard),
            format_full(t.fit_gsvd),
            t.iters_standard,
            t.iters_gsvd_stage1,
            t.iters_gsvd_stage2
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_histogram_csv(hist: &DiagonalHistogram, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in &hist.bins {
        out.push_str(&format!(
            "{},{},{}\n",
            format_full(b.lo),
            format_full(b.hi),
            b.count
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a spectrum as one value per line ("inf" for infinite entries).
pub fn write_spectrum(values: &[f64], mut sink: impl Write) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if v.is_infinite() {
            writeln!(sink, "{i},inf")?;
        } else {
            writeln!(sink, "{i},{}", format_full(*v))?;
        }
    }
    Ok(())
}
