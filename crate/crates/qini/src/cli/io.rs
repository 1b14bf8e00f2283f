//! CSV ingestion/emission and the run manifest.
//!
//! All inputs are headed CSV with free column order. Floating-point output
//! is printed with 17 significant digits so files round-trip losslessly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::path::EvalFrame;
use crate::scores::ObservedData;

/// 17 significant digits, lossless for f64.
pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// An in-memory headed CSV file.
pub(crate) struct Table {
    pub path: PathBuf,
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => CliError::Io {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                },
                _ => CliError::Csv {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                },
            })?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Csv {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Csv {
                path: path.to_path_buf(),
                message: format!("row {}: {e}", i + 1),
            })?;
            records.push(rec);
        }
        Ok(Self {
            path: path.to_path_buf(),
            headers,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, CliError> {
        self.column(name).ok_or_else(|| CliError::Csv {
            path: self.path.clone(),
            message: format!("missing column {name}"),
        })
    }

    fn cell(&self, row: usize, col: usize, name: &str) -> Result<&str, CliError> {
        self.records[row].get(col).ok_or_else(|| CliError::Csv {
            path: self.path.clone(),
            message: format!("row {}: no value in column {name}", row + 1),
        })
    }

    pub fn f64_at(&self, row: usize, col: usize, name: &str) -> Result<f64, CliError> {
        let raw = self.cell(row, col, name)?;
        raw.parse::<f64>().map_err(|_| CliError::Csv {
            path: self.path.clone(),
            message: format!("row {}, column {name}: cannot parse {raw:?} as a number", row + 1),
        })
    }

    pub fn u32_at(&self, row: usize, col: usize, name: &str) -> Result<u32, CliError> {
        let raw = self.cell(row, col, name)?;
        raw.parse::<u32>().map_err(|_| CliError::Csv {
            path: self.path.clone(),
            message: format!(
                "row {}, column {name}: cannot parse {raw:?} as a non-negative integer",
                row + 1
            ),
        })
    }

    pub fn usize_at(&self, row: usize, col: usize, name: &str) -> Result<usize, CliError> {
        Ok(self.u32_at(row, col, name)? as usize)
    }

    /// Number of arms `K` implied by contiguous `prefix1..prefixK` headers.
    pub fn count_indexed(&self, prefix: &str) -> usize {
        let mut k = 0;
        while self.column(&format!("{prefix}{}", k + 1)).is_some() {
            k += 1;
        }
        k
    }
}

/// Reads an evaluation frame from columns `tau_k`, `cost_k`, `score_k`.
pub(crate) fn read_frame(table: &Table) -> Result<EvalFrame, CliError> {
    let k = table.count_indexed("tau_");
    if k == 0 {
        return Err(CliError::Csv {
            path: table.path.clone(),
            message: "missing column tau_1".to_string(),
        });
    }
    let n = table.len();
    let mut tau_cols = Vec::with_capacity(k);
    let mut cost_cols = Vec::with_capacity(k);
    let mut score_cols = Vec::with_capacity(k);
    for j in 1..=k {
        tau_cols.push((table.require(&format!("tau_{j}"))?, format!("tau_{j}")));
        cost_cols.push((table.require(&format!("cost_{j}"))?, format!("cost_{j}")));
        score_cols.push((table.require(&format!("score_{j}"))?, format!("score_{j}")));
    }
    let mut tau = Vec::with_capacity(n * k);
    let mut cost = Vec::with_capacity(n * k);
    let mut scores = Vec::with_capacity(n * k);
    for i in 0..n {
        for (col, name) in &tau_cols {
            tau.push(table.f64_at(i, *col, name)?);
        }
        for (col, name) in &cost_cols {
            cost.push(table.f64_at(i, *col, name)?);
        }
        for (col, name) in &score_cols {
            scores.push(table.f64_at(i, *col, name)?);
        }
    }
    EvalFrame::new(n, k, tau, cost, scores).map_err(CliError::Constraint)
}

/// Reads `(w, y)` observations.
pub(crate) fn read_observed(table: &Table) -> Result<ObservedData, CliError> {
    let w_col = table.require("w")?;
    let y_col = table.require("y")?;
    let n = table.len();
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        w.push(table.u32_at(i, w_col, "w")?);
        y.push(table.f64_at(i, y_col, "y")?);
    }
    ObservedData::new(w, y).map_err(CliError::Constraint)
}

/// Effect matrix paired with its cost matrix, both `n x K` row-major.
pub(crate) type EffectCostColumns = (Vec<f64>, Vec<f64>);

/// Effect and cost columns carried through a scores run so its output can
/// feed the path solver directly. Effects come from `tau_k` or
/// `tauk_true`; costs from `cost_k` or `ck`.
pub(crate) fn carried_effects_and_costs(
    table: &Table,
    k: usize,
) -> Result<Option<EffectCostColumns>, CliError> {
    let mut tau_cols = Vec::with_capacity(k);
    let mut cost_cols = Vec::with_capacity(k);
    for j in 1..=k {
        let tau_name = [format!("tau_{j}"), format!("tau{j}_true")]
            .into_iter()
            .find(|n| table.column(n).is_some());
        let cost_name = [format!("cost_{j}"), format!("c{j}")]
            .into_iter()
            .find(|n| table.column(n).is_some());
        match (tau_name, cost_name) {
            (Some(t), Some(c)) => {
                tau_cols.push((table.column(&t).unwrap(), t));
                cost_cols.push((table.column(&c).unwrap(), c));
            }
            _ => return Ok(None),
        }
    }
    let n = table.len();
    let mut tau = Vec::with_capacity(n * k);
    let mut cost = Vec::with_capacity(n * k);
    for i in 0..n {
        for (col, name) in &tau_cols {
            tau.push(table.f64_at(i, *col, name)?);
        }
        for (col, name) in &cost_cols {
            cost.push(table.f64_at(i, *col, name)?);
        }
    }
    Ok(Some((tau, cost)))
}

/// Reads an `n x (K+1)` nuisance matrix from columns `prefix0..prefixK`.
pub(crate) fn read_nuisance_matrix(
    table: &Table,
    prefix: &str,
) -> Result<(usize, Vec<f64>), CliError> {
    let mut cols = Vec::new();
    let mut j = 0;
    while let Some(c) = table.column(&format!("{prefix}{j}")) {
        cols.push((c, format!("{prefix}{j}")));
        j += 1;
    }
    if cols.len() < 2 {
        return Err(CliError::Csv {
            path: table.path.clone(),
            message: format!("missing column {prefix}{}", cols.len()),
        });
    }
    let n = table.len();
    let mut out = Vec::with_capacity(n * cols.len());
    for i in 0..n {
        for (col, name) in &cols {
            out.push(table.f64_at(i, *col, name)?);
        }
    }
    Ok((cols.len() - 1, out))
}

/// Writes a headed CSV file.
pub(crate) fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Serialize)]
pub(crate) struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Machine-readable record of one run: command, full configuration, input
/// checksums, and produced files. Reruns with an identical manifest produce
/// byte-identical outputs.
#[derive(Serialize)]
pub(crate) struct Manifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

pub(crate) fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let read = file.read(&mut buf).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub(crate) fn input_digest(path: &Path) -> Result<InputDigest, CliError> {
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

pub(crate) fn write_manifest(out_dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let path = out_dir.join("manifest.json");
    let file = File::create(&path).map_err(|e| CliError::Io {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, manifest).map_err(|e| CliError::Io {
        path: path.clone(),
        message: e.to_string(),
    })?;
    writeln!(w).map_err(|e| CliError::Io {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(())
}
