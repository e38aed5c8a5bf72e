use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::AggregateResult;
use crate::error::{Error, Result};

/// Sibling file holding trial 0's channel path: `out.csv` → `out_path.csv`.
pub fn path_csv_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_path.csv"))
}

fn render(res: &AggregateResult, entries: &[(usize, usize)]) -> String {
    let mut out = String::from("k,estimator");
    for (i, j) in entries {
        write!(out, ",var_{}_{}", i + 1, j + 1).unwrap();
    }
    for (i, j) in entries {
        write!(out, ",ci_{}_{}", i + 1, j + 1).unwrap();
    }
    out.push('\n');
    for s in &res.series {
        for (k, (cov, ci)) in s.cov.iter().zip(&s.ci).enumerate() {
            write!(out, "{},{}", k + 1, s.kind).unwrap();
            for &(i, j) in entries {
                write!(out, ",{:.16e}", cov[(i, j)]).unwrap();
            }
            for &(i, j) in entries {
                write!(out, ",{:.16e}", ci[(i, j)]).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn render_path(res: &AggregateResult) -> String {
    let m = res.path.first().map_or(0, Vec::len);
    let mut out = String::from("k");
    for c in 1..=m {
        write!(out, ",gamma_{c}").unwrap();
    }
    out.push('\n');
    for (k, g) in res.path.iter().enumerate() {
        write!(out, "{k}").unwrap();
        for &b in g {
            write!(out, ",{}", u8::from(b)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes the variance table for the requested 0-based entries, plus the
/// trial-0 channel path next to it.
pub fn emit_csv(res: &AggregateResult, path: &Path, entries: &[(usize, usize)]) -> Result<()> {
    let n = res.x0_cov.rows();
    if let Some(&(i, j)) = entries.iter().find(|(i, j)| *i >= n || *j >= n) {
        return Err(Error::OutOfRange { mode: i.max(j) + 1, max: n });
    }
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    fs::write(path, render(res, entries)).map_err(io)?;
    fs::write(path_csv_path(path), render_path(res)).map_err(io)
}
