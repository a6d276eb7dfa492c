//! Text formats. Floats are written with 17 significant digits so that they
//! round-trip bit for bit.
//!
//! - trace CSV: `# config_hash: <hex>` then `n,t,psi,objective,dist,gap_estimate,x_bar_objective`
//! - vector: `# vector <len>` then one value per line
//! - matrix: `# matrix <rows> <cols> <nnz>` then `row col value` lines (0-based)

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::HarnessError;
use crate::linalg::LinearMap;
use crate::solver::Record;
use crate::sparse::CsrMatrix;

pub const TRACE_COLUMNS: &str = "n,t,psi,objective,dist,gap_estimate,x_bar_objective";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_csv(records: &[Record], config_hash: &str) -> String {
    let mut s = String::with_capacity(64 + records.len() * 160);
    let _ = writeln!(s, "# config_hash: {config_hash}");
    s.push_str(TRACE_COLUMNS);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.n,
            fmt_f64(r.t),
            fmt_f64(r.psi),
            fmt_f64(r.objective),
            fmt_f64(r.dist),
            fmt_f64(r.gap_estimate),
            fmt_f64(r.x_bar_objective)
        );
    }
    s
}

/// Parses a trace CSV back into (config hash, records without x).
pub fn read_trace_csv(text: &str) -> Result<(String, Vec<Record>), HarnessError> {
    let bad = |m: String| HarnessError::Format(m);
    let mut lines = text.lines();
    let hash = lines
        .next()
        .and_then(|l| l.strip_prefix("# config_hash: "))
        .ok_or_else(|| bad("missing config hash header".into()))?
        .to_string();
    if lines.next() != Some(TRACE_COLUMNS) {
        return Err(bad("unexpected column header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("line {}: expected 7 fields", i + 3)));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 3)));
        out.push(Record {
            n: f[0].parse().map_err(|e| bad(format!("line {}: {e}", i + 3)))?,
            t: num(1)?,
            psi: num(2)?,
            objective: num(3)?,
            dist: num(4)?,
            gap_estimate: num(5)?,
            x_bar_objective: num(6)?,
            x: None,
        });
    }
    Ok((hash, out))
}

pub fn vector_text(v: &[f64]) -> String {
    let mut s = format!("# vector {}\n", v.len());
    for x in v {
        s.push_str(&fmt_f64(*x));
        s.push('\n');
    }
    s
}

/// Accepts the vector format; the header is optional and blank lines or
/// other `#` comments are skipped.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, HarnessError> {
    let mut declared = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# vector ") {
            declared = Some(rest.trim().parse::<usize>().map_err(|e| HarnessError::Format(format!("line {}: {e}", i + 1)))?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse::<f64>().map_err(|e| HarnessError::Format(format!("line {}: {e}", i + 1)))?);
    }
    if let Some(n) = declared {
        if n != out.len() {
            return Err(HarnessError::Format(format!("header declares {n} entries, found {}", out.len())));
        }
    }
    Ok(out)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_vector(&text)
}

pub fn matrix_text(m: &CsrMatrix) -> String {
    let mut s = format!("# matrix {} {} {}\n", m.rows(), m.cols(), m.nnz());
    for i in 0..m.rows() {
        for (j, v) in m.row(i) {
            let _ = writeln!(s, "{i} {j} {}", fmt_f64(v));
        }
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<CsrMatrix, HarnessError> {
    let bad = |m: String| HarnessError::Format(m);
    let mut lines = text.lines();
    let head: Vec<usize> = lines
        .next()
        .and_then(|l| l.strip_prefix("# matrix "))
        .ok_or_else(|| bad("missing matrix header".into()))?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(format!("header: {e}")))?;
    let [rows, cols, nnz] = head[..] else {
        return Err(bad("header must be \"# matrix rows cols nnz\"".into()));
    };
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
    let mut count = 0;
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(format!("line {}: expected \"row col value\"", k + 2)));
        }
        let i: usize = f[0].parse().map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        let j: usize = f[1].parse().map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        let v: f64 = f[2].parse().map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        if i >= rows {
            return Err(bad(format!("line {}: row {i} out of range", k + 2)));
        }
        by_row[i].push((j, v));
        count += 1;
    }
    if count != nnz {
        return Err(bad(format!("header declares {nnz} entries, found {count}")));
    }
    CsrMatrix::from_rows(cols, &by_row).map_err(|e| bad(e.to_string()))
}

/// Coordinate text for any linear map (dense maps list their nonzeros).
pub fn linear_map_text(m: &LinearMap) -> String {
    match m {
        LinearMap::Sparse(c) => matrix_text(c),
        LinearMap::Dense(d) => {
            let rows: Vec<Vec<(usize, f64)>> =
                (0..d.nrows()).map(|i| (0..d.ncols()).filter(|&j| d[(i, j)] != 0.0).map(|j| (j, d[(i, j)])).collect()).collect();
            matrix_text(&CsrMatrix::from_rows(d.ncols(), &rows).expect("dense entries are finite"))
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}
