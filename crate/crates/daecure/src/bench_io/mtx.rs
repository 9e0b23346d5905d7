//! Matrix Market coordinate and array formats.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::numkernel::SparseMatrix;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Parses Matrix Market text (coordinate or array, real/integer/pattern).
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(
            1,
            1,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, 16, format!("unknown format '{other}'"))),
    };
    let pattern = match fields[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" if coordinate => true,
        other => return Err(parse_err(1, 1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(parse_err(1, 1, format!("unsupported symmetry '{other}'"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_idx, size_line) = data.next().ok_or_else(|| parse_err(2, 1, "missing size line"))?;
    let sizes = parse_numbers::<usize>(size_line, size_idx + 1)?;
    let expected = if coordinate { 3 } else { 2 };
    if sizes.len() != expected {
        return Err(parse_err(
            size_idx + 1,
            1,
            format!("size line needs {expected} integers"),
        ));
    }
    let (rows, cols) = (sizes[0], sizes[1]);
    let mut triplets = Vec::new();
    if coordinate {
        let nnz = sizes[2];
        triplets.reserve(nnz);
        let mut seen = 0;
        for (idx, line) in data.by_ref() {
            let lineno = idx + 1;
            let toks: Vec<(usize, &str)> = tokens(line);
            let need = if pattern { 2 } else { 3 };
            if toks.len() < need {
                return Err(parse_err(lineno, 1, format!("expected {need} fields")));
            }
            let r = parse_index(toks[0], lineno, rows)?;
            let c = parse_index(toks[1], lineno, cols)?;
            let v = if pattern { 1.0 } else { parse_value(toks[2], lineno)? };
            triplets.push((r, c, v));
            if r != c {
                match symmetry {
                    Symmetry::Symmetric => triplets.push((c, r, v)),
                    Symmetry::SkewSymmetric => triplets.push((c, r, -v)),
                    Symmetry::General => {}
                }
            }
            seen += 1;
            if seen == nnz {
                break;
            }
        }
        if seen != nnz {
            return Err(parse_err(
                text.lines().count(),
                1,
                format!("expected {nnz} entries, found {seen}"),
            ));
        }
    } else {
        // Column-major values; symmetric storage lists the lower triangle.
        let mut positions = Vec::new();
        for c in 0..cols {
            let start = if symmetry == Symmetry::General { 0 } else { c };
            for r in start..rows {
                if symmetry == Symmetry::SkewSymmetric && r == c {
                    continue;
                }
                positions.push((r, c));
            }
        }
        let mut it = positions.into_iter();
        for (idx, line) in data.by_ref() {
            for tok in tokens(line) {
                let Some((r, c)) = it.next() else {
                    return Err(parse_err(idx + 1, tok.0, "too many values"));
                };
                let v = parse_value(tok, idx + 1)?;
                triplets.push((r, c, v));
                match symmetry {
                    Symmetry::Symmetric if r != c => triplets.push((c, r, v)),
                    Symmetry::SkewSymmetric => triplets.push((c, r, -v)),
                    _ => {}
                }
            }
        }
        if it.next().is_some() {
            return Err(parse_err(text.lines().count(), 1, "too few values"));
        }
    }
    if let Some((idx, line)) = data.next() {
        return Err(parse_err(
            idx + 1,
            1,
            format!("unexpected trailing data '{}'", line.trim()),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_numbers<T: std::str::FromStr>(line: &str, lineno: usize) -> Result<Vec<T>> {
    tokens(line)
        .into_iter()
        .map(|(col, t)| {
            t.parse::<T>()
                .map_err(|_| parse_err(lineno, col, format!("invalid number '{t}'")))
        })
        .collect()
}

fn parse_index(tok: (usize, &str), lineno: usize, bound: usize) -> Result<usize> {
    let v: usize = tok
        .1
        .parse()
        .map_err(|_| parse_err(lineno, tok.0, format!("invalid index '{}'", tok.1)))?;
    if v == 0 || v > bound {
        return Err(parse_err(lineno, tok.0, format!("index {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

fn parse_value(tok: (usize, &str), lineno: usize) -> Result<f64> {
    let v: f64 = tok
        .1
        .parse()
        .map_err(|_| parse_err(lineno, tok.0, format!("invalid value '{}'", tok.1)))?;
    if !v.is_finite() {
        return Err(parse_err(lineno, tok.0, "non-finite value"));
    }
    Ok(v)
}

/// Coordinate format; values use the shortest representation that
/// round-trips exactly.
pub fn format_matrix_market(m: &SparseMatrix) -> String {
    let trip = m.triplets();
    let mut s = String::with_capacity(32 * (trip.len() + 2));
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", m.n_rows(), m.n_cols(), trip.len());
    for (r, c, v) in trip {
        let _ = writeln!(s, "{} {} {:e}", r + 1, c + 1, v);
    }
    s
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_matrix_market(&text)
}

pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<()> {
    std::fs::write(path, format_matrix_market(m)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn write_dense_matrix_market(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_matrix_market(path, &SparseMatrix::from_dense(m))
}
