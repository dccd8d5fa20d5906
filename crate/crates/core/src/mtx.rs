//! Matrix Market reader/writer for real sparse matrices and dense vectors.
//!
//! Supported headers: `matrix coordinate {real,integer} {general,symmetric}`
//! for matrices and `matrix array real general` for vectors (a coordinate
//! `n x 1` file is accepted as a vector too).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    format: Format,
    symmetry: Symmetry,
}

fn mm_err(msg: impl Into<String>) -> Error {
    Error::MatrixMarket(msg.into())
}

fn parse_header(line: &str) -> Result<Header> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(mm_err(format!("bad header line: {line:?}")));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(mm_err(format!("unsupported format {other}"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(mm_err(format!("unsupported field {other}"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(mm_err(format!("unsupported symmetry {other}"))),
    };
    Ok(Header { format, symmetry })
}

/// Data lines with comments and blanks removed.
fn body_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .skip(1)
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'))
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| mm_err(format!("missing {what}")))?
        .parse()
        .map_err(|e| mm_err(format!("bad {what}: {e}")))
}

fn parse_f64(tok: Option<&str>, what: &str) -> Result<f64> {
    tok.ok_or_else(|| mm_err(format!("missing {what}")))?
        .parse()
        .map_err(|e| mm_err(format!("bad {what}: {e}")))
}

pub fn parse_matrix(text: &str) -> Result<SparseMatrix> {
    let header = parse_header(text.lines().next().unwrap_or(""))?;
    if header.format != Format::Coordinate {
        return Err(mm_err("sparse matrices must use coordinate format"));
    }
    let mut lines = body_lines(text);
    let size = lines.next().ok_or_else(|| mm_err("missing size line"))?;
    let mut it = size.split_whitespace();
    let nrows = parse_usize(it.next(), "row count")?;
    let ncols = parse_usize(it.next(), "column count")?;
    let nnz = parse_usize(it.next(), "entry count")?;

    let mut b = TripletBuilder::with_capacity(nrows, ncols, nnz);
    let mut seen = 0;
    for line in lines {
        let mut it = line.split_whitespace();
        let i = parse_usize(it.next(), "row index")?;
        let j = parse_usize(it.next(), "column index")?;
        let v = parse_f64(it.next(), "value")?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(mm_err(format!("index ({i}, {j}) out of range")));
        }
        b.push(i - 1, j - 1, v);
        if header.symmetry == Symmetry::Symmetric && i != j {
            b.push(j - 1, i - 1, v);
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(mm_err(format!("expected {nnz} entries, found {seen}")));
    }
    Ok(b.build())
}

pub fn format_matrix(a: &SparseMatrix) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), a.nnz()));
    for (i, j, v) in a.triplets() {
        out.push_str(&format!("{} {} {:.17e}\n", i + 1, j + 1, v));
    }
    out
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let header = parse_header(text.lines().next().unwrap_or(""))?;
    match header.format {
        Format::Array => {
            let mut lines = body_lines(text);
            let size = lines.next().ok_or_else(|| mm_err("missing size line"))?;
            let mut it = size.split_whitespace();
            let nrows = parse_usize(it.next(), "row count")?;
            let ncols = parse_usize(it.next(), "column count")?;
            if ncols != 1 {
                return Err(mm_err(format!("vector must have one column, found {ncols}")));
            }
            let values = lines
                .map(|l| parse_f64(l.split_whitespace().next(), "value"))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != nrows {
                return Err(mm_err(format!("expected {nrows} values, found {}", values.len())));
            }
            Ok(values)
        }
        Format::Coordinate => {
            let m = parse_matrix(text)?;
            if m.ncols() != 1 {
                return Err(mm_err("coordinate vector must have one column"));
            }
            Ok((0..m.nrows()).map(|i| m.get(i, 0)).collect())
        }
    }
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} 1\n", v.len()));
    for x in v {
        out.push_str(&format!("{x:.17e}\n"));
    }
    out
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| mm_err(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| mm_err(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| mm_err(format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix(&read_text(path.as_ref())?)
}

pub fn write_matrix(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    write_text(path.as_ref(), &format_matrix(a))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&read_text(path.as_ref())?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    write_text(path.as_ref(), &format_vector(v))
}
