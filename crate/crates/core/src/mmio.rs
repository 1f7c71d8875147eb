//! Matrix Market coordinate files (`real symmetric`, 1-based indices).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_matrix_market(&text)
}

pub fn parse_matrix_market(text: &str) -> Result<SparseSymMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Parse { line: 1, msg: format!("malformed header: {header}") });
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Parse { line: 1, msg: format!("unsupported format '{}'", tokens[2]) });
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::Parse { line: 1, msg: format!("unsupported field '{}'", tokens[3]) });
    }
    if tokens[4] != "symmetric" {
        return Err(Error::Parse { line: 1, msg: format!("expected symmetric storage, found '{}'", tokens[4]) });
    }

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(err("size line must have three fields".into()));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad size field '{s}': {e}")));
                let (rows, cols, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if rows != cols {
                    return Err(err(format!("symmetric matrix must be square, got {rows}x{cols}")));
                }
                size = Some((rows, nnz));
                triplets.reserve(nnz);
            }
            Some((n, _)) => {
                if fields.len() != 3 {
                    return Err(err("entry line must have three fields".into()));
                }
                let parse_idx = |s: &str| -> Result<usize> {
                    let v = s.parse::<usize>().map_err(|e| err(format!("bad index '{s}': {e}")))?;
                    if v == 0 || v > n {
                        return Err(err(format!("index {v} out of range 1..={n}")));
                    }
                    Ok(v - 1)
                };
                let i = parse_idx(fields[0])?;
                let j = parse_idx(fields[1])?;
                let v = fields[2].parse::<f64>().map_err(|e| err(format!("bad value '{}': {e}", fields[2])))?;
                triplets.push((i, j, v));
            }
        }
    }
    let (n, nnz) = size.ok_or(Error::Parse { line: 0, msg: "missing size line".into() })?;
    if triplets.len() != nnz {
        return Err(Error::Parse { line: 0, msg: format!("expected {nnz} entries, found {}", triplets.len()) });
    }
    SparseSymMatrix::from_triplets(n, &triplets).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })
}

/// Writes every stored lower-triangle entry (explicit diagonal zeros included).
pub fn write_matrix_market(a: &SparseSymMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    f.write_all(format_matrix_market(a).as_bytes()).map_err(io_err)?;
    f.flush().map_err(io_err)
}

pub fn format_matrix_market(a: &SparseSymMatrix) -> String {
    let mut s = String::with_capacity(32 * a.nnz_lower() + 64);
    s.push_str(HEADER);
    s.push('\n');
    s.push_str(&format!("{} {} {}\n", a.n(), a.n(), a.nnz_lower()));
    for (i, j, v) in a.lower_entries() {
        // `{:e}` prints the shortest representation that parses back exactly
        s.push_str(&format!("{} {} {:e}\n", i + 1, j + 1, v));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_round_trip() {
        let a = SparseSymMatrix::diagonal(&[5.0]);
        assert_eq!(parse_matrix_market(&format_matrix_market(&a)).unwrap(), a);
    }

    #[test]
    fn rejects_general_header() {
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.0\n";
        assert!(matches!(parse_matrix_market(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rejects_malformed_and_out_of_range() {
        assert!(parse_matrix_market("hello\n").is_err());
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n";
        assert!(parse_matrix_market(text).is_err());
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n";
        assert!(parse_matrix_market(text).is_err());
    }

    #[test]
    fn awkward_values_round_trip_exactly() {
        let vals = [0.1 + 0.2, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE];
        let a = SparseSymMatrix::diagonal(&vals);
        let b = parse_matrix_market(&format_matrix_market(&a)).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }
}
