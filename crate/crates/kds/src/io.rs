//! Plain-text file formats.
//!
//! Data: no header, one point per row, comma-separated floats.
//! Labels: one non-negative integer per row.
//! Codes: first line `m,n,nnz`, then one `row,col,value` triplet per line.
//!
//! Floats are written in Rust's shortest round-trip form, so a write/read
//! cycle is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kds_core::{CodeMatrix, Matrix};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        source: kds_core::Error,
    },
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn reader(path: &Path) -> IoResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn writer(path: &Path) -> IoResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, rec: &csv::StringRecord, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line: rec.position().map_or(0, |p| p.line()),
        msg: msg.into(),
    }
}

fn records(path: &Path) -> IoResult<Vec<csv::StringRecord>> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> IoResult<T> {
    let s = rec.get(i).ok_or_else(|| parse_err(path, rec, format!("missing field {}", i + 1)))?;
    s.parse().map_err(|_| parse_err(path, rec, format!("cannot parse {s:?}")))
}

/// Reads a data CSV into a `d x n` matrix (one column per row of the file).
pub fn read_data(path: &Path) -> IoResult<Matrix> {
    let recs = records(path)?;
    let Some(first) = recs.first() else {
        return Err(IoError::Invalid {
            path: path.to_path_buf(),
            source: kds_core::Error::Empty("data file"),
        });
    };
    let d = first.len();
    let mut values = Vec::with_capacity(d * recs.len());
    for rec in &recs {
        if rec.len() != d {
            return Err(parse_err(path, rec, format!("expected {d} fields, found {}", rec.len())));
        }
        for i in 0..d {
            let v: f64 = field(path, rec, i)?;
            if !v.is_finite() {
                return Err(parse_err(path, rec, "non-finite value"));
            }
            values.push(v);
        }
    }
    Matrix::from_col_major(d, recs.len(), values).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes one row per column of `data`.
pub fn write_data(path: &Path, data: &Matrix) -> IoResult<()> {
    let mut w = writer(path)?;
    for col in data.columns() {
        let line: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_labels(path: &Path) -> IoResult<Vec<usize>> {
    records(path)?.iter().map(|rec| field(path, rec, 0)).collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> IoResult<()> {
    let mut w = writer(path)?;
    for l in labels {
        writeln!(w, "{l}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One float per row, e.g. a loss history.
pub fn write_series(path: &Path, values: &[f64]) -> IoResult<()> {
    let mut w = writer(path)?;
    for v in values {
        writeln!(w, "{v:?}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_codes(path: &Path) -> IoResult<CodeMatrix> {
    let recs = records(path)?;
    let Some(head) = recs.first() else {
        return Err(IoError::Invalid {
            path: path.to_path_buf(),
            source: kds_core::Error::Empty("codes file"),
        });
    };
    let (m, n, nnz): (usize, usize, usize) = (field(path, head, 0)?, field(path, head, 1)?, field(path, head, 2)?);
    if recs.len() - 1 != nnz {
        return Err(parse_err(path, head, format!("header says {nnz} entries, found {}", recs.len() - 1)));
    }
    let mut trips = Vec::with_capacity(nnz);
    for rec in &recs[1..] {
        trips.push((field(path, rec, 0)?, field(path, rec, 1)?, field(path, rec, 2)?));
    }
    CodeMatrix::from_triplets(m, n, &trips).map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_codes(path: &Path, codes: &CodeMatrix) -> IoResult<()> {
    let mut w = writer(path)?;
    writeln!(w, "{},{},{}", codes.rows(), codes.cols(), codes.nnz()).map_err(io_err(path))?;
    for (r, c, v) in codes.triplets() {
        writeln!(w, "{r},{c},{v:?}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Creates `path` and its parents, or fails with the offending path.
pub fn ensure_dir(path: &Path) -> IoResult<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> IoResult<()> {
    let mut w = writer(path)?;
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_text(path: &Path) -> IoResult<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let m = Matrix::from_col_major(2, 3, vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0, f64::MIN_POSITIVE, 1e22]).unwrap();
        write_data(&p, &m).unwrap();
        assert_eq!(read_data(&p).unwrap(), m);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "1,2\n3\n").unwrap();
        let err = read_data(&p).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn codes_header_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "2,1,2\n0,0,1\n").unwrap();
        assert!(read_codes(&p).is_err());
        std::fs::write(&p, "2,1,2\n0,0,0.25\n1,0,0.75\n").unwrap();
        assert_eq!(read_codes(&p).unwrap().dense_col(0), vec![0.25, 0.75]);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_labels(Path::new("/nonexistent/labels.csv")).unwrap_err().to_string();
        assert!(err.contains("/nonexistent/labels.csv"));
    }
}
