//! Latent matrix and label files.
//!
//! Binary latents are `"OQDL"`, a little-endian `u32` version, `u64` row
//! and column counts, then `rows * cols` little-endian `f64` values in
//! row-major order. Files ending in `.csv` are read as text with a
//! `dim0,dim1,...` header row instead.

use std::fs;
use std::path::Path;

use optquant::measure::DiscreteMeasure;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"OQDL";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 8 + 8;

/// A dense row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl LatentMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(rows * cols, values.len(), "matrix shape does not match its payload");
        Self { rows, cols, values }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Uniform measure with one atom per row.
    pub fn measure(&self) -> optquant::Result<DiscreteMeasure<f64>> {
        DiscreteMeasure::uniform_flat(self.cols, self.values.clone())
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn read_latents(path: &Path) -> CliResult<LatentMatrix> {
    if is_csv(path) {
        read_csv(path)
    } else {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        decode_binary(path, &bytes)
    }
}

/// [`read_latents`] followed by the uniform measure on the rows.
pub fn load_latents(path: &Path) -> CliResult<(DiscreteMeasure<f64>, usize)> {
    let m = read_latents(path)?;
    Ok((m.measure()?, m.cols))
}

pub fn write_latents(path: &Path, m: &LatentMatrix) -> CliResult<()> {
    let bytes = if is_csv(path) { encode_csv(m) } else { encode_binary(m) };
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn encode_binary(m: &LatentMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN as usize + 8 * m.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in &m.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(path: &Path, bytes: &[u8]) -> CliResult<LatentMatrix> {
    if bytes.is_empty() {
        return Err(CliError::EmptyFile { path: path.into() });
    }
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CliError::BadMagic { path: path.into() });
    }
    let found = bytes.len() as u64;
    if found < HEADER_LEN {
        return Err(CliError::TruncatedFile {
            path: path.into(),
            expected: HEADER_LEN,
            found,
        });
    }
    let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("eight bytes"));
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes"));
    if version != FORMAT_VERSION {
        return Err(CliError::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let (rows, cols) = (u64_at(8), u64_at(16));
    if rows == 0 || cols == 0 {
        return Err(CliError::EmptyFile { path: path.into() });
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| CliError::LengthMismatch {
            path: path.into(),
            detail: format!("declares {rows} x {cols} values, which overflows"),
        })?;
    if found < expected {
        return Err(CliError::TruncatedFile {
            path: path.into(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(CliError::LengthMismatch {
            path: path.into(),
            detail: format!("declares {rows} x {cols} values but carries {} trailing bytes", found - expected),
        });
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let values: Vec<f64> = bytes[HEADER_LEN as usize..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    check_finite(path, &values, cols)?;
    Ok(LatentMatrix { rows, cols, values })
}

fn check_finite(path: &Path, values: &[f64], cols: usize) -> CliResult<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CliError::NonFiniteValue {
            path: path.into(),
            row: i / cols,
            col: i % cols,
        }),
        None => Ok(()),
    }
}

fn encode_csv(m: &LatentMatrix) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..m.cols).map(|j| format!("dim{j}"))).expect("in-memory write");
    for i in 0..m.rows {
        w.write_record(m.row(i).iter().map(|v| format!("{v:.16e}"))).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn read_csv(path: &Path) -> CliResult<LatentMatrix> {
    let text = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if text.iter().all(u8::is_ascii_whitespace) {
        return Err(CliError::EmptyFile { path: path.into() });
    }
    let bad = |line: usize, detail: String| CliError::BadCsv {
        path: path.into(),
        line,
        detail,
    };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_slice());
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let cols = header.len();
    for (j, name) in header.iter().enumerate() {
        if name.trim() != format!("dim{j}") {
            return Err(bad(1, format!("header field {j} is `{name}`, expected `dim{j}`")));
        }
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != cols {
            return Err(CliError::LengthMismatch {
                path: path.into(),
                detail: format!("line {line} has {} fields, header declares {cols}", rec.len()),
            });
        }
        for field in &rec {
            let v: f64 = field.trim().parse().map_err(|_| bad(line, format!("`{field}` is not a number")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::EmptyFile { path: path.into() });
    }
    check_finite(path, &values, cols)?;
    Ok(LatentMatrix { rows, cols, values })
}

/// One nonnegative integer per line. Labels must cover `0..C` without gaps.
pub fn read_labels(path: &Path, rows: usize) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |detail: String| CliError::BadLabels {
        path: path.into(),
        detail,
    };
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("line {}: `{}` is not a nonnegative integer", i + 1, l.trim())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if labels.len() != rows {
        return Err(bad(format!("has {} labels for {rows} latent rows", labels.len())));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; n_classes];
    for &l in &labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(bad(format!("label {missing} is missing; labels must cover 0..{n_classes}")));
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.oqdl")
    }

    #[test]
    fn two_by_two_example() {
        let m = LatentMatrix::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]);
        let back = decode_binary(p(), &encode_binary(&m)).unwrap();
        assert_eq!(back, m);
        let (mu, d) = (back.measure().unwrap(), back.cols);
        assert_eq!((mu.len(), d), (2, 2));
        assert_eq!(mu.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode_binary(&LatentMatrix::new(1, 2, vec![1.0, 2.0]));
        assert!(matches!(decode_binary(p(), &[]), Err(CliError::EmptyFile { .. })));
        assert!(matches!(decode_binary(p(), b"OQD"), Err(CliError::BadMagic { .. })));
        assert!(matches!(decode_binary(p(), &bytes[..10]), Err(CliError::TruncatedFile { .. })));
        assert!(matches!(decode_binary(p(), &bytes[..30]), Err(CliError::TruncatedFile { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_binary(p(), &long), Err(CliError::LengthMismatch { .. })));
        bytes[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            decode_binary(p(), &bytes),
            Err(CliError::NonFiniteValue { row: 0, col: 0, .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_binary(p(), &bytes), Err(CliError::BadMagic { .. })));
    }

    #[test]
    fn zero_rows_is_empty_and_huge_counts_overflow() {
        let mut bytes = encode_binary(&LatentMatrix::new(0, 3, vec![]));
        assert!(matches!(decode_binary(p(), &bytes), Err(CliError::EmptyFile { .. })));
        bytes[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_binary(p(), &bytes), Err(CliError::LengthMismatch { .. })));
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = encode_binary(&LatentMatrix::new(1, 1, vec![1.0]));
        bytes[4] = 9;
        assert!(matches!(
            decode_binary(p(), &bytes),
            Err(CliError::UnsupportedVersion { version: 9, .. })
        ));
    }
}
