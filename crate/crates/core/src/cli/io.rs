//! Binary matrix files with a text header, and small CSV helpers.
//!
//! Layout: the line `HDGPOD-MATRIX 1`, then `key=value` header lines, then
//! `end`, then `rows * cols` little-endian `f64` values in column-major order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &str = "HDGPOD-MATRIX 1";

pub type Header = BTreeMap<String, String>;

pub fn write_matrix(path: &Path, header: &Header, m: &DMatrix<f64>) -> Result<()> {
    let mut text = format!("{MAGIC}\nrows={}\ncols={}\n", m.nrows(), m.ncols());
    for (k, v) in header {
        if k.contains(['=', '\n']) || v.contains('\n') || k == "rows" || k == "cols" {
            return Err(Error::InvalidArgument(format!("header entry '{k}' is not representable")));
        }
        text.push_str(&format!("{k}={v}\n"));
    }
    text.push_str("end\n");
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    for x in m.iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(Header, DMatrix<f64>)> {
    let bad = |reason: &str| Error::Format { path: path.display().to_string(), reason: reason.into() };
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Header::new();
    let mut line = Vec::new();
    let mut first = true;
    loop {
        line.clear();
        if r.read_until(b'\n', &mut line)? == 0 || line.last() != Some(&b'\n') {
            return Err(bad("truncated header"));
        }
        line.pop();
        let text = std::str::from_utf8(&line).map_err(|_| bad("header is not text"))?;
        if first {
            if text != MAGIC {
                return Err(bad("not a matrix file"));
            }
            first = false;
            continue;
        }
        if text == "end" {
            break;
        }
        let (k, v) = text.split_once('=').ok_or_else(|| bad("malformed header line"))?;
        header.insert(k.to_string(), v.to_string());
    }
    let dim = |k: &str| -> Result<usize> {
        header.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| bad(&format!("missing {k}")))
    };
    let (rows, cols) = (dim("rows")?, dim("cols")?);
    let mut data = vec![0.0f64; rows * cols];
    let mut buf = [0u8; 8];
    for x in data.iter_mut() {
        r.read_exact(&mut buf).map_err(|_| bad("truncated data"))?;
        *x = f64::from_le_bytes(buf);
    }
    if r.read(&mut buf)? != 0 {
        return Err(bad("trailing data"));
    }
    Ok((header, DMatrix::from_vec(rows, cols, data)))
}

pub fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| p.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{p}' in list"))))
        .collect()
}

/// Scientific notation with ten significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    std::io::copy(&mut BufReader::new(File::open(path)?), &mut hasher)?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = DMatrix::from_fn(3, 2, |i, j| (i as f64 + 0.1) * (j as f64 - 2.5) * 1e-300);
        let mut h = Header::new();
        h.insert("variable".into(), "u".into());
        h.insert("times".into(), join_f64(&[0.1, 0.2]));
        write_matrix(&p, &h, &m).unwrap();
        let (h2, m2) = read_matrix(&p).unwrap();
        assert_eq!(m, m2);
        assert_eq!(h2["variable"], "u");
        assert_eq!(parse_f64_list(&h2["times"]).unwrap(), vec![0.1, 0.2]);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_matrix(&p, &Header::new(), &DMatrix::from_element(2, 2, 1.0)).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(read_matrix(&p).is_err());
        fs::write(&p, b"hello\n").unwrap();
        assert!(read_matrix(&p).is_err());
        fs::write(&p, b"").unwrap();
        assert!(read_matrix(&p).is_err());
    }
}
