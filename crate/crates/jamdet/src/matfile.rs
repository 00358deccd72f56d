//! Binary sample-set file format for empirical calibration.
//!
//! Layout: magic `"JDMX1"` (5 bytes), then `K`, `N`, `count` as
//! little-endian u32, then `count` matrices of `K x N` complex values as
//! little-endian f64 `(re, im)` pairs, row-major with the sensing node as
//! the row. Total length is exactly `17 + count * K * N * 16` bytes.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{JamdetError, Result};
use crate::signal::{Hypothesis, ReceivedMatrix};

pub const MAGIC: &[u8; 5] = b"JDMX1";
pub const HEADER_LEN: usize = 5 + 3 * 4;

pub fn file_len(k: usize, n: usize, count: usize) -> usize {
    HEADER_LEN + count * k * n * 16
}

/// Serializes matrices (uniform dimensions required) into the JDMX1 format.
pub fn write_matrices<W: Write>(out: &mut W, matrices: &[ReceivedMatrix]) -> Result<()> {
    let first = matrices
        .first()
        .ok_or_else(|| JamdetError::InvalidArgument("no matrices to write".into()))?;
    let (k, n) = (first.k(), first.n());
    out.write_all(MAGIC)?;
    out.write_all(&(k as u32).to_le_bytes())?;
    out.write_all(&(n as u32).to_le_bytes())?;
    out.write_all(&(matrices.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(k * n * 16);
    for m in matrices {
        if m.k() != k || m.n() != n {
            return Err(JamdetError::InvalidArgument(
                "matrices have mixed dimensions".into(),
            ));
        }
        buf.clear();
        for row in 0..k {
            for col in 0..n {
                let c = m.data[(row, col)];
                buf.extend_from_slice(&c.re.to_le_bytes());
                buf.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Reads a JDMX1 file back into matrices (labelled H0; the format carries no
/// hypothesis).
pub fn read_matrices<R: Read>(input: &mut R) -> Result<Vec<ReceivedMatrix>> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header).map_err(|_| {
        JamdetError::InvalidArgument("file too short for a JDMX1 header".into())
    })?;
    if &header[..5] != MAGIC {
        return Err(JamdetError::InvalidArgument("bad magic; not a JDMX1 file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[5 + 4 * i..9 + 4 * i].try_into().unwrap());
    let (k, n, count) = (word(0) as usize, word(1) as usize, word(2) as usize);
    if k == 0 || n == 0 {
        return Err(JamdetError::InvalidArgument("zero matrix dimension".into()));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count * k * n * 16 {
        return Err(JamdetError::InvalidArgument(format!(
            "body length {} does not match header (expected {})",
            body.len(),
            count * k * n * 16
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut off = 0;
    for _ in 0..count {
        let mut data = DMatrix::<Complex64>::zeros(k, n);
        for row in 0..k {
            for col in 0..n {
                let re = f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
                let im = f64::from_le_bytes(body[off + 8..off + 16].try_into().unwrap());
                data[(row, col)] = Complex64::new(re, im);
                off += 16;
            }
        }
        out.push(ReceivedMatrix {
            data,
            hypothesis_label: Hypothesis::H0,
        });
    }
    Ok(out)
}

/// Atomic file write: the content lands under a temporary name and is
/// renamed into place only when complete.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
