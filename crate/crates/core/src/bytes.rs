//! Little-endian binary primitives for persisted artifacts.

use std::io::{Read, Write};

use crate::error::{Result, RwkError};

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, vs: impl Iterator<Item = f64>) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

pub(crate) fn write_bytes<W: Write>(w: &mut W, vs: &[u8]) -> Result<()> {
    w.write_all(vs)?;
    Ok(())
}

pub(crate) fn read_bytes<R: Read>(r: &mut R, count: usize) -> Result<Vec<u8>> {
    let mut out = vec![0u8; count];
    r.read_exact(&mut out)?;
    Ok(out)
}

/// Reads one `\n`-terminated header line of at most `max` bytes.
pub(crate) fn read_header_line<R: Read>(r: &mut R, max: usize) -> Result<String> {
    let mut out = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        out.push(byte[0]);
        if out.len() > max {
            return Err(RwkError::Format("unterminated header line".into()));
        }
    }
    String::from_utf8(out).map_err(|_| RwkError::Format("header is not valid UTF-8".into()))
}
