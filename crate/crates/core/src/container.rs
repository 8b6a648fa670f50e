//! Binary container: 8-byte magic, `u32` little-endian header length, a JSON
//! header, then the `f64` little-endian arrays listed in the header.

use std::io::{Read, Write};

use serde_json::{json, Value};

use crate::error::{Error, Result};

pub(crate) fn write(
    w: &mut dyn Write,
    magic: &[u8; 8],
    mut header: Value,
    arrays: &[Vec<f64>],
) -> Result<()> {
    let lens: Vec<usize> = arrays.iter().map(Vec::len).collect();
    header["array_lengths"] = json!(lens);
    let text = serde_json::to_vec(&header)?;
    let len = u32::try_from(text.len()).map_err(|_| Error::Format("header too large".into()))?;
    w.write_all(magic)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&text)?;
    for arr in arrays {
        let mut buf = Vec::with_capacity(arr.len() * 8);
        for v in arr {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub(crate) fn read(r: &mut dyn Read, magic: &[u8; 8]) -> Result<(Value, Vec<Vec<f64>>)> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut text = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut text)?;
    let header: Value = serde_json::from_slice(&text)?;
    let lens: Vec<usize> = serde_json::from_value(header["array_lengths"].clone())
        .map_err(|e| Error::Format(format!("array_lengths: {e}")))?;
    let mut arrays = Vec::with_capacity(lens.len());
    for n in lens {
        let mut bytes = vec![0u8; n * 8];
        r.read_exact(&mut bytes)?;
        arrays.push(
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        );
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after arrays".into()));
    }
    Ok((header, arrays))
}
