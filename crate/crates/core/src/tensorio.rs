//! The `TNSR` tensor file: ASCII magic `TNSR`, a little-endian u32 rank,
//! that many u32 dims, then a row-major little-endian f32 payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNSR";

pub fn encode(dims: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(Error::shape(format!(
            "dims {dims:?} describe {count} values, got {}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 4 * data.len());
    out.extend_from_slice(MAGIC);
    let rank = u32::try_from(dims.len()).map_err(|_| Error::shape("tensor rank overflows u32"))?;
    out.extend_from_slice(&rank.to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::shape(format!("dim {d} overflows u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<(Vec<usize>, Vec<f64>), String> {
    let mut words = bytes.get(4..).unwrap_or_default().chunks_exact(4).map(|c| {
        let arr: [u8; 4] = c.try_into().expect("chunk of four");
        arr
    });
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err("missing TNSR magic".into());
    }
    let rank = words.next().map(u32::from_le_bytes).ok_or("truncated header")? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(words.next().map(u32::from_le_bytes).ok_or("truncated dims")? as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dims overflow")?;
    let expected = 4 * (2 + rank + count);
    if bytes.len() != expected {
        return Err(format!("expected {expected} bytes, found {}", bytes.len()));
    }
    let data = words.map(|w| f32::from_le_bytes(w) as f64).collect();
    Ok((dims, data))
}

pub fn write_tensor(path: impl AsRef<Path>, dims: &[usize], data: &[f64]) -> Result<()> {
    fs::write(path, encode(dims, data)?)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|reason| Error::TensorFile {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let bytes = encode(&[1, 2, 1], &[1.0, -2.5]).unwrap();
        assert_eq!(&bytes[..4], b"TNSR");
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(&bytes[8..20], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &(-2.5f32).to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), (vec![1, 2, 1], vec![1.0, -2.5]));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(decode(b"TNSX\x00\x00\x00\x00").is_err());
        let mut bytes = encode(&[3], &[1.0, 2.0, 3.0]).unwrap();
        bytes.pop();
        assert!(decode(&bytes).is_err());
        assert!(encode(&[2, 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn scalar_rank_zero() {
        let bytes = encode(&[], &[4.0]).unwrap();
        assert_eq!(decode(&bytes).unwrap(), (vec![], vec![4.0]));
    }
}
