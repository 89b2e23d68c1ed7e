//! Binary feature-map files.
//!
//! Layout, all little-endian: the bytes `FMAP`, `u32` version (1), `u32` H,
//! `u32` W, `u32` C, then `H*W*C` `f32` values, row-major channel-last.
//! Values are stored as `f32`; a map read from a file writes back bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::FeatureMap;

pub const MAGIC: &[u8; 4] = b"FMAP";
pub const VERSION: u32 = 1;

pub fn write_fmap<W: Write>(mut w: W, f: &FeatureMap) -> Result<()> {
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds u32")));
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in [f.height(), f.width(), f.channels()] {
        w.write_all(&dim(d)?.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(f.data().len() * 4);
    for &v in f.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_fmap<R: Read>(mut r: R) -> Result<FeatureMap> {
    let mut header = [0u8; 20];
    let mut got = 0;
    while got < header.len() {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            return Err(Error::Truncated(format!("header has {got} of 20 bytes")));
        }
        got += n;
    }
    if &header[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &header[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (h, w, c) = (word(8) as usize, word(12) as usize, word(16) as usize);
    let expected = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Format("declared size overflows".into()))?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::Truncated(format!(
            "{h}x{w}x{c} map declares {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    FeatureMap::new(h, w, c, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_fmap_path(path: impl AsRef<Path>) -> Result<FeatureMap> {
    read_fmap(BufReader::new(File::open(path)?))
}

pub fn write_fmap_path(path: impl AsRef<Path>, f: &FeatureMap) -> Result<()> {
    write_fmap(BufWriter::new(File::create(path)?), f)
}
