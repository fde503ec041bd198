use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::Dataset;

pub const HDDS_MAGIC: &[u8; 4] = b"HDDS";
pub const HDDS_VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;
const HEADER_LEN: usize = 4 + 1 + 4 * 3 + 1;

/// Fixed 18-byte preamble: magic, version byte, `n`, `m`, `K` as u32 LE and a
/// dtype byte (0 = f32).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u8,
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub dtype: u8,
}

impl DatasetHeader {
    pub fn payload_len(&self) -> usize {
        self.n as usize * self.m as usize * 4 + self.n as usize * 2
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("HDDS header truncated: {} bytes", bytes.len())));
        }
        if &bytes[..4] != HDDS_MAGIC {
            return Err(Error::Format("bad magic, expected HDDS".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let h = DatasetHeader { version: bytes[4], n: u32_at(5), m: u32_at(9), k: u32_at(13), dtype: bytes[17] };
        if h.version != HDDS_VERSION {
            return Err(Error::Format(format!("unsupported HDDS version {}", h.version)));
        }
        if h.dtype != DTYPE_F32 {
            return Err(Error::Format(format!("unsupported dtype tag {}", h.dtype)));
        }
        Ok(h)
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(HDDS_MAGIC);
        out.push(self.version);
        for v in [self.n, self.m, self.k] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.dtype);
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in 32 bits")))
}

pub fn write_binary(ds: &Dataset) -> Result<Vec<u8>> {
    if ds.num_classes() > u16::MAX as usize + 1 {
        return Err(Error::Format(format!("{} classes exceed 16-bit labels", ds.num_classes())));
    }
    let header = DatasetHeader {
        version: HDDS_VERSION,
        n: to_u32(ds.len(), "n")?,
        m: to_u32(ds.input_dim(), "m")?,
        k: to_u32(ds.num_classes(), "K")?,
        dtype: DTYPE_F32,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    header.write_to(&mut out);
    for v in ds.features() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in ds.labels() {
        out.extend_from_slice(&(l as u16).to_le_bytes());
    }
    Ok(out)
}

pub fn read_binary(bytes: &[u8]) -> Result<Dataset> {
    let h = DatasetHeader::parse(bytes)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != h.payload_len() {
        return Err(Error::Format(format!(
            "HDDS payload is {} bytes, header implies {}",
            body.len(),
            h.payload_len()
        )));
    }
    let nm = h.n as usize * h.m as usize;
    let (feat, labels) = body.split_at(nm * 4);
    let features = feat.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let labels = labels.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as usize).collect();
    Dataset::new(features, labels, h.m as usize, h.k as usize)
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    read_binary(&fs::read(path)?)
}

/// Writes atomically enough for our purposes: the full buffer is built first,
/// so a failed conversion never leaves a partial file.
pub fn save_binary(ds: &Dataset, path: &Path) -> Result<()> {
    let bytes = write_binary(ds)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
