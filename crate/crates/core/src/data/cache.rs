//! Single-file binary mirror of a [`Dataset`]:
//!
//! ```text
//! "RDLD"  version u32 = 1
//! rank u32, dims u32 x rank
//! num_classes u32
//! provenance_len u32, provenance utf8
//! labels u32 x n
//! pixels f64 x (n * per-sample size)
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"RDLD";
const VERSION: u32 = 1;

pub fn save_dataset_cache(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    let shape = dataset.images.shape();
    out.extend((shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend((d as u32).to_le_bytes());
    }
    out.extend((dataset.num_classes as u32).to_le_bytes());
    out.extend((dataset.provenance.len() as u32).to_le_bytes());
    out.extend(dataset.provenance.as_bytes());
    for &l in &dataset.labels {
        out.extend((l as u32).to_le_bytes());
    }
    for v in dataset.images.data() {
        out.extend(v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: String,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                what: self.what.clone(),
                expected: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_dataset_cache(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        what: path.display().to_string(),
    };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            what: r.what.clone(),
            expected: u32::from_be_bytes(*MAGIC),
            found: u32::from_be_bytes(magic),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset cache version {}", version)));
    }
    let rank = r.u32()? as usize;
    let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let num_classes = r.u32()? as usize;
    let plen = r.u32()? as usize;
    let provenance = String::from_utf8(r.take(plen)?.to_vec())
        .map_err(|e| Error::Format(format!("provenance is not UTF-8: {}", e)))?;
    let n = shape.first().copied().unwrap_or(0);
    let labels = (0..n).map(|_| r.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
    let count: usize = shape.iter().product();
    let data: Vec<f64> = r
        .take(8 * count)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes in dataset cache", bytes.len() - r.pos)));
    }
    Dataset::new(Tensor::new(shape, data)?, labels, num_classes, provenance)
}
