//! IDX container reader/writer (big-endian magic, dimensions, raw bytes).

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Truncated {
            what: what.to_string(),
            expected: at + 4,
            found: bytes.len(),
        })
}

/// Parses an IDX file with the given magic; returns dimensions and payload.
fn parse<'a>(bytes: &'a [u8], magic: u32, what: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, what)?;
    if found != magic {
        return Err(Error::BadMagic {
            what: what.to_string(),
            expected: magic,
            found,
        });
    }
    let rank = (magic & 0xff) as usize;
    let dims = (0..rank)
        .map(|i| be_u32(bytes, 4 + 4 * i, what).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * rank;
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            what: what.to_string(),
            expected,
            found: bytes.len(),
        });
    }
    Ok((dims, &bytes[header..expected]))
}

/// Reads an image/label IDX pair. Pixels are scaled to `[0, 1]` by `/255`;
/// `num_classes` is one more than the largest label.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = fs::read(images_path)?;
    let lbl_bytes = fs::read(labels_path)?;
    let (dims, pixels) = parse(&img_bytes, IMAGES_MAGIC, &images_path.display().to_string())?;
    let (ldims, raw_labels) = parse(&lbl_bytes, LABELS_MAGIC, &labels_path.display().to_string())?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    if ldims[0] != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: ldims[0],
        });
    }
    let data: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok(Dataset {
        images: Tensor::new(vec![n, 1, h, w], data)?,
        labels,
        num_classes,
        provenance: format!("idx:{}", images_path.display()),
    })
}

/// Writes single-channel images (quantized as `round(255 v)`) and labels
/// as an IDX pair.
pub fn write_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let shape = dataset.images.shape();
    let (n, h, w) = match *shape {
        [n, 1, h, w] => (n, h, w),
        _ => return Err(Error::shape(format!("IDX images need [n, 1, h, w], got {:?}", shape))),
    };
    let mut img = Vec::with_capacity(16 + dataset.images.len());
    img.extend(IMAGES_MAGIC.to_be_bytes());
    for d in [n, h, w] {
        img.extend((d as u32).to_be_bytes());
    }
    img.extend(dataset.images.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut lbl = Vec::with_capacity(8 + n);
    lbl.extend(LABELS_MAGIC.to_be_bytes());
    lbl.extend((n as u32).to_be_bytes());
    for &l in &dataset.labels {
        if l > 255 {
            return Err(Error::invalid(format!("label {} does not fit in a byte", l)));
        }
        lbl.push(l as u8);
    }
    fs::write(images_path, img)?;
    fs::write(labels_path, lbl)?;
    Ok(())
}
