//! Binary checkpoint format (all integers `u32` little-endian, all reals
//! `f64` little-endian):
//!
//! ```text
//! "RDLK"                      magic, 4 bytes
//! version                     u32 (= 1)
//! layer_count                 u32
//! input_rank, input dims      u32, u32 × rank
//! per layer:
//!   kind                      u8  (1 conv, 2 max_pool, 3 fully_connected,
//!                                  4 relu, 5 dropout, 6 softmax,
//!                                  7 linear_readout)
//!   int_count, ints           u32, u32 × count
//!                             conv: kernel, stride, features
//!                             max_pool: kernel, stride
//!                             fully_connected / linear_readout: features
//!   real_count, reals         u32, f64 × count   (dropout: p)
//!   tensor_count              u32 (2 for parameterized layers: weight, bias)
//!   per tensor: rank, dims, data   u32, u32 × rank, f64 × product(dims)
//! tap_count                   u32
//! per tap: layer, name_len, name   u32, u32, UTF-8 bytes
//! ```
//!
//! Writing then reading reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use super::layer::{Layer, LayerSpec};
use super::network::{Network, Tap};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"RDLK";
pub const VERSION: u32 = 1;

fn kind_tag(spec: &LayerSpec) -> (u8, Vec<u32>, Vec<f64>) {
    match *spec {
        LayerSpec::Conv {
            kernel,
            stride,
            features,
        } => (1, vec![kernel as u32, stride as u32, features as u32], vec![]),
        LayerSpec::MaxPool { kernel, stride } => (2, vec![kernel as u32, stride as u32], vec![]),
        LayerSpec::FullyConnected { features } => (3, vec![features as u32], vec![]),
        LayerSpec::Relu => (4, vec![], vec![]),
        LayerSpec::Dropout { p } => (5, vec![], vec![p]),
        LayerSpec::Softmax => (6, vec![], vec![]),
        LayerSpec::LinearReadout { features } => (7, vec![features as u32], vec![]),
    }
}

fn spec_from_tag(tag: u8, ints: &[u32], reals: &[f64]) -> Result<LayerSpec> {
    let want = |n_int: usize, n_real: usize| {
        if ints.len() != n_int || reals.len() != n_real {
            Err(Error::Format(format!(
                "layer kind {} expects {} ints and {} reals, found {} and {}",
                tag,
                n_int,
                n_real,
                ints.len(),
                reals.len()
            )))
        } else {
            Ok(())
        }
    };
    let u = |i: usize| ints[i] as usize;
    Ok(match tag {
        1 => {
            want(3, 0)?;
            LayerSpec::Conv {
                kernel: u(0),
                stride: u(1),
                features: u(2),
            }
        }
        2 => {
            want(2, 0)?;
            LayerSpec::MaxPool {
                kernel: u(0),
                stride: u(1),
            }
        }
        3 => {
            want(1, 0)?;
            LayerSpec::FullyConnected { features: u(0) }
        }
        4 => {
            want(0, 0)?;
            LayerSpec::Relu
        }
        5 => {
            want(0, 1)?;
            LayerSpec::Dropout { p: reals[0] }
        }
        6 => {
            want(0, 0)?;
            LayerSpec::Softmax
        }
        7 => {
            want(1, 0)?;
            LayerSpec::LinearReadout { features: u(0) }
        }
        other => return Err(Error::Format(format!("unknown layer kind tag {}", other))),
    })
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_dims(buf: &mut Vec<u8>, dims: &[usize]) {
    put_u32(buf, dims.len() as u32);
    for &d in dims {
        put_u32(buf, d as u32);
    }
}

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + net.param_count() * 8);
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION);
    put_u32(&mut buf, net.layers().len() as u32);
    put_dims(&mut buf, net.input_shape());
    for layer in net.layers() {
        let (tag, ints, reals) = kind_tag(layer.spec());
        buf.push(tag);
        put_u32(&mut buf, ints.len() as u32);
        for v in ints {
            put_u32(&mut buf, v);
        }
        put_u32(&mut buf, reals.len() as u32);
        for v in reals {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        put_u32(&mut buf, layer.params().len() as u32);
        for t in layer.params() {
            put_dims(&mut buf, t.shape());
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    put_u32(&mut buf, net.taps().len() as u32);
    for tap in net.taps() {
        put_u32(&mut buf, tap.layer as u32);
        put_u32(&mut buf, tap.name.len() as u32);
        buf.extend_from_slice(tap.name.as_bytes());
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated {
                what: "checkpoint".into(),
                expected: self.pos + n,
                found: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn dims(&mut self) -> Result<Vec<usize>> {
        let rank = self.u32()? as usize;
        (0..rank).map(|_| self.u32().map(|d| d as usize)).collect()
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Network> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            what: "checkpoint".into(),
            expected: u32::from_be_bytes(*MAGIC),
            found: u32::from_be_bytes(magic.try_into().unwrap()),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", version)));
    }
    let n_layers = r.u32()? as usize;
    let input = r.dims()?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut cur = input.clone();
    for i in 0..n_layers {
        let tag = r.u8()?;
        let n_ints = r.u32()? as usize;
        let ints = (0..n_ints).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let n_reals = r.u32()? as usize;
        let reals = (0..n_reals).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let spec = spec_from_tag(tag, &ints, &reals)?;
        let out = spec
            .output_shape(&cur)
            .map_err(|e| Error::Format(format!("layer {}: {}", i, e)))?;
        let n_tensors = r.u32()? as usize;
        let mut params = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let dims = r.dims()?;
            let len: usize = dims.iter().product();
            let bytes = r.take(len.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.push(Tensor::new(dims, data)?);
        }
        let layer = Layer {
            spec,
            in_shape: cur.clone(),
            out_shape: out.clone(),
            params,
        };
        check_param_shapes(&layer, i)?;
        layers.push(layer);
        cur = out;
    }
    let n_taps = r.u32()? as usize;
    let mut taps = Vec::with_capacity(n_taps);
    for _ in 0..n_taps {
        let layer = r.u32()? as usize;
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("tap name is not UTF-8".into()))?
            .to_string();
        taps.push(Tap { name, layer });
    }
    if r.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Network::from_parts(input, layers, taps)
}

fn check_param_shapes(layer: &Layer, i: usize) -> Result<()> {
    let expected: Vec<Vec<usize>> = match *layer.spec() {
        LayerSpec::Conv {
            kernel, features, ..
        } => vec![vec![features, layer.in_shape[0], kernel, kernel], vec![features]],
        LayerSpec::FullyConnected { features } | LayerSpec::LinearReadout { features } => {
            vec![vec![features, layer.in_shape.iter().product()], vec![features]]
        }
        _ => vec![],
    };
    let found: Vec<Vec<usize>> = layer.params().iter().map(|t| t.shape().to_vec()).collect();
    if expected != found {
        return Err(Error::Format(format!(
            "layer {} parameter shapes {:?}, expected {:?}",
            i, found, expected
        )));
    }
    Ok(())
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network> {
    from_bytes(&fs::read(path)?)
}
