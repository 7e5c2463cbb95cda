//! `INN1` model files.
//!
//! ```text
//! b"INN1" | u32 version | u8 dtype | u64 dim | u64 layers
//! per layer: u8 parity | u64 split | s_cap | scale net | translate net
//! per net:   u64 dense count, then per dense: u64 in | u64 out | weights (in x out, row-major) | bias
//! u64 FNV-1a checksum of every preceding byte
//! ```
//!
//! Integers are little-endian; reals use the model's dtype.

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use nalgebra::{DMatrix, DVector};

use super::layer::{CouplingLayer, Parity};
use super::model::InnModel;
use super::net::{Dense, Mlp};
use super::Real;
use crate::embedding::Dtype;
use crate::error::{Error, Result};

pub const INN_MAGIC: &[u8; 4] = b"INN1";
pub const INN_VERSION: u32 = 1;

fn dtype_code(d: Dtype) -> u8 {
    match d {
        Dtype::F32 => 0,
        Dtype::F64 => 1,
    }
}

fn put_u64(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_net<T: Real>(out: &mut Vec<u8>, net: &Mlp<T>) {
    put_u64(out, net.layers.len());
    for d in &net.layers {
        put_u64(out, d.inputs());
        put_u64(out, d.outputs());
        for i in 0..d.inputs() {
            for j in 0..d.outputs() {
                d.weight[(i, j)].write_le(out);
            }
        }
        for &b in d.bias.iter() {
            b.write_le(out);
        }
    }
}

pub fn write_inn<T: Real>(model: &InnModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(INN_MAGIC);
    out.extend_from_slice(&INN_VERSION.to_le_bytes());
    out.push(dtype_code(T::DTYPE));
    put_u64(&mut out, model.dim);
    put_u64(&mut out, model.layers.len());
    for l in &model.layers {
        out.push(match l.parity {
            Parity::KeepLow => 0,
            Parity::KeepHigh => 1,
        });
        put_u64(&mut out, l.split);
        l.s_cap.write_le(&mut out);
        put_net(&mut out, &l.scale_net);
        put_net(&mut out, &l.translate_net);
    }
    let mut h = FnvHasher::default();
    h.write(&out);
    out.extend_from_slice(&h.finish().to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::invalid("truncated INN1 data"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::invalid("INN1 size field overflows"))
    }

    fn real<T: Real>(&mut self) -> Result<T> {
        Ok(T::read_le(self.take(T::WIDTH)?))
    }

    fn net<T: Real>(&mut self) -> Result<Mlp<T>> {
        let count = self.u64()?;
        if count != 3 {
            return Err(Error::invalid(format!("expected 3 dense layers per net, found {count}")));
        }
        let read_dense = |r: &mut Self| -> Result<Dense<T>> {
            let (inputs, outputs) = (r.u64()?, r.u64()?);
            let len = inputs
                .checked_mul(outputs)
                .filter(|&l| l <= r.bytes.len())
                .ok_or_else(|| Error::invalid("implausible dense layer shape"))?;
            let mut w = Vec::with_capacity(len);
            for _ in 0..len {
                w.push(r.real::<T>()?);
            }
            let weight = DMatrix::from_row_slice(inputs, outputs, &w);
            let mut b = Vec::with_capacity(outputs);
            for _ in 0..outputs {
                b.push(r.real::<T>()?);
            }
            Ok(Dense {
                weight,
                bias: DVector::from_vec(b),
            })
        };
        let a = read_dense(self)?;
        let b = read_dense(self)?;
        let c = read_dense(self)?;
        Ok(Mlp { layers: [a, b, c] })
    }
}

/// Parse `INN1` bytes into a model of element type `T` (which must match the
/// stored dtype).
pub fn read_inn<T: Real>(bytes: &[u8]) -> Result<InnModel<T>> {
    if bytes.len() < 4 + 4 + 1 + 8 || &bytes[..4] != INN_MAGIC {
        return Err(Error::invalid("missing INN1 header"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let mut h = FnvHasher::default();
    h.write(body);
    if h.finish().to_le_bytes() != tail {
        return Err(Error::invalid("INN1 checksum mismatch"));
    }
    let mut r = Reader { bytes: body, at: 4 };
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != INN_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = r.u8()?;
    if dtype != dtype_code(T::DTYPE) {
        return Err(Error::invalid(format!(
            "INN1 stores dtype code {dtype}, requested {:?}",
            T::DTYPE
        )));
    }
    let dim = r.u64()?;
    let n_layers = r.u64()?;
    let mut layers = Vec::new();
    for _ in 0..n_layers {
        let parity = match r.u8()? {
            0 => Parity::KeepLow,
            1 => Parity::KeepHigh,
            p => return Err(Error::invalid(format!("unknown parity code {p}"))),
        };
        let split = r.u64()?;
        let s_cap = r.real::<T>()?;
        let scale_net = r.net::<T>()?;
        let translate_net = r.net::<T>()?;
        let rest = dim.saturating_sub(split);
        for net in [&scale_net, &translate_net] {
            if net.layers[0].inputs() != split || net.layers[2].outputs() != rest || split == 0 || rest == 0 {
                return Err(Error::invalid("net shapes disagree with the layer split"));
            }
        }
        layers.push(CouplingLayer {
            dim,
            split,
            parity,
            s_cap,
            scale_net,
            translate_net,
        });
    }
    if r.at != body.len() {
        return Err(Error::invalid("trailing bytes after INN1 model"));
    }
    Ok(InnModel { dim, layers })
}

/// Element type stored in an `INN1` file.
pub fn inn_dtype(bytes: &[u8]) -> Option<Dtype> {
    match bytes.get(8)? {
        0 => Some(Dtype::F32),
        1 => Some(Dtype::F64),
        _ => None,
    }
}

pub fn save_inn<T: Real>(model: &InnModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_inn(model)).map_err(|e| Error::io(path, e))
}

pub fn load_inn<T: Real>(path: impl AsRef<Path>) -> Result<InnModel<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_inn(&bytes).map_err(|e| match e {
        Error::InvalidInput(reason) => Error::corrupt(path, reason),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inn::random_inn;

    #[test]
    fn roundtrip_both_dtypes() {
        let m = random_inn::<f64>(5, 3, 1).unwrap();
        let bytes = write_inn(&m);
        assert_eq!(read_inn::<f64>(&bytes).unwrap(), m);
        assert_eq!(write_inn(&read_inn::<f64>(&bytes).unwrap()), bytes);

        let m = random_inn::<f32>(6, 2, 2).unwrap();
        assert_eq!(read_inn::<f32>(&write_inn(&m)).unwrap(), m);
        assert_eq!(inn_dtype(&write_inn(&m)), Some(Dtype::F32));
    }

    #[test]
    fn rejects_corruption() {
        let m = random_inn::<f64>(4, 2, 3).unwrap();
        let mut bytes = write_inn(&m);
        assert!(read_inn::<f32>(&bytes).is_err());
        bytes[40] ^= 1;
        assert!(read_inn::<f64>(&bytes).is_err());
        let bytes = write_inn(&m);
        assert!(read_inn::<f64>(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn rejects_unknown_version() {
        let m = random_inn::<f64>(4, 1, 3).unwrap();
        let mut bytes = write_inn(&m);
        bytes[4] = 2;
        let n = bytes.len() - 8;
        let mut h = FnvHasher::default();
        h.write(&bytes[..n]);
        bytes[n..].copy_from_slice(&h.finish().to_le_bytes());
        assert!(matches!(read_inn::<f64>(&bytes), Err(Error::UnsupportedVersion(2))));
    }
}
