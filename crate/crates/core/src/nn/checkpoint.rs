//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "QSIMCKPT"
//! version u8       1
//! count   u32      number of records
//! record  × count:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   ndim     u32, dims (u64 × ndim)
//!   values   f64 × product(dims)
//! ```

use std::io::{Read, Write};

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"QSIMCKPT";
pub const VERSION: u8 = 1;

pub fn write_checkpoint<T: Real>(params: &ParamSet<T>, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&[VERSION])?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in t.data() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn to_bytes<T: Real>(params: &ParamSet<T>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf).expect("writing to Vec cannot fail");
    buf
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

pub fn read_checkpoint<T: Real>(input: &mut impl Read) -> Result<ParamSet<T>> {
    if &read_exact::<8>(input)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let [version] = read_exact::<1>(input)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(read_exact(input)?);
    let mut params = ParamSet::new();
    for _ in 0..count {
        let len = u32::from_le_bytes(read_exact(input)?) as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let ndim = u32::from_le_bytes(read_exact(input)?) as usize;
        let shape: Vec<usize> =
            (0..ndim).map(|_| read_exact(input).map(|b| u64::from_le_bytes(b) as usize)).collect::<Result<_>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| read_exact(input).map(|b| T::lit(f64::from_le_bytes(b)))).collect::<Result<_>>()?;
        params.add(name, Tensor::new(shape, data)?);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_bytes_are_fixed() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("a", Tensor::from_f64(vec![2], &[1.5, -2.0]).unwrap());
        let bytes = to_bytes(&ps);
        assert_eq!(&bytes[..8], b"QSIMCKPT");
        assert_eq!(bytes[8], 1);
        assert_eq!(&bytes[9..13], &1u32.to_le_bytes());
        // name_len + name + ndim + dim + 2 values
        assert_eq!(bytes.len(), 13 + 4 + 1 + 4 + 8 + 16);
        assert_eq!(&bytes[bytes.len() - 8..], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn round_trip_and_corruption() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("layer.w0", Tensor::from_f64(vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        ps.add("layer.b0", Tensor::from_f64(vec![3], &[0.1, 0.2, 0.3]).unwrap());
        let bytes = to_bytes(&ps);
        let back: ParamSet<f64> = read_checkpoint(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.flat_values(), ps.flat_values());
        assert!(back.same_layout(&ps));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint::<f64>(&mut bad.as_slice()).is_err());
        assert!(read_checkpoint::<f64>(&mut &bytes[..bytes.len() - 3]).is_err());
    }
}
