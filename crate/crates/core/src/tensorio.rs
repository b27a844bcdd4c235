//! `FXQT` tensor files.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "FXQT"
//! 4       2         version, u16 LE (= 1)
//! 6       1         dtype (0 = f32)
//! 7       1         ndim (>= 1)
//! 8       4*ndim    dims, u32 LE each (> 0)
//! ...     4*prod    row-major f32 LE payload, finite values only
//! ```
//!
//! The format is closed: the reader rejects anything the writer cannot
//! produce, including trailing bytes.

use std::fs;
use std::path::Path;

use crate::error::TensorIoError;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"FXQT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>, TensorIoError> {
    let ndim = t.rank();
    if !(1..=255).contains(&ndim) {
        return Err(TensorIoError::UnwritableRank(ndim));
    }
    let mut out = Vec::with_capacity(8 + 4 * ndim + 4 * t.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(ndim as u8);
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| TensorIoError::DimTooLarge(d))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TensorIoError> {
        let rest = &self.bytes[self.offset..];
        if rest.len() < n {
            return Err(TensorIoError::Truncated {
                offset: self.bytes.len(),
                needed: n - rest.len(),
            });
        }
        let out = &rest[..n];
        self.offset += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], TensorIoError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor, TensorIoError> {
    let mut cur = Cursor { bytes, offset: 0 };
    let magic: [u8; 4] = cur.array()?;
    if magic != MAGIC {
        return Err(TensorIoError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes(cur.array()?);
    if version != VERSION {
        return Err(TensorIoError::UnsupportedVersion(version));
    }
    let [dtype] = cur.array()?;
    if dtype != DTYPE_F32 {
        return Err(TensorIoError::UnsupportedDtype(dtype));
    }
    let [ndim] = cur.array()?;
    if ndim == 0 {
        return Err(TensorIoError::ZeroRank);
    }
    let mut shape = Vec::with_capacity(ndim as usize);
    for index in 0..ndim as usize {
        let offset = cur.offset;
        let d = u32::from_le_bytes(cur.array()?) as usize;
        if d == 0 {
            return Err(TensorIoError::ZeroDim { index, offset });
        }
        shape.push(d);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or(TensorIoError::Truncated {
            offset: bytes.len(),
            needed: usize::MAX,
        })?
        / 4;
    let payload_start = cur.offset;
    let payload = cur.take(count * 4)?;
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
        if !v.is_finite() {
            return Err(TensorIoError::NonFinite {
                offset: payload_start + 4 * i,
            });
        }
        data.push(v);
    }
    if cur.offset != bytes.len() {
        return Err(TensorIoError::TrailingBytes {
            offset: cur.offset,
            extra: bytes.len() - cur.offset,
        });
    }
    Ok(Tensor::from_parts_unchecked(shape, data))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, TensorIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| TensorIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_tensor(&bytes)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<(), TensorIoError> {
    let path = path.as_ref();
    let bytes = encode_tensor(t)?;
    fs::write(path, bytes).map_err(|source| TensorIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}
