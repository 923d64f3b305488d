//! Binary checkpoint of a [`CnnParams`].
//!
//! All integers and floats little-endian.
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `QSTCKPT\0` |
//! | 4 | version `u32` = 1 |
//! | 4 | encoding `u32`: 0 zero-padded, 1 compact |
//! | 4 | kept projectors `u32` (0 for zero-padded) |
//! | 4 + 4 | input rows, input cols `u32` |
//! | 4 | tensor count `u32` = 10 |
//! | per tensor | rank `u32`, then `rank` dims `u32` |
//! | 8 | parameter count `u64` = n |
//! | 8·n | parameters `f64`, tensor order |
//! | 8·n | Adagrad accumulators `f64`, same order |
//! | 8 | optimizer step counter `u64` |

use std::fs;
use std::path::Path;

use super::{CnnParams, GridEncoding, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QSTCKPT\0";
pub const VERSION: u32 = 1;

pub fn to_bytes(p: &CnnParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 16 * p.len());
    out.extend_from_slice(MAGIC);
    let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
    put(&mut out, VERSION);
    let (kind, keep) = match p.encoding() {
        GridEncoding::ZeroPadded => (0, 0),
        GridEncoding::Compact { keep } => (1, keep as u32),
    };
    put(&mut out, kind);
    put(&mut out, keep);
    let arch = p.architecture();
    put(&mut out, arch.input_rows as u32);
    put(&mut out, arch.input_cols as u32);
    put(&mut out, Tensor::ALL.len() as u32);
    for t in Tensor::ALL {
        let shape = arch.tensor_shape(t);
        put(&mut out, shape.len() as u32);
        for d in shape {
            put(&mut out, d as u32);
        }
    }
    out.extend_from_slice(&(p.len() as u64).to_le_bytes());
    for v in p.values().iter().chain(p.accumulators()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&p.step().to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.bytes.len() {
            return Err(self.malformed("unexpected end of file"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn malformed(&self, reason: &str) -> Error {
        Error::Malformed {
            path: self.path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<CnnParams> {
    let mut r = Reader { bytes, at: 0, path };
    if r.take(8)? != MAGIC {
        return Err(r.malformed("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::FormatVersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let kind = r.u32()?;
    let keep = r.u32()? as usize;
    let encoding = match kind {
        0 => GridEncoding::ZeroPadded,
        1 => GridEncoding::compact(keep)?,
        _ => return Err(r.malformed("unknown input encoding")),
    };
    let template = CnnParams::zeros(encoding);
    let arch = *template.architecture();
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if (rows, cols) != (arch.input_rows, arch.input_cols) {
        return Err(r.malformed("input shape does not match encoding"));
    }
    if r.u32()? as usize != Tensor::ALL.len() {
        return Err(r.malformed("unexpected tensor count"));
    }
    for t in Tensor::ALL {
        let rank = r.u32()? as usize;
        if rank > 4 {
            return Err(r.malformed("tensor rank above 4"));
        }
        let dims: Vec<usize> = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<_>>()?;
        if dims != arch.tensor_shape(t) {
            return Err(r.malformed(&format!("shape of {} does not match", t.name())));
        }
    }
    let n = r.u64()? as usize;
    if n != template.len() {
        return Err(r.malformed("parameter count does not match shapes"));
    }
    let values = r.f64s(n)?;
    let accum = r.f64s(n)?;
    let step = r.u64()?;
    if r.at != bytes.len() {
        return Err(r.malformed("trailing bytes"));
    }
    CnnParams::from_parts(encoding, values, accum, step)
}

pub fn save(p: &CnnParams, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(p))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<CnnParams> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for enc in [GridEncoding::ZeroPadded, GridEncoding::Compact { keep: 12 }] {
            let mut p = CnnParams::initialize(enc, 3);
            p.accum[7] = 0.25;
            p.step = 42;
            let bytes = to_bytes(&p);
            assert_eq!(bytes.len(), 8 + 4 * 6 + 4 * 29 + 8 + 16 * p.len() + 8);
            let q = from_bytes(&bytes, Path::new("mem")).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn header_layout() {
        let p = CnnParams::zeros(GridEncoding::ZeroPadded);
        let b = to_bytes(&p);
        assert_eq!(&b[..8], b"QSTCKPT\0");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(b[20..24].try_into().unwrap()), 6);
    }

    #[test]
    fn rejects_damage() {
        let p = CnnParams::zeros(GridEncoding::ZeroPadded);
        let b = to_bytes(&p);
        let path = Path::new("mem");
        assert!(matches!(
            from_bytes(&b[..b.len() - 1], path),
            Err(Error::Malformed { .. })
        ));
        let mut v = b.clone();
        v[8] = 2;
        assert!(matches!(
            from_bytes(&v, path),
            Err(Error::FormatVersionMismatch { found: 2, .. })
        ));
        let mut v = b.clone();
        v[0] = b'X';
        assert!(matches!(from_bytes(&v, path), Err(Error::Malformed { .. })));
    }
}
