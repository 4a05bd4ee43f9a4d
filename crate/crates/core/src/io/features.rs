//! `OEF1` feature matrices.
//!
//! Layout (little-endian): magic `OEF1`, `u32` count, `u32` feat_dim, then
//! `count` ids each as `u16` byte length plus UTF-8 bytes, then
//! `count * feat_dim` `f32` values row-major.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

use super::{read_bytes, write_atomic};

const MAGIC: &[u8; 4] = b"OEF1";

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    /// `ids.len() x feat_dim`.
    pub data: DenseMatrix,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, data: DenseMatrix) -> Result<Self> {
        if ids.len() != data.rows() {
            return Err(Error::contract(format!(
                "{} ids for {} feature rows",
                ids.len(),
                data.rows()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::contract(format!("duplicate feature id '{dup}'")));
        }
        Ok(Self { ids, data })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn feat_dim(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.path,
                format!("truncated at byte {} reading {what}", self.pos),
            )),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Parses an `OEF1` image; `path` is only used in error messages.
pub fn decode_features(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::format(path, "bad magic at byte 0, expected OEF1"));
    }
    let count = cur.u32("count")? as usize;
    let dim = cur.u32("feat_dim")? as usize;
    if dim == 0 && count > 0 {
        return Err(Error::format(path, "feat_dim is 0 at byte 8"));
    }
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    let mut seen = HashSet::new();
    for _ in 0..count {
        let at = cur.pos;
        let len = cur.u16("id length")? as usize;
        let raw = cur.take(len, "id bytes")?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::format(path, format!("id at byte {at} is not UTF-8")))?;
        if !seen.insert(id.to_string()) {
            return Err(Error::format(path, format!("duplicate id '{id}' at byte {at}")));
        }
        ids.push(id.to_string());
    }
    let n_values = count
        .checked_mul(dim)
        .ok_or_else(|| Error::format(path, "count * feat_dim overflows"))?;
    let start = cur.pos;
    let raw = cur.take(n_values * 4, "feature values")?;
    let mut data = Vec::with_capacity(n_values);
    for (k, chunk) in raw.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::format(
                path,
                format!("non-finite value at byte {}", start + 4 * k),
            ));
        }
        data.push(f64::from(v));
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(
            path,
            format!("{} trailing bytes at byte {}", bytes.len() - cur.pos, cur.pos),
        ));
    }
    let data = if count == 0 {
        DenseMatrix::zeros(0, dim)
    } else {
        DenseMatrix::new(count, dim, data)?
    };
    Ok(FeatureMatrix { ids, data })
}

pub fn encode_features(features: &FeatureMatrix) -> Result<Vec<u8>> {
    let count = u32::try_from(features.len()).map_err(|_| Error::contract("too many feature rows"))?;
    let dim = u32::try_from(features.feat_dim()).map_err(|_| Error::contract("feat_dim too large"))?;
    let mut out = Vec::with_capacity(12 + features.data.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for id in &features.ids {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::contract(format!("feature id longer than 65535 bytes: {id:.32}...")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    for &v in features.data.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    decode_features(&read_bytes(path)?, path)
}

pub fn save_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    write_atomic(path, &encode_features(features)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_encoded() -> Vec<u8> {
        let mut b = b"OEF1".to_vec();
        b.extend_from_slice(&[2, 0, 0, 0, 3, 0, 0, 0]);
        b.extend_from_slice(&[1, 0, b'a']);
        b.extend_from_slice(&[2, 0, b'b', b'c']);
        for v in [1.0f32, -2.5, 0.125, 3.0, 0.0, -1.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn decodes_hand_written_file() {
        let f = decode_features(&hand_encoded(), Path::new("x")).unwrap();
        assert_eq!(f.ids, vec!["a", "bc"]);
        assert_eq!(f.row(0), &[1.0, -2.5, 0.125]);
        assert_eq!(f.row(1), &[3.0, 0.0, -1.0]);
        assert_eq!(encode_features(&f).unwrap(), hand_encoded());
    }

    #[test]
    fn empty_matrix_is_valid() {
        let mut b = b"OEF1".to_vec();
        b.extend_from_slice(&[0, 0, 0, 0, 4, 0, 0, 0]);
        let f = decode_features(&b, Path::new("x")).unwrap();
        assert!(f.is_empty());
        assert_eq!(f.feat_dim(), 4);
    }

    #[test]
    fn round_trip_to_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.oef");
        let data = DenseMatrix::new(2, 2, vec![0.1, 1.0 / 3.0, -7.25, 1e-3]).unwrap();
        let f = FeatureMatrix::new(vec!["x".into(), "y".into()], data).unwrap();
        save_features(&p, &f).unwrap();
        let g = load_features(&p).unwrap();
        for (a, b) in f.data.as_slice().iter().zip(g.data.as_slice()) {
            assert_eq!(*a as f32, *b as f32);
        }
    }

    #[test]
    fn corruption_reports_offsets() {
        let p = Path::new("x");
        let mut bad = hand_encoded();
        bad[0] = b'X';
        assert!(decode_features(&bad, p).unwrap_err().to_string().contains("byte 0"));

        let good = hand_encoded();
        let err = decode_features(&good[..good.len() - 1], p).unwrap_err().to_string();
        assert!(err.contains("truncated at byte 19"), "{err}");

        let mut dup = b"OEF1".to_vec();
        dup.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0, 1, 0, b'a', 1, 0, b'a']);
        dup.extend_from_slice(&[0; 8]);
        let err = decode_features(&dup, p).unwrap_err().to_string();
        assert!(err.contains("duplicate id 'a' at byte 15"), "{err}");
    }
}
