//! Binary index file, little-endian throughout.
//!
//! ```text
//! "PMIX" u32 version
//! block config
//! block shapes          labels, then {id, name, source} per shape
//! per part:
//!   block descriptors   label, u32 n, u32 len, n·len f32
//!   block manifold      label, u32 n, u32 dim, f64 scale, f64 stress,
//!                       n·dim f64 coords, u32 pairs, (u32 row, u32 rep)*
//! ```
//!
//! Every block is `u32 payload_len, payload, u32 crc32(payload)`; strings
//! are `u32 len` plus UTF-8 bytes.

use std::fs;
use std::path::Path;

use super::{IndexConfig, PartEntry, ShapeIndex, ShapeRecord};
use crate::descriptor::{HogConfig, LightFieldDescriptor};
use crate::error::{Error, Result};
use crate::manifold::{DuplicateMap, Embedding, PartManifold, SammonConfig};

const MAGIC: &[u8; 4] = b"PMIX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn block(&mut self, payload: &[u8]) {
        self.u32(payload.len() as u32);
        self.0.extend_from_slice(payload);
        self.u32(crc32fast::hash(payload));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corruption("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn count(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem_size) > self.remaining() {
            return Err(Error::Corruption(format!("count {n} exceeds the data")));
        }
        Ok(n)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Corruption("invalid UTF-8".into()))
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
    fn block(&mut self, what: &str) -> Result<Reader<'a>> {
        let len = self
            .u32()
            .map_err(|_| Error::Corruption(format!("missing {what} block")))?
            as usize;
        let payload = self
            .take(len)
            .map_err(|_| Error::Corruption(format!("truncated {what} block")))?;
        let crc = self
            .u32()
            .map_err(|_| Error::Corruption(format!("truncated {what} block")))?;
        if crc32fast::hash(payload) != crc {
            return Err(Error::Corruption(format!(
                "checksum mismatch in {what} block"
            )));
        }
        Ok(Reader::new(payload))
    }
    fn finish(&self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Corruption(format!("trailing bytes in {what}")));
        }
        Ok(())
    }
}

pub(super) fn encode_config(c: &IndexConfig) -> Vec<u8> {
    let mut w = Writer::default();
    w.u32(c.hog.orientation_bins as u32);
    w.u32(c.hog.grids.len() as u32);
    for &g in &c.hog.grids {
        w.u32(g as u32);
    }
    w.u32(c.resolution);
    w.u32(c.sammon.dim as u32);
    w.u32(c.sammon.max_iters as u32);
    w.f64(c.sammon.step_factor);
    w.f64(c.sammon.rel_tol);
    w.u8(c.sammon.distance_floor.is_some() as u8);
    w.f64(c.sammon.distance_floor.unwrap_or(0.0));
    w.u64(c.sammon.seed);
    w.0
}

fn decode_config(r: &mut Reader) -> Result<IndexConfig> {
    let orientation_bins = r.u32()? as usize;
    let n = r.count(4)?;
    let grids = (0..n)
        .map(|_| r.u32().map(|g| g as usize))
        .collect::<Result<_>>()?;
    let resolution = r.u32()?;
    let dim = r.u32()? as usize;
    let max_iters = r.u32()? as usize;
    let step_factor = r.f64()?;
    let rel_tol = r.f64()?;
    let has_floor = r.u8()? != 0;
    let floor = r.f64()?;
    let seed = r.u64()?;
    Ok(IndexConfig {
        hog: HogConfig {
            orientation_bins,
            grids,
        },
        resolution,
        sammon: SammonConfig {
            dim,
            max_iters,
            step_factor,
            rel_tol,
            distance_floor: has_floor.then_some(floor),
            seed,
        },
    })
}

pub fn encode_index(index: &ShapeIndex) -> Vec<u8> {
    let mut out = Writer::default();
    out.0.extend_from_slice(MAGIC);
    out.u32(FORMAT_VERSION);
    out.block(&encode_config(&index.config));

    let mut w = Writer::default();
    w.u32(index.label_set.len() as u32);
    for l in &index.label_set {
        w.str(l);
    }
    w.u32(index.shapes.len() as u32);
    for s in &index.shapes {
        w.u32(s.id);
        w.str(&s.name);
        w.str(&s.source);
    }
    out.block(&w.0);

    for (label, part) in index.label_set.iter().zip(&index.parts) {
        let mut w = Writer::default();
        w.str(label);
        w.u32(part.descriptors.len() as u32);
        w.u32(index.config.hog.part_len() as u32);
        w.0.reserve(4 * part.descriptors.len() * index.config.hog.part_len());
        for d in &part.descriptors {
            for &v in d.values() {
                w.f32(v);
            }
        }
        out.block(&w.0);

        let m = &part.manifold;
        let mut w = Writer::default();
        w.str(label);
        w.u32(m.n() as u32);
        w.u32(m.dim() as u32);
        w.f64(m.scale);
        w.f64(m.stress);
        for &v in m.coords.as_slice() {
            w.f64(v);
        }
        w.u32(m.duplicates.representative.len() as u32);
        for (i, &r) in m.duplicates.representative.iter().enumerate() {
            w.u32(i as u32);
            w.u32(r);
        }
        out.block(&w.0);
    }
    out.0
}

pub fn decode_index(bytes: &[u8]) -> Result<ShapeIndex> {
    let mut r = Reader::new(bytes);
    if r.take(4)
        .map_err(|_| Error::Corruption("file too short".into()))?
        != MAGIC
    {
        return Err(Error::Corruption("not an index file (bad magic)".into()));
    }
    let version = r
        .u32()
        .map_err(|_| Error::Corruption("file too short".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(version));
    }
    let mut b = r.block("config")?;
    let config = decode_config(&mut b)?;
    b.finish("config block")?;

    let mut b = r.block("shapes")?;
    let n_labels = b.count(4)?;
    let label_set = (0..n_labels).map(|_| b.str()).collect::<Result<Vec<_>>>()?;
    let n_shapes = b.count(12)?;
    let mut shapes = Vec::with_capacity(n_shapes);
    for _ in 0..n_shapes {
        shapes.push(ShapeRecord {
            id: b.u32()?,
            name: b.str()?,
            source: b.str()?,
        });
    }
    b.finish("shapes block")?;

    let mut parts = Vec::with_capacity(n_labels);
    for label in &label_set {
        let mut b = r.block("descriptor")?;
        if &b.str()? != label {
            return Err(Error::Corruption(format!(
                "descriptor block out of order at `{label}`"
            )));
        }
        let n = b.u32()? as usize;
        let len = b.u32()? as usize;
        let raw = b.take(
            n.checked_mul(len)
                .and_then(|x| x.checked_mul(4))
                .ok_or_else(|| Error::Corruption("descriptor size overflow".into()))?,
        )?;
        b.finish("descriptor block")?;
        let descriptors = if len == 0 {
            vec![LightFieldDescriptor::zeros(0); n]
        } else {
            raw.chunks_exact(4 * len)
                .map(|c| {
                    LightFieldDescriptor::from_values(
                        c.chunks_exact(4)
                            .map(|v| f32::from_le_bytes(v.try_into().unwrap()))
                            .collect(),
                    )
                })
                .collect()
        };

        let mut b = r.block("manifold")?;
        if &b.str()? != label {
            return Err(Error::Corruption(format!(
                "manifold block out of order at `{label}`"
            )));
        }
        let n = b.u32()? as usize;
        let dim = b.u32()? as usize;
        let scale = b.f64()?;
        let stress = b.f64()?;
        let total = n
            .checked_mul(dim)
            .filter(|&t| t.saturating_mul(8) <= b.remaining())
            .ok_or_else(|| Error::Corruption("coordinate count exceeds the data".into()))?;
        let coords = (0..total).map(|_| b.f64()).collect::<Result<Vec<_>>>()?;
        let pairs = b.count(8)?;
        let mut representative = vec![u32::MAX; pairs];
        for _ in 0..pairs {
            let i = b.u32()? as usize;
            let rep = b.u32()?;
            *representative
                .get_mut(i)
                .ok_or_else(|| Error::Corruption("duplicate map row out of range".into()))? = rep;
        }
        b.finish("manifold block")?;
        if pairs != n {
            return Err(Error::Corruption(format!(
                "duplicate map of `{label}` has {pairs} rows for {n} shapes"
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Corruption(format!(
                "non-positive scale in `{label}`"
            )));
        }
        let manifold = PartManifold {
            part: label.clone(),
            coords: Embedding::from_flat(n, dim, coords)?,
            scale,
            duplicates: DuplicateMap::from_representatives(representative)?,
            stress,
        };
        parts.push(PartEntry {
            descriptors,
            manifold,
        });
    }
    r.finish("file")?;
    ShapeIndex::new(config, label_set, shapes, parts)
}

pub fn save_index(index: &ShapeIndex, path: &Path) -> Result<()> {
    fs::write(path, encode_index(index))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<ShapeIndex> {
    decode_index(&fs::read(path)?)
}

/// Loads an index and refuses it unless it was built with `expected`.
pub fn load_index_expecting(path: &Path, expected: &IndexConfig) -> Result<ShapeIndex> {
    let index = load_index(path)?;
    if index.config() != expected {
        return Err(Error::Config(format!(
            "index fingerprint {} does not match the session's {}",
            index.config().fingerprint(),
            expected.fingerprint()
        )));
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::tests::synthetic_index;

    fn sample() -> ShapeIndex {
        let rows = |s: f64| {
            (0..5)
                .map(|i| vec![s * i as f64, 0.1 / (1.0 + i as f64)])
                .collect::<Vec<_>>()
        };
        synthetic_index(&[3, 1, 4, 15, 9], &[rows(0.3), rows(-1.7)])
    }

    #[test]
    fn round_trip_is_lossless() {
        let index = sample();
        let bytes = encode_index(&index);
        let back = decode_index(&bytes).unwrap();
        assert_eq!(back, index);
        assert_eq!(encode_index(&back), bytes);
    }

    #[test]
    fn every_truncation_is_corruption() {
        let bytes = encode_index(&sample());
        for cut in 0..bytes.len() {
            match decode_index(&bytes[..cut]) {
                Err(Error::Corruption(_)) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn flipped_bits_are_caught() {
        let bytes = encode_index(&sample());
        for pos in 8..bytes.len() {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(decode_index(&bad).is_err(), "flip at {pos} went unnoticed");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_index(&extra), Err(Error::Corruption(_))));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = encode_index(&sample());
        bytes[4] = 2;
        assert!(matches!(decode_index(&bytes), Err(Error::Version(2))));
        bytes[0] = b'X';
        assert!(matches!(decode_index(&bytes), Err(Error::Corruption(_))));
    }

    #[test]
    fn mismatched_config_is_refused() {
        let index = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.pmix");
        save_index(&index, &path).unwrap();
        assert_eq!(load_index_expecting(&path, index.config()).unwrap(), index);
        let mut other = index.config().clone();
        other.hog.grids = vec![2, 1];
        assert!(matches!(
            load_index_expecting(&path, &other),
            Err(Error::Config(_))
        ));
        assert_ne!(other.fingerprint(), index.config().fingerprint());
    }
}
