//! Multi-view HoG descriptors of part silhouettes and the L2 shape distance.
//!
//! Each view is summarized by unsigned-gradient orientation histograms over
//! a mid-frequency 17×17 cell grid and a single global cell, 9 bins each:
//! `9 × (289 + 1) = 2610` values per view, `20 × 2610 = 52200` per part.
//! The finer 34×34 level of a full three-level pyramid is available through
//! [`HogVariant::ThreeLevel`], but it makes the similarity measure much less
//! smooth and is off by default.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{SilhouetteImage, VIEW_COUNT};

/// Per-cell histograms are clipped here after the first L2 normalization.
pub const CELL_CLIP: f64 = 0.2;
pub const CELL_EPS: f64 = 1e-6;

/// Per-view length under the default configuration.
pub const VIEW_LEN: usize = 2610;
/// Per-part length under the default configuration.
pub const PART_LEN: usize = VIEW_COUNT * VIEW_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HogVariant {
    /// Mid (17×17) and low (1×1) levels.
    TwoLevel,
    /// Adds a high-frequency 34×34 level in front of the other two.
    ThreeLevel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogConfig {
    pub orientation_bins: usize,
    /// Square cell grids, concatenated in this order.
    pub grids: Vec<usize>,
}

impl Default for HogConfig {
    fn default() -> Self {
        HogConfig::for_variant(HogVariant::TwoLevel)
    }
}

impl HogConfig {
    pub fn for_variant(variant: HogVariant) -> Self {
        let grids = match variant {
            HogVariant::TwoLevel => vec![17, 1],
            HogVariant::ThreeLevel => vec![34, 17, 1],
        };
        HogConfig {
            orientation_bins: 9,
            grids,
        }
    }

    pub fn view_len(&self) -> usize {
        self.orientation_bins * self.grids.iter().map(|g| g * g).sum::<usize>()
    }

    pub fn part_len(&self) -> usize {
        VIEW_COUNT * self.view_len()
    }
}

/// Per-pixel gradient with unsigned orientation spread over two bins.
#[derive(Clone, Copy, Default)]
struct BinnedGradient {
    lo: usize,
    hi: usize,
    w_lo: f64,
    w_hi: f64,
}

/// Splits a gradient over the two nearest bin centers. Bin `b` is centered at
/// `b·π/bins`, so bin 0 collects horizontal gradients (vertical edges).
fn bin_gradient(gx: f64, gy: f64, bins: usize) -> Option<BinnedGradient> {
    let mag = (gx * gx + gy * gy).sqrt();
    if mag == 0.0 {
        return None;
    }
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta -= PI;
    }
    let pos = theta / (PI / bins as f64);
    let base = pos.floor();
    let frac = pos - base;
    let lo = (base as usize) % bins;
    Some(BinnedGradient {
        lo,
        hi: (lo + 1) % bins,
        w_lo: mag * (1.0 - frac),
        w_hi: mag * frac,
    })
}

/// Centered differences with edge replication. A silhouette only has
/// gradients in {-1, 0, 1}², so the nine possible bin splits are tabulated.
fn gradient_field(img: &SilhouetteImage, bins: usize) -> Vec<Option<BinnedGradient>> {
    let (w, h) = (img.width(), img.height());
    let table: Vec<Option<BinnedGradient>> = (0..9)
        .map(|k| bin_gradient((k % 3) as f64 - 1.0, (k / 3) as f64 - 1.0, bins))
        .collect();
    let bits = img.bits();
    let at = |x: usize, y: usize| bits[y * w + x] as i32;
    let mut out = vec![None; w * h];
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = at(xp, y) - at(xm, y);
            let gy = at(x, yp) - at(x, ym);
            if gx != 0 || gy != 0 {
                out[y * w + x] = table[((gy + 1) * 3 + gx + 1) as usize];
            }
        }
    }
    out
}

/// Cell index of each pixel coordinate along one axis: floor-sized cells,
/// the last one absorbing the remainder.
fn cell_map(len: usize, cells: usize) -> Vec<usize> {
    let size = len / cells;
    (0..len).map(|i| (i / size).min(cells - 1)).collect()
}

fn normalize_cell(hist: &mut [f64]) {
    let norm = |h: &[f64]| (h.iter().map(|v| v * v).sum::<f64>() + CELL_EPS * CELL_EPS).sqrt();
    let n = norm(hist);
    for v in hist.iter_mut() {
        *v = (*v / n).min(CELL_CLIP);
    }
    let n = norm(hist);
    for v in hist.iter_mut() {
        *v /= n;
    }
}

fn histograms(
    field: &[Option<BinnedGradient>],
    width: usize,
    height: usize,
    grid: (usize, usize),
    bins: usize,
) -> Result<Vec<f64>> {
    let (gw, gh) = grid;
    if gw == 0 || gh == 0 || gw > width || gh > height {
        return Err(Error::Grid {
            grid_w: gw,
            grid_h: gh,
            width,
            height,
        });
    }
    let cols = cell_map(width, gw);
    let rows = cell_map(height, gh);
    let mut hist = vec![0.0; gw * gh * bins];
    for y in 0..height {
        let row_base = rows[y] * gw;
        for x in 0..width {
            if let Some(g) = field[y * width + x] {
                let cell = (row_base + cols[x]) * bins;
                hist[cell + g.lo] += g.w_lo;
                hist[cell + g.hi] += g.w_hi;
            }
        }
    }
    for cell in hist.chunks_mut(bins) {
        normalize_cell(cell);
    }
    Ok(hist)
}

/// Orientation histograms over a `grid.0 × grid.1` cell grid, cells in
/// row-major order, each independently normalized.
pub fn hog_cells(img: &SilhouetteImage, grid: (usize, usize), bins: usize) -> Result<Vec<f64>> {
    let field = gradient_field(img, bins);
    histograms(&field, img.width(), img.height(), grid, bins)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewDescriptor {
    values: Vec<f32>,
}

impl ViewDescriptor {
    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

pub fn view_descriptor(img: &SilhouetteImage, cfg: &HogConfig) -> Result<ViewDescriptor> {
    let len = cfg.view_len();
    if img.is_blank() {
        for &g in &cfg.grids {
            if g > img.width() || g > img.height() {
                return Err(Error::Grid {
                    grid_w: g,
                    grid_h: g,
                    width: img.width(),
                    height: img.height(),
                });
            }
        }
        return Ok(ViewDescriptor {
            values: vec![0.0; len],
        });
    }
    let field = gradient_field(img, cfg.orientation_bins);
    let mut values = Vec::with_capacity(len);
    for &g in &cfg.grids {
        let h = histograms(
            &field,
            img.width(),
            img.height(),
            (g, g),
            cfg.orientation_bins,
        )?;
        values.extend(h.into_iter().map(|v| v as f32));
    }
    Ok(ViewDescriptor { values })
}

/// Concatenated per-view descriptors of one part, in viewpoint order.
#[derive(Clone, Debug, PartialEq)]
pub struct LightFieldDescriptor {
    values: Vec<f32>,
}

impl LightFieldDescriptor {
    pub fn zeros(len: usize) -> Self {
        LightFieldDescriptor {
            values: vec![0.0; len],
        }
    }

    pub fn from_values(values: Vec<f32>) -> Self {
        LightFieldDescriptor { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn part_descriptor(
    silhouettes: &[SilhouetteImage],
    cfg: &HogConfig,
) -> Result<LightFieldDescriptor> {
    if silhouettes.len() != VIEW_COUNT {
        return Err(Error::Arity {
            expected: VIEW_COUNT,
            got: silhouettes.len(),
        });
    }
    let views = silhouettes
        .par_iter()
        .map(|img| view_descriptor(img, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(cfg.part_len());
    for v in views {
        values.extend_from_slice(&v.values);
    }
    Ok(LightFieldDescriptor { values })
}

/// Euclidean distance, accumulated in f64. Vectors of different length are
/// compared as if the shorter one were zero-padded.
pub fn shape_distance(a: &LightFieldDescriptor, b: &LightFieldDescriptor) -> f64 {
    let common = a.values.len().min(b.values.len());
    let mut sum = 0.0f64;
    for (x, y) in a.values[..common].iter().zip(&b.values[..common]) {
        let d = *x as f64 - *y as f64;
        sum += d * d;
    }
    let tail = if a.values.len() > common {
        &a.values[common..]
    } else {
        &b.values[common..]
    };
    sum += tail.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
    sum.sqrt()
}

const LFD_MAGIC: &[u8; 4] = b"LFD1";

/// `"LFD1"`, u32 part count, then per part a u32 length and f32 values, all
/// little-endian.
pub fn encode_descriptors(parts: &[LightFieldDescriptor]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + parts.iter().map(|p| 4 + 4 * p.len()).sum::<usize>());
    out.extend_from_slice(LFD_MAGIC);
    out.extend_from_slice(&(parts.len() as u32).to_le_bytes());
    for p in parts {
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        for v in &p.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_descriptors(bytes: &[u8]) -> Result<Vec<LightFieldDescriptor>> {
    let truncated = || Error::Parse("truncated descriptor file".into());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
        pos += n;
        Ok(s)
    };
    if take(4)? != LFD_MAGIC {
        return Err(Error::Parse("missing LFD1 magic".into()));
    }
    let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    let count = read_u32(take(4)?);
    let mut parts = Vec::new();
    for _ in 0..count {
        let len = read_u32(take(4)?) as usize;
        let raw = take(len.checked_mul(4).ok_or_else(truncated)?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        parts.push(LightFieldDescriptor { values });
    }
    if pos != bytes.len() {
        return Err(Error::Parse("trailing bytes after descriptors".into()));
    }
    Ok(parts)
}

/// Debug form: a JSON array of value arrays.
pub fn descriptors_to_json(parts: &[LightFieldDescriptor]) -> Result<String> {
    let raw: Vec<&[f32]> = parts.iter().map(|p| p.values()).collect();
    Ok(serde_json::to_string(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk(n: usize) -> SilhouetteImage {
        let c = n as f64 / 2.0;
        SilhouetteImage::from_fn(n, n, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - c - 7.0, y as f64 + 0.5 - c + 3.0);
            dx * dx + dy * dy < (n as f64 / 4.0).powi(2) || (x > 20 && x < 30 && y < 40)
        })
    }

    #[test]
    fn default_dimensions() {
        let cfg = HogConfig::default();
        assert_eq!(cfg.view_len(), 2610);
        assert_eq!(cfg.part_len(), 52200);
        assert_eq!(
            HogConfig::for_variant(HogVariant::ThreeLevel).view_len(),
            9 * (1156 + 290)
        );
    }

    #[test]
    fn blank_image_gives_zero_vector() {
        let img = SilhouetteImage::blank(64, 64);
        assert!(hog_cells(&img, (17, 17), 9)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let v = view_descriptor(&img, &HogConfig::default()).unwrap();
        assert_eq!(v.values().len(), VIEW_LEN);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vertical_edge_fills_the_horizontal_gradient_bin() {
        // columns 0-1 empty, 2-3 set: gx = 1 at x = 1 and x = 2 in every row,
        // gy = 0 everywhere, so the 8 unit gradients all land in bin 0
        let img = SilhouetteImage::from_fn(4, 4, |x, _| x >= 2);
        let h = hog_cells(&img, (1, 1), 9).unwrap();
        let raw = 8.0f64;
        let first = (raw / (raw * raw + CELL_EPS * CELL_EPS).sqrt()).min(CELL_CLIP);
        let expected = first / (first * first + CELL_EPS * CELL_EPS).sqrt();
        assert!((h[0] - expected).abs() < 1e-15);
        assert!(h[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_gradient_is_split_between_bins() {
        // 45 degrees sits at position 2.25 on 20-degree bin centers
        let g = bin_gradient(1.0, 1.0, 9).unwrap();
        assert_eq!((g.lo, g.hi), (2, 3));
        let mag = 2f64.sqrt();
        assert!((g.w_lo - 0.75 * mag).abs() < 1e-12);
        assert!((g.w_hi - 0.25 * mag).abs() < 1e-12);
        // opposite sign, same unsigned orientation
        let h = bin_gradient(-1.0, -1.0, 9).unwrap();
        assert_eq!((h.lo, h.hi), (2, 3));
    }

    #[test]
    fn output_length_matches_grid() {
        let img = disk(40);
        assert_eq!(hog_cells(&img, (5, 3), 9).unwrap().len(), 5 * 3 * 9);
        assert_eq!(hog_cells(&img, (1, 1), 4).unwrap().len(), 4);
    }

    #[test]
    fn grid_larger_than_image_is_rejected() {
        let img = disk(16);
        assert!(matches!(
            hog_cells(&img, (17, 17), 9),
            Err(Error::Grid { .. })
        ));
        let blank = SilhouetteImage::blank(16, 16);
        assert!(view_descriptor(&blank, &HogConfig::default()).is_err());
    }

    #[test]
    fn mirroring_preserves_the_norm() {
        // 255 = 17 × 15 so mirrored cells coincide with cells
        let img = disk(255);
        let cfg = HogConfig::default();
        let norm = |v: &ViewDescriptor| {
            v.values()
                .iter()
                .map(|&x| (x as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let a = norm(&view_descriptor(&img, &cfg).unwrap());
        let b = norm(&view_descriptor(&img.mirrored_horizontally(), &cfg).unwrap());
        assert!(a > 1.0);
        assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn part_descriptor_requires_twenty_views() {
        let imgs = vec![SilhouetteImage::blank(32, 32); 19];
        assert!(matches!(
            part_descriptor(&imgs, &HogConfig::default()),
            Err(Error::Arity {
                expected: 20,
                got: 19
            })
        ));
        let imgs = vec![SilhouetteImage::blank(32, 32); 20];
        let d = part_descriptor(&imgs, &HogConfig::default()).unwrap();
        assert_eq!(d.len(), PART_LEN);
        assert!(d.is_zero());
    }

    #[test]
    fn distance_to_zero_is_the_norm() {
        let imgs = vec![disk(64); 20];
        let d = part_descriptor(&imgs, &HogConfig::default()).unwrap();
        let z = LightFieldDescriptor::zeros(d.len());
        assert_eq!(shape_distance(&d, &d), 0.0);
        assert!((shape_distance(&z, &d) - d.norm()).abs() < 1e-12);
    }

    #[test]
    fn binary_format_round_trips() {
        let parts = vec![
            LightFieldDescriptor::from_values(vec![0.5, -1.25, 3.0]),
            LightFieldDescriptor::zeros(0),
        ];
        let bytes = encode_descriptors(&parts);
        assert_eq!(&bytes[..4], b"LFD1");
        assert_eq!(decode_descriptors(&bytes).unwrap(), parts);
        assert!(decode_descriptors(&bytes[..bytes.len() - 1]).is_err());
        assert_eq!(descriptors_to_json(&parts).unwrap(), "[[0.5,-1.25,3.0],[]]");
    }

    fn arb_vec(len: usize) -> impl Strategy<Value = LightFieldDescriptor> {
        prop::collection::vec(-10.0f32..10.0, len).prop_map(LightFieldDescriptor::from_values)
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in arb_vec(16), b in arb_vec(16), c in arb_vec(16)) {
            let ab = shape_distance(&a, &b);
            prop_assert_eq!(ab, shape_distance(&b, &a));
            prop_assert!(ab >= 0.0);
            prop_assert!(ab <= shape_distance(&a, &c) + shape_distance(&c, &b) + 1e-9);
            prop_assert_eq!(shape_distance(&a, &a), 0.0);
        }
    }
}
