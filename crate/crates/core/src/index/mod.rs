//! The immutable shape index: shapes, per-part descriptors and per-part
//! manifolds, plus the table of externally computed embeddings that can be
//! used as query sources.

mod external;
mod format;

pub use external::{ExternalEmbedding, ExternalTable};
pub use format::{
    decode_index, encode_index, load_index, load_index_expecting, save_index, FORMAT_VERSION,
};

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{part_descriptor, HogConfig, LightFieldDescriptor};
use crate::error::{Error, Result};
use crate::geometry::{normalize, split_parts, PartLabeledMesh};
use crate::manifold::{
    build_distance_matrix, build_manifold, out_of_sample_embed, PartManifold, SammonConfig,
};
use crate::raster::{dodecahedron_viewpoints, render_silhouette, DEFAULT_RESOLUTION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub hog: HogConfig,
    pub resolution: u32,
    pub sammon: SammonConfig,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            hog: HogConfig::default(),
            resolution: DEFAULT_RESOLUTION,
            sammon: SammonConfig::default(),
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<()> {
        self.sammon.validate()?;
        if self.hog.orientation_bins == 0
            || self.hog.grids.is_empty()
            || self.hog.grids.contains(&0)
        {
            return Err(Error::Config("HoG needs bins and non-empty grids".into()));
        }
        if self.resolution < crate::raster::MIN_RESOLUTION {
            return Err(Error::Resolution(self.resolution));
        }
        if let Some(&g) = self.hog.grids.iter().max() {
            if g as u32 > self.resolution {
                return Err(Error::Config(format!(
                    "{g}x{g} HoG grid does not fit {0}x{0} silhouettes",
                    self.resolution
                )));
            }
        }
        Ok(())
    }

    /// Hex CRC32 of the encoded configuration block.
    pub fn fingerprint(&self) -> String {
        format!("{:08x}", crc32fast::hash(&format::encode_config(self)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub id: u32,
    pub name: String,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartEntry {
    pub descriptors: Vec<LightFieldDescriptor>,
    pub manifold: PartManifold,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeIndex {
    config: IndexConfig,
    label_set: Vec<String>,
    shapes: Vec<ShapeRecord>,
    parts: Vec<PartEntry>,
    rows: HashMap<u32, usize>,
}

impl ShapeIndex {
    /// Assembles an index and checks that every part covers every shape.
    pub fn new(
        config: IndexConfig,
        label_set: Vec<String>,
        shapes: Vec<ShapeRecord>,
        parts: Vec<PartEntry>,
    ) -> Result<Self> {
        let mut rows = HashMap::with_capacity(shapes.len());
        for (i, s) in shapes.iter().enumerate() {
            if rows.insert(s.id, i).is_some() {
                return Err(Error::DuplicateId(format!("shape:{}", s.id)));
            }
        }
        if parts.len() != label_set.len() {
            return Err(Error::Corruption(format!(
                "{} part tables for {} labels",
                parts.len(),
                label_set.len()
            )));
        }
        let len = config.hog.part_len();
        for (label, p) in label_set.iter().zip(&parts) {
            if p.manifold.part != *label {
                return Err(Error::Corruption(format!(
                    "manifold `{}` where `{label}` was expected",
                    p.manifold.part
                )));
            }
            if p.descriptors.len() != shapes.len() || p.manifold.n() != shapes.len() {
                return Err(Error::Corruption(format!(
                    "part `{label}` does not cover every shape"
                )));
            }
            if p.descriptors.iter().any(|d| d.len() != len) {
                return Err(Error::Corruption(format!(
                    "descriptor length mismatch in `{label}`"
                )));
            }
            if p.manifold.dim() != config.sammon.dim {
                return Err(Error::Corruption(format!(
                    "manifold `{label}` has the wrong dimension"
                )));
            }
        }
        Ok(ShapeIndex {
            config,
            label_set,
            shapes,
            parts,
            rows,
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn shapes(&self) -> &[ShapeRecord] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.config.sammon.dim
    }

    pub fn row_of(&self, id: u32) -> Option<usize> {
        self.rows.get(&id).copied()
    }

    pub fn part_position(&self, part: &str) -> Result<usize> {
        self.label_set
            .iter()
            .position(|l| l == part)
            .ok_or_else(|| Error::UnknownPart(part.to_string()))
    }

    pub fn part(&self, part: &str) -> Result<&PartEntry> {
        Ok(&self.parts[self.part_position(part)?])
    }

    pub fn parts(&self) -> &[PartEntry] {
        &self.parts
    }

    pub fn manifold(&self, part: &str) -> Result<&PartManifold> {
        Ok(&self.part(part)?.manifold)
    }

    /// Coordinates standing for "this part is missing": the row of any shape
    /// lacking the part, or else the zero descriptor embedded out of sample.
    pub fn absent_coords(&self, part: &str) -> Result<Vec<f64>> {
        let entry = self.part(part)?;
        if let Some(row) = entry.descriptors.iter().position(|d| d.is_zero()) {
            return Ok(entry.manifold.coords.row(row).to_vec());
        }
        let dists: Vec<f64> = entry.descriptors.iter().map(|d| d.norm()).collect();
        out_of_sample_embed(&entry.manifold, &dists, &self.config.sammon)
    }
}

/// Per-part summary of a manifold build.
#[derive(Clone, Debug, Serialize)]
pub struct PartBuildReport {
    pub part: String,
    pub stress: f64,
    pub groups: usize,
    pub duplicates: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Number of accepted steps that raised the Sammon error (always 0).
    pub descent_violations: usize,
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct IndexBuild {
    pub index: ShapeIndex,
    pub reports: Vec<PartBuildReport>,
}

/// Per-part descriptors of one mesh: normalize, split, render the 20 views,
/// describe.
pub fn describe_shape(
    mesh: &PartLabeledMesh,
    config: &IndexConfig,
) -> Result<Vec<LightFieldDescriptor>> {
    let (normalized, _) = normalize(mesh)?;
    let views = dodecahedron_viewpoints();
    split_parts(&normalized)
        .iter()
        .map(|(_, part)| {
            if part.is_empty() {
                return Ok(LightFieldDescriptor::zeros(config.hog.part_len()));
            }
            let images = views
                .iter()
                .map(|vp| render_silhouette(part, vp, config.resolution))
                .collect::<Result<Vec<_>>>()?;
            part_descriptor(&images, &config.hog)
        })
        .collect()
}

/// Runs the whole pipeline over a corpus. Deterministic for a fixed corpus
/// order and configuration.
pub fn build_index(
    corpus: &[(ShapeRecord, PartLabeledMesh)],
    config: &IndexConfig,
) -> Result<IndexBuild> {
    config.validate()?;
    let Some((_, first)) = corpus.first() else {
        return Err(Error::EmptyIndex);
    };
    let label_set = first.label_set().to_vec();
    if let Some((rec, _)) = corpus.iter().find(|(_, m)| m.label_set() != label_set) {
        return Err(Error::Config(format!(
            "shape {} has a different label set",
            rec.id
        )));
    }

    let per_shape: Vec<Vec<LightFieldDescriptor>> = corpus
        .par_iter()
        .map(|(_, mesh)| describe_shape(mesh, config))
        .collect::<Result<_>>()?;

    let mut parts = Vec::with_capacity(label_set.len());
    let mut reports = Vec::with_capacity(label_set.len());
    for (p, label) in label_set.iter().enumerate() {
        let descriptors: Vec<LightFieldDescriptor> =
            per_shape.iter().map(|d| d[p].clone()).collect();
        let d = build_distance_matrix(&descriptors)?;
        let built = build_manifold(label, &d, &config.sammon)?;
        reports.push(PartBuildReport {
            part: label.clone(),
            stress: built.manifold.stress,
            groups: built.manifold.duplicates.group_count(),
            duplicates: built.manifold.duplicates.collapsed_count(),
            iterations: built.iterations,
            converged: built.converged,
            descent_violations: built.trace.windows(2).filter(|w| w[1] > w[0]).count(),
            trace: built.trace,
        });
        parts.push(PartEntry {
            descriptors,
            manifold: built.manifold,
        });
    }
    let shapes = corpus.iter().map(|(r, _)| r.clone()).collect();
    let index = ShapeIndex::new(config.clone(), label_set, shapes, parts)?;
    Ok(IndexBuild { index, reports })
}
