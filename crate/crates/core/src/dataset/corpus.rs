//! Corpus directories: `manifest.json` listing `{id, name, params, file}`
//! plus one mesh per shape in the JSON mesh format.
//!
//! A directory without a manifest is read as a plain collection of `.obj`
//! and `.json` meshes, numbered in file name order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ChairParams;
use crate::error::{Error, Result};
use crate::geometry::{chair_labels, load_mesh, save_mesh, MeshFormat, PartLabeledMesh};
use crate::index::ShapeRecord;

pub const MANIFEST_FILE: &str = "manifest.json";
const MESH_DIR: &str = "meshes";

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusEntry {
    pub id: u32,
    pub name: String,
    pub params: ChairParams,
    pub mesh: PartLabeledMesh,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<ChairParams>,
    file: String,
}

/// Writes `entries` under `dir`, creating it if needed.
pub fn write_corpus(dir: &Path, entries: &[CorpusEntry]) -> Result<()> {
    fs::create_dir_all(dir.join(MESH_DIR))?;
    let mut manifest = Vec::with_capacity(entries.len());
    for e in entries {
        let file = format!("{MESH_DIR}/{}.json", e.name);
        save_mesh(&e.mesh, &dir.join(&file), MeshFormat::Json)?;
        manifest.push(ManifestEntry {
            id: e.id,
            name: e.name.clone(),
            params: Some(e.params.clone()),
            file,
        });
    }
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Loads a corpus directory. Shape sources are the mesh paths as reached
/// from `dir`.
pub fn read_corpus(dir: &Path) -> Result<Vec<(ShapeRecord, PartLabeledMesh)>> {
    let labels = chair_labels();
    let manifest_path = dir.join(MANIFEST_FILE);
    let listed: Vec<ManifestEntry> = if manifest_path.exists() {
        serde_json::from_str(&fs::read_to_string(&manifest_path)?)?
    } else {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| MeshFormat::from_path(p).is_some());
        files.sort();
        files
            .into_iter()
            .enumerate()
            .map(|(i, p)| ManifestEntry {
                id: i as u32,
                name: p
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
                params: None,
                file: p
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
            })
            .collect()
    };
    if listed.is_empty() {
        return Err(Error::EmptyIndex);
    }
    listed
        .into_iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let format = MeshFormat::from_path(&path)
                .ok_or_else(|| Error::Parse(format!("unknown mesh format: {}", path.display())))?;
            let mesh = load_mesh(&path, format, &labels)?;
            let record = ShapeRecord {
                id: e.id,
                name: e.name,
                source: path.to_string_lossy().into_owned(),
            };
            Ok((record, mesh))
        })
        .collect()
}
