use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ShapeIndex;
use crate::error::{Error, Result};

/// Manifold coordinates computed outside the index, e.g. from a photograph.
/// Parts that are not listed cannot be picked from this source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalEmbedding {
    pub id: String,
    pub parts: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Immutable set of external embeddings. Ingestion returns a new table, so a
/// table shared between readers never changes under them.
#[derive(Clone, Debug, Default)]
pub struct ExternalTable {
    entries: Arc<Vec<ExternalEmbedding>>,
    by_id: Arc<HashMap<String, usize>>,
}

impl ExternalTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ExternalEmbedding> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[ExternalEmbedding] {
        &self.entries
    }

    /// Validates `batch` against `index` and returns the extended table. The
    /// batch is all-or-nothing.
    pub fn ingest(
        &self,
        index: &ShapeIndex,
        batch: Vec<ExternalEmbedding>,
    ) -> Result<ExternalTable> {
        let mut by_id = (*self.by_id).clone();
        let mut entries = (*self.entries).clone();
        for e in batch {
            if e.id.is_empty() {
                return Err(Error::Query("external embedding with an empty id".into()));
            }
            for (part, coords) in &e.parts {
                index.part_position(part)?;
                if coords.len() != index.dim() {
                    return Err(Error::Dimension {
                        part: part.clone(),
                        expected: index.dim(),
                        got: coords.len(),
                    });
                }
                if coords.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Query(format!("non-finite coordinate in `{}`", e.id)));
                }
            }
            if by_id.insert(e.id.clone(), entries.len()).is_some() {
                return Err(Error::DuplicateId(e.id));
            }
            entries.push(e);
        }
        Ok(ExternalTable {
            entries: Arc::new(entries),
            by_id: Arc::new(by_id),
        })
    }

    pub fn ingest_json(&self, index: &ShapeIndex, json: &str) -> Result<ExternalTable> {
        self.ingest(index, serde_json::from_str(json)?)
    }

    pub fn ingest_file(&self, index: &ShapeIndex, path: &Path) -> Result<ExternalTable> {
        self.ingest_json(index, &fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&*self.entries).expect("embeddings serialize")
    }
}
