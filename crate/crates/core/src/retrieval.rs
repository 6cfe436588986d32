//! Blend queries: pick parts from several sources and rank the indexed
//! shapes by the weighted sum of per-part manifold distances.
//!
//! ```
//! use pickmix::retrieval::BlendQuery;
//!
//! let q: BlendQuery = serde_json::from_str(
//!     r#"{"picks":[{"source":"shape:3","part":"legs"},
//!                  {"source":"absent","part":"armrests","weight":2.0}],"k":5}"#,
//! ).unwrap();
//! assert_eq!(q.picks.len(), 2);
//! assert_eq!(q.picks[0].weight, 1.0);
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{ExternalTable, ShapeIndex};
use crate::manifold::euclidean;

pub const DEFAULT_K: usize = 5;

/// Where a picked part comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum PickSource {
    /// An indexed shape, by id (`"shape:42"`).
    Shape(u32),
    /// An ingested external embedding (`"ext:img7"`).
    External(String),
    /// The part is missing (`"absent"`).
    Absent,
    /// Literal manifold coordinates.
    Coords(Vec<f64>),
}

impl FromStr for PickSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "absent" {
            return Ok(PickSource::Absent);
        }
        if let Some(id) = s.strip_prefix("shape:") {
            return id
                .parse()
                .map(PickSource::Shape)
                .map_err(|_| Error::UnknownSource(s.to_string()));
        }
        match s.strip_prefix("ext:") {
            Some(id) if !id.is_empty() => Ok(PickSource::External(id.to_string())),
            _ => Err(Error::UnknownSource(s.to_string())),
        }
    }
}

impl fmt::Display for PickSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PickSource::Shape(id) => write!(f, "shape:{id}"),
            PickSource::External(id) => write!(f, "ext:{id}"),
            PickSource::Absent => f.write_str("absent"),
            PickSource::Coords(c) => write!(f, "<{} coordinates>", c.len()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSource {
    Text(String),
    Coords(Vec<f64>),
}

impl Serialize for PickSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PickSource::Coords(c) => RawSource::Coords(c.clone()),
            other => RawSource::Text(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PickSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawSource::deserialize(d)? {
            RawSource::Text(t) => t.parse().map_err(serde::de::Error::custom),
            RawSource::Coords(c) => Ok(PickSource::Coords(c)),
        }
    }
}

fn default_weight() -> f64 {
    1.0
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartPick {
    pub source: PickSource,
    pub part: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl PartPick {
    pub fn new(source: PickSource, part: impl Into<String>) -> Self {
        PartPick {
            source,
            part: part.into(),
            weight: 1.0,
        }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendQuery {
    pub picks: Vec<PartPick>,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl BlendQuery {
    pub fn new(picks: Vec<PartPick>, k: usize) -> Self {
        BlendQuery { picks, k }
    }

    /// All parts of `index` taken from shape `id`.
    pub fn self_query(index: &ShapeIndex, id: u32, k: usize) -> Self {
        let picks = index
            .label_set()
            .iter()
            .map(|l| PartPick::new(PickSource::Shape(id), l.clone()))
            .collect();
        BlendQuery { picks, k }
    }

    pub fn validate(&self, index: &ShapeIndex) -> Result<()> {
        if self.picks.is_empty() {
            return Err(Error::Query("a query needs at least one pick".into()));
        }
        if self.k == 0 {
            return Err(Error::Query("k must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for p in &self.picks {
            index.part_position(&p.part)?;
            if !seen.insert(p.part.as_str()) {
                return Err(Error::Query(format!("part `{}` is picked twice", p.part)));
            }
            if !(p.weight > 0.0) || !p.weight.is_finite() {
                return Err(Error::Query(format!(
                    "weight of `{}` must be positive and finite, got {}",
                    p.part, p.weight
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub id: u32,
    pub name: String,
    pub total_cost: f64,
    /// Unweighted distance per picked part.
    pub per_part_costs: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: u32,
    pub name: String,
    pub distance: f64,
}

/// Coordinates of `pick` on its part's normalized manifold.
pub fn resolve_pick(
    index: &ShapeIndex,
    externals: &ExternalTable,
    pick: &PartPick,
) -> Result<Vec<f64>> {
    let manifold = index.manifold(&pick.part)?;
    match &pick.source {
        PickSource::Shape(id) => {
            let row = index
                .row_of(*id)
                .ok_or_else(|| Error::UnknownSource(pick.source.to_string()))?;
            Ok(manifold.coords.row(row).to_vec())
        }
        PickSource::External(id) => externals
            .get(id)
            .and_then(|e| e.parts.get(&pick.part))
            .cloned()
            .ok_or_else(|| {
                Error::UnknownSource(format!("{} for part `{}`", pick.source, pick.part))
            }),
        PickSource::Absent => index.absent_coords(&pick.part),
        PickSource::Coords(c) => {
            if c.len() != manifold.dim() {
                return Err(Error::Dimension {
                    part: pick.part.clone(),
                    expected: manifold.dim(),
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Query(format!(
                    "non-finite coordinate for `{}`",
                    pick.part
                )));
            }
            Ok(c.clone())
        }
    }
}

fn by_cost_then_id(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exhaustive scan: every indexed shape `a` costs
/// `Σ_picks weight · ‖a^part − b^part‖`. Returns the `k` cheapest, ascending,
/// ties by id.
pub fn blend_retrieve(
    index: &ShapeIndex,
    externals: &ExternalTable,
    q: &BlendQuery,
) -> Result<Vec<RankedResult>> {
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    q.validate(index)?;
    let targets: Vec<(&PartPick, &crate::manifold::PartManifold, Vec<f64>)> = q
        .picks
        .iter()
        .map(|p| {
            Ok((
                p,
                index.manifold(&p.part)?,
                resolve_pick(index, externals, p)?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut scored: Vec<(f64, usize)> = (0..index.len())
        .map(|row| {
            let total = targets
                .iter()
                .map(|(p, m, b)| p.weight * euclidean(m.coords.row(row), b))
                .sum();
            (total, row)
        })
        .collect();
    let shapes = index.shapes();
    scored.sort_by(|a, b| by_cost_then_id((a.0, shapes[a.1].id), (b.0, shapes[b.1].id)));
    scored.truncate(q.k);

    Ok(scored
        .into_iter()
        .map(|(total, row)| RankedResult {
            id: shapes[row].id,
            name: shapes[row].name.clone(),
            total_cost: total,
            per_part_costs: targets
                .iter()
                .map(|(p, m, b)| (p.part.clone(), euclidean(m.coords.row(row), b)))
                .collect(),
        })
        .collect())
}

/// The `k` nearest shapes to `coords` on one part manifold.
pub fn knn_part(index: &ShapeIndex, part: &str, coords: &[f64], k: usize) -> Result<Vec<Neighbor>> {
    let m = index.manifold(part)?;
    if coords.len() != m.dim() {
        return Err(Error::Dimension {
            part: part.to_string(),
            expected: m.dim(),
            got: coords.len(),
        });
    }
    let shapes = index.shapes();
    let mut scored: Vec<(f64, usize)> = (0..index.len())
        .map(|row| (euclidean(m.coords.row(row), coords), row))
        .collect();
    scored.sort_by(|a, b| by_cost_then_id((a.0, shapes[a.1].id), (b.0, shapes[b.1].id)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(distance, row)| Neighbor {
            id: shapes[row].id,
            name: shapes[row].name.clone(),
            distance,
        })
        .collect())
}
