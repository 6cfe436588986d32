use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mesh, PartLabeledMesh, Point3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    /// Wavefront OBJ where `g <part>` assigns the label of subsequent faces.
    ObjGroups,
    /// `{vertices, triangles, face_labels, label_set}` with zero-based indices.
    Json,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()? {
            "obj" => Some(MeshFormat::ObjGroups),
            "json" => Some(MeshFormat::Json),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    face_labels: Vec<u32>,
    label_set: Vec<String>,
}

/// Loads a mesh and maps its labels onto `label_set`. Labels the file does not
/// use stay in the set with no faces.
pub fn load_mesh(path: &Path, format: MeshFormat, label_set: &[String]) -> Result<PartLabeledMesh> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::ObjGroups => parse_obj(&text, label_set),
        MeshFormat::Json => parse_json(&text, label_set),
    }
}

pub fn save_mesh(m: &PartLabeledMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let text = match format {
        MeshFormat::ObjGroups => to_obj(m),
        MeshFormat::Json => to_json(m)?,
    };
    fs::write(path, text)?;
    Ok(())
}

fn lookup(label_set: &[String], name: &str) -> Result<u16> {
    label_set
        .iter()
        .position(|l| l == name)
        .map(|i| i as u16)
        .ok_or_else(|| Error::Label(format!("`{name}` is not in the label set")))
}

pub(crate) fn parse_obj(text: &str, label_set: &[String]) -> Result<PartLabeledMesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles = Vec::new();
    let mut labels = Vec::new();
    let mut current: Option<u16> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
        match kind {
            "v" => {
                let mut p = [0.0; 3];
                for c in p.iter_mut() {
                    *c = tok
                        .next()
                        .ok_or_else(|| bad("vertex needs three coordinates"))?
                        .parse()
                        .map_err(|_| bad("bad vertex coordinate"))?;
                }
                vertices.push(p);
            }
            "g" => {
                current = match tok.next() {
                    Some(name) => Some(lookup(label_set, name)?),
                    None => None,
                };
            }
            "f" => {
                let label = current.ok_or_else(|| {
                    Error::Label(format!("line {}: face outside any group", lineno + 1))
                })?;
                let mut corners = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| bad("bad face index"))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(bad("face index 0"));
                    };
                    if resolved < 0 {
                        return Err(bad("face index out of range"));
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(bad("face needs at least three corners"));
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                    labels.push(label);
                }
            }
            _ => {}
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mesh = Mesh::new(vertices, triangles)?;
    PartLabeledMesh::new(mesh, labels, label_set.to_vec())
}

fn parse_json(text: &str, label_set: &[String]) -> Result<PartLabeledMesh> {
    let raw: MeshJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if raw.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let remap = raw
        .label_set
        .iter()
        .map(|l| lookup(label_set, l))
        .collect::<Result<Vec<_>>>()?;
    let labels =
        raw.face_labels
            .iter()
            .map(|&l| {
                remap.get(l as usize).copied().ok_or_else(|| {
                    Error::Label(format!("face label {l} outside the file's label set"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
    let mesh = Mesh::new(raw.vertices, raw.triangles)?;
    PartLabeledMesh::new(mesh, labels, label_set.to_vec())
}

pub(crate) fn to_obj(m: &PartLabeledMesh) -> String {
    let mut out = String::new();
    for v in m.mesh().vertices() {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    let mut current = None;
    for (t, &l) in m.mesh().triangles().iter().zip(m.face_labels()) {
        if current != Some(l) {
            let _ = writeln!(out, "g {}", m.label_set()[l as usize]);
            current = Some(l);
        }
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub(crate) fn to_json(m: &PartLabeledMesh) -> Result<String> {
    let raw = MeshJson {
        vertices: m.mesh().vertices().to_vec(),
        triangles: m.mesh().triangles().to_vec(),
        face_labels: m.face_labels().iter().map(|&l| l as u32).collect(),
        label_set: m.label_set().to_vec(),
    };
    Ok(serde_json::to_string(&raw)?)
}
