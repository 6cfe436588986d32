//! Part-labeled triangle meshes, joint normalization and part splitting.

mod io;

pub use io::{load_mesh, save_mesh, MeshFormat};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// The four chair parts, in the order used throughout the crate.
pub const CHAIR_LABELS: [&str; 4] = ["backrest", "seat", "armrests", "legs"];

pub fn chair_labels() -> Vec<String> {
    CHAIR_LABELS.iter().map(|s| s.to_string()).collect()
}

/// Normalized coordinates are snapped to multiples of this step. Shapes that
/// differ only by translation and uniform scale then normalize to identical
/// vertex arrays instead of arrays that differ in the last few bits.
const SNAP: f64 = 1.0 / 4_294_967_296.0;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (f, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i as usize >= n) {
                return Err(Error::Parse(format!(
                    "triangle {f} references a vertex out of range ({n} vertices)"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Parse(format!("triangle {f} repeats a vertex index")));
            }
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Parse("non-finite vertex coordinate".into()));
        }
        Ok(Mesh {
            vertices,
            triangles,
        })
    }

    pub fn empty() -> Self {
        Mesh::default()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Corner positions of triangle `f`.
    pub fn triangle(&self, f: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn transformed(&self, t: &NormalizationTransform) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| t.apply(*v)).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartLabeledMesh {
    mesh: Mesh,
    face_labels: Vec<u16>,
    label_set: Vec<String>,
}

impl PartLabeledMesh {
    pub fn new(mesh: Mesh, face_labels: Vec<u16>, label_set: Vec<String>) -> Result<Self> {
        if face_labels.len() != mesh.triangle_count() {
            return Err(Error::Label(format!(
                "{} face labels for {} triangles",
                face_labels.len(),
                mesh.triangle_count()
            )));
        }
        if let Some(bad) = face_labels.iter().find(|&&l| l as usize >= label_set.len()) {
            return Err(Error::Label(format!(
                "face label {bad} outside a label set of {}",
                label_set.len()
            )));
        }
        Ok(PartLabeledMesh {
            mesh,
            face_labels,
            label_set,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn face_labels(&self) -> &[u16] {
        &self.face_labels
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    /// Labels that own at least one face, in label-set order.
    pub fn present_labels(&self) -> Vec<&str> {
        let mut seen = vec![false; self.label_set.len()];
        for &l in &self.face_labels {
            seen[l as usize] = true;
        }
        self.label_set
            .iter()
            .zip(seen)
            .filter(|(_, s)| *s)
            .map(|(l, _)| l.as_str())
            .collect()
    }
}

/// Maps a point `v` to `(v + translation) * scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationTransform {
    pub translation: [f64; 3],
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            translation: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn apply(&self, v: Point3) -> Point3 {
        let snap = |x: f64| (x / SNAP).round() * SNAP;
        [
            snap((v[0] + self.translation[0]) * self.scale),
            snap((v[1] + self.translation[1]) * self.scale),
            snap((v[2] + self.translation[2]) * self.scale),
        ]
    }
}

fn dist(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn farthest_from(points: &[Point3], from: Point3) -> Point3 {
    let mut best = points[0];
    let mut best_d = -1.0;
    for &p in points {
        let d = dist(p, from);
        if d > best_d {
            best_d = d;
            best = p;
        }
    }
    best
}

/// Ritter's bounding sphere followed by one refinement pass that re-measures
/// the radius as the largest vertex distance from the final center.
pub fn bounding_sphere(points: &[Point3]) -> Option<(Point3, f64)> {
    let first = *points.first()?;
    let y = farthest_from(points, first);
    let z = farthest_from(points, y);
    let mut center = [
        (y[0] + z[0]) / 2.0,
        (y[1] + z[1]) / 2.0,
        (y[2] + z[2]) / 2.0,
    ];
    let mut radius = dist(y, z) / 2.0;
    for &p in points {
        let d = dist(p, center);
        if d > radius {
            let grown = (radius + d) / 2.0;
            let k = (grown - radius) / d;
            for a in 0..3 {
                center[a] += (p[a] - center[a]) * k;
            }
            radius = grown;
        }
    }
    let radius = points
        .iter()
        .map(|&p| dist(p, center))
        .fold(0.0_f64, f64::max);
    Some((center, radius))
}

/// Centers the whole object's bounding sphere at the origin and scales it to
/// radius 1. Every part goes through the same transform.
///
/// All vertices count, including ones no triangle references; generators use
/// such vertices to pin a shared design volume across a family of shapes.
pub fn normalize(m: &PartLabeledMesh) -> Result<(PartLabeledMesh, NormalizationTransform)> {
    if m.mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (center, radius) = bounding_sphere(&m.mesh.vertices).ok_or(Error::EmptyMesh)?;
    if !(radius > 0.0) {
        return Err(Error::Degenerate("all vertices coincide".into()));
    }
    let t = NormalizationTransform {
        translation: [-center[0], -center[1], -center[2]],
        scale: 1.0 / radius,
    };
    let out = PartLabeledMesh {
        mesh: m.mesh.transformed(&t),
        face_labels: m.face_labels.clone(),
        label_set: m.label_set.clone(),
    };
    Ok((out, t))
}

/// One mesh per label, in label-set order. Labels without faces get an
/// empty mesh. Vertices are renumbered in order of first use.
pub fn split_parts(m: &PartLabeledMesh) -> Vec<(String, Mesh)> {
    m.label_set
        .iter()
        .enumerate()
        .map(|(li, label)| {
            let mut remap = vec![u32::MAX; m.mesh.vertices.len()];
            let mut vertices = Vec::new();
            let mut triangles = Vec::new();
            for (tri, _) in m
                .mesh
                .triangles
                .iter()
                .zip(&m.face_labels)
                .filter(|(_, &l)| l as usize == li)
            {
                let mut out = [0u32; 3];
                for (k, &vi) in tri.iter().enumerate() {
                    let slot = &mut remap[vi as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(m.mesh.vertices[vi as usize]);
                    }
                    out[k] = *slot;
                }
                triangles.push(out);
            }
            (
                label.clone(),
                Mesh {
                    vertices,
                    triangles,
                },
            )
        })
        .collect()
}

/// Builds meshes piece by piece, tracking the part label of every face.
#[derive(Clone, Debug)]
pub struct MeshBuilder {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    labels: Vec<u16>,
    label_set: Vec<String>,
}

impl MeshBuilder {
    pub fn new(label_set: Vec<String>) -> Self {
        MeshBuilder {
            vertices: Vec::new(),
            triangles: Vec::new(),
            labels: Vec::new(),
            label_set,
        }
    }

    pub fn label_index(&self, label: &str) -> Result<u16> {
        self.label_set
            .iter()
            .position(|l| l == label)
            .map(|i| i as u16)
            .ok_or_else(|| Error::Label(format!("unknown label `{label}`")))
    }

    pub fn push_vertex(&mut self, p: Point3) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    pub fn push_triangle(&mut self, tri: [u32; 3], label: u16) {
        self.triangles.push(tri);
        self.labels.push(label);
    }

    /// Fan-triangulates a convex polygon from its first corner.
    pub fn push_polygon(&mut self, corners: &[u32], label: u16) {
        for k in 1..corners.len().saturating_sub(1) {
            self.push_triangle([corners[0], corners[k], corners[k + 1]], label);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn build(self) -> Result<PartLabeledMesh> {
        let mesh = Mesh::new(self.vertices, self.triangles)?;
        PartLabeledMesh::new(mesh, self.labels, self.label_set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(offset: f64, size: f64) -> PartLabeledMesh {
        let mut b = MeshBuilder::new(chair_labels());
        let seat = b.label_index("seat").unwrap();
        let mut idx = Vec::new();
        for i in 0..8 {
            let p = [
                offset + size * (i & 1) as f64,
                offset + size * ((i >> 1) & 1) as f64,
                offset + size * ((i >> 2) & 1) as f64,
            ];
            idx.push(b.push_vertex(p));
        }
        for q in [
            [0, 1, 3, 2],
            [4, 6, 7, 5],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 5, 7, 3],
        ] {
            let c: Vec<u32> = q.iter().map(|&k| idx[k]).collect();
            b.push_polygon(&c, seat);
        }
        b.build().unwrap()
    }

    fn max_radius(m: &Mesh) -> f64 {
        m.vertices()
            .iter()
            .map(|&v| dist(v, [0.0; 3]))
            .fold(0.0, f64::max)
    }

    #[test]
    fn offset_cube_is_centered_with_unit_radius() {
        let (n, t) = normalize(&cube(5.0, 1.0)).unwrap();
        assert!((max_radius(n.mesh()) - 1.0).abs() < 1e-9);
        for a in 0..3 {
            assert!((t.translation[a] + 5.5).abs() < 1e-12);
            let mean: f64 = n.mesh().vertices().iter().map(|v| v[a]).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        let (once, _) = normalize(&cube(5.0, 1.0)).unwrap();
        let (twice, t) = normalize(&once).unwrap();
        assert_eq!(once, twice);
        assert!((t.scale - 1.0).abs() < 1e-9);
        assert!(t.translation.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn uniform_scale_normalizes_to_identical_vertices() {
        let (a, _) = normalize(&cube(0.25, 1.0)).unwrap();
        let (b, _) = normalize(&cube(0.75, 3.0)).unwrap();
        assert_eq!(a.mesh().vertices(), b.mesh().vertices());
    }

    #[test]
    fn coincident_vertices_are_degenerate() {
        let mesh = Mesh::new(vec![[1.0; 3]; 3], vec![[0, 1, 2]]).unwrap();
        let m = PartLabeledMesh::new(mesh, vec![0], chair_labels()).unwrap();
        assert!(matches!(normalize(&m), Err(Error::Degenerate(_))));
    }

    #[test]
    fn invalid_triangles_are_rejected() {
        assert!(Mesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 3]]).is_err());
        assert!(Mesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn split_covers_every_label_and_partitions_faces() {
        let m = cube(0.0, 1.0);
        let parts = split_parts(&m);
        assert_eq!(parts.len(), 4);
        let total: usize = parts.iter().map(|(_, p)| p.triangle_count()).sum();
        assert_eq!(total, m.mesh().triangle_count());
        let non_empty: Vec<_> = parts.iter().filter(|(_, p)| !p.is_empty()).collect();
        assert_eq!(non_empty.len(), 1);
        assert_eq!(non_empty[0].0, "seat");
        let (label, arms) = &parts[2];
        assert_eq!(label, "armrests");
        assert!(arms.is_empty() && arms.vertices().is_empty());
    }
}
