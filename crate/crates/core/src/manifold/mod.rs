//! Per-part shape manifolds built by Sammon mapping.
//!
//! The pipeline for one part is: pairwise descriptor distances, collapse of
//! (near-)duplicate shapes, classical MDS for a starting configuration,
//! gradient descent on the Sammon error, re-expansion of duplicates and
//! finally a rescale so the RMS pairwise distance is 1. That last step makes
//! distances on different part manifolds comparable when blend queries add
//! them up.

mod classical;
mod embed;
mod pca;
mod sammon;

pub use classical::classical_mds;
pub use embed::{embed_against, out_of_sample_embed};
pub use pca::project_2d;
pub use sammon::{descend, sammon_gradient, sammon_stress, Descent};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{shape_distance, LightFieldDescriptor};
use crate::error::{Error, Result};

/// Row-major `n × dim` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Embedding {
            n,
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Size("rows of unequal length".into()));
        }
        Ok(Embedding {
            n: rows.len(),
            dim,
            data: rows.concat(),
        })
    }

    pub fn from_flat(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * dim {
            return Err(Error::Size(format!(
                "{} values for a {n}x{dim} embedding",
                data.len()
            )));
        }
        Ok(Embedding { n, dim, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1)).take(self.n)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.row(i), self.row(j))
    }

    /// Root mean square over all pairs `i < j` of embedded distances.
    pub fn rms_pairwise_distance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = self.distance(i, j);
                sum += d * d;
            }
        }
        let pairs = (self.n * (self.n - 1) / 2) as f64;
        (sum / pairs).sqrt()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric, zero-diagonal matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a full square array, checking symmetry, a zero
    /// diagonal and non-negative entries.
    pub fn from_full(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Size(format!("{} entries for {n}x{n}", data.len())));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::Size(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !(v >= 0.0) || v != data[j * n + i] {
                    return Err(Error::Size(format!("entry ({i}, {j}) breaks symmetry")));
                }
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    /// Distances between the rows of an embedding.
    pub fn from_points(points: &Embedding) -> Self {
        let n = points.n();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = points.distance(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Sum over `i < j`.
    pub fn upper_sum(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                s += self.get(i, j);
            }
        }
        s
    }

    pub fn median_positive(&self) -> Option<f64> {
        let mut v: Vec<f64> = (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .filter(|&d| d > 0.0)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        Some(if m % 2 == 1 {
            v[m / 2]
        } else {
            (v[m / 2 - 1] + v[m / 2]) / 2.0
        })
    }

    fn submatrix(&self, keep: &[usize]) -> DistanceMatrix {
        let m = keep.len();
        let mut data = vec![0.0; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                data[a * m + b] = self.get(i, j);
            }
        }
        DistanceMatrix { n: m, data }
    }
}

/// Pairwise shape distances; each pair is computed once and mirrored.
pub fn build_distance_matrix(descriptors: &[LightFieldDescriptor]) -> Result<DistanceMatrix> {
    let n = descriptors.len();
    if n < 2 {
        return Err(Error::Size(format!("need at least 2 shapes, got {n}")));
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| shape_distance(&descriptors[i], &descriptors[j]))
                .collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

/// Membership of every point in a duplicate group, plus the group layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DuplicateMap {
    /// For each point, the index of its group's representative (the group's
    /// smallest member).
    pub representative: Vec<u32>,
    /// Representatives in ascending order; position = row in the reduced matrix.
    pub representatives: Vec<u32>,
}

impl DuplicateMap {
    pub fn identity(n: usize) -> Self {
        let ids: Vec<u32> = (0..n as u32).collect();
        DuplicateMap {
            representative: ids.clone(),
            representatives: ids,
        }
    }

    pub fn from_representatives(representative: Vec<u32>) -> Result<Self> {
        for (i, &r) in representative.iter().enumerate() {
            let r = r as usize;
            if r > i || representative.get(r) != Some(&(r as u32)) {
                return Err(Error::Corruption(format!("bad duplicate entry for {i}")));
            }
        }
        let representatives = representative
            .iter()
            .enumerate()
            .filter(|(i, &r)| *i == r as usize)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(DuplicateMap {
            representative,
            representatives,
        })
    }

    /// Row in the reduced matrix for every original point.
    pub fn reduced_index(&self) -> Vec<usize> {
        let mut slot = vec![usize::MAX; self.representative.len()];
        for (k, &r) in self.representatives.iter().enumerate() {
            slot[r as usize] = k;
        }
        self.representative
            .iter()
            .map(|&r| slot[r as usize])
            .collect()
    }

    pub fn group_count(&self) -> usize {
        self.representatives.len()
    }

    pub fn collapsed_count(&self) -> usize {
        self.representative.len() - self.representatives.len()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Merges points closer than `floor` (and always exactly coincident ones)
/// into one representative, transitively.
pub fn collapse_duplicates(d: &DistanceMatrix, floor: f64) -> (DistanceMatrix, DuplicateMap) {
    let n = d.n;
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let v = d.get(i, j);
            if v < floor || v == 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                // the smaller index stays the root
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
    }
    let representative: Vec<u32> = (0..n).map(|i| find(&mut parent, i) as u32).collect();
    let map = DuplicateMap::from_representatives(representative)
        .expect("union-find roots are group minima");
    let keep: Vec<usize> = map.representatives.iter().map(|&r| r as usize).collect();
    (d.submatrix(&keep), map)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SammonConfig {
    pub dim: usize,
    pub max_iters: usize,
    /// First trial step of every line search, in units of the inverse of
    /// the largest diagonal curvature of the Sammon error.
    pub step_factor: f64,
    pub rel_tol: f64,
    /// Absolute duplicate floor; `None` means 1e-9 × median positive distance.
    pub distance_floor: Option<f64>,
    pub seed: u64,
}

impl Default for SammonConfig {
    fn default() -> Self {
        SammonConfig {
            dim: 128,
            max_iters: 500,
            step_factor: 0.3,
            rel_tol: 1e-7,
            distance_floor: None,
            seed: 0,
        }
    }
}

impl SammonConfig {
    pub fn with_dim(dim: usize) -> Self {
        SammonConfig {
            dim,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dim > 0
            && self.max_iters > 0
            && self.step_factor > 0.0
            && self.rel_tol > 0.0
            && self.distance_floor.map_or(true, |f| f > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid Sammon configuration {self:?}"
            )))
        }
    }

    pub fn floor_for(&self, d: &DistanceMatrix) -> f64 {
        self.distance_floor
            .unwrap_or_else(|| d.median_positive().map_or(f64::MIN_POSITIVE, |m| 1e-9 * m))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartManifold {
    pub part: String,
    /// Normalized coordinates, one row per shape.
    pub coords: Embedding,
    /// Divisor taking raw Sammon coordinates (descriptor-distance units) to
    /// the normalized ones.
    pub scale: f64,
    pub duplicates: DuplicateMap,
    /// Final Sammon error over the duplicate representatives.
    pub stress: f64,
}

impl PartManifold {
    pub fn n(&self) -> usize {
        self.coords.n()
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }
}

/// A built manifold together with the optimizer history.
#[derive(Clone, Debug)]
pub struct ManifoldBuild {
    pub manifold: PartManifold,
    /// Sammon error after initialization and after each accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap stopped the descent.
    pub converged: bool,
}

pub fn build_manifold(part: &str, d: &DistanceMatrix, cfg: &SammonConfig) -> Result<ManifoldBuild> {
    cfg.validate()?;
    if d.n() < 2 {
        return Err(Error::Size(format!(
            "need at least 2 shapes, got {}",
            d.n()
        )));
    }
    let (reduced, duplicates) = collapse_duplicates(d, cfg.floor_for(d));
    let slots = duplicates.reduced_index();

    if reduced.n() == 1 {
        // every shape is the same point; nothing to scale
        return Ok(ManifoldBuild {
            manifold: PartManifold {
                part: part.to_string(),
                coords: Embedding::zeros(d.n(), cfg.dim),
                scale: 1.0,
                duplicates,
                stress: 0.0,
            },
            trace: vec![0.0],
            iterations: 0,
            converged: true,
        });
    }

    let init = classical_mds(&reduced, cfg.dim);
    let run = descend(&reduced, init, cfg)?;

    let mut coords = Embedding::zeros(d.n(), cfg.dim);
    for (i, &k) in slots.iter().enumerate() {
        coords.row_mut(i).copy_from_slice(run.coords.row(k));
    }
    let raw = PartManifold {
        part: part.to_string(),
        coords,
        scale: 1.0,
        duplicates,
        stress: *run.trace.last().unwrap(),
    };
    Ok(ManifoldBuild {
        manifold: normalize_manifold(&raw)?,
        trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
    })
}

/// Rescales coordinates so their RMS pairwise distance is 1; the divisor is
/// folded into `scale`.
pub fn normalize_manifold(m: &PartManifold) -> Result<PartManifold> {
    if m.n() < 2 {
        return Err(Error::Size("need at least 2 points to normalize".into()));
    }
    let rms = m.coords.rms_pairwise_distance();
    if !(rms > 0.0) {
        return Err(Error::Degenerate("all manifold points coincide".into()));
    }
    let mut out = m.clone();
    for v in out.coords.as_mut_slice() {
        *v /= rms;
    }
    out.scale = m.scale * rms;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> Embedding {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Embedding::from_flat(n, dim, data).unwrap()
    }

    #[test]
    fn unit_basis_vectors_are_sqrt2_apart() {
        let e = |k: usize| {
            let mut v = vec![0.0f32; 3];
            v[k] = 1.0;
            LightFieldDescriptor::from_values(v)
        };
        let d = build_distance_matrix(&[e(0), e(1), e(2)]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 2f64.sqrt() };
                assert!((d.get(i, j) - expected).abs() < 1e-15);
                assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn duplicates_have_zero_distance_and_single_shape_is_rejected() {
        let a = LightFieldDescriptor::from_values(vec![1.0, 2.0]);
        let d = build_distance_matrix(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert!(matches!(build_distance_matrix(&[a]), Err(Error::Size(_))));
    }

    #[test]
    fn collapse_is_transitive() {
        // 0~1 and 1~2 under the floor, 0-2 above it
        #[rustfmt::skip]
        let d = DistanceMatrix::from_full(4, vec![
            0.0, 0.4, 0.8, 5.0,
            0.4, 0.0, 0.4, 5.0,
            0.8, 0.4, 0.0, 5.0,
            5.0, 5.0, 5.0, 0.0,
        ]).unwrap();
        let (r, map) = collapse_duplicates(&d, 0.5);
        assert_eq!(map.representative, vec![0, 0, 0, 3]);
        assert_eq!(map.representatives, vec![0, 3]);
        assert_eq!(r.n(), 2);
        assert_eq!(r.get(0, 1), 5.0);
        assert_eq!(map.reduced_index(), vec![0, 0, 0, 1]);
    }

    #[test]
    fn nothing_under_the_floor_is_identity() {
        let d = DistanceMatrix::from_points(&random_points(6, 3, 1));
        let (r, map) = collapse_duplicates(&d, 1e-9);
        assert_eq!(map, DuplicateMap::identity(6));
        assert_eq!(r, d);
    }

    #[test]
    fn zero_descriptors_collapse_to_one_representative() {
        let z = LightFieldDescriptor::zeros(4);
        let a = LightFieldDescriptor::from_values(vec![1.0, 0.0, 0.0, 0.0]);
        let d = build_distance_matrix(&[z.clone(), a, z.clone(), z]).unwrap();
        let cfg = SammonConfig::with_dim(2);
        let (_, map) = collapse_duplicates(&d, cfg.floor_for(&d));
        assert_eq!(map.representative, vec![0, 1, 0, 0]);
    }

    #[test]
    fn two_points_embed_exactly() {
        let d = DistanceMatrix::from_full(2, vec![0.0, 5.0, 5.0, 0.0]).unwrap();
        let b = build_manifold("legs", &d, &SammonConfig::with_dim(1)).unwrap();
        let m = &b.manifold;
        assert!(m.stress < 1e-20);
        // normalized to unit distance, raw distance recovered through scale
        assert!((m.coords.distance(0, 1) - 1.0).abs() < 1e-12);
        assert!((m.coords.distance(0, 1) * m.scale - 5.0).abs() < 1e-9);
    }

    #[test]
    fn all_identical_shapes_share_the_origin() {
        let z = LightFieldDescriptor::zeros(8);
        let d = build_distance_matrix(&vec![z; 5]).unwrap();
        let b = build_manifold("armrests", &d, &SammonConfig::with_dim(4)).unwrap();
        assert_eq!(b.manifold.duplicates.group_count(), 1);
        assert!(b.manifold.coords.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicates_get_identical_coordinates() {
        let mut pts = random_points(8, 3, 7);
        let copy = pts.row(2).to_vec();
        pts.row_mut(5).copy_from_slice(&copy);
        let d = DistanceMatrix::from_points(&pts);
        let b = build_manifold("seat", &d, &SammonConfig::with_dim(3)).unwrap();
        assert_eq!(b.manifold.coords.row(2), b.manifold.coords.row(5));
        assert_eq!(b.manifold.duplicates.collapsed_count(), 1);
    }

    #[test]
    fn normalization_sets_unit_rms_and_is_idempotent() {
        let m = PartManifold {
            part: "x".into(),
            coords: random_points(12, 4, 3),
            scale: 2.0,
            duplicates: DuplicateMap::identity(12),
            stress: 0.0,
        };
        let once = normalize_manifold(&m).unwrap();
        assert!((once.coords.rms_pairwise_distance() - 1.0).abs() < 1e-9);
        let twice = normalize_manifold(&once).unwrap();
        assert!((twice.scale - once.scale).abs() < 1e-9 * once.scale);
        for (a, b) in once.coords.as_slice().iter().zip(twice.coords.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        // positive rescaling keeps every nearest-neighbour ordering
        let q = 4;
        let order = |e: &Embedding| {
            let mut idx: Vec<usize> = (0..e.n()).collect();
            idx.sort_by(|&a, &b| e.distance(q, a).total_cmp(&e.distance(q, b)));
            idx
        };
        assert_eq!(order(&m.coords), order(&once.coords));
    }

    #[test]
    fn coincident_points_cannot_be_normalized() {
        let m = PartManifold {
            part: "x".into(),
            coords: Embedding::zeros(3, 2),
            scale: 1.0,
            duplicates: DuplicateMap::identity(3),
            stress: 0.0,
        };
        assert!(matches!(normalize_manifold(&m), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rejects_invalid_config() {
        let d = DistanceMatrix::from_full(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let cfg = SammonConfig {
            step_factor: 0.0,
            ..SammonConfig::with_dim(1)
        };
        assert!(matches!(
            build_manifold("x", &d, &cfg),
            Err(Error::Config(_))
        ));
    }
}
