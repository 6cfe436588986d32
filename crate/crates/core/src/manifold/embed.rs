//! Placing a new point into an existing manifold from its distances to the
//! points already embedded there.

use nalgebra::{DMatrix, DVector};

use super::{euclidean, PartManifold, SammonConfig};
use crate::error::{Error, Result};

fn objective(x: &[f64], anchors: &[&[f64]], targets: &[f64], weights: &[f64]) -> f64 {
    anchors
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((a, &t), &w)| {
            let r = t - euclidean(x, a);
            r * r / w
        })
        .sum()
}

/// Minimizes `Σ_i (t_i − ‖x − a_i‖)² / max(t_i, floor)` over `x` with the
/// same backtracking descent as the manifold build. The descent runs from
/// the anchor with the smallest target and again from the linear
/// trilateration estimate; the lower of the two minima wins.
///
/// `targets` must already be in the anchors' coordinate units.
pub fn embed_against(anchors: &[&[f64]], targets: &[f64], cfg: &SammonConfig) -> Result<Vec<f64>> {
    if anchors.is_empty() {
        return Err(Error::EmptyManifold);
    }
    if anchors.len() != targets.len() {
        return Err(Error::Size(format!(
            "{} distances for {} anchors",
            targets.len(),
            anchors.len()
        )));
    }
    let dim = anchors[0].len();
    if dim == 0 {
        return Ok(Vec::new());
    }

    let mut positive: Vec<f64> = targets.iter().copied().filter(|&t| t > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let floor = cfg.distance_floor.unwrap_or_else(|| {
        positive
            .get(positive.len() / 2)
            .map_or(f64::MIN_POSITIVE, |m| 1e-9 * m)
    });
    let weights: Vec<f64> = targets.iter().map(|&t| t.max(floor)).collect();
    // objective curvature along a radial direction is 2/w per anchor
    let curvature: f64 = weights.iter().map(|w| 2.0 / w).sum();

    let start = (0..targets.len())
        .min_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)))
        .unwrap();
    let problem = Problem {
        anchors,
        targets,
        weights: &weights,
        base_step: cfg.step_factor / curvature,
    };
    let (mut x, mut f) = problem.descend(anchors[start].to_vec(), cfg);
    if let Some(guess) = trilaterate(anchors, targets) {
        let (y, g) = problem.descend(guess, cfg);
        if g < f {
            (x, f) = (y, g);
        }
    }
    debug_assert!(f.is_finite());
    Ok(x)
}

struct Problem<'a> {
    anchors: &'a [&'a [f64]],
    targets: &'a [f64],
    weights: &'a [f64],
    base_step: f64,
}

impl Problem<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        objective(x, self.anchors, self.targets, self.weights)
    }

    fn descend(&self, mut x: Vec<f64>, cfg: &SammonConfig) -> (Vec<f64>, f64) {
        let dim = x.len();
        let mut f = self.value(&x);
        for _ in 0..cfg.max_iters {
            if f == 0.0 {
                break;
            }
            let mut g = vec![0.0; dim];
            for ((a, &t), &w) in self.anchors.iter().zip(self.targets).zip(self.weights) {
                let d = euclidean(&x, a);
                if d == 0.0 {
                    // sitting on an anchor: leave it along the last axis
                    g[dim - 1] += -2.0 * t / w;
                    continue;
                }
                let k = -2.0 * (t - d) / (w * d);
                for (gk, (xk, ak)) in g.iter_mut().zip(x.iter().zip(a.iter())) {
                    *gk += k * (xk - ak);
                }
            }
            if g.iter().all(|&v| v == 0.0) {
                break;
            }
            let mut step = self.base_step;
            let mut accepted = None;
            for _ in 0..=20 {
                let cand: Vec<f64> = x.iter().zip(&g).map(|(xk, gk)| xk - step * gk).collect();
                let f_new = self.value(&cand);
                if f_new < f {
                    accepted = Some((cand, f_new));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, f_new)) = accepted else { break };
            let rel = (f - f_new) / f;
            x = cand;
            f = f_new;
            if rel < cfg.rel_tol {
                break;
            }
        }
        (x, f)
    }
}

/// Linear least-squares position from squared distances, restricted to the
/// affine span of the anchors: with `c` the anchor centroid,
/// `(a_i − c)·z = ½(‖a_i − c‖² − mean − t_i² + mean)` and `x = c + z`.
fn trilaterate(anchors: &[&[f64]], targets: &[f64]) -> Option<Vec<f64>> {
    let (m, dim) = (anchors.len(), anchors[0].len());
    if m < 2 {
        return None;
    }
    let mut c = vec![0.0; dim];
    for a in anchors {
        for (ck, ak) in c.iter_mut().zip(a.iter()) {
            *ck += ak / m as f64;
        }
    }
    let centered = DMatrix::from_fn(m, dim, |i, k| anchors[i][k] - c[k]);
    let spread: Vec<f64> = (0..m).map(|i| centered.row(i).norm_squared()).collect();
    let mean_spread = spread.iter().sum::<f64>() / m as f64;
    let mean_t2 = targets.iter().map(|t| t * t).sum::<f64>() / m as f64;
    let rhs = DVector::from_fn(m, |i, _| {
        0.5 * (spread[i] - mean_spread - targets[i] * targets[i] + mean_t2)
    });
    let svd = centered.svd(true, true);
    let eps = svd.singular_values.max() * 1e-10;
    let z = svd.solve(&rhs, eps).ok()?;
    let x: Vec<f64> = c.iter().zip(z.iter()).map(|(ck, zk)| ck + zk).collect();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Embeds a shape given its descriptor-space distances to every shape of the
/// manifold. Distances are divided by the manifold scale first.
pub fn out_of_sample_embed(
    m: &PartManifold,
    dists: &[f64],
    cfg: &SammonConfig,
) -> Result<Vec<f64>> {
    if m.n() == 0 {
        return Err(Error::EmptyManifold);
    }
    if dists.len() != m.n() {
        return Err(Error::Size(format!(
            "{} distances for a manifold of {} shapes",
            dists.len(),
            m.n()
        )));
    }
    let anchors: Vec<&[f64]> = m.coords.rows().collect();
    let targets: Vec<f64> = dists.iter().map(|d| d / m.scale).collect();
    embed_against(&anchors, &targets, cfg)
}
