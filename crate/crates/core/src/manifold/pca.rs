use nalgebra::{DMatrix, SymmetricEigen};

use super::PartManifold;
use crate::error::{Error, Result};

/// Projects manifold coordinates onto their top two principal components.
/// Each component is signed so that its largest-magnitude loading is
/// positive.
pub fn project_2d(m: &PartManifold) -> Result<Vec<[f64; 2]>> {
    let (n, dim) = (m.n(), m.dim());
    if n < 3 {
        return Err(Error::Size(format!(
            "need at least 3 points to project, got {n}"
        )));
    }
    let mut mean = vec![0.0; dim];
    for row in m.coords.rows() {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    for a in mean.iter_mut() {
        *a /= n as f64;
    }
    let centered = DMatrix::from_fn(n, dim, |i, k| m.coords.row(i)[k] - mean[k]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut axes = [vec![0.0; dim], vec![0.0; dim]];
    for (axis, &col) in axes.iter_mut().zip(&order) {
        let v = eig.eigenvectors.column(col);
        let pivot = (0..dim)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..dim {
            axis[k] = sign * v[k];
        }
    }
    Ok((0..n)
        .map(|i| {
            let row = centered.row(i);
            let proj = |axis: &[f64]| row.iter().zip(axis).map(|(a, b)| a * b).sum::<f64>();
            [proj(&axes[0]), proj(&axes[1])]
        })
        .collect())
}
