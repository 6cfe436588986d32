use nalgebra::{DMatrix, SymmetricEigen};

use super::{DistanceMatrix, Embedding};

/// Classical (Torgerson) MDS: top eigenpairs of the double-centered squared
/// distance matrix, negative eigenvalues truncated to zero. Columns beyond
/// the number of points stay zero. Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
pub fn classical_mds(d: &DistanceMatrix, dim: usize) -> Embedding {
    let n = d.n();
    let mut b = DMatrix::from_fn(n, n, |i, j| -0.5 * d.get(i, j) * d.get(i, j));
    let row_means: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = b[(i, j)] - row_means[i] - row_means[j] + grand;
        }
    }
    // enforce exact symmetry before the solver sees it
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&c))
    });

    let mut out = Embedding::zeros(n, dim);
    for (k, &col) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[col].max(0.0);
        if lambda == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(col);
        let pivot = (0..n)
            .max_by(|&a, &c| v[a].abs().total_cmp(&v[c].abs()).then(c.cmp(&a)))
            .unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let s = lambda.sqrt() * sign;
        for i in 0..n {
            out.row_mut(i)[k] = s * v[i];
        }
    }
    out
}
