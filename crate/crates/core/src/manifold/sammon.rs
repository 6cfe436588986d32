//! The Sammon error, its exact gradient, and a monotone descent on it.
//!
//! For input distances `D` and embedded distances `d`:
//!
//! ```text
//! E = 1/c · Σ_{i<j} (D_ij − d_ij)² / D_ij,     c = Σ_{i<j} D_ij
//! ∂E/∂y_i = −2/c · Σ_{j≠i} (D_ij − d_ij) / (D_ij · d_ij) · (y_i − y_j)
//! ```

use super::{DistanceMatrix, Embedding, SammonConfig};
use crate::error::{Error, Result};

fn check_nonsingular(d: &DistanceMatrix) -> Result<()> {
    for i in 0..d.n() {
        for j in i + 1..d.n() {
            if !(d.get(i, j) > 0.0) {
                return Err(Error::Singular(i, j));
            }
        }
    }
    Ok(())
}

fn check_shape(d: &DistanceMatrix, y: &Embedding) -> Result<()> {
    if d.n() != y.n() {
        return Err(Error::Size(format!(
            "{} distances rows but {} points",
            d.n(),
            y.n()
        )));
    }
    Ok(())
}

fn stress_unchecked(d: &DistanceMatrix, y: &Embedding, c: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..d.n() {
        let yi = y.row(i);
        let di = d.row(i);
        for j in i + 1..d.n() {
            let dd = super::euclidean(yi, y.row(j));
            let r = di[j] - dd;
            sum += r * r / di[j];
        }
    }
    sum / c
}

pub fn sammon_stress(d: &DistanceMatrix, y: &Embedding) -> Result<f64> {
    check_shape(d, y)?;
    check_nonsingular(d)?;
    Ok(stress_unchecked(d, y, d.upper_sum()))
}

/// Pairs whose embedded points coincide contribute nothing; the descent
/// separates such points before asking for a gradient.
fn gradient_unchecked(d: &DistanceMatrix, y: &Embedding, c: f64) -> Embedding {
    let (n, dim) = (y.n(), y.dim());
    let mut g = Embedding::zeros(n, dim);
    for i in 0..n {
        let yi = y.row(i);
        let di = d.row(i);
        for j in i + 1..n {
            let yj = y.row(j);
            let dd = super::euclidean(yi, yj);
            if dd == 0.0 {
                continue;
            }
            let k = -2.0 / c * (di[j] - dd) / (di[j] * dd);
            for a in 0..dim {
                let t = k * (yi[a] - yj[a]);
                g.data[i * dim + a] += t;
                g.data[j * dim + a] -= t;
            }
        }
    }
    g
}

pub fn sammon_gradient(d: &DistanceMatrix, y: &Embedding) -> Result<Embedding> {
    check_shape(d, y)?;
    check_nonsingular(d)?;
    Ok(gradient_unchecked(d, y, d.upper_sum()))
}

/// Moves the later point of every coincident pair by `amount` along the
/// last coordinate axis. Returns whether anything moved.
fn separate_coincident(y: &mut Embedding, amount: f64) -> bool {
    let (n, dim) = (y.n(), y.dim());
    if dim == 0 {
        return false;
    }
    let mut moved = false;
    for i in 0..n {
        for j in i + 1..n {
            if y.row(i) == y.row(j) {
                y.data[j * dim + dim - 1] += amount;
                moved = true;
            }
        }
    }
    moved
}

#[derive(Clone, Debug)]
pub struct Descent {
    pub coords: Embedding,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient descent with backtracking. Each line search starts at
/// `step_factor` times the inverse of the largest diagonal curvature
/// `2/c · Σ_j 1/D_ij` and halves up to 20 times; only strictly improving
/// steps are accepted, so the recorded trace never increases.
pub fn descend(d: &DistanceMatrix, init: Embedding, cfg: &SammonConfig) -> Result<Descent> {
    check_shape(d, &init)?;
    check_nonsingular(d)?;
    let n = d.n();
    let c = d.upper_sum();
    let max_curvature = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| 1.0 / d.get(i, j))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        * 2.0
        / c;
    let base_step = cfg.step_factor / max_curvature;
    let mean_distance = c / (n * (n - 1) / 2) as f64;

    let mut y = init;
    let mut e = stress_unchecked(d, &y, c);
    let mut trace = vec![e];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if e == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;

        // coincident points have no gradient; evaluate at a separated copy
        let mut at = y.clone();
        let rms = at.rms_pairwise_distance();
        let jitter = 1e-9 * if rms > 0.0 { rms } else { mean_distance };
        separate_coincident(&mut at, jitter);
        let g = gradient_unchecked(d, &at, c);
        if g.data.iter().all(|&v| v == 0.0) {
            converged = true;
            break;
        }

        let mut step = base_step;
        let mut accepted = None;
        for _ in 0..=20 {
            let mut cand = at.clone();
            for (v, gv) in cand.data.iter_mut().zip(&g.data) {
                *v -= step * gv;
            }
            let e_new = stress_unchecked(d, &cand, c);
            if e_new < e {
                accepted = Some((cand, e_new));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, e_new)) = accepted else {
            converged = true;
            break;
        };
        let rel = (e - e_new) / e;
        y = cand;
        e = e_new;
        trace.push(e);
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(Descent {
        coords: y,
        trace,
        iterations,
        converged,
    })
}
