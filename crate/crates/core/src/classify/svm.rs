//! Linear SVM trained by dual coordinate descent (L2 regularizer, hinge
//! loss). The bias is handled liblinear-style, as an extra constant-one
//! feature, so the dual is a pure box-constrained QP.
//!
//! Multiclass is one-vs-rest with deterministic tie-breaks.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SvmConfig {
    /// Hinge-loss weight.
    pub c: f64,
    /// Maximum projected-gradient violation at exit.
    pub tol: f64,
    /// Cap on full passes over the data.
    pub max_passes: usize,
    /// Seed for the per-pass coordinate shuffle.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            tol: 1e-4,
            max_passes: 100_000,
            seed: 0,
        }
    }
}

/// One trained binary problem. `weights` excludes the bias.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub passes: usize,
    /// Dual objective value at exit (the quantity being minimized).
    pub dual_objective: f64,
    /// Dual objective after each pass; non-increasing by construction.
    pub objective_curve: Vec<f64>,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Solve min_a 0.5 a'Qa - sum(a), 0 <= a_i <= C, with
/// Q_ij = y_i y_j (x_i . x_j + 1), maintaining w = sum a_i y_i [x_i; 1].
///
/// Coordinates whose projected gradient shows them pinned at a bound are
/// shrunk out of the sweep; when the active set converges, the full set
/// is re-checked before declaring convergence.
pub fn solve_binary(x: ArrayView2<f64>, y: &[f64], cfg: &SvmConfig) -> Result<BinarySvm> {
    let n = x.nrows();
    let d = x.ncols();
    if y.len() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n} rows but {} targets",
            y.len()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument("targets must be +/-1".into()));
    }
    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; d + 1]; // last slot is the bias coordinate

    // contiguous row storage for the hot loop
    let rows_owned: Array2<f64>;
    let rows_flat: &[f64] = match x.as_slice() {
        Some(s) => s,
        None => {
            rows_owned = x.to_owned();
            rows_owned.as_slice().expect("owned array is contiguous")
        }
    };
    let row = |i: usize| &rows_flat[i * d..(i + 1) * d];
    let q_ii: Vec<f64> = (0..n)
        .map(|i| row(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut active: Vec<usize> = (0..n).collect();
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut converged = false;
    let mut passes = 0usize;
    let mut curve = Vec::new();

    while passes < cfg.max_passes {
        active.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        let mut next_active = Vec::with_capacity(active.len());
        for &i in &active {
            let xi = row(i);
            let mut dot = 0.0;
            for (a, b) in w[..d].iter().zip(xi) {
                dot += a * b;
            }
            let g = y[i] * (dot + w[d]) - 1.0;
            let pg;
            if alpha[i] <= 0.0 {
                if g > pg_max_old {
                    continue; // shrink: pinned at the lower bound
                }
                pg = g.min(0.0);
            } else if alpha[i] >= cfg.c {
                if g < pg_min_old {
                    continue; // shrink: pinned at the upper bound
                }
                pg = g.max(0.0);
            } else {
                pg = g;
            }
            next_active.push(i);
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-14 {
                let new_alpha = (alpha[i] - g / q_ii[i]).clamp(0.0, cfg.c);
                let delta = new_alpha - alpha[i];
                if delta != 0.0 {
                    let step = delta * y[i];
                    for (wk, xk) in w[..d].iter_mut().zip(xi) {
                        *wk += step * xk;
                    }
                    w[d] += step;
                    alpha[i] = new_alpha;
                }
            }
        }
        passes += 1;
        let norm2: f64 = w.iter().map(|v| v * v).sum();
        curve.push(0.5 * norm2 - alpha.iter().sum::<f64>());

        let gap = if next_active.is_empty() {
            0.0
        } else {
            pg_max - pg_min
        };
        if gap <= cfg.tol {
            if next_active.len() == n {
                converged = true;
                break;
            }
            // re-check everything before accepting convergence
            active = (0..n).collect();
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
        } else {
            active = next_active;
            pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
            pg_min_old = if pg_min >= 0.0 {
                f64::NEG_INFINITY
            } else {
                pg_min
            };
        }
    }

    let dual_objective = *curve.last().expect("at least one pass");
    let bias = w[d];
    w.truncate(d);
    Ok(BinarySvm {
        weights: w,
        bias,
        converged,
        passes,
        dual_objective,
        objective_curve: curve,
    })
}

/// One-vs-rest multiclass linear SVM.
#[derive(Debug, Clone)]
pub struct LinearSvmModel {
    /// Sorted distinct training labels; column j of the decision values
    /// corresponds to `classes[j]`.
    pub classes: Vec<usize>,
    pub dim: usize,
    pub binaries: Vec<BinarySvm>,
    pub converged: bool,
}

pub fn train_linear_svm(
    x: ArrayView2<f64>,
    labels: &[usize],
    cfg: &SvmConfig,
) -> Result<LinearSvmModel> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} rows but {} labels",
            labels.len()
        )));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need >= 2 classes, got {}",
            classes.len()
        )));
    }
    let mut binaries = Vec::with_capacity(classes.len());
    for (ci, &c) in classes.iter().enumerate() {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == c { 1.0 } else { -1.0 })
            .collect();
        let mut sub_cfg = cfg.clone();
        sub_cfg.seed = cfg.seed.wrapping_add(ci as u64);
        binaries.push(solve_binary(x, &y, &sub_cfg)?);
    }
    let converged = binaries.iter().all(|b| b.converged);
    Ok(LinearSvmModel {
        classes,
        dim: x.ncols(),
        binaries,
        converged,
    })
}

/// Per-class decision values w_c . x + b_c, [n x n_classes].
pub fn decision_values(model: &LinearSvmModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.dim {
        return Err(Error::InvalidArgument(format!(
            "feature dimension {} does not match model dimension {}",
            x.ncols(),
            model.dim
        )));
    }
    let mut out = Array2::zeros((x.nrows(), model.classes.len()));
    for r in 0..x.nrows() {
        let row = x.row(r);
        let row_slice = row.as_slice().expect("contiguous row");
        for (j, b) in model.binaries.iter().enumerate() {
            out[(r, j)] = b.decision(row_slice);
        }
    }
    Ok(out)
}

/// Argmax over one-vs-rest decision values; ties go to the lower class
/// index.
pub fn predict(model: &LinearSvmModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    let scores = decision_values(model, x)?;
    Ok(scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            model.classes[best]
        })
        .collect())
}
