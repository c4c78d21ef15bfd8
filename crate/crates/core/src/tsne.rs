//! Exact t-SNE in two dimensions.
//!
//! High-dimensional affinities are Gaussian conditionals calibrated per row
//! by bisection on the precision until the row's perplexity `exp(H)` matches
//! the target, then symmetrized as `(P + P^T) / 2n`. The layout kernel is a
//! Student-t with one degree of freedom. Optimization is gradient descent
//! with momentum, per-coordinate adaptive gains, and early exaggeration of
//! `P` for the first iterations.
//!
//! Everything is `O(n^2)` per iteration; there is no Barnes-Hut tree.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{par, rng, Error, Matrix, Result};

const PERPLEXITY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 100;
const MIN_GAIN: f64 = 0.01;
const INIT_SD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations during which `P` is exaggerated and the initial momentum
    /// applies.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

impl TsneConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity > 0.0) || self.perplexity >= n as f64 {
            return Err(Error::Config(format!(
                "perplexity {} must lie in (0, {n})",
                self.perplexity
            )));
        }
        if self.iterations == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config("iterations and learning rate must be positive".into()));
        }
        if self.early_exaggeration != 1.0 && self.iterations < self.exaggeration_iterations {
            return Err(Error::Config(format!(
                "{} iterations is shorter than the {}-iteration exaggeration phase",
                self.iterations, self.exaggeration_iterations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    /// n x 2, column means zero.
    pub layout: Matrix,
    /// KL(P || Q) against the unexaggerated `P`, one value per iteration,
    /// evaluated at the layout the iteration started from.
    pub kl_trace: Vec<f64>,
}

/// Row-conditional Gaussian affinities `p(j | i)` with their precisions.
#[derive(Debug, Clone)]
pub struct ConditionalAffinities {
    pub p: Matrix,
    /// `beta_i = 1 / (2 sigma_i^2)`
    pub betas: Vec<f64>,
}

fn squared_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let rows = par::map_range(n, |i| {
        (0..n)
            .map(|j| {
                x.row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
    });
    Matrix::from_vec(n, n, rows.concat()).expect("square")
}

/// Normalized conditional row for precision `beta`, with its entropy in nats.
fn gaussian_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // shift by the smallest off-diagonal distance to avoid underflow
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-beta * (d - dmin)).exp() };
        sum += *o;
    }
    let mut entropy = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            entropy -= *o * o.ln();
        }
    }
    entropy
}

/// Per-row calibration of Gaussian conditionals to the target perplexity.
pub fn conditional_affinities(x: &Matrix, perplexity: f64) -> Result<ConditionalAffinities> {
    let n = x.rows();
    if n < 3 {
        return Err(Error::InsufficientData(format!("t-SNE needs at least 3 points, got {n}")));
    }
    if !(perplexity > 0.0) || perplexity >= n as f64 {
        return Err(Error::Config(format!("perplexity {perplexity} must lie in (0, {n})")));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("input contains non-finite values".into()));
    }
    let dist = squared_distances(x);
    let target = perplexity.ln();
    let rows = par::map_range(n, |i| -> Result<(Vec<f64>, f64)> {
        let d = dist.row(i);
        if d.iter().enumerate().all(|(j, &v)| j == i || v == 0.0) {
            return Err(Error::DegenerateRow { row: i });
        }
        let mut row = vec![0.0; n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0 / d.iter().sum::<f64>().max(f64::MIN_POSITIVE) * (n - 1) as f64;
        for _ in 0..MAX_BISECTIONS {
            let h = gaussian_row(d, i, beta, &mut row);
            if (h.exp() - perplexity).abs() < PERPLEXITY_TOL {
                break;
            }
            if h > target {
                // too flat: sharpen
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        gaussian_row(d, i, beta, &mut row);
        Ok((row, beta))
    });
    let mut p = Matrix::zeros(n, n);
    let mut betas = Vec::with_capacity(n);
    for (i, r) in rows.into_iter().enumerate() {
        let (row, beta) = r?;
        p.row_mut(i).copy_from_slice(&row);
        betas.push(beta);
    }
    Ok(ConditionalAffinities { p, betas })
}

/// Perplexity `exp(H)` realized by each row of a conditional matrix.
pub fn row_perplexities(p: &Matrix) -> Vec<f64> {
    p.iter_rows()
        .map(|r| {
            let h: f64 = r.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum();
            h.exp()
        })
        .collect()
}

/// Joint affinities `(P + P^T) / 2n`: symmetric, zero diagonal, summing to 1.
pub fn hd_affinities(x: &Matrix, perplexity: f64) -> Result<Matrix> {
    let cond = conditional_affinities(x, perplexity)?.p;
    let n = cond.rows();
    let mut joint = Matrix::zeros(n, n);
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            joint.set(i, j, (cond.get(i, j) + cond.get(j, i)) / denom);
        }
    }
    Ok(joint)
}

/// Student-t kernel weights `w_ij = 1 / (1 + |y_i - y_j|^2)` (zero diagonal)
/// and their total.
fn student_weights(y: &Matrix) -> (Matrix, f64) {
    let n = y.rows();
    let rows = par::map_range(n, |i| {
        let (yi0, yi1) = (y.get(i, 0), y.get(i, 1));
        (0..n)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    let (a, b) = (yi0 - y.get(j, 0), yi1 - y.get(j, 1));
                    1.0 / (1.0 + a * a + b * b)
                }
            })
            .collect::<Vec<_>>()
    });
    let row_sums: Vec<f64> = rows.iter().map(|r| par::ordered_sum(r)).collect();
    let total = par::ordered_sum(&row_sums);
    (Matrix::from_vec(n, n, rows.concat()).expect("square"), total)
}

fn check_shapes(p: &Matrix, y: &Matrix) -> Result<()> {
    if p.rows() != p.cols() || p.rows() != y.rows() || y.cols() != 2 {
        return Err(Error::Shape(format!(
            "P is {}x{}, layout is {}x{}",
            p.rows(),
            p.cols(),
            y.rows(),
            y.cols()
        )));
    }
    Ok(())
}

/// KL(P || Q) for the Student-t `Q` induced by layout `y`.
pub fn kl_divergence(p: &Matrix, y: &Matrix) -> Result<f64> {
    check_shapes(p, y)?;
    let (w, z) = student_weights(y);
    Ok(kl_from_weights(p, &w, z))
}

fn kl_from_weights(p: &Matrix, w: &Matrix, z: f64) -> f64 {
    let n = p.rows();
    let parts = par::map_range(n, |i| {
        (0..n)
            .filter(|&j| j != i && p.get(i, j) > 0.0)
            .map(|j| {
                let q = (w.get(i, j) / z).max(f64::MIN_POSITIVE);
                p.get(i, j) * (p.get(i, j) / q).ln()
            })
            .sum::<f64>()
    });
    par::ordered_sum(&parts)
}

fn gradient_from_weights(p: &Matrix, y: &Matrix, w: &Matrix, z: f64, scale_p: f64) -> Matrix {
    let n = p.rows();
    let mut grad = Matrix::zeros(n, 2);
    par::for_each_row_mut(grad.as_mut_slice(), 2, |i, g| {
        let (mut g0, mut g1) = (0.0, 0.0);
        for j in 0..n {
            if j == i {
                continue;
            }
            let wij = w.get(i, j);
            let m = (scale_p * p.get(i, j) - wij / z) * wij;
            g0 += m * (y.get(i, 0) - y.get(j, 0));
            g1 += m * (y.get(i, 1) - y.get(j, 1));
        }
        g[0] = 4.0 * g0;
        g[1] = 4.0 * g1;
    });
    grad
}

/// Gradient of KL(P || Q) with respect to the layout:
/// `4 * sum_j (p_ij - q_ij) (1 + |y_i - y_j|^2)^-1 (y_i - y_j)`.
pub fn kl_gradient(p: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_shapes(p, y)?;
    let (w, z) = student_weights(y);
    Ok(gradient_from_weights(p, y, &w, z, 1.0))
}

fn recentre(y: &mut Matrix) {
    let n = y.rows() as f64;
    for c in 0..2 {
        let m = (0..y.rows()).map(|i| y.get(i, c)).sum::<f64>() / n;
        for i in 0..y.rows() {
            y.set(i, c, y.get(i, c) - m);
        }
    }
}

/// Embeds the rows of `x` in two dimensions.
pub fn tsne_embed(x: &Matrix, config: &TsneConfig) -> Result<TsneResult> {
    let n = x.rows();
    if n >= 2 && (1..n).all(|i| x.row(i) == x.row(0)) {
        return Err(Error::DegenerateInput("all points are identical".into()));
    }
    config.validate(n)?;
    let p = hd_affinities(x, config.perplexity)?;

    let mut rng = rng::seeded(config.seed);
    let normal = Normal::new(0.0, INIT_SD).expect("valid sd");
    let init: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let mut y = Matrix::from_vec(n, 2, init)?;
    let mut velocity = Matrix::zeros(n, 2);
    let mut gains = vec![1.0f64; 2 * n];
    let mut kl_trace = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let early = it < config.exaggeration_iterations;
        let exaggeration = if early { config.early_exaggeration } else { 1.0 };
        let momentum = if early { config.initial_momentum } else { config.final_momentum };

        let (w, z) = student_weights(&y);
        kl_trace.push(kl_from_weights(&p, &w, z));
        let grad = gradient_from_weights(&p, &y, &w, z, exaggeration);

        let (ys, vs, gs) = (y.as_mut_slice(), velocity.as_mut_slice(), grad.as_slice());
        for k in 0..2 * n {
            gains[k] = if (gs[k] > 0.0) != (vs[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(MIN_GAIN)
            };
            vs[k] = momentum * vs[k] - config.learning_rate * gains[k] * gs[k];
            ys[k] += vs[k];
        }
        recentre(&mut y);
    }
    recentre(&mut y);
    Ok(TsneResult { layout: y, kl_trace })
}
