//! Perplexity-calibrated high-dimensional affinities and Student-t
//! low-dimensional affinities, in plain and kernelized form.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::kernels::{kernel_distance_matrix, row, sq_dist, KernelSpec};
use crate::{Error, Result};

/// Lower bound applied to every off-diagonal joint probability in P.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Entropy tolerance (nats) for the bandwidth search.
pub const ENTROPY_TOLERANCE: f64 = 1e-5;

/// Bisection steps allowed once β is bracketed.
pub const MAX_BISECTION_STEPS: usize = 50;

// Each doubling/halving moves β by a factor of two; 1074 halvings reach the
// smallest subnormal, so this cannot cut a meaningful search short.
const MAX_BRACKET_STEPS: usize = 1100;

/// Row-stochastic `p_{j|i}` together with the per-point Gaussian bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinities {
    pub values: Array2<f64>,
    /// Gaussian bandwidths. Zero when the row is uniform over tied nearest
    /// neighbours that already exceed the target perplexity.
    pub sigmas: Array1<f64>,
}

/// Symmetric joint probabilities over ordered pairs `i ≠ j`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAffinities {
    pub values: Array2<f64>,
    pub floor: f64,
}

impl JointAffinities {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| self.values[[i, j]] == self.values[[j, i]]))
    }
}

struct RowCalibration {
    probs: Vec<f64>,
    beta: f64,
}

/// Normalized Gaussian row and its Shannon entropy (nats) at precision `beta`.
/// Distances are shifted by the row minimum so the largest weight is exactly 1.
fn row_at_beta(dist: &[f64], i: usize, shift: f64, beta: f64, probs: &mut [f64]) -> f64 {
    let mut total = 0.0;
    let mut weighted = 0.0;
    for (j, (p, &d)) in probs.iter_mut().zip(dist).enumerate() {
        if j == i {
            *p = 0.0;
            continue;
        }
        let delta = d - shift;
        let w = if delta == 0.0 { 1.0 } else { (-beta * delta).exp() };
        *p = w;
        total += w;
        weighted += w * delta;
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    total.ln() + beta * weighted / total
}

fn calibrate_row(dist: &[f64], i: usize, target: f64) -> Result<RowCalibration> {
    let n = dist.len();
    let mut probs = vec![0.0; n];
    let others = || dist.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, d)| *d);
    if others().all(|d| d == 0.0) {
        return Err(Error::Degenerate(format!(
            "row {i} has zero distance to every other point"
        )));
    }
    let shift = others().fold(f64::INFINITY, f64::min);
    // Ties at the minimum bound the entropy from below; when that bound already
    // exceeds the target, the limit β → ∞ (uniform over the ties) is the answer.
    let ties = others().filter(|&d| d == shift).count();
    if (ties as f64).ln() >= target - ENTROPY_TOLERANCE {
        row_at_beta(dist, i, shift, f64::INFINITY, &mut probs);
        return Ok(RowCalibration { probs, beta: f64::INFINITY });
    }
    let mut beta = 1.0;
    if n == 2 {
        row_at_beta(dist, i, shift, beta, &mut probs);
        return Ok(RowCalibration { probs, beta });
    }

    // Entropy decreases in β: too much entropy means β is too small.
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut expansions = 0;
    let mut bisections = 0;
    loop {
        let h = row_at_beta(dist, i, shift, beta, &mut probs);
        let diff = h - target;
        if diff.abs() < ENTROPY_TOLERANCE {
            break;
        }
        if diff > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        if hi.is_infinite() || lo == 0.0 {
            if expansions == MAX_BRACKET_STEPS {
                break;
            }
            expansions += 1;
            beta = if hi.is_infinite() { beta * 2.0 } else { beta / 2.0 };
        } else {
            if bisections == MAX_BISECTION_STEPS {
                break;
            }
            bisections += 1;
            beta = 0.5 * (lo + hi);
        }
    }
    Ok(RowCalibration { probs, beta })
}

/// Per-point conditional affinities `p_{j|i}` with bandwidths chosen so each
/// row's perplexity `2^H` matches `perplexity`.
///
/// `distances` holds squared distances: Euclidean for plain t-SNE or
/// kernel-induced for the kernelized variants.
pub fn conditional_affinities(distances: ArrayView2<'_, f64>, perplexity: f64) -> Result<ConditionalAffinities> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::Dimension(format!(
            "distance matrix must be square, got {}×{}",
            n,
            distances.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::Input("need at least 2 points".into()));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::Parameter(format!(
            "perplexity must lie in (1, {n}), got {perplexity}"
        )));
    }
    if let Some(((i, j), v)) = distances
        .indexed_iter()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::Input(format!(
            "distance ({i}, {j}) = {v} is not a finite non-negative value"
        )));
    }

    let target = perplexity.ln();
    let rows: Vec<RowCalibration> = (0..n)
        .into_par_iter()
        .map(|i| calibrate_row(&row(&distances, i), i, target))
        .collect::<Result<_>>()?;

    let mut values = Array2::<f64>::zeros((n, n));
    let mut sigmas = Array1::<f64>::zeros(n);
    for (i, cal) in rows.into_iter().enumerate() {
        values.row_mut(i).assign(&Array1::from(cal.probs));
        sigmas[i] = (0.5 / cal.beta).sqrt();
    }
    Ok(ConditionalAffinities { values, sigmas })
}

/// Joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2n`.
///
/// The floor is applied as a uniform mixture,
/// `p = (1 − n(n−1)·floor)·p_raw + floor`, which keeps every off-diagonal
/// entry at or above the floor while preserving a total of exactly one.
pub fn symmetrize(conditional: &ConditionalAffinities) -> JointAffinities {
    let c = &conditional.values;
    let n = c.nrows();
    let mass = (n * (n - 1)) as f64 * PROBABILITY_FLOOR;
    debug_assert!(mass < 1.0, "too many points for the probability floor");
    let keep = 1.0 - mass;
    let scale = keep / (2.0 * n as f64);
    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let p = (c[[i, j]] + c[[j, i]]) * scale + PROBABILITY_FLOOR;
            values[[i, j]] = p;
            values[[j, i]] = p;
        }
    }
    JointAffinities {
        values,
        floor: PROBABILITY_FLOOR,
    }
}

/// Normalizes a symmetric weight matrix (zero diagonal) over all ordered pairs.
/// Row sums are reduced sequentially so the result is independent of threading.
fn normalize_weights(mut w: Array2<f64>) -> JointAffinities {
    let z: f64 = w.sum_axis(Axis(1)).iter().sum();
    w.par_mapv_inplace(|v| v / z);
    JointAffinities {
        values: w,
        floor: 0.0,
    }
}

fn symmetric_weights<F>(n: usize, weight: F) -> Array2<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let mut w = Array2::<f64>::zeros((n, n));
    w.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut r)| {
            for j in (i + 1)..n {
                r[j] = weight(i, j);
            }
        });
    for i in 0..n {
        for j in 0..i {
            w[[i, j]] = w[[j, i]];
        }
    }
    w
}

/// Student-t (one degree of freedom) weights `(1 + ‖y_i − y_j‖²)⁻¹`.
pub(crate) fn student_t_weights(y: ArrayView2<'_, f64>) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = (0..y.nrows()).map(|i| row(&y, i)).collect();
    symmetric_weights(rows.len(), |i, j| (1.0 + sq_dist(&rows[i], &rows[j])).recip())
}

/// Low-dimensional affinities `q_ij ∝ (1 + ‖y_i − y_j‖²)⁻¹`.
pub fn student_t_affinities(y: ArrayView2<'_, f64>) -> Result<JointAffinities> {
    check_embedding(y)?;
    Ok(normalize_weights(student_t_weights(y)))
}

/// `(1 + d/α)^(−(α+1)/2)`, with the `α = 1` case written as a reciprocal.
#[inline]
pub(crate) fn heavy_tail_weight(d: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        (1.0 + d).recip()
    } else {
        (1.0 + d / alpha).powf(-0.5 * (alpha + 1.0))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "degrees of freedom must be ≥ 1, got {alpha}"
        )));
    }
    Ok(())
}

fn check_embedding(y: ArrayView2<'_, f64>) -> Result<()> {
    if y.nrows() < 2 {
        return Err(Error::Input("need at least 2 embedded points".into()));
    }
    crate::kernels::check_finite(y, "embedding")
}

/// Kernelized low-dimensional affinities
/// `q_ij ∝ (1 + ‖φ(y_i) − φ(y_j)‖²/α)^(−(α+1)/2)`.
pub fn kernel_student_t_affinities(spec: &KernelSpec, y: ArrayView2<'_, f64>, alpha: f64) -> Result<JointAffinities> {
    check_alpha(alpha)?;
    check_embedding(y)?;
    let d = kernel_distance_matrix(spec, y)?.0;
    let n = d.nrows();
    Ok(normalize_weights(symmetric_weights(n, |i, j| {
        heavy_tail_weight(d[[i, j]], alpha)
    })))
}
