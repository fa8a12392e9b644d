//! Trustworthiness of an embedding: how many embedding-space neighbors are
//! intruders that were not neighbors in the data space, weighted by how far
//! down the data-space ranking they sit.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{check_finite, row, sq_dist};
use crate::{Error, Result};

/// Per-k trustworthiness scores, averaged over subsampling repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustworthinessReport {
    pub name: String,
    pub k_values: Vec<usize>,
    pub scores: Vec<f64>,
    /// Points per evaluated sample.
    pub n: usize,
    pub repeats: usize,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || 2 * k >= n {
        return Err(Error::Parameter(format!(
            "neighborhood size k = {k} must satisfy 1 ≤ k < n/2 with n = {n}"
        )));
    }
    Ok(())
}

fn check_pair(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Input(format!(
            "data has {} rows but the embedding has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    check_finite(x, "data matrix")?;
    check_finite(y, "embedding")
}

/// Indices `j ≠ i` ordered by distance to `i`, ties broken by index.
fn neighbor_order(rows: &[Vec<f64>], i: usize) -> Vec<usize> {
    let d: Vec<f64> = rows.iter().map(|r| sq_dist(&rows[i], r)).collect();
    let mut order: Vec<usize> = (0..rows.len()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

/// Rank penalty sums `Σ_i Σ_{j ∈ U_k(i)} (r(i,j) − k)` for each `k`.
fn penalty_sums(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k_values: &[usize]) -> Vec<u64> {
    let n = x.nrows();
    let xr: Vec<Vec<f64>> = (0..n).map(|i| row(&x, i)).collect();
    let yr: Vec<Vec<f64>> = (0..n).map(|i| row(&y, i)).collect();
    let per_point: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rank = vec![0usize; n];
            for (r, j) in neighbor_order(&xr, i).into_iter().enumerate() {
                rank[j] = r + 1;
            }
            let y_order = neighbor_order(&yr, i);
            k_values
                .iter()
                .map(|&k| {
                    y_order[..k]
                        .iter()
                        .filter(|&&j| rank[j] > k)
                        .map(|&j| (rank[j] - k) as u64)
                        .sum()
                })
                .collect()
        })
        .collect();
    (0..k_values.len())
        .map(|c| per_point.iter().map(|p| p[c]).sum())
        .collect()
}

fn score(penalty: u64, n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty as f64
}

/// Trustworthiness `T(k)` of embedding `y` for data `x`, using Euclidean
/// distances in both spaces.
pub fn trustworthiness(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k: usize) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.nrows();
    check_k(k, n)?;
    Ok(score(penalty_sums(x, y, &[k])[0], n, k))
}

/// Trustworthiness at several `k` on one shared set of neighbor rankings.
pub fn trustworthiness_many(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k_values: &[usize]) -> Result<Vec<f64>> {
    check_pair(x, y)?;
    let n = x.nrows();
    for &k in k_values {
        check_k(k, n)?;
    }
    Ok(penalty_sums(x, y, k_values)
        .into_iter()
        .zip(k_values)
        .map(|(p, &k)| score(p, n, k))
        .collect())
}

fn select_rows(m: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    m.select(Axis(0), idx)
}

/// Trustworthiness curve averaged over `repeats` seeded subsamples of
/// `subsample` rows (the same rows from both `x` and `y`).
pub fn trustworthiness_curve(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    k_values: &[usize],
    repeats: usize,
    subsample: usize,
    seed: u64,
) -> Result<TrustworthinessReport> {
    check_pair(x, y)?;
    let n = x.nrows();
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    if subsample == 0 || subsample > n {
        return Err(Error::Parameter(format!(
            "subsample must be in 1..={n}, got {subsample}"
        )));
    }
    if k_values.is_empty() {
        return Err(Error::Parameter("at least one k is required".into()));
    }
    if let Some(w) = k_values.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!(
            "k values must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    for &k in k_values {
        check_k(k, subsample)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = vec![0.0; k_values.len()];
    for _ in 0..repeats {
        let scores = if subsample == n {
            trustworthiness_many(x, y, k_values)?
        } else {
            let mut idx = rand::seq::index::sample(&mut rng, n, subsample).into_vec();
            idx.sort_unstable();
            let xs = select_rows(x, &idx);
            let ys = select_rows(y, &idx);
            trustworthiness_many(xs.view(), ys.view(), k_values)?
        };
        for (t, s) in totals.iter_mut().zip(scores) {
            *t += s;
        }
    }
    Ok(TrustworthinessReport {
        name: String::new(),
        k_values: k_values.to_vec(),
        scores: totals.into_iter().map(|t| t / repeats as f64).collect(),
        n: subsample,
        repeats,
    })
}
