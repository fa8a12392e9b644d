//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's own numerics except where a test compares against it.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || r.sample(StandardNormal))
}

pub fn uniform_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_simple_fn((rows, cols), || r.random_range(lo..hi))
}

fn sq(a: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    a.row(i).iter().zip(a.row(j)).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Pairwise squared Euclidean distances by direct subtraction.
pub fn naive_sq_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| sq(x, i, j))
}

pub fn rbf(gamma: f64, a: ArrayView2<'_, f64>, i: usize, b: ArrayView2<'_, f64>, j: usize) -> f64 {
    let d: f64 = a.row(i).iter().zip(b.row(j)).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d).exp()
}

pub fn naive_rbf_gram(gamma: f64, x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| rbf(gamma, x, i, x, j))
}

/// Heavy-tailed embedding affinities by double loop from a distance matrix.
pub fn naive_q_from_distances(d: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let n = d.nrows();
    let mut w = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[[i, j]] = (1.0 + d[[i, j]] / alpha).powf(-(alpha + 1.0) / 2.0);
            }
        }
    }
    let z: f64 = w.iter().sum();
    w / z
}

pub fn naive_kl(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let mut c = 0.0;
    for ((i, j), &pij) in p.indexed_iter() {
        if i != j && pij > 1e-12 {
            c += pij * (pij / q[[i, j]].max(1e-12)).ln();
        }
    }
    c
}

/// Central finite differences of a scalar function of a matrix.
pub fn fd_gradient(y: &Array2<f64>, h: f64, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(y.raw_dim());
    let mut probe = y.clone();
    for idx in 0..y.len() {
        let (i, j) = (idx / y.ncols(), idx % y.ncols());
        let orig = probe[[i, j]];
        probe[[i, j]] = orig + h;
        let up = f(&probe);
        probe[[i, j]] = orig - h;
        let down = f(&probe);
        probe[[i, j]] = orig;
        g[[i, j]] = (up - down) / (2.0 * h);
    }
    g
}

/// `‖a − b‖_F / ‖b‖_F`.
pub fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// `2^H` of a probability row, entropy in bits.
pub fn row_perplexity(row: &[f64]) -> f64 {
    let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    2f64.powf(h)
}

/// Neighbor rank of `j` around `i` (nearest = 1), counting every closer
/// point and every equally distant point with a smaller index.
fn brute_rank(d: &Array2<f64>, i: usize, j: usize) -> usize {
    let dij = d[[i, j]];
    1 + (0..d.nrows())
        .filter(|&l| l != i && l != j)
        .filter(|&l| d[[i, l]] < dij || (d[[i, l]] == dij && l < j))
        .count()
}

/// Trustworthiness by exhaustive rank counting, O(n³).
pub fn brute_trustworthiness(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k: usize) -> f64 {
    let n = x.nrows();
    let dx = naive_sq_distances(x);
    let dy = naive_sq_distances(y);
    let mut penalty = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let ry = brute_rank(&dy, i, j);
            let rx = brute_rank(&dx, i, j);
            if ry <= k && rx > k {
                penalty += rx - k;
            }
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty as f64
}

/// Leave-one-out k-NN label accuracy; vote ties go to the label of the
/// nearest tied neighbor.
pub fn knn_accuracy(y: ArrayView2<'_, f64>, labels: &[i64], k: usize) -> f64 {
    let n = y.nrows();
    let d = naive_sq_distances(y);
    let mut correct = 0;
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        let neighbors = &order[..k];
        let mut best = (0usize, labels[neighbors[0]]);
        for &j in neighbors {
            let votes = neighbors.iter().filter(|&&l| labels[l] == labels[j]).count();
            if votes > best.0 {
                best = (votes, labels[j]);
            }
        }
        if best.1 == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}
