//! Kernel evaluation, Gram and kernel-distance matrices, kernel gradients and
//! low-rank Gram approximations.
//!
//! Lifted-space squared distances are never formed from explicit feature maps;
//! they come from the kernel trick
//! `‖φ(u) − φ(v)‖² = k(u,u) − 2k(u,v) + k(v,v)`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative singular-value cutoff for the Nyström pseudo-inverse.
pub const NYSTROM_PINV_RTOL: f64 = 1e-10;

/// Default central-difference step for [`kernel_pair_gradient_fd`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A kernel function `k(u, v) = φ(u)ᵀφ(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(−γ‖u − v‖²)`.
    Rbf { gamma: f64 },
    /// `uᵀv`. Its kernel distance is the squared Euclidean distance.
    Linear,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma.is_finite() && gamma > 0.0) => Err(
                Error::Parameter(format!("RBF gamma must be positive and finite, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            KernelSpec::Rbf { gamma } => Some(gamma),
            KernelSpec::Linear => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Linear => "linear",
        }
    }

    /// Kernel value without length checks.
    #[inline]
    pub(crate) fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { gamma } => (-gamma * sq_dist(u, v)).exp(),
            KernelSpec::Linear => dot(u, v),
        }
    }

    /// Adds `weight · ∂[k(y_i,y_i) − 2k(y_i,y_j)]/∂y_i` to `out`.
    #[inline]
    pub(crate) fn add_pair_gradient(&self, yi: &[f64], yj: &[f64], weight: f64, out: &mut [f64]) {
        let scale = match *self {
            KernelSpec::Rbf { gamma } => 4.0 * gamma * (-gamma * sq_dist(yi, yj)).exp(),
            KernelSpec::Linear => 2.0,
        };
        let c = weight * scale;
        for ((o, a), b) in out.iter_mut().zip(yi).zip(yj) {
            *o += c * (a - b);
        }
    }
}

#[inline]
pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Row `i` of a standard-layout matrix as a slice.
#[inline]
pub(crate) fn row(x: &ArrayView2<'_, f64>, i: usize) -> Vec<f64> {
    x.row(i).to_vec()
}

fn check_same_len(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "vectors have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(x: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if let Some(((i, j), v)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Input(format!(
            "{what} has non-finite value {v} at row {i}, column {j}"
        )));
    }
    Ok(())
}

fn check_rows(x: ArrayView2<'_, f64>, min: usize) -> Result<()> {
    if x.nrows() < min {
        return Err(Error::Input(format!(
            "need at least {min} rows, got {}",
            x.nrows()
        )));
    }
    Ok(())
}

/// Evaluates `k(u, v)`.
pub fn eval_kernel(spec: &KernelSpec, u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    check_same_len(u, v)?;
    spec.validate()?;
    Ok(spec.value(&u.to_vec(), &v.to_vec()))
}

/// Symmetric `n×n` matrix of kernel values `K[i][j] = k(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(pub Array2<f64>);

/// Symmetric `n×n` matrix of lifted-space squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDistanceMatrix(pub Array2<f64>);

impl GramMatrix {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl KernelDistanceMatrix {
    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Copies the strict upper triangle onto the lower one.
fn mirror_upper(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            m[[i, j]] = m[[j, i]];
        }
    }
}

/// Fills the upper triangle (including the diagonal) row-parallel, then mirrors.
fn symmetric_from_fn<F>(x: ArrayView2<'_, f64>, f: F) -> Array2<f64>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(&x, i)).collect();
    let mut out = Array2::<f64>::zeros((n, n));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut out_row)| {
            for j in i..n {
                out_row[j] = f(&rows[i], &rows[j]);
            }
        });
    mirror_upper(&mut out);
    out
}

/// Full Gram matrix of `spec` over the rows of `x`.
pub fn gram_matrix(spec: &KernelSpec, x: ArrayView2<'_, f64>) -> Result<GramMatrix> {
    spec.validate()?;
    check_rows(x, 2)?;
    check_finite(x, "data matrix")?;
    Ok(GramMatrix(symmetric_from_fn(x, |u, v| spec.value(u, v))))
}

/// Kernel-trick distances `K_ii − 2K_ij + K_jj` from a precomputed Gram matrix.
/// The diagonal is exactly zero and round-off negatives are clamped to zero.
pub fn distances_from_gram(gram: &GramMatrix) -> KernelDistanceMatrix {
    let k = &gram.0;
    let n = k.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    d.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut d_row)| {
            let kii = k[[i, i]];
            for j in (i + 1)..n {
                d_row[j] = (kii - 2.0 * k[[i, j]] + k[[j, j]]).max(0.0);
            }
        });
    mirror_upper(&mut d);
    KernelDistanceMatrix(d)
}

/// Lifted-space squared distances `‖φ(x_i) − φ(x_j)‖²` via the kernel trick.
pub fn kernel_distance_matrix(spec: &KernelSpec, x: ArrayView2<'_, f64>) -> Result<KernelDistanceMatrix> {
    Ok(distances_from_gram(&gram_matrix(spec, x)?))
}

/// Squared Euclidean distances, computed by expanding
/// `‖x_i‖² − 2x_iᵀx_j + ‖x_j‖²` over the dot-product Gram matrix.
///
/// This is the linear-kernel distance matrix, so plain and linear-kernel
/// pipelines see bitwise-identical inputs.
pub fn squared_euclidean_distances(x: ArrayView2<'_, f64>) -> Result<KernelDistanceMatrix> {
    kernel_distance_matrix(&KernelSpec::Linear, x)
}

/// Nyström approximation `K_nm · K_mm⁺ · K_nmᵀ` from `m_landmarks` rows
/// sampled uniformly without replacement.
pub fn nystrom_gram(
    spec: &KernelSpec,
    x: ArrayView2<'_, f64>,
    m_landmarks: usize,
    seed: u64,
) -> Result<GramMatrix> {
    spec.validate()?;
    check_finite(x, "data matrix")?;
    let n = x.nrows();
    if m_landmarks == 0 || m_landmarks > n {
        return Err(Error::Parameter(format!(
            "landmark count must be in 1..={n}, got {m_landmarks}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut landmarks = rand::seq::index::sample(&mut rng, n, m_landmarks).into_vec();
    landmarks.sort_unstable();

    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(&x, i)).collect();
    let mut k_nm = Array2::<f64>::zeros((n, m_landmarks));
    k_nm.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut r)| {
            for (c, &l) in landmarks.iter().enumerate() {
                r[c] = spec.value(&rows[i], &rows[l]);
            }
        });
    let k_mm = DMatrix::from_fn(m_landmarks, m_landmarks, |a, b| k_nm[[landmarks[a], b]]);
    let k_mm = (&k_mm + k_mm.transpose()) * 0.5;
    let eig = SymmetricEigen::new(k_mm);

    let largest = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = NYSTROM_PINV_RTOL * largest;
    let kept: Vec<usize> = (0..m_landmarks)
        .filter(|&c| eig.eigenvalues[c] > cutoff)
        .collect();

    // K̃ = L Lᵀ with L = K_nm V Λ^{-1/2}, restricted to the kept spectrum.
    let mut factor = Array2::<f64>::zeros((n, kept.len()));
    for (c, &e) in kept.iter().enumerate() {
        let inv_sqrt = eig.eigenvalues[e].sqrt().recip();
        let v = eig.eigenvectors.column(e);
        for i in 0..n {
            let mut acc = 0.0;
            for a in 0..m_landmarks {
                acc += k_nm[[i, a]] * v[a];
            }
            factor[[i, c]] = acc * inv_sqrt;
        }
    }
    Ok(GramMatrix(symmetric_from_fn(factor.view(), dot)))
}

/// Random Fourier features `√(2/r) · cos(ωᵀx + b)` approximating an RBF kernel,
/// with `ω ~ N(0, 2γI)` and `b ~ U[0, 2π)`.
pub fn rff_features(spec: &KernelSpec, x: ArrayView2<'_, f64>, r: usize, seed: u64) -> Result<Array2<f64>> {
    let gamma = match *spec {
        KernelSpec::Rbf { gamma } => gamma,
        KernelSpec::Linear => {
            return Err(Error::UnsupportedKernel(
                "random Fourier features require an RBF kernel".into(),
            ))
        }
    };
    spec.validate()?;
    if r == 0 {
        return Err(Error::Parameter("feature count must be at least 1".into()));
    }
    check_finite(x, "data matrix")?;
    let d = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt())
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let omega = Array2::from_shape_simple_fn((d, r), || normal.sample(&mut rng));
    let phase = Uniform::new(0.0, std::f64::consts::TAU)
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let offsets = Array1::from_shape_simple_fn(r, || phase.sample(&mut rng));

    let scale = (2.0 / r as f64).sqrt();
    let mut z = x.dot(&omega);
    Zip::from(z.rows_mut()).for_each(|mut zr| {
        zr.zip_mut_with(&offsets, |v, b| *v = scale * (*v + b).cos());
    });
    Ok(z)
}

/// Gram matrix `F Fᵀ` of an explicit feature matrix.
pub fn feature_gram(features: ArrayView2<'_, f64>) -> GramMatrix {
    GramMatrix(symmetric_from_fn(features, dot))
}

/// How the high-dimensional Gram matrix is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum KernelApprox {
    #[default]
    Exact,
    Nystrom { landmarks: usize, seed: u64 },
    Rff { features: usize, seed: u64 },
}

/// Kernel distances from an exact or approximated Gram matrix.
pub fn approx_kernel_distance_matrix(
    spec: &KernelSpec,
    x: ArrayView2<'_, f64>,
    approx: &KernelApprox,
) -> Result<KernelDistanceMatrix> {
    let gram = match *approx {
        KernelApprox::Exact => gram_matrix(spec, x)?,
        KernelApprox::Nystrom { landmarks, seed } => nystrom_gram(spec, x, landmarks, seed)?,
        KernelApprox::Rff { features, seed } => {
            feature_gram(rff_features(spec, x, features, seed)?.view())
        }
    };
    Ok(distances_from_gram(&gram))
}

/// Analytic `∂[k(y_i,y_i) − 2k(y_i,y_j)]/∂y_i`.
///
/// RBF: `4γ(y_i − y_j)·k(y_i,y_j)`; linear: `2(y_i − y_j)`.
pub fn kernel_pair_gradient(
    spec: &KernelSpec,
    yi: ArrayView1<'_, f64>,
    yj: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    check_same_len(yi, yj)?;
    spec.validate()?;
    let mut out = vec![0.0; yi.len()];
    spec.add_pair_gradient(&yi.to_vec(), &yj.to_vec(), 1.0, &mut out);
    Ok(Array1::from(out))
}

/// Central-difference estimate of the same derivative as
/// [`kernel_pair_gradient`], using the scalar `g(y) = k(y,y) − 2k(y,y_j)`.
pub fn kernel_pair_gradient_fd(
    spec: &KernelSpec,
    yi: ArrayView1<'_, f64>,
    yj: ArrayView1<'_, f64>,
    h: f64,
) -> Result<Array1<f64>> {
    check_same_len(yi, yj)?;
    spec.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {h}")));
    }
    let mut out = vec![0.0; yi.len()];
    fd_pair_gradient(spec, &yi.to_vec(), &yj.to_vec(), h, 1.0, &mut out);
    Ok(Array1::from(out))
}

pub(crate) fn fd_pair_gradient(spec: &KernelSpec, yi: &[f64], yj: &[f64], h: f64, weight: f64, out: &mut [f64]) {
    let g = |y: &[f64]| spec.value(y, y) - 2.0 * spec.value(y, yj);
    let mut probe = yi.to_vec();
    for c in 0..yi.len() {
        probe[c] = yi[c] + h;
        let plus = g(&probe);
        probe[c] = yi[c] - h;
        let minus = g(&probe);
        probe[c] = yi[c];
        out[c] += weight * (plus - minus) / (2.0 * h);
    }
}
