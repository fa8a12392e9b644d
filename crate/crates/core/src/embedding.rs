//! Initialization, cost, gradients and the momentum optimizer for plain,
//! kernel and end-to-end kernel t-SNE.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{
    check_alpha, conditional_affinities, kernel_student_t_affinities, student_t_affinities,
    symmetrize, JointAffinities,
};
use crate::kernels::{
    approx_kernel_distance_matrix, check_finite, fd_pair_gradient, gram_matrix, row, sq_dist,
    squared_euclidean_distances, KernelApprox, KernelSpec, DEFAULT_FD_STEP,
};
use crate::{Error, Result};

/// Standard deviation of the first coordinate after PCA / kernel PCA initialization.
pub const INIT_SCALE: f64 = 1e-4;

/// Any embedding coordinate beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Floor on `q_ij` inside the KL divergence; `p_ij` at or below it contributes nothing.
pub const KL_FLOOR: f64 = 1e-12;

/// KL is sampled every this many iterations (and once more at the end).
pub const KL_TRACE_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Euclidean affinities in both spaces.
    Plain,
    /// Kernel-induced distances in the data space, Euclidean embedding space.
    #[serde(rename = "kernel")]
    KernelHighDim,
    /// Kernel-induced distances in both spaces, α-Student-t embedding affinities.
    #[serde(rename = "e2e")]
    EndToEndKernel,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::KernelHighDim => "kernel",
            Variant::EndToEndKernel => "e2e",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    /// `max(N / early_exaggeration_factor / 4, 50)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    /// `max(m − 1, 1)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Pca,
    KernelPca,
    /// Isotropic Gaussian with standard deviation [`INIT_SCALE`], seeded by the config.
    Random,
    Given(Array2<f64>),
}

impl Init {
    pub fn name(&self) -> &'static str {
        match self {
            Init::Pca => "pca",
            Init::KernelPca => "kpca",
            Init::Random => "random",
            Init::Given(_) => "given",
        }
    }
}

/// How the low-dimensional kernel derivative is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelGradient {
    Analytic,
    FiniteDifference { step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub target_dim: usize,
    pub perplexity: f64,
    pub kernel: KernelSpec,
    /// Gram approximation for the data-space kernel (kernel variants only).
    pub kernel_approx: KernelApprox,
    pub n_iter: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub learning_rate: LearningRate,
    pub momentum: f64,
    /// Optional `(iteration, momentum)` switch, e.g. `(250, 0.8)`.
    pub momentum_switch: Option<(usize, f64)>,
    pub init: Init,
    pub alpha: Alpha,
    pub seed: u64,
    /// Use central differences for the embedding-space kernel derivative.
    pub fd_gradient: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Plain,
            target_dim: 2,
            perplexity: 30.0,
            kernel: KernelSpec::Rbf { gamma: 1.0 },
            kernel_approx: KernelApprox::Exact,
            n_iter: 1000,
            early_exaggeration_factor: 12.0,
            early_exaggeration_iters: 250,
            learning_rate: LearningRate::Auto,
            momentum: 0.5,
            momentum_switch: None,
            init: Init::Pca,
            alpha: Alpha::Auto,
            seed: 0,
            fd_gradient: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let param = |msg: String| Err(Error::Parameter(msg));
        if self.target_dim == 0 {
            return param("target dimension must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return param(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if let Some((_, m)) = self.momentum_switch {
            if !(0.0..1.0).contains(&m) {
                return param(format!("switched momentum must lie in [0, 1), got {m}"));
            }
        }
        if self.n_iter < self.early_exaggeration_iters {
            return param(format!(
                "n_iter ({}) must be at least early_exaggeration_iters ({})",
                self.n_iter, self.early_exaggeration_iters
            ));
        }
        if !(self.early_exaggeration_factor > 0.0 && self.early_exaggeration_factor.is_finite()) {
            return param(format!(
                "early exaggeration factor must be positive, got {}",
                self.early_exaggeration_factor
            ));
        }
        if let LearningRate::Fixed(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return param(format!("learning rate must be positive, got {lr}"));
            }
        }
        if let Alpha::Fixed(a) = self.alpha {
            check_alpha(a)?;
        }
        self.kernel.validate()
    }

    pub fn resolved_learning_rate(&self, n: usize) -> f64 {
        match self.learning_rate {
            LearningRate::Auto => (n as f64 / self.early_exaggeration_factor / 4.0).max(50.0),
            LearningRate::Fixed(lr) => lr,
        }
    }

    pub fn resolved_alpha(&self) -> f64 {
        match self.alpha {
            Alpha::Auto => (self.target_dim as f64 - 1.0).max(1.0),
            Alpha::Fixed(a) => a,
        }
    }

    fn kernel_gradient(&self) -> KernelGradient {
        if self.fd_gradient {
            KernelGradient::FiniteDifference { step: DEFAULT_FD_STEP }
        } else {
            KernelGradient::Analytic
        }
    }

    /// Every setting with auto values replaced by the numbers actually used.
    pub fn resolve(&self, n: usize) -> ResolvedConfig {
        ResolvedConfig {
            variant: self.variant,
            target_dim: self.target_dim,
            perplexity: self.perplexity,
            kernel: self.kernel,
            kernel_approx: self.kernel_approx,
            n_iter: self.n_iter,
            early_exaggeration_factor: self.early_exaggeration_factor,
            early_exaggeration_iters: self.early_exaggeration_iters,
            learning_rate: self.resolved_learning_rate(n),
            learning_rate_auto: self.learning_rate == LearningRate::Auto,
            momentum: self.momentum,
            momentum_switch: self.momentum_switch,
            init: self.init.name().to_string(),
            alpha: self.resolved_alpha(),
            alpha_auto: self.alpha == Alpha::Auto,
            seed: self.seed,
            fd_gradient: self.fd_gradient,
        }
    }
}

/// Serializable echo of an [`OptimizerConfig`] with auto settings resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub variant: Variant,
    pub target_dim: usize,
    pub perplexity: f64,
    pub kernel: KernelSpec,
    pub kernel_approx: KernelApprox,
    pub n_iter: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub learning_rate: f64,
    pub learning_rate_auto: bool,
    pub momentum: f64,
    pub momentum_switch: Option<(usize, f64)>,
    pub init: String,
    /// Degrees of freedom of the embedding-space Student-t (end-to-end variant).
    pub alpha: f64,
    pub alpha_auto: bool,
    pub seed: u64,
    pub fd_gradient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSample {
    pub iteration: usize,
    pub kl: f64,
}

/// Wall-clock breakdown of a run, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub affinity_secs: f64,
    pub init_secs: f64,
    pub loop_secs: f64,
    /// Embedding-space affinities inside the loop, including the per-iteration
    /// kernel matrix of the end-to-end variant.
    pub low_dim_affinity_secs: f64,
    pub gradient_secs: f64,
    pub per_iteration_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub embedding: Array2<f64>,
    pub kl_trace: Vec<KlSample>,
    pub config: ResolvedConfig,
    pub timings: Timings,
}

impl ReductionResult {
    pub fn final_kl(&self) -> f64 {
        self.kl_trace.last().map_or(f64::NAN, |s| s.kl)
    }

    /// First KL sample taken once exaggeration has ended.
    pub fn post_exaggeration_kl(&self) -> Option<f64> {
        let start = self.config.early_exaggeration_iters;
        self.kl_trace.iter().find(|s| s.iteration >= start).map(|s| s.kl)
    }
}

// ---------------------------------------------------------------------------
// Initialization

/// Principal components of the centered data.
#[derive(Debug, Clone)]
pub struct Pca {
    /// `n×m` projection onto the leading directions (unscaled).
    pub projection: Array2<f64>,
    /// `d×m` unit principal directions.
    pub components: Array2<f64>,
    /// Variance (population) along each direction, descending.
    pub explained_variance: Vec<f64>,
}

fn centered(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).expect("non-empty data");
    &x - &mean
}

fn max_abs(x: ArrayView2<'_, f64>) -> f64 {
    x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Sign that makes the largest-magnitude entry of `v` positive.
fn sign_of_largest(v: impl Iterator<Item = f64>) -> f64 {
    let mut best = 0.0_f64;
    for x in v {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Principal component analysis via the SVD of the centered data.
pub fn pca(x: ArrayView2<'_, f64>, m: usize) -> Result<Pca> {
    let (n, d) = x.dim();
    if m == 0 || m > d {
        return Err(Error::Parameter(format!(
            "PCA target dimension must be in 1..={d}, got {m}"
        )));
    }
    if n == 0 {
        return Err(Error::Input("PCA needs at least one row".into()));
    }
    check_finite(x, "data matrix")?;
    let xc = centered(x);
    let mut projection = Array2::<f64>::zeros((n, m));
    let mut components = Array2::<f64>::zeros((d, m));
    let mut explained_variance = vec![0.0; m];
    // constant data has no principal directions
    if max_abs(xc.view()) <= 1e-12 * (1.0 + max_abs(x)) {
        return Ok(Pca { projection, components, explained_variance });
    }

    let a = DMatrix::from_fn(n, d, |i, j| xc[[i, j]]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));

    for (c, &k) in order.iter().take(m).enumerate() {
        let sign = sign_of_largest(v_t.row(k).iter().copied());
        for j in 0..d {
            components[[j, c]] = sign * v_t[(k, j)];
        }
        let s = svd.singular_values[k];
        explained_variance[c] = s * s / n as f64;
    }
    projection.assign(&xc.dot(&components));
    Ok(Pca { projection, components, explained_variance })
}

fn population_std(col: ndarray::ArrayView1<'_, f64>) -> f64 {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Rescales so coordinate 0 has standard deviation [`INIT_SCALE`].
fn rescale_first_coordinate(mut y: Array2<f64>) -> Array2<f64> {
    let std0 = population_std(y.column(0));
    if std0 > 0.0 {
        y *= INIT_SCALE / std0;
    }
    y
}

/// PCA initialization: leading principal coordinates, scaled so the first has
/// standard deviation `1e-4`.
pub fn pca_init(x: ArrayView2<'_, f64>, m: usize) -> Result<Array2<f64>> {
    Ok(rescale_first_coordinate(pca(x, m)?.projection))
}

/// Kernel principal components from the double-centered Gram matrix.
#[derive(Debug, Clone)]
pub struct KernelPca {
    /// Eigenvectors scaled by `√λ` (unscaled embedding).
    pub embedding: Array2<f64>,
    /// Leading eigenvalues of the centered Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
}

/// Eigenvalues of the centered Gram matrix below this are treated as zero.
pub const KPCA_EIGEN_FLOOR: f64 = 1e-12;

pub fn kernel_pca(spec: &KernelSpec, x: ArrayView2<'_, f64>, m: usize) -> Result<KernelPca> {
    let n = x.nrows();
    if m == 0 || m > n {
        return Err(Error::Parameter(format!(
            "kernel PCA target dimension must be in 1..={n}, got {m}"
        )));
    }
    let k = gram_matrix(spec, x)?.0;
    let row_means = k.mean_axis(Axis(1)).expect("non-empty");
    let total_mean = row_means.mean().expect("non-empty");
    let kc = DMatrix::from_fn(n, n, |i, j| k[[i, j]] - row_means[i] - row_means[j] + total_mean);
    let kc = (&kc + kc.transpose()) * 0.5;
    let eig = SymmetricEigen::new(kc);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let mut embedding = Array2::<f64>::zeros((n, m));
    let mut eigenvalues = vec![0.0; m];
    for (c, &e) in order.iter().take(m).enumerate() {
        let lambda = eig.eigenvalues[e];
        eigenvalues[c] = lambda;
        if lambda < KPCA_EIGEN_FLOOR {
            continue;
        }
        let v = eig.eigenvectors.column(e);
        let sign = sign_of_largest(v.iter().copied());
        let scale = sign * lambda.sqrt();
        for i in 0..n {
            embedding[[i, c]] = scale * v[i];
        }
    }
    Ok(KernelPca { embedding, eigenvalues })
}

/// Kernel PCA initialization with the same first-coordinate scaling as [`pca_init`].
pub fn kernel_pca_init(spec: &KernelSpec, x: ArrayView2<'_, f64>, m: usize) -> Result<Array2<f64>> {
    Ok(rescale_first_coordinate(kernel_pca(spec, x, m)?.embedding))
}

fn random_init(n: usize, m: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid normal");
    Array2::from_shape_simple_fn((n, m), || normal.sample(&mut rng))
}

// ---------------------------------------------------------------------------
// Cost and gradients

fn check_pair_shapes(p: &JointAffinities, q: &JointAffinities, y: Option<ArrayView2<'_, f64>>) -> Result<()> {
    let n = p.n();
    if q.values.dim() != (n, n) || p.values.ncols() != n {
        return Err(Error::Dimension(format!(
            "P is {:?} but Q is {:?}",
            p.values.dim(),
            q.values.dim()
        )));
    }
    if let Some(y) = y {
        if y.nrows() != n {
            return Err(Error::Dimension(format!(
                "affinities cover {n} points but the embedding has {} rows",
                y.nrows()
            )));
        }
    }
    Ok(())
}

/// `KL(P‖Q) = Σ_{i≠j} p_ij log(p_ij / max(q_ij, 1e-12))`.
pub fn kl_cost(p: &JointAffinities, q: &JointAffinities) -> f64 {
    let n = p.n();
    assert_eq!(q.values.dim(), (n, n), "P and Q must have the same shape");
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                let pij = p.values[[i, j]];
                if i == j || pij <= KL_FLOOR {
                    continue;
                }
                acc += pij * (pij / q.values[[i, j]].max(KL_FLOOR)).ln();
            }
            acc
        })
        .sum()
}

/// Plain t-SNE gradient `4 Σ_j (p_ij − q_ij)(1 + ‖y_i − y_j‖²)⁻¹ (y_i − y_j)`.
pub fn tsne_gradient(p: &JointAffinities, q: &JointAffinities, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_pair_shapes(p, q, Some(y))?;
    let (n, m) = y.dim();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(&y, i)).collect();
    let mut grad = Array2::<f64>::zeros((n, m));
    grad.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut g)| {
            let yi = &rows[i];
            let mut acc = vec![0.0; m];
            for (j, yj) in rows.iter().enumerate() {
                if j == i {
                    continue;
                }
                let w = (1.0 + sq_dist(yi, yj)).recip();
                let c = 4.0 * (p.values[[i, j]] - q.values[[i, j]]) * w;
                for ((a, u), v) in acc.iter_mut().zip(yi).zip(yj) {
                    *a += c * (u - v);
                }
            }
            g.assign(&ndarray::ArrayView1::from(&acc));
        });
    Ok(grad)
}

/// End-to-end kernel t-SNE gradient
/// `((α+1)/α) Σ_j (p_ij − q_ij)(1 + d_ij/α)⁻¹ ∂[k(y_i,y_i) − 2k(y_i,y_j)]/∂y_i`
/// with `d_ij` the embedding-space kernel distance.
pub fn e2e_kernel_gradient(
    p: &JointAffinities,
    q: &JointAffinities,
    y: ArrayView2<'_, f64>,
    spec: &KernelSpec,
    alpha: f64,
    method: KernelGradient,
) -> Result<Array2<f64>> {
    check_pair_shapes(p, q, Some(y))?;
    check_alpha(alpha)?;
    spec.validate()?;
    if let KernelGradient::FiniteDifference { step } = method {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Parameter(format!("finite-difference step must be positive, got {step}")));
        }
    }
    let (n, m) = y.dim();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(&y, i)).collect();
    let self_k: Vec<f64> = rows.iter().map(|r| spec.value(r, r)).collect();
    let coef = (alpha + 1.0) / alpha;
    let mut grad = Array2::<f64>::zeros((n, m));
    grad.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut g)| {
            let yi = &rows[i];
            let mut acc = vec![0.0; m];
            for (j, yj) in rows.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = (self_k[i] - 2.0 * spec.value(yi, yj) + self_k[j]).max(0.0);
                let w = coef * (p.values[[i, j]] - q.values[[i, j]]) / (1.0 + d / alpha);
                match method {
                    KernelGradient::Analytic => spec.add_pair_gradient(yi, yj, w, &mut acc),
                    KernelGradient::FiniteDifference { step } => {
                        fd_pair_gradient(spec, yi, yj, step, w, &mut acc)
                    }
                }
            }
            g.assign(&ndarray::ArrayView1::from(&acc));
        });
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Optimization

/// Data-space joint affinities for a variant: squared Euclidean distances for
/// plain t-SNE, kernel-trick distances otherwise.
pub fn high_dim_affinities(x: ArrayView2<'_, f64>, config: &OptimizerConfig) -> Result<JointAffinities> {
    let distances = match config.variant {
        Variant::Plain => squared_euclidean_distances(x)?,
        Variant::KernelHighDim | Variant::EndToEndKernel => {
            approx_kernel_distance_matrix(&config.kernel, x, &config.kernel_approx)?
        }
    };
    Ok(symmetrize(&conditional_affinities(distances.view(), config.perplexity)?))
}

/// Embedding-space joint affinities for a variant.
pub fn low_dim_affinities(y: ArrayView2<'_, f64>, config: &OptimizerConfig) -> Result<JointAffinities> {
    match config.variant {
        Variant::Plain | Variant::KernelHighDim => student_t_affinities(y),
        Variant::EndToEndKernel => kernel_student_t_affinities(&config.kernel, y, config.resolved_alpha()),
    }
}

/// Initial embedding for `config.init`.
pub fn initial_embedding(x: ArrayView2<'_, f64>, config: &OptimizerConfig) -> Result<Array2<f64>> {
    let (n, m) = (x.nrows(), config.target_dim);
    match &config.init {
        Init::Pca => pca_init(x, m),
        Init::KernelPca => kernel_pca_init(&config.kernel, x, m),
        Init::Random => Ok(random_init(n, m, config.seed)),
        Init::Given(y) => {
            if y.dim() != (n, m) {
                return Err(Error::Dimension(format!(
                    "given initial embedding is {:?}, expected ({n}, {m})",
                    y.dim()
                )));
            }
            check_finite(y.view(), "initial embedding")?;
            Ok(y.clone())
        }
    }
}

/// Optimizer state: positions, momentum buffer and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub y: Array2<f64>,
    pub velocity: Array2<f64>,
    /// Completed update steps.
    pub iter: usize,
    pub exaggerating: bool,
}

/// Stepwise driver for the momentum gradient descent loop.
pub struct Optimizer {
    config: OptimizerConfig,
    p: JointAffinities,
    p_exaggerated: JointAffinities,
    learning_rate: f64,
    alpha: f64,
    state: EmbeddingState,
    kl_trace: Vec<KlSample>,
    timings: Timings,
}

impl Optimizer {
    /// Computes the data-space affinities and the initial embedding.
    pub fn new(x: ArrayView2<'_, f64>, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        check_finite(x, "data matrix")?;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 points, got {n}")));
        }
        if (n as f64) < 2.0 * config.perplexity + 1.0 {
            log::warn!(
                "{n} points is small for perplexity {}; at least {} recommended",
                config.perplexity,
                (2.0 * config.perplexity + 1.0).ceil()
            );
        }
        let mut timings = Timings::default();
        let t0 = Instant::now();
        let p = high_dim_affinities(x, config)?;
        timings.affinity_secs = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let y = initial_embedding(x, config)?;
        timings.init_secs = t1.elapsed().as_secs_f64();

        let mut p_exaggerated = p.clone();
        p_exaggerated.values *= config.early_exaggeration_factor;
        let state = EmbeddingState {
            velocity: Array2::zeros(y.dim()),
            y,
            iter: 0,
            exaggerating: config.early_exaggeration_iters > 0,
        };
        Ok(Self {
            learning_rate: config.resolved_learning_rate(n),
            alpha: config.resolved_alpha(),
            config: config.clone(),
            p,
            p_exaggerated,
            state,
            kl_trace: Vec::new(),
            timings,
        })
    }

    pub fn state(&self) -> &EmbeddingState {
        &self.state
    }

    /// Unexaggerated data-space affinities.
    pub fn p(&self) -> &JointAffinities {
        &self.p
    }

    /// The P driving the next step (scaled during early exaggeration, not renormalized).
    pub fn current_p(&self) -> &JointAffinities {
        if self.state.exaggerating {
            &self.p_exaggerated
        } else {
            &self.p
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn is_done(&self) -> bool {
        self.state.iter >= self.config.n_iter
    }

    fn momentum_at(&self, iter: usize) -> f64 {
        match self.config.momentum_switch {
            Some((at, m)) if iter >= at => m,
            _ => self.config.momentum,
        }
    }

    fn gradient(&self, q: &JointAffinities) -> Result<Array2<f64>> {
        let p = self.current_p();
        match self.config.variant {
            Variant::Plain | Variant::KernelHighDim => tsne_gradient(p, q, self.state.y.view()),
            Variant::EndToEndKernel => e2e_kernel_gradient(
                p,
                q,
                self.state.y.view(),
                &self.config.kernel,
                self.alpha,
                self.config.kernel_gradient(),
            ),
        }
    }

    /// One update `M ← μM − ηG`, `Y ← Y + M`. Returns the gradient used.
    pub fn step(&mut self) -> Result<Array2<f64>> {
        let t = self.state.iter;
        self.state.exaggerating = t < self.config.early_exaggeration_iters;

        let tq = Instant::now();
        let q = low_dim_affinities(self.state.y.view(), &self.config)?;
        self.timings.low_dim_affinity_secs += tq.elapsed().as_secs_f64();
        if t % KL_TRACE_STRIDE == 0 {
            let kl = kl_cost(&self.p, &q);
            if t % 100 == 0 {
                log::info!("iteration {t}: KL {kl:.4}");
            }
            self.kl_trace.push(KlSample { iteration: t, kl });
        }

        let tg = Instant::now();
        let grad = self.gradient(&q)?;
        self.timings.gradient_secs += tg.elapsed().as_secs_f64();

        let momentum = self.momentum_at(t);
        let lr = self.learning_rate;
        ndarray::Zip::from(&mut self.state.velocity)
            .and(&grad)
            .for_each(|v, g| *v = momentum * *v - lr * g);
        self.state.y += &self.state.velocity;
        self.state.iter += 1;
        self.state.exaggerating = self.state.iter < self.config.early_exaggeration_iters;

        if let Some(bad) = self.state.y.iter().find(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Divergence {
                iteration: self.state.iter,
                reason: format!("embedding coordinate reached {bad:e}"),
            });
        }
        Ok(grad)
    }

    /// Runs the remaining iterations and records the final KL.
    pub fn run(mut self) -> Result<ReductionResult> {
        let t0 = Instant::now();
        while !self.is_done() {
            self.step()?;
        }
        self.state.exaggerating = false;
        let q = low_dim_affinities(self.state.y.view(), &self.config)?;
        let last = self.state.iter;
        if self.kl_trace.last().map(|s| s.iteration) != Some(last) {
            self.kl_trace.push(KlSample { iteration: last, kl: kl_cost(&self.p, &q) });
        }
        self.timings.loop_secs = t0.elapsed().as_secs_f64();
        if self.config.n_iter > 0 {
            self.timings.per_iteration_secs = self.timings.loop_secs / self.config.n_iter as f64;
        }
        self.timings.total_secs = self.timings.affinity_secs + self.timings.init_secs + self.timings.loop_secs;
        let n = self.state.y.nrows();
        Ok(ReductionResult {
            embedding: self.state.y,
            kl_trace: self.kl_trace,
            config: self.config.resolve(n),
            timings: self.timings,
        })
    }
}

/// Full reduction: data-space affinities, initialization and `n_iter`
/// momentum steps with early exaggeration.
pub fn run_reduction(x: ArrayView2<'_, f64>, config: &OptimizerConfig) -> Result<ReductionResult> {
    Optimizer::new(x, config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn pairwise(y: &Array2<f64>) -> Vec<f64> {
        let n = y.nrows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(sq_dist(&y.row(i).to_vec(), &y.row(j).to_vec()).sqrt());
            }
        }
        out
    }

    #[test]
    fn auto_settings_resolve() {
        let cfg = OptimizerConfig::default();
        assert_eq!(cfg.resolved_learning_rate(500), 50.0);
        assert_eq!(cfg.resolved_learning_rate(4800), 100.0);
        assert_eq!(cfg.resolved_alpha(), 1.0);
        let cfg = OptimizerConfig { target_dim: 3, ..Default::default() };
        assert_eq!(cfg.resolved_alpha(), 2.0);
    }

    #[test]
    fn config_validation() {
        let bad = [
            OptimizerConfig { momentum: 1.0, ..Default::default() },
            OptimizerConfig { n_iter: 100, ..Default::default() },
            OptimizerConfig { target_dim: 0, ..Default::default() },
            OptimizerConfig { learning_rate: LearningRate::Fixed(0.0), ..Default::default() },
            OptimizerConfig { alpha: Alpha::Fixed(0.5), ..Default::default() },
            OptimizerConfig { kernel: KernelSpec::Rbf { gamma: -1.0 }, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn pca_of_centered_plane_is_a_scaled_rotation() {
        let x = array![[1.0, 2.0], [-1.5, 0.5], [0.5, -2.0], [0.0, -0.5]];
        let x = centered(x.view());
        let y = pca_init(x.view(), 2).unwrap();
        assert_abs_diff_eq!(population_std(y.column(0)), INIT_SCALE, epsilon = 1e-18);
        let (dx, dy) = (pairwise(&x), pairwise(&y));
        let ratio = dy[0] / dx[0];
        for (a, b) in dx.iter().zip(&dy) {
            assert!((b / a - ratio).abs() < 1e-8 * ratio);
        }
    }

    #[test]
    fn constant_data_gives_zero_init() {
        let x = Array2::from_elem((5, 3), 0.1);
        assert!(pca_init(x.view(), 2).unwrap().iter().all(|v| *v == 0.0));
        let spec = KernelSpec::rbf(1.0).unwrap();
        assert!(kernel_pca_init(&spec, x.view(), 2).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn init_dimension_checks() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(pca_init(x.view(), 3), Err(Error::Parameter(_))));
        assert!(matches!(kernel_pca_init(&KernelSpec::Linear, x.view(), 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn kernel_pca_reproduces_centered_gram() {
        let spec = KernelSpec::rbf(0.7).unwrap();
        let x = array![[0.0, 0.0], [1.0, 0.3], [-0.4, 1.2]];
        let kpca = kernel_pca(&spec, x.view(), 2).unwrap();
        let k = gram_matrix(&spec, x.view()).unwrap().0;
        let n = 3.0;
        let rm = k.mean_axis(Axis(1)).unwrap();
        let tm = rm.sum() / n;
        let recon = kpca.embedding.dot(&kpca.embedding.t());
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(recon[[i, j]], k[[i, j]] - rm[i] - rm[j] + tm, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn kl_examples() {
        let p = JointAffinities { values: array![[0.0, 0.5], [0.5, 0.0]], floor: 0.0 };
        assert_eq!(kl_cost(&p, &p), 0.0);

        let u = 1.0 / 6.0;
        let p = JointAffinities { values: Array2::from_shape_fn((3, 3), |(i, j)| if i == j { 0.0 } else { u }), floor: 0.0 };
        let q = JointAffinities {
            values: array![[0.0, 0.45, 0.025], [0.45, 0.0, 0.025], [0.025, 0.025, 0.0]],
            floor: 0.0,
        };
        // hand summation
        let expected = (2.0 / 6.0) * (u / 0.45).ln() + (4.0 / 6.0) * (u / 0.025).ln();
        assert_abs_diff_eq!(kl_cost(&p, &q), expected, epsilon = 1e-14);
        // The quoted ≈0.9340 is a rounded figure; the exact sum is 0.93366.
        assert_abs_diff_eq!(kl_cost(&p, &q), 0.9340, epsilon = 5e-4);
    }

    #[test]
    fn gradient_vanishes_when_p_equals_q() {
        let y = array![[0.0, 0.1], [1.0, -0.4], [0.3, 0.8]];
        let q = student_t_affinities(y.view()).unwrap();
        assert!(tsne_gradient(&q, &q, y.view()).unwrap().iter().all(|v| v.abs() < 1e-15));
        let spec = KernelSpec::rbf(0.5).unwrap();
        let q = kernel_student_t_affinities(&spec, y.view(), 1.0).unwrap();
        let g = e2e_kernel_gradient(&q, &q, y.view(), &spec, 1.0, KernelGradient::Analytic).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gradient_shape_mismatch() {
        let y = array![[0.0, 0.1], [1.0, -0.4], [0.3, 0.8]];
        let q = student_t_affinities(y.view()).unwrap();
        let y2 = array![[0.0, 0.1], [1.0, -0.4]];
        assert!(matches!(tsne_gradient(&q, &q, y2.view()), Err(Error::Dimension(_))));
    }

    #[test]
    fn given_init_shape_is_checked() {
        let x = array![[0.0, 1.0, 2.0], [1.0, 0.0, 2.0], [2.0, 1.0, 0.0], [3.0, 3.0, 3.0]];
        let cfg = OptimizerConfig {
            perplexity: 2.0,
            init: Init::Given(Array2::zeros((3, 2))),
            ..Default::default()
        };
        assert!(matches!(run_reduction(x.view(), &cfg), Err(Error::Dimension(_))));
    }

    #[test]
    fn early_exaggeration_scales_p() {
        let x = Array2::from_shape_fn((12, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64 + 0.1 * i as f64);
        let cfg = OptimizerConfig { perplexity: 3.0, n_iter: 6, early_exaggeration_iters: 3, ..Default::default() };
        let mut opt = Optimizer::new(x.view(), &cfg).unwrap();
        let base = opt.p().clone();
        for t in 0..6 {
            opt.state.exaggerating = t < 3;
            let expected = if t < 3 { &base.values * 12.0 } else { base.values.clone() };
            assert_eq!(opt.current_p().values, expected);
            opt.step().unwrap();
        }
        assert!(opt.is_done());
    }
}
