//! # kernel-tsne
//!
//! Dense t-SNE together with two kernelized variants:
//!
//! - **Kernel t-SNE** measures high-dimensional neighborhoods with the
//!   kernel-induced distance `k(x,x) - 2k(x,y) + k(y,y)` and keeps the
//!   embedding space Euclidean.
//! - **End-to-end kernel t-SNE** also lifts the embedding through the same
//!   kernel and uses an α-degree-of-freedom Student-t for the low-dimensional
//!   affinities, with gradients taken through the kernel.
//!
//! Alongside the optimizer the crate provides Gram matrices and their
//! Nyström / random Fourier feature approximations, PCA and kernel PCA
//! initializers, trustworthiness scoring, dataset loaders (CSV, IDX, a
//! Gaussian-blob generator) and writers for embeddings, reports and SVG
//! scatter plots.
//!
//! ```no_run
//! use kernel_tsne::prelude::*;
//!
//! let data = generate_blobs(&BlobParams { n: 500, ..Default::default() }).unwrap();
//! let config = OptimizerConfig {
//!     variant: Variant::EndToEndKernel,
//!     kernel: KernelSpec::rbf(0.01).unwrap(),
//!     ..Default::default()
//! };
//! let result = run_reduction(data.x.view(), &config).unwrap();
//! let t = trustworthiness(data.x.view(), result.embedding.view(), 10).unwrap();
//! println!("T(10) = {t:.4}");
//! ```

pub mod affinity;
pub mod cli;
pub mod dataio;
pub mod embedding;
mod error;
pub mod kernels;
pub mod metrics;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::affinity::{
        conditional_affinities, kernel_student_t_affinities, student_t_affinities, symmetrize,
        ConditionalAffinities, JointAffinities,
    };
    pub use crate::dataio::{
        generate_blobs, load_csv, load_idx, render_scatter_svg, write_embedding_csv,
        write_report_json, BlobParams, LabelColumn, LabeledDataset,
    };
    pub use crate::embedding::{
        e2e_kernel_gradient, kernel_pca_init, kl_cost, pca_init, run_reduction, tsne_gradient,
        Alpha, Init, LearningRate, OptimizerConfig, ReductionResult, Variant,
    };
    pub use crate::kernels::{
        gram_matrix, kernel_distance_matrix, nystrom_gram, rff_features, KernelApprox, KernelSpec,
    };
    pub use crate::metrics::{trustworthiness, trustworthiness_curve, TrustworthinessReport};
    pub use crate::{Error, Result};
}
