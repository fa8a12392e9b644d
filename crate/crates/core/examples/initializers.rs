//! PCA and kernel PCA initial embeddings, and how much of the final
//! t-SNE quality each starting point buys.
//!
//! cargo run --release --example initializers

use kernel_tsne::embedding::{kernel_pca, pca};
use kernel_tsne::prelude::*;

fn main() -> Result<()> {
    let data = generate_blobs(&BlobParams::default())?.subsample(500, 0)?;
    let rbf = KernelSpec::rbf(1e-3)?;

    let p = pca(data.x.view(), 5)?;
    let total: f64 = data.x.var_axis(ndarray::Axis(0), 0.0).sum();
    println!("PCA explained variance ratio:");
    for (i, v) in p.explained_variance.iter().enumerate() {
        println!("  pc{}  {:.3}", i + 1, v / total);
    }
    let kp = kernel_pca(&rbf, data.x.view(), 5)?;
    println!("kernel PCA leading eigenvalues: {:?}\n", kp.eigenvalues.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>());

    println!("{:<8} {:>10} {:>10} {:>10}", "init", "T(10) y0", "T(10) end", "KL end");
    for (name, init) in [("pca", Init::Pca), ("kpca", Init::KernelPca), ("random", Init::Random)] {
        let config = OptimizerConfig { variant: Variant::KernelHighDim, kernel: rbf, init, ..Default::default() };
        let y0 = kernel_tsne::embedding::initial_embedding(data.x.view(), &config)?;
        let result = run_reduction(data.x.view(), &config)?;
        println!(
            "{name:<8} {:>10.4} {:>10.4} {:>10.4}",
            trustworthiness(data.x.view(), y0.view(), 10)?,
            trustworthiness(data.x.view(), result.embedding.view(), 10)?,
            result.final_kl()
        );
    }
    Ok(())
}
