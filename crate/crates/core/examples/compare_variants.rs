//! Runs plain, kernel and end-to-end kernel t-SNE on a 500-point subsample of
//! the Gaussian-blob dataset and compares quality, convergence and speed.
//!
//! cargo run --release --example compare_variants

use kernel_tsne::prelude::*;

fn main() -> Result<()> {
    let data = generate_blobs(&BlobParams::default())?.subsample(500, 0)?;
    println!("{} points, {} features, 10 clusters\n", data.n(), data.dim());

    let runs = [
        ("plain", Variant::Plain, KernelSpec::Linear),
        ("kernel", Variant::KernelHighDim, KernelSpec::rbf(1e-3)?),
        ("e2e", Variant::EndToEndKernel, KernelSpec::rbf(1e-2)?),
    ];
    println!(
        "{:<8} {:>8} {:>12} {:>10} {:>10} {:>12}",
        "variant", "T(10)", "KL@250", "KL final", "ratio", "ms/iter"
    );
    for (name, variant, kernel) in runs {
        let config = OptimizerConfig { variant, kernel, ..Default::default() };
        let result = run_reduction(data.x.view(), &config)?;
        let t = trustworthiness(data.x.view(), result.embedding.view(), 10)?;
        let post = result.post_exaggeration_kl().unwrap_or(f64::NAN);
        let last = result.final_kl();
        println!(
            "{name:<8} {t:>8.4} {post:>12.4} {last:>10.4} {:>10.3} {:>12.3}",
            last / post,
            result.timings.per_iteration_secs * 1e3
        );
    }
    Ok(())
}
