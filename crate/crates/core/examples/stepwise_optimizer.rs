//! Drives the optimizer one step at a time to watch early exaggeration,
//! the momentum switch and the KL trace of an end-to-end kernel run.
//!
//! The same RBF kernel is used in both spaces, so data-space affinities are
//! fairly diffuse at this gamma. Exaggerated attraction then wins and the
//! embedding contracts, and it only unfolds after exaggeration ends.
//!
//! cargo run --release --example stepwise_optimizer

use kernel_tsne::embedding::Optimizer;
use kernel_tsne::prelude::*;

fn main() -> Result<()> {
    let data = generate_blobs(&BlobParams { n: 300, d: 30, clusters: 6, ..Default::default() })?;
    let config = OptimizerConfig {
        variant: Variant::EndToEndKernel,
        kernel: KernelSpec::rbf(0.05)?,
        perplexity: 20.0,
        n_iter: 600,
        momentum: 0.5,
        ..Default::default()
    };
    let resolved = config.resolve(data.n());
    println!("learning rate {} (auto: {}), alpha {}", resolved.learning_rate, resolved.learning_rate_auto, resolved.alpha);

    let mut opt = Optimizer::new(data.x.view(), &config)?;
    while !opt.is_done() {
        let exaggerating = opt.state().exaggerating;
        let grad = opt.step()?;
        let t = opt.state().iter;
        if t % 50 == 0 || t == 1 {
            let norm = grad.mapv(|g| g * g).sum().sqrt();
            let spread = opt.state().y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            println!("iter {t:>4}  |grad| {norm:>10.3e}  max|y| {spread:>9.3e}  exaggerating {exaggerating}");
        }
    }

    let result = opt.run()?;
    let last = result.kl_trace.last().map_or(0, |s| s.iteration);
    println!("\nKL trace (sampled every 10 iterations, shown every 100):");
    for s in result.kl_trace.iter().filter(|s| s.iteration % 100 == 0 || s.iteration == last) {
        println!("  {:>4}  {:.4}", s.iteration, s.kl);
    }
    Ok(())
}
