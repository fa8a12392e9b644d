//! Exact RBF Gram matrix versus its Nyström and random Fourier feature
//! approximations, reported as relative Frobenius error.
//!
//! cargo run --release --example kernel_approximations

use kernel_tsne::kernels::feature_gram;
use kernel_tsne::prelude::*;
use ndarray::Array2;

fn rel_frobenius(a: &Array2<f64>, exact: &Array2<f64>) -> f64 {
    let diff: f64 = (a - exact).mapv(|v| v * v).sum();
    (diff / exact.mapv(|v| v * v).sum()).sqrt()
}

fn main() -> Result<()> {
    let data = generate_blobs(&BlobParams { n: 400, d: 10, clusters: 4, spread: 1.0, seed: 3 })?;
    let spec = KernelSpec::rbf(1.0 / data.dim() as f64)?;
    let exact = gram_matrix(&spec, data.x.view())?.0;

    println!("n = {}, gamma = {:.3}\n", data.n(), spec.gamma().unwrap_or(0.0));
    println!("{:<10} {:>8} {:>12}", "method", "rank", "rel. error");
    for m in [10, 40, 80, 200, 400] {
        let approx = nystrom_gram(&spec, data.x.view(), m, 0)?.0;
        println!("{:<10} {m:>8} {:>12.2e}", "nystrom", rel_frobenius(&approx, &exact));
    }
    for r in [64, 256, 1024, 4096] {
        let z = rff_features(&spec, data.x.view(), r, 0)?;
        let approx = feature_gram(z.view()).0;
        println!("{:<10} {r:>8} {:>12.2e}", "rff", rel_frobenius(&approx, &exact));
    }
    Ok(())
}
