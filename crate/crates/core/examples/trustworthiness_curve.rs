//! Trustworthiness curves for PCA, plain t-SNE and a random projection,
//! averaged over seeded subsamples and saved as JSON reports.
//!
//! cargo run --release --example trustworthiness_curve [OUT_DIR]

use std::path::PathBuf;

use kernel_tsne::prelude::*;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> std::result::Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/trust".into()));
    std::fs::create_dir_all(&out)?;

    let data = generate_blobs(&BlobParams { n: 800, d: 50, ..Default::default() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random = Array2::from_shape_simple_fn((data.n(), 2), || StandardNormal.sample(&mut rng));
    let pca = pca_init(data.x.view(), 2)?;
    let tsne = run_reduction(data.x.view(), &OptimizerConfig::default())?.embedding;

    let ks = [5, 10, 50, 100];
    print!("{:<8}", "k");
    ks.iter().for_each(|k| print!("{k:>9}"));
    println!();
    for (name, y) in [("random", &random), ("pca", &pca), ("t-sne", &tsne)] {
        let mut report = trustworthiness_curve(data.x.view(), y.view(), &ks, 3, 500, 0)?;
        report.name = name.into();
        print!("{name:<8}");
        report.scores.iter().for_each(|s| print!("{s:>9.4}"));
        println!();
        write_report_json(&report, out.join(format!("{name}.json")))?;
    }
    println!("\nreports written to {}", out.display());
    Ok(())
}
