//! Calibrates per-point Gaussian bandwidths to a target perplexity and shows
//! how the same data looks through Euclidean and RBF-kernel distances.
//!
//! cargo run --release --example perplexity_calibration

use kernel_tsne::kernels::squared_euclidean_distances;
use kernel_tsne::prelude::*;

fn summary(values: &[f64]) -> (f64, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, values.iter().sum::<f64>() / values.len() as f64, max)
}

fn row_perplexity(row: &[f64]) -> f64 {
    let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    h.exp2()
}

fn main() -> Result<()> {
    let data = generate_blobs(&BlobParams { n: 300, d: 20, clusters: 5, ..Default::default() })?;
    let distances = [
        ("euclidean", squared_euclidean_distances(data.x.view())?),
        ("rbf 0.01", kernel_distance_matrix(&KernelSpec::rbf(0.01)?, data.x.view())?),
    ];

    for (name, d) in &distances {
        println!("{name}");
        println!("  {:>6} {:>10} {:>10} {:>10} {:>14}", "perp", "σ min", "σ mean", "σ max", "worst |H-log|");
        for perplexity in [5.0, 30.0, 100.0] {
            let c = conditional_affinities(d.view(), perplexity)?;
            let (lo, mean, hi) = summary(c.sigmas.as_slice().unwrap());
            let worst = c
                .values
                .rows()
                .into_iter()
                .map(|r| (row_perplexity(&r.to_vec()) - perplexity).abs())
                .fold(0.0, f64::max);
            println!("  {perplexity:>6} {lo:>10.4} {mean:>10.4} {hi:>10.4} {worst:>14.2e}");
        }
        let p = symmetrize(&conditional_affinities(d.view(), 30.0)?);
        println!("  joint P: total {:.12}, symmetric {}\n", p.total(), p.is_symmetric());
    }
    Ok(())
}
