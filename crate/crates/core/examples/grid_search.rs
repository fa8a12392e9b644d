//! Sweeps (gamma, perplexity) for kernel t-SNE and ranks the cells
//! by trustworthiness. One cell is forced to diverge to show that failures
//! are recorded without stopping the grid.
//!
//! cargo run --release --example grid_search

use kernel_tsne::cli::{run_grid, CellOverride, CellStatus, DatasetDescriptor, GridSpec};
use kernel_tsne::prelude::*;

fn main() -> Result<()> {
    let data = generate_blobs(&BlobParams::default())?.subsample(500, 0)?;
    let descriptor = DatasetDescriptor {
        name: data.name.clone(),
        source: "synthetic".into(),
        n: data.n(),
        d: data.dim(),
        labeled: true,
        standardized: false,
        subsample: Some(500),
    };
    let spec = GridSpec {
        gammas: vec![1e-3, 1e-2, 1e-1],
        perplexities: vec![10.0, 30.0],
        metric_k: 10,
        jobs: 4,
        overrides: vec![CellOverride { gamma: 1e-3, perplexity: 30.0, learning_rate: 1e9 }],
    };
    let base = OptimizerConfig { variant: Variant::KernelHighDim, n_iter: 500, ..Default::default() };
    let report = run_grid(&data, &descriptor, &spec, &base)?;

    println!("{:>4} {:>8} {:>6}  result", "rank", "gamma", "perp");
    for row in &report.rows {
        let gamma = row.cell.gamma.map_or("-".into(), |g| format!("{g:e}"));
        let result = match &row.status {
            CellStatus::Ok { trustworthiness, final_kl, .. } => format!("T = {trustworthiness:.4}, KL = {final_kl:.3}"),
            CellStatus::Failed { error, .. } => format!("failed: {error}"),
        };
        println!("{:>4} {gamma:>8} {:>6}  {result}", row.rank, row.cell.perplexity);
    }
    if let Some(best) = report.best {
        println!("\nbest cell: gamma {:?}, perplexity {}", best.gamma, best.perplexity);
    }
    Ok(())
}
