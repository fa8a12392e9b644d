use std::cmp::Ordering;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::DatasetDescriptor;
use crate::dataio::LabeledDataset;
use crate::embedding::{run_reduction, LearningRate, OptimizerConfig, ReductionResult, Variant};
use crate::kernels::KernelSpec;
use crate::metrics::trustworthiness;
use crate::{Error, Result};

/// Grid axes and evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub gammas: Vec<f64>,
    pub perplexities: Vec<f64>,
    /// Neighborhood size of the trustworthiness score used for ranking.
    pub metric_k: usize,
    /// Cells run concurrently.
    pub jobs: usize,
    pub overrides: Vec<CellOverride>,
}

/// A fixed learning rate for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOverride {
    pub gamma: f64,
    pub perplexity: f64,
    pub learning_rate: f64,
}

/// `gamma` is `None` for plain t-SNE, which has no kernel axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub gamma: Option<f64>,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellStatus {
    Ok { trustworthiness: f64, final_kl: f64, wall_secs: f64 },
    Failed { error: String, exit_code: i32, wall_secs: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rank: usize,
    pub cell: GridCell,
    #[serde(flatten)]
    pub status: CellStatus,
}

/// Ranked grid results. Successful cells come first, best score first, ties
/// going to the smaller gamma and then the smaller perplexity; failed cells
/// follow in grid order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub variant: Variant,
    pub metric_k: usize,
    pub dataset: DatasetDescriptor,
    pub rows: Vec<GridRow>,
    pub best: Option<GridCell>,
    #[serde(skip)]
    pub best_result: Option<ReductionResult>,
    #[serde(skip)]
    pub first_error: Option<(i32, String)>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    rank: usize,
    gamma: Option<f64>,
    perplexity: f64,
    status: &'a str,
    trustworthiness: Option<f64>,
    final_kl: Option<f64>,
    wall_secs: f64,
    error: &'a str,
}

impl GridReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::Format { path: path.to_path_buf(), message: e.to_string() };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for row in &self.rows {
            let rec = match &row.status {
                CellStatus::Ok { trustworthiness, final_kl, wall_secs } => CsvRow {
                    rank: row.rank,
                    gamma: row.cell.gamma,
                    perplexity: row.cell.perplexity,
                    status: "ok",
                    trustworthiness: Some(*trustworthiness),
                    final_kl: Some(*final_kl),
                    wall_secs: *wall_secs,
                    error: "",
                },
                CellStatus::Failed { error, wall_secs, .. } => CsvRow {
                    rank: row.rank,
                    gamma: row.cell.gamma,
                    perplexity: row.cell.perplexity,
                    status: "failed",
                    trustworthiness: None,
                    final_kl: None,
                    wall_secs: *wall_secs,
                    error,
                },
            };
            w.serialize(rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn cell_config(base: &OptimizerConfig, cell: GridCell, overrides: &[CellOverride]) -> Result<OptimizerConfig> {
    let mut config = base.clone();
    config.perplexity = cell.perplexity;
    if let Some(g) = cell.gamma {
        config.kernel = KernelSpec::rbf(g)?;
    }
    let hit = overrides.iter().find(|o| {
        close(o.perplexity, cell.perplexity) && cell.gamma.is_none_or(|g| close(o.gamma, g))
    });
    if let Some(o) = hit {
        config.learning_rate = LearningRate::Fixed(o.learning_rate);
    }
    config.validate()?;
    Ok(config)
}

type CellOutcome = (GridCell, std::result::Result<(ReductionResult, f64), Error>, f64);

fn run_cell(data: &LabeledDataset, base: &OptimizerConfig, spec: &GridSpec, cell: GridCell) -> CellOutcome {
    let start = Instant::now();
    let outcome = cell_config(base, cell, &spec.overrides)
        .and_then(|c| run_reduction(data.x.view(), &c))
        .and_then(|r| {
            let t = trustworthiness(data.x.view(), r.embedding.view(), spec.metric_k)?;
            Ok((r, t))
        });
    match &outcome {
        Ok((_, t)) => log::info!("grid cell {cell:?}: trustworthiness {t:.4}"),
        Err(e) => log::warn!("grid cell {cell:?} failed: {e}"),
    }
    (cell, outcome, start.elapsed().as_secs_f64())
}

fn by_cell(a: &GridCell, b: &GridCell) -> Ordering {
    let ga = a.gamma.unwrap_or(0.0);
    let gb = b.gamma.unwrap_or(0.0);
    ga.total_cmp(&gb).then(a.perplexity.total_cmp(&b.perplexity))
}

/// Runs every cell of the grid. A cell that fails (for example by diverging)
/// is recorded as failed and the rest of the grid still runs.
pub fn run_grid(
    data: &LabeledDataset,
    dataset: &DatasetDescriptor,
    spec: &GridSpec,
    base: &OptimizerConfig,
) -> Result<GridReport> {
    if spec.perplexities.is_empty() {
        return Err(Error::Parameter("the perplexity grid is empty".into()));
    }
    let n = data.n();
    if spec.metric_k == 0 || 2 * spec.metric_k >= n {
        return Err(Error::Parameter(format!(
            "metric k = {} must satisfy 1 ≤ k < n/2 with n = {n}",
            spec.metric_k
        )));
    }
    let gammas: Vec<Option<f64>> = if base.variant == Variant::Plain {
        vec![None]
    } else if spec.gammas.is_empty() {
        return Err(Error::Parameter("the gamma grid is empty".into()));
    } else {
        spec.gammas.iter().map(|&g| Some(g)).collect()
    };
    let cells: Vec<GridCell> = gammas
        .iter()
        .flat_map(|&gamma| spec.perplexities.iter().map(move |&perplexity| GridCell { gamma, perplexity }))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start {} workers: {e}", spec.jobs)))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        use rayon::prelude::*;
        cells.par_iter().map(|&c| run_cell(data, base, spec, c)).collect()
    });

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (cell, outcome, wall_secs) in outcomes {
        match outcome {
            Ok((result, t)) => ok.push((cell, result, t, wall_secs)),
            Err(e) => {
                first_error.get_or_insert((e.exit_code(), e.to_string()));
                failed.push(GridRow {
                    rank: 0,
                    cell,
                    status: CellStatus::Failed { error: e.to_string(), exit_code: e.exit_code(), wall_secs },
                });
            }
        }
    }
    ok.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| by_cell(&a.0, &b.0)));
    failed.sort_by(|a, b| by_cell(&a.cell, &b.cell));

    let best = ok.first().map(|o| o.0);
    let mut rows: Vec<GridRow> = Vec::with_capacity(cells.len());
    let mut best_result = None;
    for (i, (cell, result, t, wall_secs)) in ok.into_iter().enumerate() {
        rows.push(GridRow {
            rank: i + 1,
            cell,
            status: CellStatus::Ok { trustworthiness: t, final_kl: result.final_kl(), wall_secs },
        });
        if i == 0 {
            best_result = Some(result);
        }
    }
    let offset = rows.len();
    rows.extend(failed.into_iter().enumerate().map(|(i, mut r)| {
        r.rank = offset + i + 1;
        r
    }));

    Ok(GridReport {
        variant: base.variant,
        metric_k: spec.metric_k,
        dataset: dataset.clone(),
        rows,
        best,
        best_result,
        first_error,
    })
}
