//! Benchmark tables comparing sampling methods on one dataset.
//!
//! CSV columns, in order:
//!
//! | column           | contents                                                |
//! |------------------|---------------------------------------------------------|
//! | `Dataset`        | dataset name                                            |
//! | `Sample Method`  | e.g. `LADIES (512)`, `GraphSage (5)`, `Full-Batch`      |
//! | `F1-Score(%)`    | test micro-F1 at the convergence point, `mean ± std`     |
//! | `Total Time(s)`  | training seconds before convergence, validation excluded |
//! | `Mem(MB)`        | parameters plus stored activations at 4 bytes per float  |
//! | `Batch Time(ms)` | mean time per training batch                            |
//! | `Batch Num`      | batches trained before convergence                      |
//! | `Activations`    | raw activation count behind `Mem(MB)`, mean             |
//! | `Diverged`       | repetitions aborted on non-finite values                |

use std::io::Write;

use ladies_core::{Dataset, SamplerConfig, SamplerKind};
use serde::Serialize;

use crate::error::CliError;
use crate::metrics::{RepeatedMetrics, Stat};
use crate::train::{train_repeated, TrainConfig};

pub const BENCHMARK_HEADERS: [&str; 9] = [
    "Dataset",
    "Sample Method",
    "F1-Score(%)",
    "Total Time(s)",
    "Mem(MB)",
    "Batch Time(ms)",
    "Batch Num",
    "Activations",
    "Diverged",
];

/// Full-batch, GraphSage (5), FastGCN (64, 512) and LADIES (64, 512), all
/// sharing `base` otherwise.
pub fn default_rows(base: &TrainConfig) -> Vec<TrainConfig> {
    [
        SamplerKind::FullBatch,
        SamplerKind::Neighbor { s_node: 5 },
        SamplerKind::FastGcn { s_layer: 64 },
        SamplerKind::FastGcn { s_layer: 512 },
        SamplerKind::Ladies { s_layer: 64 },
        SamplerKind::Ladies { s_layer: 512 },
    ]
    .into_iter()
    .map(|kind| TrainConfig {
        sampler: SamplerConfig { kind, ..base.sampler },
        ..*base
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub metrics: RepeatedMetrics,
}

pub fn run_benchmark(dataset: &str, data: &Dataset, configs: &[TrainConfig]) -> Result<Vec<BenchmarkRow>, CliError> {
    configs
        .iter()
        .map(|c| {
            Ok(BenchmarkRow {
                dataset: dataset.to_string(),
                metrics: train_repeated(c, data)?,
            })
        })
        .collect()
}

fn pm(s: Stat, scale: f64, digits: usize) -> String {
    format!("{:.*} ± {:.*}", digits, s.mean * scale, digits, s.std * scale)
}

/// The row as CSV / text cells, in [`BENCHMARK_HEADERS`] order.
pub fn cells(row: &BenchmarkRow) -> Vec<String> {
    let m = &row.metrics;
    let activations = m.runs.iter().map(|r| r.activations as f64).sum::<f64>() / m.runs.len().max(1) as f64;
    vec![
        row.dataset.clone(),
        m.sampler.clone(),
        pm(m.test_f1, 100.0, 1),
        format!("{:.3}", m.train_seconds.mean),
        format!("{:.2}", m.memory_mb.mean),
        format!("{:.3}", m.batch_ms.mean),
        format!("{:.0}", m.convergence_batch.mean),
        format!("{activations:.0}"),
        m.diverged.to_string(),
    ]
}

pub fn write_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCHMARK_HEADERS)?;
    for row in rows {
        w.write_record(cells(row))?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned columns for terminals.
pub fn write_text<W: Write>(rows: &[BenchmarkRow], mut out: W) -> Result<(), CliError> {
    let table: Vec<Vec<String>> = std::iter::once(BENCHMARK_HEADERS.iter().map(|s| s.to_string()).collect())
        .chain(rows.iter().map(cells))
        .collect();
    let widths: Vec<usize> = (0..BENCHMARK_HEADERS.len())
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        writeln!(out, "{}", line.join("  ").trim_end())?;
    }
    Ok(())
}
