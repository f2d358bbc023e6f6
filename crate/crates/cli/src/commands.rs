use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ladies_core::data::{load_dataset_with, write_dataset, LoadOptions};
use ladies_core::variance::ComplexityParams;
use ladies_core::{Dataset, SamplerConfig, SamplerKind, SyntheticSpec};
use serde::Serialize;

use crate::benchmark::{default_rows, run_benchmark, write_csv, write_text};
use crate::error::CliError;
use crate::study::{run_complexity, run_variance_study, VarianceStudyConfig};
use crate::train::{train_repeated, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "ladies", version, about = "Sampled GCN training and variance experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with early stopping and report test micro-F1.
    Train(TrainArgs),
    /// Train the standard row set and emit a comparison table.
    Benchmark(BenchmarkArgs),
    /// Empirical and closed-form sampling variances.
    Variance(VarianceArgs),
    /// Memory and time estimates with measured activation counts.
    Complexity(ComplexityArgs),
    /// Write a synthetic dataset directory.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerName {
    Ladies,
    Fastgcn,
    Neighbor,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset directory (graph.txt, features.txt, labels.txt, splits.txt).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Synthetic spec file of key=value pairs, used without --dataset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Synthetic spec entry key=value; repeatable, overrides --spec.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Keep features as stored instead of L1 row-normalizing them.
    #[arg(long)]
    pub raw_features: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value = "ladies")]
    pub sampler: SamplerName,
    #[arg(long, default_value_t = 512)]
    pub s_layer: usize,
    #[arg(long, default_value_t = 5)]
    pub s_node: usize,
    /// Row normalization of sampled propagation matrices; scheme default if
    /// omitted (on for LADIES only).
    #[arg(long, value_enum)]
    pub normalize: Option<OnOff>,
    /// Add the upper layer's nodes to every sampled layer (LADIES, FastGCN).
    #[arg(long)]
    pub include_upper: bool,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        let kind = match self.sampler {
            SamplerName::Ladies => SamplerKind::Ladies { s_layer: self.s_layer },
            SamplerName::Fastgcn => SamplerKind::FastGcn { s_layer: self.s_layer },
            SamplerName::Neighbor => SamplerKind::Neighbor { s_node: self.s_node },
            SamplerName::Full => SamplerKind::FullBatch,
        };
        let mut config = SamplerConfig::new(kind);
        if let Some(n) = self.normalize {
            config = config.with_normalize(n == OnOff::On);
        }
        if self.include_upper {
            config = config.with_include_upper(true);
        }
        config
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 512)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_batches: usize,
    /// Validate after every N batches.
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
}

impl TrainingArgs {
    pub fn config(&self, sampler: SamplerConfig) -> TrainConfig {
        TrainConfig {
            sampler,
            layers: self.layers,
            hidden: self.hidden,
            batch: self.batch,
            lr: self.lr,
            threshold: self.threshold,
            patience: self.patience,
            max_batches: self.max_batches,
            seed: self.seed,
            reps: self.reps,
            eval_every: self.eval_every,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Dataset name for the first column; defaults to the directory name.
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Layer-wise sample sizes to sweep.
    #[arg(long = "s-layer", value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
    pub s_layer: Vec<usize>,
    /// Neighbor fan-outs to sweep.
    #[arg(long = "s-node", value_delimiter = ',', default_values_t = [2usize, 5])]
    pub s_node: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    #[arg(long, default_value_t = 500)]
    pub pair_trials: usize,
    #[arg(long, default_value_t = 1000)]
    pub census_plans: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 5)]
    pub layers: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 512)]
    pub batch: usize,
    #[arg(long, default_value_t = 512)]
    pub s_layer: usize,
    #[arg(long, default_value_t = 5)]
    pub s_node: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Synthetic spec file of key=value pairs.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Spec entry key=value; repeatable, overrides --spec.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn synthetic_spec(spec: Option<&Path>, set: &[String]) -> Result<SyntheticSpec, CliError> {
    let mut text = match spec {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    for entry in set {
        if entry.chars().any(char::is_whitespace) || !entry.contains('=') {
            return Err(CliError::Config(format!("--set expects KEY=VALUE, got {entry:?}")));
        }
        text.push('\n');
        text.push_str(entry);
    }
    if text.trim().is_empty() {
        return Err(CliError::Config("give --dataset, or a synthetic --spec / --set".into()));
    }
    Ok(SyntheticSpec::parse(&text)?)
}

pub fn load_data(args: &DataArgs) -> Result<Dataset, CliError> {
    match &args.dataset {
        Some(dir) => Ok(load_dataset_with(
            dir,
            LoadOptions {
                normalize_features: !args.raw_features,
            },
        )?),
        None => {
            let mut data = synthetic_spec(args.spec.as_deref(), &args.set)?.generate()?;
            if !args.raw_features {
                ladies_core::data::l1_normalize_rows(&mut data.features);
            }
            Ok(data)
        }
    }
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(Box::new(io::BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn emit_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn unsupported(format: Format, command: &str) -> CliError {
    CliError::Config(format!("{command} does not support --format {format:?}").to_lowercase())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let data = load_data(&args.data)?;
            let config = args.training.config(args.sampler.config());
            let result = train_repeated(&config, &data)?;
            let mut out = open_output(&args.output.out)?;
            match args.output.format.unwrap_or(Format::Text) {
                Format::Json => emit_json(&result, &mut out)?,
                Format::Text => {
                    writeln!(out, "sampler        {}", result.sampler)?;
                    writeln!(
                        out,
                        "test F1 (%)    {:.1} ± {:.1}",
                        100.0 * result.test_f1.mean,
                        100.0 * result.test_f1.std
                    )?;
                    writeln!(out, "total time (s) {:.3}", result.train_seconds.mean)?;
                    writeln!(out, "memory (MB)    {:.2}", result.memory_mb.mean)?;
                    writeln!(out, "batch time (ms){:>8.3}", result.batch_ms.mean)?;
                    writeln!(out, "batch num      {:.0}", result.convergence_batch.mean)?;
                    writeln!(out, "diverged       {}", result.diverged)?;
                }
                Format::Csv => {
                    let name = dataset_name(&args.data, None);
                    let row = crate::benchmark::BenchmarkRow {
                        dataset: name,
                        metrics: result,
                    };
                    write_csv(std::slice::from_ref(&row), &mut out)?;
                }
            }
            out.flush()?;
        }
        Command::Benchmark(args) => {
            let data = load_data(&args.data)?;
            let base = args.training.config(SamplerConfig::new(SamplerKind::FullBatch));
            let name = dataset_name(&args.data, args.name.as_deref());
            let rows = run_benchmark(&name, &data, &default_rows(&base))?;
            let mut out = open_output(&args.output.out)?;
            match args.output.format.unwrap_or(Format::Csv) {
                Format::Csv => write_csv(&rows, &mut out)?,
                Format::Text => write_text(&rows, &mut out)?,
                Format::Json => emit_json(&rows, &mut out)?,
            }
            out.flush()?;
        }
        Command::Variance(args) => {
            let data = load_data(&args.data)?;
            let config = VarianceStudyConfig {
                batch: args.batch,
                s_layer: args.s_layer.clone(),
                s_node: args.s_node.clone(),
                trials: args.trials,
                pairs: args.pairs,
                pair_trials: args.pair_trials,
                census_plans: args.census_plans,
                census_layers: args.layers,
                hidden: args.hidden,
                seed: args.seed,
                ..VarianceStudyConfig::default()
            };
            let study = run_variance_study(&config, &data)?;
            let mut out = open_output(&args.output.out)?;
            match args.output.format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&study, &mut out)?,
                Format::Text => {
                    writeln!(
                        out,
                        "{:<18} {:>5} {:>14} {:>12} {:>14}",
                        "scheme", "norm", "empirical", "std err", "closed form"
                    )?;
                    for r in &study.reports {
                        let closed = r.closed_form.map_or("-".to_string(), |v| format!("{v:.6e}"));
                        let norm = if r.normalized { "on" } else { "off" };
                        writeln!(
                            out,
                            "{:<18} {:>5} {:>14.6e} {:>12.3e} {:>14}",
                            r.scheme, norm, r.empirical, r.standard_error, closed
                        )?;
                    }
                    for o in &study.ordering {
                        writeln!(
                            out,
                            "s={}: LADIES below FastGCN in {}/{} paired experiments",
                            o.s_layer, o.outcome.first_wins, o.outcome.pairs
                        )?;
                    }
                    for c in &study.zero_rows {
                        let tag = if c.include_upper { " +upper" } else { "" };
                        writeln!(out, "{}{}: zero-row frequency {:.4}", c.scheme, tag, c.census.frequency)?;
                    }
                }
                f => return Err(unsupported(f, "variance")),
            }
            out.flush()?;
        }
        Command::Complexity(args) => {
            let data = load_data(&args.data)?;
            let params = ComplexityParams {
                layers: args.layers,
                hidden: args.hidden,
                num_nodes: data.num_nodes(),
                adjacency_nnz: data.graph.nnz(),
                batch: args.batch,
                s_node: args.s_node,
                s_layer: args.s_layer,
            };
            if params.layers == 0 || params.s_layer == 0 || params.s_node == 0 || params.batch == 0 {
                return Err(CliError::Config("counts must be positive".into()));
            }
            let records = run_complexity(&data, &params, args.seed)?;
            let mut out = open_output(&args.output.out)?;
            match args.output.format.unwrap_or(Format::Json) {
                Format::Json => emit_json(&records, &mut out)?,
                Format::Text => {
                    writeln!(
                        out,
                        "{:<11} {:>14} {:>14} {:>14} {:>10}",
                        "scheme", "memory", "time", "activations", "MB"
                    )?;
                    for r in &records {
                        let (acts, mb) = r.measured.as_ref().map_or(("-".into(), "-".into()), |m| {
                            (m.activations.to_string(), format!("{:.2}", m.megabytes))
                        });
                        writeln!(
                            out,
                            "{:<11} {:>14.4e} {:>14.4e} {:>14} {:>10}",
                            r.estimate.scheme.name(),
                            r.estimate.memory,
                            r.estimate.time,
                            acts,
                            mb
                        )?;
                    }
                }
                f => return Err(unsupported(f, "complexity")),
            }
            out.flush()?;
        }
        Command::GenData(args) => {
            let data = synthetic_spec(args.spec.as_deref(), &args.set)?.generate()?;
            write_dataset(&data, &args.out)?;
        }
    }
    Ok(())
}

fn dataset_name(data: &DataArgs, name: Option<&str>) -> String {
    if let Some(name) = name {
        return name.to_string();
    }
    data.dataset
        .as_ref()
        .and_then(|d| d.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".to_string())
}
