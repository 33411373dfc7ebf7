//! Command-line surface for the crossband toolkit.
//!
//! Verbs: `extract` (tensor cache files), `train`, `eval`, `robustness`,
//! `jpeg-aware`, `report`, `selftest`. Every run prints a provenance header
//! (version, seed, configuration hash) before any result. All randomness
//! derives from the single `--seed` flag. The exit status is 0 only if every
//! requested condition completed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crossband::cooccurrence::{cache as tensor_file, Normalization, OffsetSpec};
use crossband::corpus::DatasetManifest;
use crossband::network::{load_model, metrics_to_text, save_model, EpochMetrics};
use crossband::pipeline::{
    self, render_aligned, to_tsv, DetectorKind, ExperimentPlan, ResultTable, RunConfig,
    TensorCache, TrainingMode,
};
use crossband::selftest::run_selftest;

#[derive(Parser)]
#[command(
    name = "crossband",
    version,
    about = "GAN-image detection from spatial and cross-band pixel co-occurrences"
)]
struct Cli {
    /// Master seed; every random choice in a run derives from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker pool width (defaults to the available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Tensor cache directory; caching is disabled when unset.
    #[arg(long, global = true, env = "CROSSBAND_CACHE_DIR")]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    CrossConet,
    Conet,
}

impl From<DetectorArg> for DetectorKind {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::CrossConet => DetectorKind::CrossConet,
            DetectorArg::Conet => DetectorKind::Conet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    PerSliceSum,
    Raw,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::PerSliceSum => Normalization::PerSliceSum,
            NormalizationArg::Raw => Normalization::Raw,
        }
    }
}

/// Flags shared by every experiment-shaped verb.
#[derive(Args)]
struct ExperimentArgs {
    /// Dataset manifest path.
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Root for relative manifest paths (default: the manifest's directory).
    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Run-configuration file; its plan replaces the grid/offset/train flags.
    #[arg(long)]
    plan: Option<PathBuf>,

    /// Intra-band offset as `dx,dy`.
    #[arg(long, default_value = "1,1", value_parser = parse_offset)]
    delta: (i32, i32),

    /// Cross-band offset as `dx,dy`.
    #[arg(long, default_value = "0,0", value_parser = parse_offset)]
    delta_cross: (i32, i32),

    /// Tensor slice normalization.
    #[arg(long, value_enum, default_value = "per-slice-sum")]
    normalization: NormalizationArg,

    /// Evaluation budget per class per condition.
    #[arg(long, default_value_t = 2000)]
    images_per_class: usize,

    /// Reduced model: filters per convolution layer (full-size when unset).
    #[arg(long)]
    filters: Option<usize>,

    /// Reduced model: dense head width (requires --filters).
    #[arg(long)]
    dense_width: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 40)]
    epochs: usize,

    #[arg(long, default_value_t = 40)]
    batch_size: usize,

    #[arg(long, default_value_t = 0.01)]
    lr: f64,

    #[arg(long, default_value_t = 0.9)]
    momentum: f64,

    /// Stop once validation accuracy reaches this fraction.
    #[arg(long)]
    early_stop: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the co-occurrence tensor of one image and write a cache file.
    Extract {
        /// Input image (PNG or baseline JPEG).
        #[arg(long = "in")]
        input: PathBuf,

        /// Output tensor container path.
        #[arg(long)]
        out: PathBuf,

        /// Intra-band offset as `dx,dy`.
        #[arg(long, default_value = "1,1", value_parser = parse_offset)]
        delta: (i32, i32),

        /// Cross-band offset as `dx,dy`.
        #[arg(long, default_value = "0,0", value_parser = parse_offset)]
        delta_cross: (i32, i32),

        /// 6 for the cross-band tensor, 3 for the intra-band baseline.
        #[arg(long, default_value_t = 6)]
        channels: usize,

        #[arg(long, value_enum, default_value = "per-slice-sum")]
        normalization: NormalizationArg,
    },

    /// Train a detector on a manifest's train split.
    Train {
        #[command(flatten)]
        exp: ExperimentArgs,

        #[command(flatten)]
        train: TrainArgs,

        #[arg(long, value_enum, default_value = "cross-conet")]
        detector: DetectorArg,

        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,

        /// Per-epoch metrics file (tab-separated).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },

    /// Score the test split with a trained checkpoint (plain detection).
    Eval {
        #[command(flatten)]
        exp: ExperimentArgs,

        #[arg(long)]
        checkpoint: PathBuf,

        /// Write the result table here (aligned rendering always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Evaluate a checkpoint against a post-processing grid.
    Robustness {
        #[command(flatten)]
        exp: ExperimentArgs,

        #[arg(long)]
        checkpoint: PathBuf,

        /// `paper` for the built-in full grid, or a JSON grid file.
        #[arg(long, default_value = "paper")]
        grid: String,

        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Train and evaluate the JPEG-aware detector over a quality-factor grid.
    JpegAware {
        #[command(flatten)]
        exp: ExperimentArgs,

        #[command(flatten)]
        train: TrainArgs,

        #[arg(long, value_enum, default_value = "cross-conet")]
        detector: DetectorArg,

        /// Training quality factors, comma separated.
        #[arg(long, default_value = "75,80,85,90,95", value_delimiter = ',', value_parser = parse_qf_list)]
        train_qf: Vec<u8>,

        /// Evaluation quality factors, comma separated.
        #[arg(long, default_value = "73,75,77,80,83,85,87,90,93,95,97", value_delimiter = ',', value_parser = parse_qf_list)]
        eval_qf: Vec<u8>,

        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,

        /// Result table output path.
        #[arg(long)]
        table: Option<PathBuf>,

        /// Also run the post-processing-then-JPEG robustness table.
        #[arg(long)]
        robustness: bool,

        #[arg(long)]
        metrics: Option<PathBuf>,
    },

    /// Render a stored result table for reading.
    Report {
        /// Table file produced by eval/robustness/jpeg-aware.
        #[arg(long = "in")]
        input: PathBuf,
    },

    /// Run the oracle, gradient, and round-trip verification suites.
    Selftest {
        /// Reduced sample counts.
        #[arg(long)]
        quick: bool,
    },
}

fn parse_offset(s: &str) -> std::result::Result<(i32, i32), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `dx,dy`, got {s:?}"));
    }
    let dx = parts[0].trim().parse().map_err(|e| format!("bad dx: {e}"))?;
    let dy = parts[1].trim().parse().map_err(|e| format!("bad dy: {e}"))?;
    Ok((dx, dy))
}

fn parse_qf_list(s: &str) -> std::result::Result<u8, String> {
    s.trim().parse::<u8>().map_err(|e| format!("bad quality factor: {e}"))
}

fn print_provenance(seed: u64, config_hash: &str) {
    println!("# crossband {}", crossband::VERSION);
    println!("# seed: {seed}");
    println!("# config: sha256:{config_hash}");
}

fn hash_of(text: &str) -> String {
    crossband::sha256_hex(text.as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(failed_conditions) if failed_conditions.is_empty() => ExitCode::SUCCESS,
        Ok(failed_conditions) => {
            eprintln!("{} condition(s) failed:", failed_conditions.len());
            for c in failed_conditions {
                eprintln!("  {c}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns the labels of conditions that failed (empty = full success).
fn run(cli: Cli) -> Result<Vec<String>> {
    let cache = match &cli.cache_dir {
        Some(dir) => TensorCache::at(dir)?,
        None => TensorCache::disabled(),
    };
    match cli.command {
        Command::Extract {
            input,
            out,
            delta,
            delta_cross,
            channels,
            normalization,
        } => {
            let offsets = OffsetSpec { delta, delta_cross };
            let normalization: Normalization = normalization.into();
            print_provenance(
                cli.seed,
                &hash_of(&format!("extract {offsets:?} {normalization:?} {channels}")),
            );
            let image = crossband::corpus::decode_image(&input)?;
            let tensor = crossband::cooccurrence::build_tensor_for_channels(
                &image,
                channels,
                offsets,
                normalization,
            )?;
            tensor_file::save_tensor(&out, &tensor)?;
            println!(
                "wrote {} ({} slices, {}, {}x{} source)",
                out.display(),
                tensor.channels(),
                tensor.normalization().as_str(),
                image.width(),
                image.height()
            );
            Ok(Vec::new())
        }

        Command::Train {
            exp,
            train,
            detector,
            out,
            metrics,
        } => {
            let (plan, manifest, root) = resolve_plan(
                &exp,
                detector.into(),
                TrainingMode::Unaware,
                &train,
                cli.seed,
                None,
                None,
            )?;
            print_provenance(cli.seed, &plan.fingerprint());
            let (model, history) = pipeline::train_detector(
                &plan,
                &manifest,
                &root,
                &cache,
                &mut progress_printer(),
            )?;
            save_model(&out, &model, &plan.fingerprint_bytes())?;
            println!("checkpoint written to {}", out.display());
            if let Some(path) = metrics {
                write_metrics(&path, &history)?;
            }
            if let Some(best) = history.iter().map(|m| m.val_acc).fold(None, max_opt) {
                println!("best validation accuracy {best:.4} over {} epochs", history.len());
            }
            Ok(Vec::new())
        }

        Command::Eval {
            exp,
            checkpoint,
            out,
        } => {
            let (model, detector) = load_checkpoint(&checkpoint)?;
            let (plan, manifest, root) = resolve_plan(
                &exp,
                detector,
                TrainingMode::Unaware,
                &TrainArgs::default_values(),
                cli.seed,
                Some(&model.config),
                None,
            )?;
            print_provenance(cli.seed, &plan.fingerprint());
            let table = pipeline::run_plain_detection(&plan, &manifest, &root, &model, &cache)?;
            emit_table(&table, out.as_deref())?;
            Ok(failed_labels(&table))
        }

        Command::Robustness {
            exp,
            checkpoint,
            grid,
            out,
        } => {
            let (model, detector) = load_checkpoint(&checkpoint)?;
            let grid_specs = load_grid(&grid, cli.seed)?;
            let (plan, manifest, root) = resolve_plan(
                &exp,
                detector,
                TrainingMode::Unaware,
                &TrainArgs::default_values(),
                cli.seed,
                Some(&model.config),
                Some(grid_specs),
            )?;
            print_provenance(cli.seed, &plan.fingerprint());
            let table = pipeline::run_robustness_sweep(&plan, &manifest, &root, &model, &cache)?;
            emit_table(&table, out.as_deref())?;
            Ok(failed_labels(&table))
        }

        Command::JpegAware {
            exp,
            train,
            detector,
            train_qf,
            eval_qf,
            out,
            table,
            robustness,
            metrics,
        } => {
            let mut failed = Vec::new();
            let (mut plan, manifest, root) = resolve_plan(
                &exp,
                detector.into(),
                TrainingMode::JpegAware,
                &train,
                cli.seed,
                None,
                None,
            )?;
            if exp.plan.is_none() {
                plan.train_qf_grid = train_qf;
                plan.eval_qf_grid = eval_qf;
                plan.validate()?;
            }
            print_provenance(cli.seed, &plan.fingerprint());
            let (model, history, qf_table) =
                pipeline::run_jpeg_aware(&plan, &manifest, &root, &cache, &mut progress_printer())?;
            save_model(&out, &model, &plan.fingerprint_bytes())?;
            println!("checkpoint written to {}", out.display());
            if let Some(path) = metrics {
                write_metrics(&path, &history)?;
            }
            emit_table(&qf_table, table.as_deref())?;
            failed.extend(failed_labels(&qf_table));
            if robustness {
                let rob =
                    pipeline::run_jpeg_aware_robustness(&plan, &manifest, &root, &model, &cache)?;
                let rob_path = table
                    .as_ref()
                    .map(|p| p.with_extension("robustness.tsv"));
                emit_table(&rob, rob_path.as_deref())?;
                failed.extend(failed_labels(&rob));
            }
            Ok(failed)
        }

        Command::Report { input } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let table = pipeline::parse_tsv(&text)?;
            print_provenance(table.provenance.seed, &table.provenance.config_sha256);
            print!("{}", render_aligned(&table));
            Ok(Vec::new())
        }

        Command::Selftest { quick } => {
            print_provenance(cli.seed, &hash_of(&format!("selftest quick={quick}")));
            let report = run_selftest(cli.seed, quick);
            print!("{}", report.render());
            if report.all_passed() {
                Ok(Vec::new())
            } else {
                Ok(report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.to_string())
                    .collect())
            }
        }
    }
}

impl TrainArgs {
    fn default_values() -> Self {
        TrainArgs {
            epochs: 40,
            batch_size: 40,
            lr: 0.01,
            momentum: 0.9,
            early_stop: None,
        }
    }
}

fn max_opt(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.max(v)))
}

fn progress_printer() -> impl FnMut(&EpochMetrics) {
    |m: &EpochMetrics| {
        eprintln!(
            "epoch {:3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        );
    }
}

fn write_metrics(path: &Path, history: &[EpochMetrics]) -> Result<()> {
    std::fs::write(path, metrics_to_text(history))
        .with_context(|| format!("writing metrics to {}", path.display()))?;
    println!("metrics written to {}", path.display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<(crossband::Model32, DetectorKind)> {
    if !path.exists() {
        bail!(
            "configuration error: checkpoint {} does not exist (train one first)",
            path.display()
        );
    }
    let (model, _) = load_model(path)?;
    let detector = match model.config.in_channels {
        6 => DetectorKind::CrossConet,
        3 => DetectorKind::Conet,
        other => bail!("checkpoint has unsupported channel count {other}"),
    };
    Ok((model, detector))
}

/// Assemble the plan, manifest, and data root from flags or a --plan file.
fn resolve_plan(
    exp: &ExperimentArgs,
    detector: DetectorKind,
    mode: TrainingMode,
    train: &TrainArgs,
    seed: u64,
    model_config: Option<&crossband::network::ModelConfig>,
    grid: Option<Vec<crossband::postprocess::PostProcessSpec>>,
) -> Result<(ExperimentPlan, DatasetManifest, PathBuf)> {
    let (plan, manifest_path, data_root) = if let Some(plan_path) = &exp.plan {
        let run: RunConfig = RunConfig::load(plan_path)?;
        let manifest_path = exp.manifest.clone().unwrap_or(run.manifest.clone());
        let root = exp
            .data_root
            .clone()
            .or(run.data_root.clone())
            .or_else(|| manifest_path.parent().map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("."));
        (run.plan, manifest_path, root)
    } else {
        let manifest_path = exp
            .manifest
            .clone()
            .context("configuration error: --manifest is required (or provide --plan)")?;
        let root = exp
            .data_root
            .clone()
            .or_else(|| manifest_path.parent().map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("."));
        let mut plan = ExperimentPlan::paper(detector, mode, seed);
        plan.offsets = OffsetSpec {
            delta: exp.delta,
            delta_cross: exp.delta_cross,
        };
        plan.normalization = exp.normalization.into();
        plan.images_per_class_per_condition = exp.images_per_class;
        plan.train.learning_rate = train.lr;
        plan.train.momentum = train.momentum;
        plan.train.batch_size = train.batch_size;
        plan.train.epochs = train.epochs;
        plan.train.early_stop_val_acc = train.early_stop;
        plan.train.seed = seed;
        if let Some(filters) = exp.filters {
            let dense = exp.dense_width.unwrap_or(8);
            plan.model_override = Some(crossband::network::ModelConfig::reduced(
                detector.channels(),
                256,
                filters,
                dense,
            ));
        }
        if let Some(grid) = grid {
            plan.robustness_grid = grid;
        }
        plan.validate()?;
        (plan, manifest_path, root)
    };
    if let Some(expected) = model_config {
        if plan.model_config().in_channels != expected.in_channels {
            bail!(
                "shape error: checkpoint expects {} input channels, plan has {}",
                expected.in_channels,
                plan.model_config().in_channels
            );
        }
    }
    let manifest = DatasetManifest::load(&manifest_path)?;
    Ok((plan, manifest, data_root))
}

fn load_grid(
    grid: &str,
    seed: u64,
) -> Result<Vec<crossband::postprocess::PostProcessSpec>> {
    if grid == "paper" {
        return Ok(crossband::postprocess::paper_grid(seed));
    }
    let path = Path::new(grid);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading grid file {}", path.display()))?;
    let specs: Vec<crossband::postprocess::PostProcessSpec> =
        serde_json::from_str(&text).with_context(|| format!("parsing grid file {grid}"))?;
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

fn emit_table(table: &ResultTable, out: Option<&Path>) -> Result<()> {
    if let Some(path) = out {
        std::fs::write(path, to_tsv(table))
            .with_context(|| format!("writing table to {}", path.display()))?;
        println!("table written to {}", path.display());
    }
    print!("{}", render_aligned(table));
    Ok(())
}

fn failed_labels(table: &ResultTable) -> Vec<String> {
    table
        .failed_rows()
        .map(|r| format!("{} {}", r.condition, r.parameter))
        .collect()
}
