//! Experiment orchestration: plans, tensor extraction, detector training,
//! plain detection, the robustness sweep, and the JPEG-aware protocol.

mod cache;
mod report;
mod toy;

pub use cache::TensorCache;
pub use report::{parse_tsv, render_aligned, to_tsv, Provenance, ResultRow, ResultTable, RowStatus};
pub use toy::{generate_toy_corpus, toy_model_config, toy_train_config, ToyCorpusSpec};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cooccurrence::{Normalization, OffsetSpec, CELLS};
use crate::corpus::{decode_image, DatasetManifest, Label, Split};
use crate::error::{Error, Result};
use crate::network::{
    evaluate, train, Batch, EpochMetrics, Model, ModelConfig, SampleSource, TrainConfig,
    DECISION_THRESHOLD,
};
use crate::postprocess::{apply_chain, PostProcessSpec};

/// Which detector variant a plan trains and evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// 6-channel detector over spatial plus cross-band co-occurrences.
    CrossConet,
    /// 3-channel intra-band baseline.
    Conet,
}

impl DetectorKind {
    pub fn channels(&self) -> usize {
        match self {
            DetectorKind::CrossConet => 6,
            DetectorKind::Conet => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::CrossConet => "cross_conet",
            DetectorKind::Conet => "conet",
        }
    }

    /// Full-size model configuration for this detector.
    pub fn full_config(&self) -> ModelConfig {
        match self {
            DetectorKind::CrossConet => ModelConfig::cross_conet(),
            DetectorKind::Conet => ModelConfig::conet(),
        }
    }
}

/// Whether training sees clean images or the JPEG-augmented set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    Unaware,
    JpegAware,
}

/// Everything one experiment needs: detector, mode, grids, offsets,
/// normalization, training settings, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub detector: DetectorKind,
    pub mode: TrainingMode,
    pub train_qf_grid: Vec<u8>,
    pub eval_qf_grid: Vec<u8>,
    pub robustness_grid: Vec<PostProcessSpec>,
    /// Per-class evaluation budget per condition (the protocol uses 2000;
    /// smaller test splits are used in full).
    pub images_per_class_per_condition: usize,
    pub offsets: OffsetSpec,
    pub normalization: Normalization,
    pub train: TrainConfig,
    pub seed: u64,
    /// Reduced architecture override for desk-scale runs; `None` selects the
    /// full-size detector.
    #[serde(default)]
    pub model_override: Option<ModelConfig>,
}

impl ExperimentPlan {
    /// The full evaluation protocol for `detector`: the published grids,
    /// default offsets (delta (1,1), cross (0,0)), per-slice-sum
    /// normalization, 2000 images per class per condition, all randomness
    /// derived from `seed`.
    pub fn paper(detector: DetectorKind, mode: TrainingMode, seed: u64) -> Self {
        ExperimentPlan {
            detector,
            mode,
            train_qf_grid: crate::postprocess::PAPER_TRAIN_QF_GRID.to_vec(),
            eval_qf_grid: crate::postprocess::PAPER_EVAL_QF_GRID.to_vec(),
            robustness_grid: crate::postprocess::paper_grid(seed),
            images_per_class_per_condition: 2000,
            offsets: OffsetSpec::default(),
            normalization: Normalization::PerSliceSum,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            seed,
            model_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == TrainingMode::JpegAware && self.train_qf_grid.is_empty() {
            return Err(Error::Config(
                "jpeg-aware mode requires a non-empty training quality-factor grid".into(),
            ));
        }
        for qf in self.train_qf_grid.iter().chain(&self.eval_qf_grid) {
            if !(1..=100).contains(qf) {
                return Err(Error::Config(format!("quality factor {qf} out of [1, 100]")));
            }
        }
        if self.images_per_class_per_condition == 0 {
            return Err(Error::Config(
                "images_per_class_per_condition must be at least 1".into(),
            ));
        }
        for spec in &self.robustness_grid {
            spec.validate()?;
        }
        self.train.validate()?;
        let model = self.model_config();
        model.validate()?;
        if model.in_channels != self.detector.channels() {
            return Err(Error::Shape(format!(
                "model override has {} input channels but detector {} wants {}",
                model.in_channels,
                self.detector.as_str(),
                self.detector.channels()
            )));
        }
        Ok(())
    }

    /// Model configuration this plan trains (override or full-size).
    pub fn model_config(&self) -> ModelConfig {
        self.model_override
            .clone()
            .unwrap_or_else(|| self.detector.full_config())
    }

    /// SHA-256 of the canonical JSON serialization, as hex.
    pub fn fingerprint(&self) -> String {
        crate::corpus::hex_string(&self.fingerprint_bytes())
    }

    /// Digest bytes of the canonical JSON serialization (checkpoint embedding).
    pub fn fingerprint_bytes(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("plan serializes");
        Sha256::digest(&json).into()
    }
}

/// A plan bound to a dataset: the declarative run-configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    /// Directory manifest paths are relative to; defaults to the manifest's
    /// parent directory.
    #[serde(default)]
    pub data_root: Option<PathBuf>,
    pub plan: ExperimentPlan,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("bad run configuration: {e}")))?;
        cfg.plan.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("run config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One image to turn into a tensor: source path, label, and the operation
/// chain applied before extraction.
#[derive(Debug, Clone)]
struct ExtractJob {
    path: PathBuf,
    label: bool,
    chain: Vec<PostProcessSpec>,
}

/// Input conditioning applied to per-slice-sum tensors when they are
/// densified for the network: normalized cells average `1/65536`, far below
/// the initialization's working range, so slices are scaled by 256 to bring
/// typical cells to order one without saturating the sigmoid head.
pub const INPUT_SCALE: f32 = 256.0;

/// Sparse co-occurrence tensor (most cells of a 256x256 histogram are empty
/// for ordinary images).
#[derive(Debug, Clone)]
pub struct SparseTensor {
    entries: Vec<(u32, f32)>,
}

impl SparseTensor {
    fn from_dense(tensor: &crate::cooccurrence::CooccurrenceTensor) -> Self {
        let scale = match tensor.normalization() {
            Normalization::PerSliceSum => INPUT_SCALE,
            Normalization::Raw => 1.0,
        };
        let entries = tensor
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v as f32 * scale))
            .collect();
        SparseTensor { entries }
    }

    fn write_into(&self, out: &mut [f32]) {
        out.fill(0.0);
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
    }
}

/// In-memory tensor dataset serving the training loop.
#[derive(Debug, Clone)]
pub struct TensorDataset {
    channels: usize,
    tensors: Vec<SparseTensor>,
    labels: Vec<bool>,
}

impl SampleSource<f32> for TensorDataset {
    fn len(&self) -> usize {
        self.tensors.len()
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn side(&self) -> usize {
        crate::cooccurrence::LEVELS
    }

    fn write_sample(&self, idx: usize, out: &mut [f32]) {
        self.tensors[idx].write_into(out);
    }

    fn label(&self, idx: usize) -> bool {
        self.labels[idx]
    }
}

fn resolve(root: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        root.join(path)
    }
}

/// Decode, post-process, and extract one tensor.
fn job_tensor(
    job: &ExtractJob,
    plan: &ExperimentPlan,
    cache: &TensorCache,
) -> Result<crate::cooccurrence::CooccurrenceTensor> {
    let image = decode_image(&job.path)?;
    let processed = apply_chain(&image, &job.chain)?;
    cache.get_or_compute(
        &processed,
        plan.detector.channels(),
        plan.offsets,
        plan.normalization,
    )
}

fn extract_jobs(
    jobs: &[ExtractJob],
    plan: &ExperimentPlan,
    cache: &TensorCache,
) -> Result<TensorDataset> {
    let tensors: Result<Vec<SparseTensor>> = jobs
        .par_iter()
        .map(|job| job_tensor(job, plan, cache).map(|t| SparseTensor::from_dense(&t)))
        .collect();
    Ok(TensorDataset {
        channels: plan.detector.channels(),
        tensors: tensors?,
        labels: jobs.iter().map(|j| j.label).collect(),
    })
}

/// First `limit` entries per class of a split, in manifest order.
fn jobs_for_split(
    manifest: &DatasetManifest,
    root: &Path,
    split: Split,
    limit_per_class: Option<usize>,
    chain: &[PostProcessSpec],
) -> Vec<ExtractJob> {
    let mut jobs = Vec::new();
    for class in Label::ALL {
        let take = limit_per_class.unwrap_or(usize::MAX);
        jobs.extend(
            manifest
                .entries_in(split)
                .filter(|e| e.label == class)
                .take(take)
                .map(|e| ExtractJob {
                    path: resolve(root, &e.path),
                    label: e.label == Label::Gan,
                    chain: chain.to_vec(),
                }),
        );
    }
    jobs
}

/// JPEG-augmented jobs: the split's images in a seeded shuffle, each
/// compressed at one grid quality factor assigned round-robin, so the grid
/// QFs appear in equal proportion per class.
fn jpeg_aware_jobs(
    manifest: &DatasetManifest,
    root: &Path,
    split: Split,
    qf_grid: &[u8],
    seed: u64,
) -> Vec<ExtractJob> {
    let mut jobs = Vec::new();
    for class in Label::ALL {
        let mut entries: Vec<_> = manifest
            .entries_in(split)
            .filter(|e| e.label == class)
            .collect();
        entries.shuffle(&mut ChaCha8Rng::seed_from_u64(
            seed ^ (class as u64).wrapping_mul(0x9E3779B97F4A7C15),
        ));
        for (i, e) in entries.iter().enumerate() {
            jobs.push(ExtractJob {
                path: resolve(root, &e.path),
                label: e.label == Label::Gan,
                chain: vec![PostProcessSpec::Jpeg {
                    qf: qf_grid[i % qf_grid.len()],
                }],
            });
        }
    }
    jobs
}

/// Per-class correctness tallies for one condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassStats {
    pub n_real: usize,
    pub n_gan: usize,
    pub correct_real: usize,
    pub correct_gan: usize,
}

impl ClassStats {
    /// Record one decision (score at or above 0.5 predicts gan).
    pub fn record(&mut self, label_gan: bool, score: f64) {
        let predicted_gan = score >= DECISION_THRESHOLD;
        if label_gan {
            self.n_gan += 1;
            if predicted_gan {
                self.correct_gan += 1;
            }
        } else {
            self.n_real += 1;
            if !predicted_gan {
                self.correct_real += 1;
            }
        }
    }

    pub fn accuracy(&self) -> f64 {
        (self.correct_real + self.correct_gan) as f64 / (self.n_real + self.n_gan) as f64
    }

    pub fn acc_real(&self) -> f64 {
        self.correct_real as f64 / self.n_real as f64
    }

    pub fn acc_gan(&self) -> f64 {
        self.correct_gan as f64 / self.n_gan as f64
    }
}

/// Extraction/scoring batch size for evaluation.
const EVAL_BATCH: usize = 16;

/// Score every job with `model` and tally per-class accuracy.
fn evaluate_jobs(
    model: &Model<f32>,
    jobs: &[ExtractJob],
    plan: &ExperimentPlan,
    cache: &TensorCache,
) -> Result<ClassStats> {
    if jobs.is_empty() {
        return Err(Error::Config("no evaluation images selected".into()));
    }
    let mut stats = ClassStats::default();
    let item_len = plan.detector.channels() * CELLS;
    for chunk in jobs.chunks(EVAL_BATCH) {
        let tensors: Result<Vec<SparseTensor>> = chunk
            .par_iter()
            .map(|job| job_tensor(job, plan, cache).map(|t| SparseTensor::from_dense(&t)))
            .collect();
        let tensors = tensors?;
        let mut batch = Batch::<f32>::zeroed(chunk.len(), plan.detector.channels(), 256);
        for (i, t) in tensors.iter().enumerate() {
            let item = batch.item_mut(i);
            debug_assert_eq!(item.len(), item_len);
            t.write_into(item);
        }
        let scores = model.forward(&batch)?;
        for (job, score) in chunk.iter().zip(scores) {
            stats.record(job.label, score as f64);
        }
    }
    Ok(stats)
}

fn ensure_model_matches(plan: &ExperimentPlan, model: &Model<f32>) -> Result<()> {
    if model.config.in_channels != plan.detector.channels() {
        return Err(Error::Shape(format!(
            "model has {} input channels, detector {} wants {}",
            model.config.in_channels,
            plan.detector.as_str(),
            plan.detector.channels()
        )));
    }
    Ok(())
}

fn provenance(plan: &ExperimentPlan, manifest: &DatasetManifest) -> Result<Provenance> {
    Ok(Provenance {
        version: crate::VERSION.to_string(),
        seed: plan.seed,
        config_sha256: plan.fingerprint(),
        dataset_sha256: manifest.fingerprint()?,
        detector: plan.detector.as_str().to_string(),
        notes: Vec::new(),
    })
}

fn row_from_stats(
    condition: &str,
    parameter: &str,
    detector: DetectorKind,
    stats: ClassStats,
) -> ResultRow {
    ResultRow {
        condition: condition.to_string(),
        parameter: parameter.to_string(),
        detector: detector.as_str().to_string(),
        accuracy: stats.accuracy(),
        acc_real: stats.acc_real(),
        acc_gan: stats.acc_gan(),
        n_real: stats.n_real,
        n_gan: stats.n_gan,
        status: RowStatus::Ok,
    }
}

fn row_failed(condition: &str, parameter: &str, detector: DetectorKind, err: &Error) -> ResultRow {
    ResultRow {
        condition: condition.to_string(),
        parameter: parameter.to_string(),
        detector: detector.as_str().to_string(),
        accuracy: f64::NAN,
        acc_real: f64::NAN,
        acc_gan: f64::NAN,
        n_real: 0,
        n_gan: 0,
        status: RowStatus::Failed(err.to_string()),
    }
}

/// Train a detector on the manifest's train split (clean or JPEG-augmented
/// according to the plan), tracking the val split. Returns the best-val
/// model and the per-epoch metrics.
pub fn train_detector(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    cache: &TensorCache,
    progress: &mut dyn FnMut(&EpochMetrics),
) -> Result<(Model<f32>, Vec<EpochMetrics>)> {
    plan.validate()?;
    let (train_jobs, val_jobs) = match plan.mode {
        TrainingMode::Unaware => (
            jobs_for_split(manifest, root, Split::Train, None, &[]),
            jobs_for_split(manifest, root, Split::Val, None, &[]),
        ),
        TrainingMode::JpegAware => (
            jpeg_aware_jobs(manifest, root, Split::Train, &plan.train_qf_grid, plan.seed),
            jpeg_aware_jobs(
                manifest,
                root,
                Split::Val,
                &plan.train_qf_grid,
                plan.seed.wrapping_add(1),
            ),
        ),
    };
    debug_assert!(jobs_disjoint(&train_jobs, &val_jobs));
    let train_set = extract_jobs(&train_jobs, plan, cache)?;
    let val_set = extract_jobs(&val_jobs, plan, cache)?;
    let model = Model::<f32>::init(plan.model_config(), plan.train.seed)?;
    let outcome = train(model, &train_set, &val_set, &plan.train, progress)?;
    Ok((outcome.model, outcome.metrics))
}

/// No path may serve two roles.
fn jobs_disjoint(a: &[ExtractJob], b: &[ExtractJob]) -> bool {
    use std::collections::HashSet;
    let set: HashSet<&Path> = a.iter().map(|j| j.path.as_path()).collect();
    b.iter().all(|j| !set.contains(j.path.as_path()))
}

/// Score the clean test split: one `plain` row.
pub fn run_plain_detection(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    model: &Model<f32>,
    cache: &TensorCache,
) -> Result<ResultTable> {
    plan.validate()?;
    ensure_model_matches(plan, model)?;
    let jobs = jobs_for_split(
        manifest,
        root,
        Split::Test,
        Some(plan.images_per_class_per_condition),
        &[],
    );
    let stats = evaluate_jobs(model, &jobs, plan, cache)?;
    Ok(ResultTable {
        provenance: provenance(plan, manifest)?,
        rows: vec![row_from_stats("plain", "-", plan.detector, stats)],
    })
}

/// Evaluate every post-processing condition in the plan's grid against the
/// (unchanged) test labels. A condition that fails to evaluate is recorded
/// as failed without aborting the sweep.
pub fn run_robustness_sweep(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    model: &Model<f32>,
    cache: &TensorCache,
) -> Result<ResultTable> {
    plan.validate()?;
    ensure_model_matches(plan, model)?;
    let rows: Vec<ResultRow> = plan
        .robustness_grid
        .par_iter()
        .map(|spec| {
            let (condition, parameter) = spec.label();
            let jobs = jobs_for_split(
                manifest,
                root,
                Split::Test,
                Some(plan.images_per_class_per_condition),
                std::slice::from_ref(spec),
            );
            match evaluate_jobs(model, &jobs, plan, cache) {
                Ok(stats) => row_from_stats(&condition, &parameter, plan.detector, stats),
                Err(e) => row_failed(&condition, &parameter, plan.detector, &e),
            }
        })
        .collect();
    Ok(ResultTable {
        provenance: provenance(plan, manifest)?,
        rows,
    })
}

/// Train the JPEG-aware detector and evaluate it per quality factor over the
/// evaluation grid (matched and mismatched QFs). The provenance notes carry
/// the matched/mismatched mean accuracies and their gap.
pub fn run_jpeg_aware(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    cache: &TensorCache,
    progress: &mut dyn FnMut(&EpochMetrics),
) -> Result<(Model<f32>, Vec<EpochMetrics>, ResultTable)> {
    if plan.mode != TrainingMode::JpegAware {
        return Err(Error::Config(
            "run_jpeg_aware requires a plan in jpeg_aware mode".into(),
        ));
    }
    let (model, metrics) = train_detector(plan, manifest, root, cache, progress)?;
    let table = evaluate_jpeg_grid(plan, manifest, root, &model, cache)?;
    Ok((model, metrics, table))
}

/// Per-QF evaluation of an already-trained model over the evaluation grid.
pub fn evaluate_jpeg_grid(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    model: &Model<f32>,
    cache: &TensorCache,
) -> Result<ResultTable> {
    plan.validate()?;
    ensure_model_matches(plan, model)?;
    let rows: Vec<ResultRow> = plan
        .eval_qf_grid
        .par_iter()
        .map(|&qf| {
            let chain = [PostProcessSpec::Jpeg { qf }];
            let jobs = jobs_for_split(
                manifest,
                root,
                Split::Test,
                Some(plan.images_per_class_per_condition),
                &chain,
            );
            match evaluate_jobs(model, &jobs, plan, cache) {
                Ok(stats) => row_from_stats("jpeg", &format!("{qf}"), plan.detector, stats),
                Err(e) => row_failed("jpeg", &format!("{qf}"), plan.detector, &e),
            }
        })
        .collect();
    let mut table = ResultTable {
        provenance: provenance(plan, manifest)?,
        rows,
    };
    if let Some((matched, mismatched, gap)) = qf_gap(&table, &plan.train_qf_grid) {
        table.provenance.notes.push(format!(
            "matched-QF mean accuracy {matched:.4}, mismatched-QF mean accuracy {mismatched:.4}, loss {gap:.4}"
        ));
    }
    Ok(table)
}

/// Mean accuracy over matched QFs, over mismatched QFs, and the drop
/// (matched minus mismatched): the mismatched-QF generalization loss.
pub fn qf_gap(table: &ResultTable, train_grid: &[u8]) -> Option<(f64, f64, f64)> {
    let is_matched = |r: &ResultRow| {
        r.condition == "jpeg" && train_grid.iter().any(|qf| r.parameter == format!("{qf}"))
    };
    let matched = table.mean_accuracy_where(is_matched)?;
    let mismatched = table.mean_accuracy_where(|r| r.condition == "jpeg" && !is_matched(r))?;
    Some((matched, mismatched, matched - mismatched))
}

/// Post-processing operations evaluated before compression in the JPEG-aware
/// robustness protocol: median 3x3, resize 0.9, noise sigma 2.
pub fn jpeg_aware_robustness_ops(seed: u64) -> [PostProcessSpec; 3] {
    [
        PostProcessSpec::Median { window: 3 },
        PostProcessSpec::Resize { scale: 0.9 },
        PostProcessSpec::GaussNoise {
            sigma: 2.0,
            seed: seed.wrapping_add(0x5EED),
        },
    ]
}

/// Robustness of a JPEG-aware model: each operation is applied to the test
/// images, the result is JPEG-compressed at every evaluation QF, and the
/// detector is scored. Rows are one per (operation, QF).
pub fn run_jpeg_aware_robustness(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    model: &Model<f32>,
    cache: &TensorCache,
) -> Result<ResultTable> {
    plan.validate()?;
    ensure_model_matches(plan, model)?;
    let ops = jpeg_aware_robustness_ops(plan.seed);
    let conditions: Vec<(PostProcessSpec, u8)> = ops
        .iter()
        .flat_map(|op| plan.eval_qf_grid.iter().map(move |&qf| (op.clone(), qf)))
        .collect();
    let rows: Vec<ResultRow> = conditions
        .par_iter()
        .map(|(op, qf)| {
            let (cond, param) = op.label();
            let condition = format!("{cond}+jpeg");
            let parameter = format!("{param}@QF{qf}");
            let chain = [op.clone(), PostProcessSpec::Jpeg { qf: *qf }];
            let jobs = jobs_for_split(
                manifest,
                root,
                Split::Test,
                Some(plan.images_per_class_per_condition),
                &chain,
            );
            match evaluate_jobs(model, &jobs, plan, cache) {
                Ok(stats) => row_from_stats(&condition, &parameter, plan.detector, stats),
                Err(e) => row_failed(&condition, &parameter, plan.detector, &e),
            }
        })
        .collect();
    Ok(ResultTable {
        provenance: provenance(plan, manifest)?,
        rows,
    })
}

/// Raw scores for a split: `(path, gan_label, score)` per image.
pub fn score_split(
    plan: &ExperimentPlan,
    manifest: &DatasetManifest,
    root: &Path,
    model: &Model<f32>,
    cache: &TensorCache,
    split: Split,
) -> Result<Vec<(PathBuf, bool, f64)>> {
    plan.validate()?;
    ensure_model_matches(plan, model)?;
    let jobs = jobs_for_split(manifest, root, split, None, &[]);
    let mut out = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(EVAL_BATCH) {
        let tensors: Result<Vec<SparseTensor>> = chunk
            .par_iter()
            .map(|job| job_tensor(job, plan, cache).map(|t| SparseTensor::from_dense(&t)))
            .collect();
        let tensors = tensors?;
        let mut batch = Batch::<f32>::zeroed(chunk.len(), plan.detector.channels(), 256);
        for (i, t) in tensors.iter().enumerate() {
            t.write_into(batch.item_mut(i));
        }
        let scores = model.forward(&batch)?;
        for (job, score) in chunk.iter().zip(scores) {
            out.push((job.path.clone(), job.label, score as f64));
        }
    }
    Ok(out)
}

/// Evaluate a model on a tensor dataset: (mean loss, accuracy).
pub fn evaluate_dataset(model: &Model<f32>, set: &TensorDataset) -> Result<(f64, f64)> {
    evaluate(model, set, EVAL_BATCH)
}
