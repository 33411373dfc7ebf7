//! End-to-end pipeline runs on a small generated corpus: JPEG-aware
//! training and evaluation, the robustness sweep's failure handling, table
//! serialization of real outputs, and split discipline.

use std::collections::HashSet;

use crossband::corpus::{DatasetManifest, Split};
use crossband::error::Error;
use crossband::network::Model;
use crossband::pipeline::{
    evaluate_jpeg_grid, generate_toy_corpus, jpeg_aware_robustness_ops, parse_tsv, qf_gap,
    run_jpeg_aware, run_jpeg_aware_robustness, run_plain_detection, run_robustness_sweep, to_tsv,
    toy_model_config, toy_train_config, DetectorKind, ExperimentPlan, RowStatus, TensorCache,
    ToyCorpusSpec, TrainingMode,
};
use crossband::postprocess::PostProcessSpec;

struct Fixture {
    dir: tempfile::TempDir,
    manifest: DatasetManifest,
    plan: ExperimentPlan,
}

fn fixture(detector: DetectorKind, mode: TrainingMode) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let spec = ToyCorpusSpec {
        train_per_class: 12,
        val_per_class: 4,
        test_per_class: 4,
        side: 32,
        seed: 99,
    };
    let manifest = generate_toy_corpus(dir.path(), &spec).unwrap();
    let mut plan = ExperimentPlan::paper(detector, mode, spec.seed);
    plan.model_override = Some(toy_model_config(detector.channels()));
    plan.train = toy_train_config(spec.seed);
    plan.train.epochs = 2;
    plan.train.early_stop_val_acc = None;
    plan.train.batch_size = 8;
    plan.train_qf_grid = vec![75, 90];
    plan.eval_qf_grid = vec![75, 85, 90];
    plan.images_per_class_per_condition = 4;
    Fixture {
        dir,
        manifest,
        plan,
    }
}

#[test]
fn jpeg_aware_protocol_runs_end_to_end() {
    let f = fixture(DetectorKind::CrossConet, TrainingMode::JpegAware);
    let cache = TensorCache::at(f.dir.path().join("cache")).unwrap();
    let (model, metrics, table) =
        run_jpeg_aware(&f.plan, &f.manifest, f.dir.path(), &cache, &mut |_| {}).unwrap();
    assert_eq!(metrics.len(), 2);

    // One row per evaluation QF, all evaluated.
    assert_eq!(table.rows.len(), 3);
    for row in &table.rows {
        assert_eq!(row.condition, "jpeg");
        assert_eq!(row.status, RowStatus::Ok);
        assert_eq!(row.n_real, 4);
        assert_eq!(row.n_gan, 4);
        assert!((0.0..=1.0).contains(&row.accuracy));
    }
    // Matched/mismatched summary scalar is computed and noted.
    let (matched, mismatched, gap) = qf_gap(&table, &f.plan.train_qf_grid).unwrap();
    assert!((0.0..=1.0).contains(&matched));
    assert!((0.0..=1.0).contains(&mismatched));
    assert!((matched - mismatched - gap).abs() < 1e-12);
    assert!(table.provenance.notes.iter().any(|n| n.contains("matched-QF")));

    // Provenance is filled in.
    assert_eq!(table.provenance.detector, "cross_conet");
    assert_eq!(table.provenance.config_sha256.len(), 64);
    assert_eq!(table.provenance.dataset_sha256.len(), 64);

    // Serialized table round-trips.
    let text = to_tsv(&table);
    let back = parse_tsv(&text).unwrap();
    assert_eq!(to_tsv(&back), text);

    // JPEG-aware robustness: ops x QFs rows.
    let rob = run_jpeg_aware_robustness(&f.plan, &f.manifest, f.dir.path(), &model, &cache).unwrap();
    assert_eq!(
        rob.rows.len(),
        jpeg_aware_robustness_ops(f.plan.seed).len() * f.plan.eval_qf_grid.len()
    );
    for row in &rob.rows {
        assert!(row.condition.ends_with("+jpeg"), "{}", row.condition);
        assert_eq!(row.status, RowStatus::Ok);
    }
}

#[test]
fn no_image_serves_two_roles() {
    // Split discipline: train/val/test paths are pairwise disjoint, so JPEG
    // evaluation at a matched QF still scores images never seen in training.
    let f = fixture(DetectorKind::CrossConet, TrainingMode::JpegAware);
    let by_split = |split: Split| -> HashSet<&std::path::Path> {
        f.manifest
            .entries_in(split)
            .map(|e| e.path.as_path())
            .collect()
    };
    let train = by_split(Split::Train);
    let val = by_split(Split::Val);
    let test = by_split(Split::Test);
    assert!(train.is_disjoint(&val));
    assert!(train.is_disjoint(&test));
    assert!(val.is_disjoint(&test));
    assert_eq!(
        train.len() + val.len() + test.len(),
        f.manifest.entries.len()
    );
}

#[test]
fn failed_conditions_are_recorded_not_fatal() {
    let f = fixture(DetectorKind::Conet, TrainingMode::Unaware);
    let cache = TensorCache::disabled();
    let model = Model::<f32>::init(f.plan.model_config(), 1).unwrap();
    let mut plan = f.plan.clone();
    // Crop 880 cannot apply to 32x32 toy images; gamma 1.0 can.
    plan.robustness_grid = vec![
        PostProcessSpec::Gamma { gamma: 1.0 },
        PostProcessSpec::Crop { crop_size: 880 },
    ];
    let table = run_robustness_sweep(&plan, &f.manifest, f.dir.path(), &model, &cache).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].status, RowStatus::Ok);
    match &table.rows[1].status {
        RowStatus::Failed(msg) => assert!(msg.contains("crop"), "unexpected message {msg}"),
        other => panic!("expected a failed crop row, got {other:?}"),
    }
    assert_eq!(table.failed_rows().count(), 1);
    // The failure survives serialization.
    let text = to_tsv(&table);
    let back = parse_tsv(&text).unwrap();
    assert_eq!(back.failed_rows().count(), 1);
}

#[test]
fn constant_half_detector_scores_fifty_percent() {
    // An all-zero model outputs exactly 0.5; under the tie rule
    // (score >= 0.5 predicts gan) a balanced test set scores 50%.
    let f = fixture(DetectorKind::CrossConet, TrainingMode::Unaware);
    let cache = TensorCache::disabled();
    let model = Model::<f32>::zeros(f.plan.model_config()).unwrap();
    let table = run_plain_detection(&f.plan, &f.manifest, f.dir.path(), &model, &cache).unwrap();
    let row = &table.rows[0];
    assert_eq!(row.accuracy, 0.5);
    assert_eq!(row.acc_gan, 1.0, "ties predict gan");
    assert_eq!(row.acc_real, 0.0);
}

#[test]
fn detector_channel_mismatch_is_shape_error() {
    let f = fixture(DetectorKind::CrossConet, TrainingMode::Unaware);
    let cache = TensorCache::disabled();
    // A 3-channel model against a 6-channel plan.
    let wrong = Model::<f32>::init(toy_model_config(3), 0).unwrap();
    let err =
        run_plain_detection(&f.plan, &f.manifest, f.dir.path(), &wrong, &cache).unwrap_err();
    assert!(matches!(err, Error::Shape(_)), "got {err:?}");
}

#[test]
fn jpeg_grid_evaluation_uses_trained_checkpoint() {
    // evaluate_jpeg_grid works standalone on a freshly initialized model
    // (scores are meaningless but the protocol machinery must hold).
    let f = fixture(DetectorKind::Conet, TrainingMode::JpegAware);
    let cache = TensorCache::disabled();
    let model = Model::<f32>::init(f.plan.model_config(), 5).unwrap();
    let table = evaluate_jpeg_grid(&f.plan, &f.manifest, f.dir.path(), &model, &cache).unwrap();
    assert_eq!(table.rows.len(), f.plan.eval_qf_grid.len());
    let params: Vec<&str> = table.rows.iter().map(|r| r.parameter.as_str()).collect();
    assert_eq!(params, ["75", "85", "90"]);
}
