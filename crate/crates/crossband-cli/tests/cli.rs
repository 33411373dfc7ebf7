//! End-to-end CLI tests driving the built binary.

use std::path::Path;
use std::process::{Command, Output};

use crossband::cooccurrence::cache::load_tensor;
use crossband::corpus::{write_png, ImageBuffer};
use crossband::pipeline::{generate_toy_corpus, parse_tsv, ToyCorpusSpec};

fn crossband_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crossband"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn toy_corpus(dir: &Path) -> std::path::PathBuf {
    let spec = ToyCorpusSpec {
        train_per_class: 10,
        val_per_class: 3,
        test_per_class: 3,
        side: 32,
        seed: 5,
    };
    generate_toy_corpus(dir, &spec).unwrap();
    dir.join("toy.manifest")
}

#[test]
fn extract_writes_a_six_slice_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("face.png");
    let data: Vec<u8> = (0..3 * 24 * 24).map(|i| (i % 251) as u8).collect();
    write_png(&ImageBuffer::from_planes(24, 24, data).unwrap(), &img_path).unwrap();
    let out_path = dir.path().join("face.coocc");

    let out = run_ok(crossband_bin().args([
        "extract",
        "--in",
        img_path.to_str().unwrap(),
        "--delta",
        "1,1",
        "--delta-cross",
        "0,0",
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("# crossband "), "provenance header first:\n{stdout}");
    assert!(stdout.contains("# seed:"));
    assert!(stdout.contains("# config: sha256:"));

    let tensor = load_tensor(&out_path).unwrap();
    assert_eq!(tensor.channels(), 6);
}

#[test]
fn train_eval_robustness_report_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_corpus(dir.path());
    let ckpt = dir.path().join("model.ckpt");
    let metrics = dir.path().join("metrics.tsv");

    // Train a reduced detector for 1 epoch.
    run_ok(crossband_bin().args([
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--detector",
        "cross-conet",
        "--filters",
        "2",
        "--dense-width",
        "8",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--seed",
        "5",
        "--out",
        ckpt.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
    ]));
    assert!(ckpt.exists());
    let metrics_text = std::fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text.starts_with("epoch\tsplit\tloss\taccuracy"));
    assert!(metrics_text.contains("\ttrain\t"));
    assert!(metrics_text.contains("\tval\t"));

    // Evaluate: plain detection table.
    let table_path = dir.path().join("plain.tsv");
    let out = run_ok(crossband_bin().args([
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--images-per-class",
        "3",
        "--seed",
        "5",
        "--out",
        table_path.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("# crossband "));
    assert!(stdout.contains("plain"));
    let table = parse_tsv(&std::fs::read_to_string(&table_path).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].condition, "plain");

    // Reloading the checkpoint in a fresh process reproduces the scores:
    // a second eval writes a byte-identical table.
    let first_table = std::fs::read(&table_path).unwrap();
    let table_path2 = dir.path().join("plain2.tsv");
    run_ok(crossband_bin().args([
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--images-per-class",
        "3",
        "--seed",
        "5",
        "--out",
        table_path2.to_str().unwrap(),
    ]));
    assert_eq!(first_table, std::fs::read(&table_path2).unwrap());

    // Robustness with a small custom grid file.
    let grid_path = dir.path().join("grid.json");
    std::fs::write(
        &grid_path,
        r#"[{"kind":"gamma","gamma":1.0},{"kind":"median","window":3}]"#,
    )
    .unwrap();
    let rob_path = dir.path().join("rob.tsv");
    run_ok(crossband_bin().args([
        "robustness",
        "--manifest",
        manifest.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--grid",
        grid_path.to_str().unwrap(),
        "--images-per-class",
        "3",
        "--seed",
        "5",
        "--out",
        rob_path.to_str().unwrap(),
    ]));
    let rob = parse_tsv(&std::fs::read_to_string(&rob_path).unwrap()).unwrap();
    assert_eq!(rob.rows.len(), 2);

    // Report renders the stored table.
    let out = run_ok(crossband_bin().args(["report", "--in", rob_path.to_str().unwrap()]));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("gamma"));
    assert!(report.contains("median"));
}

#[test]
fn paper_grid_has_table_two_row_labels() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_corpus(dir.path());
    let ckpt = dir.path().join("model.ckpt");
    run_ok(crossband_bin().args([
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--filters",
        "2",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--seed",
        "5",
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    // The paper grid contains crop 880, which cannot apply to 32x32 toy
    // images: that condition must be recorded as failed and the exit status
    // must be non-zero, while all other conditions evaluate.
    let rob_path = dir.path().join("rob.tsv");
    let out = crossband_bin()
        .args([
            "robustness",
            "--manifest",
            manifest.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--grid",
            "paper",
            "--images-per-class",
            "3",
            "--seed",
            "5",
            "--out",
            rob_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success(), "crop 880 on 32x32 must fail the run");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("crop"), "failed conditions enumerated:\n{stderr}");

    let rob = parse_tsv(&std::fs::read_to_string(&rob_path).unwrap()).unwrap();
    let labels: Vec<String> = rob
        .rows
        .iter()
        .map(|r| format!("{} {}", r.condition, r.parameter))
        .collect();
    assert_eq!(
        labels,
        [
            "median 3x3",
            "median 5x5",
            "noise 0.5",
            "noise 0.8",
            "noise 2",
            "ahe -",
            "gamma 0.9",
            "gamma 0.8",
            "gamma 1.2",
            "avg_blur 3x3",
            "avg_blur 5x5",
            "resize 0.9",
            "resize 0.8",
            "resize 0.5",
            "zoom 1.1",
            "zoom 1.2",
            "zoom 1.9",
            "rotation 5",
            "rotation 10",
            "rotation 45",
            "crop 880",
            "blur_sharpen -"
        ]
    );
    assert_eq!(rob.failed_rows().count(), 1);
}

#[test]
fn jpeg_aware_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_corpus(dir.path());
    let ckpt = dir.path().join("aware.ckpt");
    let table_path = dir.path().join("aware.tsv");
    run_ok(crossband_bin().args([
        "jpeg-aware",
        "--manifest",
        manifest.to_str().unwrap(),
        "--filters",
        "2",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--train-qf",
        "75,90",
        "--eval-qf",
        "75,85,90",
        "--images-per-class",
        "3",
        "--seed",
        "5",
        "--out",
        ckpt.to_str().unwrap(),
        "--table",
        table_path.to_str().unwrap(),
        "--robustness",
    ]));
    assert!(ckpt.exists());
    let table = parse_tsv(&std::fs::read_to_string(&table_path).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!(table.provenance.notes.iter().any(|n| n.contains("matched-QF")));
    // The robustness companion table sits next to the main one.
    let rob_path = table_path.with_extension("robustness.tsv");
    let rob = parse_tsv(&std::fs::read_to_string(&rob_path).unwrap()).unwrap();
    assert_eq!(rob.rows.len(), 9); // 3 ops x 3 QFs
}

#[test]
fn selftest_quick_exits_zero_and_is_deterministic() {
    let out1 = run_ok(crossband_bin().args(["selftest", "--quick", "--seed", "3"]));
    let out2 = run_ok(crossband_bin().args(["selftest", "--quick", "--seed", "3"]));
    assert_eq!(out1.stdout, out2.stdout);
    let text = String::from_utf8_lossy(&out1.stdout);
    assert!(text.contains("12/12 checks passed"), "{text}");
}

#[test]
fn missing_checkpoint_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_corpus(dir.path());
    let out = crossband_bin()
        .args([
            "eval",
            "--manifest",
            manifest.to_str().unwrap(),
            "--checkpoint",
            dir.path().join("missing.ckpt").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("configuration error"), "{stderr}");
}

#[test]
fn malformed_arguments_are_usage_errors() {
    let out = crossband_bin()
        .args(["extract", "--in", "x.png", "--delta", "nonsense", "--out", "y"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dx"), "usage message goes to stderr: {stderr}");
}
