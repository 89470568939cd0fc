use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use specmat::eval::EvalReport;

fn specmat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specmat")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_small(dir: &Path, seed: &str) {
    let o = specmat(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        seed,
        "--objects-per-material",
        "2",
        "--samples-per-object",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn oracle_accuracies(text: &str) -> Vec<f64> {
    text.lines()
        .filter_map(|l| l.split("nearest-centroid accuracy ").nth(1))
        .map(|v| v.trim().parse().unwrap())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmat(&["synth", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let acc = oracle_accuracies(&stdout(&o));
    assert_eq!(acc.len(), 2);
    assert!(acc.iter().all(|&a| a >= 0.99), "{acc:?}");

    let o = specmat(&["validate", "--corpus", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("50"), "{text}");
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth_small(a.path(), "4");
    synth_small(b.path(), "4");
    for file in ["objects.csv", "samples.csv"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap()
        );
    }
}

#[test]
fn classless_generator_sits_at_chance() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmat(&[
        "synth",
        "--out",
        p(dir.path()),
        "--class-scale",
        "0",
        "--object-scale",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for acc in oracle_accuracies(&stdout(&o)) {
        assert!((acc - 0.2).abs() <= 0.05, "{acc}");
    }
}

#[test]
fn synth_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = specmat(&["synth", "--out", p(dir.path()), "--objects-per-material", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_exit_codes() {
    let o = specmat(&["validate", "--corpus", "/nonexistent/corpus"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "1");
    let samples = dir.path().join("samples.csv");
    let text = fs::read_to_string(&samples).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Drop the last value of the first data row.
    let cut = lines[1].rfind(',').unwrap();
    lines[1].truncate(cut);
    fs::write(&samples, lines.join("\n") + "\n").unwrap();
    let o = specmat(&["validate", "--corpus", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));

    // A sample from an object that is not listed is a violation.
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "1");
    let objects = dir.path().join("objects.csv");
    let text = fs::read_to_string(&objects).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("wood_01")).collect();
    fs::write(&objects, kept.join("\n") + "\n").unwrap();
    let o = specmat(&["validate", "--corpus", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("wood_01"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(specmat(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(specmat(&["run", "--protocol", "bogus"]).status.code(), Some(2));
    assert_eq!(specmat(&["run", "--n-objects", "many"]).status.code(), Some(2));
    assert_eq!(specmat(&["--help"]).status.code(), Some(0));
}

#[test]
fn preprocess_writes_features() {
    let dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "2");
    let o = specmat(&[
        "preprocess",
        "--corpus",
        p(dir.path()),
        "--sensor",
        "visible",
        "--out",
        p(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.path().join("features_visible.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("object_id,sensor,sample_index,f0,"));
    assert!(header.ends_with(",f287"));
    assert_eq!(lines.count(), 100);
}

fn hash_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_writes_reports_deterministically() {
    let corpus = tempfile::tempdir().unwrap();
    synth_small(corpus.path(), "3");
    let before = hash_dir(corpus.path());
    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    for out in [&out_a, &out_b] {
        let o = specmat(&[
            "run",
            "--corpus",
            p(corpus.path()),
            "--classifier",
            "svm",
            "--protocol",
            "loobj",
            "--seed",
            "7",
            "--out",
            p(out.path()),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("overall accuracy"));
    }
    assert_eq!(hash_dir(corpus.path()), before);
    for file in [
        "report.json",
        "accuracy.csv",
        "confusion_material.csv",
        "confusion_object.csv",
    ] {
        assert!(out_a.path().join(file).is_file(), "{file}");
    }
    assert!(out_a.path().join("figures/confusion_material.svg").is_file());
    let read = |d: &Path| EvalReport::from_json(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let (a, b) = (read(out_a.path()), read(out_b.path()));
    assert_eq!(a.deterministic_json().unwrap(), b.deterministic_json().unwrap());
    assert_eq!(a.folds.len(), 10);
    for file in ["accuracy.csv", "confusion_material.csv", "confusion_object.csv"] {
        assert_eq!(
            fs::read(out_a.path().join(file)).unwrap(),
            fs::read(out_b.path().join(file)).unwrap()
        );
    }
}

#[test]
fn run_mlp_kfold_separates_synthetic_materials() {
    let corpus = tempfile::tempdir().unwrap();
    synth_small(corpus.path(), "6");
    let out = tempfile::tempdir().unwrap();
    let o = specmat(&[
        "run",
        "--corpus",
        p(corpus.path()),
        "--classifier",
        "mlp",
        "--protocol",
        "kfold",
        "--epochs",
        "60",
        "--out",
        p(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = EvalReport::from_json(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert!(report.overall_accuracy >= 0.99, "{}", report.overall_accuracy);
    assert_eq!(report.folds.len(), 5);
}

#[test]
fn config_file_with_flag_overrides() {
    let corpus = tempfile::tempdir().unwrap();
    synth_small(corpus.path(), "3");
    let out = tempfile::tempdir().unwrap();
    let config = out.path().join("run.json");
    let json = serde_json::json!({
        "corpus": corpus.path(),
        "classifier": "svm",
        "protocol": "kfold",
        "k": 2,
        "svm": { "epochs": 3 },
        "sensor": "visible",
    });
    fs::write(&config, json.to_string()).unwrap();
    let o = specmat(&["run", "--config", p(&config), "--k", "5", "--out", p(out.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = EvalReport::from_json(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.folds.len(), 5);
    assert_eq!(report.sensor, specmat::SensorKind::Visible);
    assert_eq!(report.config["harness"]["classifier"]["epochs"], 3);

    fs::write(&config, r#"{"colour": "blue"}"#).unwrap();
    let o = specmat(&[
        "run",
        "--config",
        p(&config),
        "--corpus",
        p(corpus.path()),
        "--out",
        p(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parse config"), "{}", stderr(&o));

    let o = specmat(&["run", "--config", "/nonexistent/run.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = specmat(&["run", "--corpus", p(corpus.path()), "--out", p(out.path()), "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = specmat(&[
        "run",
        "--corpus",
        p(corpus.path()),
        "--out",
        p(out.path()),
        "--protocol",
        "loobj",
        "--n-objects",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("evaluate"), "{}", stderr(&o));
}

#[test]
fn sweep_run_and_report_figures() {
    let corpus = tempfile::tempdir().unwrap();
    let o = specmat(&[
        "synth",
        "--out",
        p(corpus.path()),
        "--objects-per-material",
        "4",
        "--samples-per-object",
        "3",
        "--sensor",
        "nir",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tempfile::tempdir().unwrap();
    let o = specmat(&[
        "run",
        "--corpus",
        p(corpus.path()),
        "--classifier",
        "svm",
        "--protocol",
        "sweep",
        "--n-range",
        "1,2,all",
        "--out",
        p(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.path().join("figures/sweep.svg").is_file());
    assert_eq!(
        fs::read_to_string(out.path().join("sweep.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    let figs = tempfile::tempdir().unwrap();
    let report = out.path().join("report.json");
    for kind in ["sweep", "confusion"] {
        let o = specmat(&[
            "report",
            "--kind",
            kind,
            "--report",
            p(&report),
            "--out",
            p(figs.path()),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let svg = fs::read_to_string(figs.path().join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(figs.path().join("confusion_material.csv").is_file());
    let o = specmat(&[
        "report",
        "--kind",
        "confusion",
        "--matrix",
        "object",
        "--report",
        p(&report),
        "--out",
        p(figs.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = specmat(&[
        "report",
        "--kind",
        "spectrum",
        "--corpus",
        p(corpus.path()),
        "--objects",
        "metal_01,wood_02",
        "--out",
        p(figs.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = fs::read_to_string(figs.path().join("spectrum_nir.svg")).unwrap();
    assert_eq!(svg.matches("class=\"band\"").count(), 2);
    let csv = fs::read_to_string(figs.path().join("spectrum_nir.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 331);

    let o = specmat(&[
        "report",
        "--kind",
        "spectrum",
        "--corpus",
        p(corpus.path()),
        "--objects",
        "nobody",
        "--out",
        p(figs.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    fs::write(figs.path().join("bad.json"), "{}").unwrap();
    let o = specmat(&[
        "report",
        "--kind",
        "sweep",
        "--report",
        p(&figs.path().join("bad.json")),
        "--out",
        p(figs.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = specmat(&["report", "--kind", "pie", "--out", p(figs.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeats_write_one_report_per_seed() {
    let corpus = tempfile::tempdir().unwrap();
    synth_small(corpus.path(), "3");
    let out = tempfile::tempdir().unwrap();
    let o = specmat(&[
        "run",
        "--corpus",
        p(corpus.path()),
        "--classifier",
        "svm",
        "--repeats",
        "2",
        "--epochs",
        "3",
        "--out",
        p(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 repeats"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("repeats.json")).unwrap()).unwrap();
    let seeds = summary["seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 2);
    for s in seeds {
        assert!(out.path().join(format!("seed_{}", s)).join("report.json").is_file());
    }
}
