use std::collections::{BTreeMap, HashSet};

use specmat::corpus::Corpus;
use specmat::eval::{
    check_plan, plan_leave_one_object_out, plan_stratified_kfold, run_kfold, run_leave_one_object_out,
    run_object_count_sweep, run_repeated, subsample_per_object, ClassifierConfig, EvalReport, HarnessConfig,
    MlpSettings, ObjectCount, Protocol,
};
use specmat::svm::SvmConfig;
use specmat::synth::{synth_corpus, SynthConfig};
use specmat::SensorKind;

fn corpus(objects: usize, samples: usize, object_scale: f64) -> Corpus {
    let cfg = SynthConfig {
        objects_per_material: objects,
        samples_per_object: samples,
        sensors: vec![SensorKind::Nir],
        object_scale,
        ..SynthConfig::default()
    };
    synth_corpus(&cfg, 5).unwrap()
}

fn quick_mlp() -> HarnessConfig {
    let mut settings = MlpSettings::default();
    settings.train.epochs = 3;
    HarnessConfig::new(ClassifierConfig::Mlp(settings))
}

fn quick_svm() -> HarnessConfig {
    HarnessConfig::new(ClassifierConfig::Svm(SvmConfig {
        epochs: 5,
        ..SvmConfig::default()
    }))
}

#[test]
fn kfold_covers_every_sample_once() {
    let c = corpus(2, 10, 0.03);
    let plan = plan_stratified_kfold(&c, SensorKind::Nir, 5, 1).unwrap();
    assert_eq!(plan.folds.len(), 5);
    let mut seen = HashSet::new();
    for fold in &plan.folds {
        assert_eq!(fold.test.len(), 20);
        assert_eq!(fold.train.len(), 80);
        for &id in &fold.test {
            assert!(seen.insert(id));
        }
        // Two test samples from each object.
        let mut per_object: BTreeMap<&str, usize> = BTreeMap::new();
        for &id in &fold.test {
            *per_object.entry(c.samples()[id].object_id.as_str()).or_default() += 1;
        }
        assert!(per_object.values().all(|&n| n == 2));
    }
    assert_eq!(seen.len(), 100);
    assert!(check_plan(&c, &plan).is_empty());
}

#[test]
fn kfold_truncates_uneven_objects_with_warning() {
    let c = corpus(1, 7, 0.03);
    let plan = plan_stratified_kfold(&c, SensorKind::Nir, 5, 1).unwrap();
    assert!(!plan.warnings.is_empty());
    let tested: usize = plan.folds.iter().map(|f| f.test.len()).sum();
    assert_eq!(tested, 25);
    assert!(plan_stratified_kfold(&c, SensorKind::Nir, 8, 1).is_err());
}

#[test]
fn leakage_checker_catches_shared_samples() {
    let c = corpus(2, 4, 0.03);
    let mut plan = plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::All, 0).unwrap();
    assert!(check_plan(&c, &plan).is_empty());
    let leaked = plan.folds[3].test[0];
    plan.folds[3].train.push(leaked);
    assert!(!check_plan(&c, &plan).is_empty());
}

#[test]
fn leave_one_object_out_counts() {
    let c = corpus(4, 5, 0.03);
    let plan = plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::All, 0).unwrap();
    assert_eq!(plan.folds.len(), 20);
    for fold in &plan.folds {
        assert_eq!(fold.test.len(), 5);
        assert_eq!(fold.train.len(), 95);
        let held = fold.held_out_object.as_deref().unwrap();
        assert!(fold.test.iter().all(|&id| c.samples()[id].object_id == held));
    }
    let plan = plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::Count(2), 0).unwrap();
    for fold in &plan.folds {
        // Two training objects per material, five samples each.
        assert_eq!(fold.train.len(), 50);
    }
    assert!(check_plan(&c, &plan).is_empty());
    assert!(plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::Count(4), 0).is_err());
}

#[test]
fn per_object_subsample_keeps_n_from_each() {
    let c = corpus(2, 10, 0.03);
    let all = c.sample_ids(SensorKind::Nir);
    let picked = subsample_per_object(&c, &all, 3, 4).unwrap();
    assert_eq!(picked.len(), 30);
    assert_eq!(picked, subsample_per_object(&c, &all, 3, 4).unwrap());
    assert!(subsample_per_object(&c, &all, 11, 4).is_err());
}

#[test]
fn kfold_with_sample_budget() {
    let c = corpus(2, 10, 0.03);
    let report = run_kfold(&c, SensorKind::Nir, &quick_svm(), 5, Some(1), 2).unwrap();
    for f in &report.folds {
        assert_eq!(f.train_size, 10);
        assert_eq!(f.test_size, 20);
    }
    assert_eq!(report.material_confusion.total(), 100);
}

fn same(a: &EvalReport, b: &EvalReport) -> bool {
    a.deterministic_json().unwrap() == b.deterministic_json().unwrap()
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let c = corpus(2, 6, 0.03);
    let one = quick_mlp();
    let two = HarnessConfig {
        threads: 2,
        ..quick_mlp()
    };
    let a = run_kfold(&c, SensorKind::Nir, &one, 3, None, 9).unwrap();
    let b = run_kfold(&c, SensorKind::Nir, &one, 3, None, 9).unwrap();
    let mut c2 = run_kfold(&c, SensorKind::Nir, &two, 3, None, 9).unwrap();
    assert!(same(&a, &b));
    // The thread count is part of the recorded configuration only.
    c2.config["harness"]["threads"] = 1.into();
    assert!(same(&a, &c2));
    let d = run_kfold(&c, SensorKind::Nir, &one, 3, None, 10).unwrap();
    assert!(!same(&a, &d));
}

#[test]
fn sweep_all_point_reproduces_leave_one_object_out() {
    let c = corpus(3, 4, 0.03);
    let cfg = quick_svm();
    let sweep =
        run_object_count_sweep(&c, SensorKind::Nir, &cfg, &[ObjectCount::Count(1), ObjectCount::All], 4).unwrap();
    let looo = run_leave_one_object_out(&c, SensorKind::Nir, &cfg, ObjectCount::All, 4).unwrap();
    let all_folds: Vec<_> = sweep.folds.iter().filter(|f| f.n == "all").collect();
    assert_eq!(all_folds.len(), looo.folds.len());
    for (s, l) in all_folds.iter().zip(&looo.folds) {
        assert_eq!(s.correct, l.correct);
        assert_eq!(s.held_out_object, l.held_out_object);
    }
    assert_eq!(sweep.material_confusion, looo.material_confusion);
    assert_eq!(sweep.overall_accuracy, looo.overall_accuracy);
    assert_eq!(sweep.sweep.len(), 2);
    assert_eq!(sweep.sweep[1].mean_accuracy, looo.mean_fold_accuracy);
    assert!(run_object_count_sweep(&c, SensorKind::Nir, &cfg, &[ObjectCount::All, ObjectCount::Count(1)], 4).is_err());
}

#[test]
fn report_outputs_are_consistent() {
    let c = corpus(2, 4, 0.03);
    let report = run_leave_one_object_out(&c, SensorKind::Nir, &quick_svm(), ObjectCount::All, 1).unwrap();
    assert_eq!(report.protocol, Protocol::Loobj);
    assert_eq!(report.folds.len(), 10);
    assert_eq!(report.object_confusion.counts.len(), 10);
    assert_eq!(report.material_confusion.total(), 40);
    let correct: usize = report.folds.iter().map(|f| f.correct).sum();
    assert_eq!(report.material_confusion.correct() as usize, correct);
    let back = EvalReport::from_json(&report.to_json().unwrap()).unwrap();
    assert!(same(&back, &report));
    let csv = report.accuracy_csv();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.starts_with("protocol,n,fold,accuracy\n"));
}

#[test]
fn repeated_runs_summarise_accuracy() {
    let c = corpus(2, 4, 0.03);
    let cfg = quick_svm();
    let (reports, summary) = run_repeated(3, 3, |s| run_kfold(&c, SensorKind::Nir, &cfg, 2, None, s)).unwrap();
    assert_eq!(reports.len(), 3);
    assert_eq!(summary.seeds[0], 3);
    assert_eq!(summary.seeds.iter().collect::<HashSet<_>>().len(), 3);
    let mean = summary.accuracies.iter().sum::<f64>() / 3.0;
    assert!((summary.mean - mean).abs() < 1e-15);
    assert!(run_repeated(3, 0, |s| run_kfold(&c, SensorKind::Nir, &cfg, 2, None, s)).is_err());
}

#[test]
fn more_training_objects_help_when_objects_vary() {
    // Strong per-object variation makes generalisation to unseen objects
    // depend on how many objects were seen in training.
    let c = corpus(10, 4, 0.6);
    let cfg = HarnessConfig::new(ClassifierConfig::Svm(SvmConfig {
        epochs: 20,
        ..SvmConfig::default()
    }));
    let counts: Vec<ObjectCount> = [1, 3, 5, 7, 9].into_iter().map(ObjectCount::Count).collect();
    let report = run_object_count_sweep(&c, SensorKind::Nir, &cfg, &counts, 2).unwrap();
    let first = report.sweep.first().unwrap().mean_accuracy;
    let last = report.sweep.last().unwrap().mean_accuracy;
    assert!(last >= first + 0.1, "{first} -> {last}");
    assert!(report.spearman.unwrap() > 0.5);
}
