//! Evaluation protocols: stratified k-fold (optionally with a per-object
//! training budget), leave-one-object-out, and the training-object-count
//! sweep.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::confusion::ConfusionMatrix;
use crate::eval::folds::{
    plan_leave_one_object_out, plan_stratified_kfold, subsample_per_object, Fold, FoldPlan, ObjectCount, Protocol,
};
use crate::eval::stats::{mean_sd, spearman};
use crate::filter::FilterSpec;
use crate::mlp::{self, MlpArchitecture, TrainConfig};
use crate::model::TrainedModel;
use crate::numfmt::fmt_sig9;
use crate::preprocess::Preprocessor;
use crate::seed;
use crate::spectra::{MaterialClass, SensorKind};
use crate::svm::{self, SvmConfig};

const STREAM_FOLD_MODEL: u64 = 20;
const STREAM_FOLD_SUBSAMPLE: u64 = 21;
const STREAM_REPEAT: u64 = 22;

/// Network settings apart from the input width, which follows the sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSettings {
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub train: TrainConfig,
}

impl Default for MlpSettings {
    fn default() -> Self {
        let arch = MlpArchitecture::standard(0);
        MlpSettings {
            hidden: arch.hidden,
            leaky_slope: arch.leaky_slope,
            dropout_rate: arch.dropout_rate,
            train: TrainConfig::default(),
        }
    }
}

impl MlpSettings {
    pub fn architecture(&self, input_dim: usize) -> MlpArchitecture {
        MlpArchitecture {
            input_dim,
            hidden: self.hidden.clone(),
            output_dim: MaterialClass::COUNT,
            leaky_slope: self.leaky_slope,
            dropout_rate: self.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Mlp(MlpSettings),
    Svm(SvmConfig),
}

impl ClassifierConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierConfig::Mlp(_) => "mlp",
            ClassifierConfig::Svm(_) => "svm",
        }
    }

    pub fn mlp() -> Self {
        ClassifierConfig::Mlp(MlpSettings::default())
    }

    pub fn svm() -> Self {
        ClassifierConfig::Svm(SvmConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub classifier: ClassifierConfig,
    pub filter: FilterSpec,
    /// Upper bound on folds trained concurrently.
    pub threads: usize,
}

impl HarnessConfig {
    pub fn new(classifier: ClassifierConfig) -> Self {
        HarnessConfig {
            classifier,
            filter: FilterSpec::default(),
            threads: 1,
        }
    }
}

/// Seed of the model trained in fold `index` of a protocol run.
pub fn fold_seed(master: u64, protocol: Protocol, index: usize) -> u64 {
    seed::derive(master, &[STREAM_FOLD_MODEL, protocol as u64, index as u64])
}

/// Seed used to subsample the training split of k-fold fold `index`.
pub fn fold_subsample_seed(master: u64, index: usize) -> u64 {
    seed::derive(master, &[STREAM_FOLD_SUBSAMPLE, index as u64])
}

/// Preprocessed features for every sample of one sensor.
pub struct FeatureTable<'a> {
    corpus: &'a Corpus,
    sensor: SensorKind,
    features: Array2<f64>,
    row_of: HashMap<usize, usize>,
}

impl<'a> FeatureTable<'a> {
    pub fn new(corpus: &'a Corpus, sensor: SensorKind, filter: &FilterSpec) -> Result<Self> {
        let pre = Preprocessor::new(filter)?;
        let ids = corpus.sample_ids(sensor);
        let dim = sensor.expected_dim();
        let mut features = Array2::zeros((ids.len(), dim));
        let mut row_of = HashMap::with_capacity(ids.len());
        for (row, &id) in ids.iter().enumerate() {
            let fv = pre.apply(&corpus.samples()[id])?;
            features.row_mut(row).assign(&ndarray::ArrayView1::from(&fv.values));
            row_of.insert(id, row);
        }
        Ok(FeatureTable {
            corpus,
            sensor,
            features,
            row_of,
        })
    }

    fn rows(&self, ids: &[usize]) -> Result<Array2<f64>> {
        let rows = ids
            .iter()
            .map(|id| {
                self.row_of
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidData(format!("sample {id} is not a {} sample", self.sensor)))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(self.features.select(Axis(0), &rows))
    }

    fn labels(&self, ids: &[usize]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|&id| {
                self.corpus
                    .label(id)
                    .map(MaterialClass::code)
                    .ok_or_else(|| Error::UnknownObject(self.corpus.samples()[id].object_id.clone()))
            })
            .collect()
    }

    /// Trains a fresh classifier on the samples `train`.
    pub fn fit(&self, classifier: &ClassifierConfig, train: &[usize], model_seed: u64) -> Result<TrainedModel> {
        let x_train = self.rows(train)?;
        let y_train = self.labels(train)?;
        match classifier {
            ClassifierConfig::Mlp(settings) => {
                let arch = settings.architecture(self.sensor.expected_dim());
                let cfg = TrainConfig {
                    seed: model_seed,
                    ..settings.train.clone()
                };
                Ok(TrainedModel::Mlp(mlp::train(x_train.view(), &y_train, &arch, &cfg)?))
            }
            ClassifierConfig::Svm(svm_cfg) => {
                let cfg = SvmConfig {
                    seed: model_seed,
                    ..*svm_cfg
                };
                Ok(TrainedModel::Svm(svm::train_svm(x_train.view(), &y_train, &cfg)?))
            }
        }
    }

    /// Trains a fresh classifier on `train` and predicts `test`.
    pub fn fit_predict(
        &self,
        classifier: &ClassifierConfig,
        train: &[usize],
        test: &[usize],
        model_seed: u64,
    ) -> Result<Vec<usize>> {
        let model = self.fit(classifier, train, model_seed)?;
        model.predict_batch(self.rows(test)?.view())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Training budget label: samples per object (k-fold) or objects per
    /// material (leave-one-object-out); `all` when unrestricted.
    pub n: String,
    pub held_out_object: Option<String>,
    pub train_size: usize,
    pub test_size: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: ObjectCount,
    /// Mean of the per-object (per-fold) accuracies.
    pub mean_accuracy: f64,
    pub overall_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub wall_clock_secs: f64,
    pub unix_time: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub sensor: SensorKind,
    pub classifier: String,
    pub folds: Vec<FoldResult>,
    /// Correct over tested, pooled across folds.
    pub overall_accuracy: f64,
    pub mean_fold_accuracy: f64,
    pub per_material_accuracy: Vec<(MaterialClass, Option<f64>)>,
    pub material_confusion: ConfusionMatrix,
    pub object_confusion: ConfusionMatrix,
    /// Sweep protocol only; confusion matrices then describe the last point.
    pub sweep: Vec<SweepPoint>,
    pub spearman: Option<f64>,
    pub config: serde_json::Value,
    pub warnings: Vec<String>,
    /// Timing; the only field allowed to differ between identical runs.
    pub meta: ReportMeta,
}

impl EvalReport {
    /// JSON with `meta` blanked, for determinism comparisons.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        value["meta"] = serde_json::Value::Null;
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `protocol,n,fold,accuracy`.
    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("protocol,n,fold,accuracy\n");
        for f in &self.folds {
            let _ = writeln!(out, "{},{},{},{}", self.protocol, f.n, f.fold, fmt_sig9(f.accuracy));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} / {} / {}: overall accuracy {:.4} (mean over {} folds {:.4})",
            self.protocol,
            self.sensor,
            self.classifier,
            self.overall_accuracy,
            self.folds.len(),
            self.mean_fold_accuracy
        );
        for (m, acc) in &self.per_material_accuracy {
            match acc {
                Some(a) => {
                    let _ = writeln!(out, "  {m:<8} {a:.4}");
                }
                None => {
                    let _ = writeln!(out, "  {m:<8} -");
                }
            }
        }
        for p in &self.sweep {
            let _ = writeln!(out, "  n={:<4} mean accuracy {:.4}", p.n.to_string(), p.mean_accuracy);
        }
        if let Some(r) = self.spearman {
            let _ = writeln!(out, "  spearman(n, accuracy) = {r:.3}");
        }
        out
    }
}

struct FoldOutcome {
    fold: Fold,
    predictions: Vec<usize>,
}

fn run_plan(
    table: &FeatureTable<'_>,
    cfg: &HarnessConfig,
    plan: &FoldPlan,
    seed_value: u64,
    n_per_object: Option<usize>,
) -> Result<Vec<FoldOutcome>> {
    let corpus = table.corpus;
    let job = |fold: &Fold| -> Result<FoldOutcome> {
        let mut fold = fold.clone();
        if let Some(n) = n_per_object {
            fold.train = subsample_per_object(corpus, &fold.train, n, fold_subsample_seed(seed_value, fold.index))?;
        }
        let predictions = table.fit_predict(
            &cfg.classifier,
            &fold.train,
            &fold.test,
            fold_seed(seed_value, plan.protocol, fold.index),
        )?;
        Ok(FoldOutcome { fold, predictions })
    };
    if cfg.threads <= 1 {
        return plan.folds.iter().map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| plan.folds.par_iter().map(job).collect())
}

struct Tally {
    folds: Vec<FoldResult>,
    material: ConfusionMatrix,
    object: ConfusionMatrix,
}

fn tally(table: &FeatureTable<'_>, outcomes: &[FoldOutcome], n_label: &str) -> Tally {
    let corpus = table.corpus;
    let object_rows: Vec<usize> = {
        let by_object = corpus.samples_by_object(table.sensor);
        by_object.keys().filter_map(|id| corpus.object_position(id)).collect()
    };
    let row_of_object: HashMap<usize, usize> = object_rows.iter().enumerate().map(|(r, &p)| (p, r)).collect();
    let mut object = ConfusionMatrix::with_rows(object_rows.iter().map(|&p| {
        let o = &corpus.objects()[p];
        (o.object_id.clone(), o.material)
    }));
    let mut material = ConfusionMatrix::materials();
    let mut folds = Vec::with_capacity(outcomes.len());
    for out in outcomes {
        let mut correct = 0;
        for (&id, &pred) in out.fold.test.iter().zip(&out.predictions) {
            let sample = &corpus.samples()[id];
            let pos = corpus.object_position(&sample.object_id).expect("labelled sample");
            let truth = corpus.objects()[pos].material;
            material.record(truth.code(), pred);
            object.record(row_of_object[&pos], pred);
            if truth.code() == pred {
                correct += 1;
            }
        }
        let test_size = out.fold.test.len();
        folds.push(FoldResult {
            fold: out.fold.index,
            n: n_label.to_string(),
            held_out_object: out.fold.held_out_object.clone(),
            train_size: out.fold.train.len(),
            test_size,
            correct,
            accuracy: if test_size == 0 {
                0.0
            } else {
                correct as f64 / test_size as f64
            },
        });
    }
    Tally {
        folds,
        material,
        object,
    }
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    protocol: Protocol,
    sensor: SensorKind,
    cfg: &HarnessConfig,
    tally: Tally,
    sweep: Vec<SweepPoint>,
    config: serde_json::Value,
    warnings: Vec<String>,
    started: Instant,
) -> EvalReport {
    let accuracies: Vec<f64> = tally.folds.iter().map(|f| f.accuracy).collect();
    let spearman = if sweep.len() >= 2 {
        let xs: Vec<f64> = (0..sweep.len()).map(|i| i as f64).collect();
        let ys: Vec<f64> = sweep.iter().map(|p| p.mean_accuracy).collect();
        spearman(&xs, &ys)
    } else {
        None
    };
    EvalReport {
        protocol,
        sensor,
        classifier: cfg.classifier.name().to_string(),
        overall_accuracy: tally.material.accuracy().unwrap_or(0.0),
        mean_fold_accuracy: mean_sd(&accuracies).0,
        per_material_accuracy: MaterialClass::ALL
            .iter()
            .map(|&m| (m, tally.material.row_accuracy(m.code())))
            .collect(),
        folds: tally.folds,
        material_confusion: tally.material,
        object_confusion: tally.object,
        sweep,
        spearman,
        config,
        warnings,
        meta: ReportMeta {
            wall_clock_secs: started.elapsed().as_secs_f64(),
            unix_time: unix_time(),
        },
    }
}

/// Stratified k-fold; with `n_per_object` every fold's training split is
/// cut down to that many samples per object while the test fold stays whole.
pub fn run_kfold(
    corpus: &Corpus,
    sensor: SensorKind,
    cfg: &HarnessConfig,
    k: usize,
    n_per_object: Option<usize>,
    seed_value: u64,
) -> Result<EvalReport> {
    let started = Instant::now();
    let table = FeatureTable::new(corpus, sensor, &cfg.filter)?;
    let plan = plan_stratified_kfold(corpus, sensor, k, seed_value)?;
    let outcomes = run_plan(&table, cfg, &plan, seed_value, n_per_object)?;
    let n_label = n_per_object.map_or_else(|| "all".to_string(), |n| n.to_string());
    let tally = tally(&table, &outcomes, &n_label);
    let config = serde_json::json!({
        "harness": cfg,
        "k": k,
        "n_per_object": n_per_object,
        "seed": seed_value,
    });
    Ok(build_report(
        Protocol::Kfold,
        sensor,
        cfg,
        tally,
        Vec::new(),
        config,
        plan.warnings,
        started,
    ))
}

fn loobj_outcomes(
    table: &FeatureTable<'_>,
    cfg: &HarnessConfig,
    n_objects: ObjectCount,
    seed_value: u64,
) -> Result<Vec<FoldOutcome>> {
    let plan = plan_leave_one_object_out(table.corpus, table.sensor, n_objects, seed_value)?;
    run_plan(table, cfg, &plan, seed_value, None)
}

/// Leave-one-object-out: one model per held-out object.
pub fn run_leave_one_object_out(
    corpus: &Corpus,
    sensor: SensorKind,
    cfg: &HarnessConfig,
    n_objects: ObjectCount,
    seed_value: u64,
) -> Result<EvalReport> {
    let started = Instant::now();
    let table = FeatureTable::new(corpus, sensor, &cfg.filter)?;
    let outcomes = loobj_outcomes(&table, cfg, n_objects, seed_value)?;
    let tally = tally(&table, &outcomes, &n_objects.to_string());
    let config = serde_json::json!({
        "harness": cfg,
        "n_objects": n_objects,
        "seed": seed_value,
    });
    Ok(build_report(
        Protocol::Loobj,
        sensor,
        cfg,
        tally,
        Vec::new(),
        config,
        Vec::new(),
        started,
    ))
}

/// Leave-one-object-out at each training-object count in `counts`. Each
/// point uses the same master seed as a standalone
/// [`run_leave_one_object_out`] call, so the `All` point reproduces it.
pub fn run_object_count_sweep(
    corpus: &Corpus,
    sensor: SensorKind,
    cfg: &HarnessConfig,
    counts: &[ObjectCount],
    seed_value: u64,
) -> Result<EvalReport> {
    if counts.is_empty() {
        return Err(Error::InvalidConfig("empty object-count range".into()));
    }
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("object counts must be strictly increasing".into()));
    }
    let started = Instant::now();
    let table = FeatureTable::new(corpus, sensor, &cfg.filter)?;
    let mut folds = Vec::new();
    let mut sweep = Vec::new();
    let mut last = None;
    for &n in counts {
        let outcomes = loobj_outcomes(&table, cfg, n, seed_value)?;
        let t = tally(&table, &outcomes, &n.to_string());
        let accs: Vec<f64> = t.folds.iter().map(|f| f.accuracy).collect();
        sweep.push(SweepPoint {
            n,
            mean_accuracy: mean_sd(&accs).0,
            overall_accuracy: t.material.accuracy().unwrap_or(0.0),
        });
        folds.extend(t.folds.iter().cloned());
        last = Some(t);
    }
    let last = last.expect("non-empty counts");
    let tally = Tally {
        folds,
        material: last.material,
        object: last.object,
    };
    let config = serde_json::json!({
        "harness": cfg,
        "n_range": counts,
        "seed": seed_value,
    });
    let mut report = build_report(Protocol::Sweep, sensor, cfg, tally, sweep, config, Vec::new(), started);
    // Pooled accuracy describes the last point, like the confusion matrices.
    report.overall_accuracy = report.material_confusion.accuracy().unwrap_or(0.0);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Runs `run` once per derived seed and summarises overall accuracy.
pub fn run_repeated<F>(seed_value: u64, repeats: usize, mut run: F) -> Result<(Vec<EvalReport>, RepeatSummary)>
where
    F: FnMut(u64) -> Result<EvalReport>,
{
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be positive".into()));
    }
    let seeds: Vec<u64> = (0..repeats)
        .map(|r| {
            if r == 0 {
                seed_value
            } else {
                seed::derive(seed_value, &[STREAM_REPEAT, r as u64])
            }
        })
        .collect();
    let reports = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<f64> = reports.iter().map(|r| r.overall_accuracy).collect();
    let (mean, sd) = mean_sd(&accuracies);
    Ok((
        reports,
        RepeatSummary {
            seeds,
            accuracies,
            mean,
            sd,
        },
    ))
}
