//! Command-line front end: `validate`, `synth`, `preprocess`, `run` and
//! `report`.
//!
//! Exit codes are 0 on success, 1 on a domain or validation failure and 2 on
//! an I/O or usage failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, write_corpus, Corpus};
use crate::error::Error;
use crate::eval::{
    run_kfold, run_leave_one_object_out, run_object_count_sweep, run_repeated, summarize_spectra, ClassifierConfig,
    EvalReport, HarnessConfig, MlpSettings, ObjectCount, Protocol,
};
use crate::filter::FilterSpec;
use crate::preprocess::features_csv;
use crate::report;
use crate::spectra::{MaterialClass, SensorKind};
use crate::svm::SvmConfig;
use crate::synth::{centroid_oracle_accuracy, synth_corpus, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// A failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub source: Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        if self.source.is_io() {
            EXIT_IO
        } else {
            EXIT_DOMAIN
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.source)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Mlp,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureKind {
    Spectrum,
    Confusion,
    Sweep,
}

/// Everything `run` needs. Loaded from `--config` JSON; flags override
/// individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub sensor: SensorKind,
    pub classifier: ClassifierKind,
    pub protocol: Protocol,
    pub k: usize,
    pub n_per_object: Option<usize>,
    pub n_objects: ObjectCount,
    /// Sweep points; empty means every count the corpus allows, then `all`.
    pub n_range: Vec<ObjectCount>,
    pub filter: FilterSpec,
    pub mlp: MlpSettings,
    pub svm: SvmConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            sensor: SensorKind::Nir,
            classifier: ClassifierKind::Mlp,
            protocol: Protocol::Kfold,
            k: 5,
            n_per_object: None,
            n_objects: ObjectCount::All,
            n_range: Vec::new(),
            filter: FilterSpec::default(),
            mlp: MlpSettings::default(),
            svm: SvmConfig::default(),
            out: None,
            seed: 0,
            threads: 1,
            repeats: 1,
        }
    }
}

impl RunConfig {
    pub fn harness(&self) -> HarnessConfig {
        let classifier = match self.classifier {
            ClassifierKind::Mlp => ClassifierConfig::Mlp(self.mlp.clone()),
            ClassifierKind::Svm => ClassifierConfig::Svm(self.svm),
        };
        HarnessConfig {
            classifier,
            filter: self.filter,
            threads: self.threads,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.filter.validate()?;
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.protocol == Protocol::Kfold && self.k < 2 {
            return Err(Error::InvalidConfig(format!("k = {} must be at least 2", self.k)));
        }
        if self.n_per_object == Some(0) {
            return Err(Error::InvalidConfig("n-per-object must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "specmat",
    version,
    about = "Material classification from spectrometer readings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus and print its validation summary.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Write preprocessed feature vectors as CSV.
    Preprocess {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "nir")]
        sensor: SensorKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        filter_order: Option<usize>,
        #[arg(long)]
        filter_cutoff: Option<f64>,
    },
    /// Train and evaluate a classifier under one protocol.
    Run(RunArgs),
    /// Draw a figure from a report or a corpus.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub objects_per_material: Option<usize>,
    #[arg(long)]
    pub samples_per_object: Option<usize>,
    /// Restrict to one sensor; both by default.
    #[arg(long)]
    pub sensor: Option<SensorKind>,
    #[arg(long)]
    pub class_scale: Option<f64>,
    #[arg(long)]
    pub object_scale: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub sensor: Option<SensorKind>,
    #[arg(long, value_enum)]
    pub classifier: Option<ClassifierKind>,
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_per_object: Option<usize>,
    /// Training objects per material for leave-one-object-out: INT or `all`.
    #[arg(long)]
    pub n_objects: Option<ObjectCount>,
    /// Comma-separated sweep points, e.g. `1,2,3,all`.
    #[arg(long, value_delimiter = ',')]
    pub n_range: Option<Vec<ObjectCount>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub filter_order: Option<usize>,
    #[arg(long)]
    pub filter_cutoff: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum)]
    pub kind: FigureKind,
    /// `report.json` written by `run` (confusion and sweep figures).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Corpus for spectrum figures.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "nir")]
    pub sensor: SensorKind,
    /// Comma-separated object ids for spectrum figures; all objects by default.
    #[arg(long, value_delimiter = ',')]
    pub objects: Option<Vec<String>>,
    /// Confusion matrix to draw.
    #[arg(long, default_value = "material")]
    pub matrix: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Validate { corpus } => cmd_validate(&corpus),
        Command::Synth(args) => cmd_synth(&args),
        Command::Preprocess {
            corpus,
            sensor,
            out,
            filter_order,
            filter_cutoff,
        } => {
            let mut filter = FilterSpec::default();
            if let Some(o) = filter_order {
                filter.order = o;
            }
            if let Some(c) = filter_cutoff {
                filter.cutoff = c;
            }
            cmd_preprocess(&corpus, sensor, &filter, &out)
        }
        Command::Run(args) => {
            let cfg = resolve_run_config(&args)?;
            cmd_run(&cfg)
        }
        Command::Report(args) => cmd_report(&args),
    }
}

pub fn cmd_validate(corpus: &Path) -> Result<i32, CliError> {
    let corpus = load_corpus(corpus).stage("load corpus")?;
    let report = corpus.validation().expect("loader attaches validation");
    print!("{}", report.render());
    Ok(if report.is_valid() { EXIT_OK } else { EXIT_DOMAIN })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32, CliError> {
    let mut cfg = SynthConfig::default();
    if let Some(v) = args.objects_per_material {
        cfg.objects_per_material = v;
    }
    if let Some(v) = args.samples_per_object {
        cfg.samples_per_object = v;
    }
    if let Some(s) = args.sensor {
        cfg.sensors = vec![s];
    }
    if let Some(v) = args.class_scale {
        cfg.class_scale = v;
    }
    if let Some(v) = args.object_scale {
        cfg.object_scale = v;
    }
    if let Some(v) = args.noise_scale {
        cfg.noise_scale = v;
    }
    let corpus = synth_corpus(&cfg, args.seed).stage("generate corpus")?;
    write_corpus(&corpus, &args.out).stage("write corpus")?;
    println!("wrote {} objects to {}", corpus.objects().len(), args.out.display());
    for &sensor in &cfg.sensors {
        let acc = centroid_oracle_accuracy(&corpus, sensor, &FilterSpec::default()).stage("centroid oracle")?;
        println!(
            "{sensor}: {} samples, nearest-centroid accuracy {acc:.4}",
            corpus.count(sensor)
        );
    }
    Ok(EXIT_OK)
}

pub fn cmd_preprocess(corpus: &Path, sensor: SensorKind, filter: &FilterSpec, out: &Path) -> Result<i32, CliError> {
    let corpus = load_corpus(corpus).stage("load corpus")?;
    let text = features_csv(&corpus, sensor, filter).stage("preprocess")?;
    fs::create_dir_all(out)
        .map_err(|e| Error::io(out, e))
        .stage("write features")?;
    let path = out.join(format!("features_{sensor}.csv"));
    fs::write(&path, text)
        .map_err(|e| Error::io(&path, e))
        .stage("write features")?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

/// Merges the optional JSON config with command-line overrides.
pub fn resolve_run_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(path, e))
                .stage("read config")?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(Error::from)
                .stage("parse config")?
        }
        None => RunConfig::default(),
    };
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field.clone() { cfg.$field = v; })*
        };
    }
    take!(sensor, classifier, protocol, k, n_objects, n_range, seed, threads, repeats);
    if args.corpus.is_some() {
        cfg.corpus = args.corpus.clone();
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.n_per_object.is_some() {
        cfg.n_per_object = args.n_per_object;
    }
    if let Some(e) = args.epochs {
        cfg.mlp.train.epochs = e;
        cfg.svm.epochs = e;
    }
    if let Some(o) = args.filter_order {
        cfg.filter.order = o;
    }
    if let Some(c) = args.filter_cutoff {
        cfg.filter.cutoff = c;
    }
    cfg.validate().stage("check config")?;
    Ok(cfg)
}

fn default_sweep(corpus: &Corpus, sensor: SensorKind) -> Vec<ObjectCount> {
    let by_object = corpus.samples_by_object(sensor);
    let smallest = MaterialClass::ALL
        .iter()
        .map(|&m| by_object.keys().filter(|id| corpus.material_of(id) == Some(m)).count())
        .min()
        .unwrap_or(0);
    let mut points: Vec<ObjectCount> = (1..smallest.saturating_sub(1)).map(ObjectCount::Count).collect();
    points.push(ObjectCount::All);
    points
}

fn evaluate(corpus: &Corpus, cfg: &RunConfig, seed_value: u64) -> crate::Result<EvalReport> {
    let harness = cfg.harness();
    match cfg.protocol {
        Protocol::Kfold => run_kfold(corpus, cfg.sensor, &harness, cfg.k, cfg.n_per_object, seed_value),
        Protocol::Loobj => run_leave_one_object_out(corpus, cfg.sensor, &harness, cfg.n_objects, seed_value),
        Protocol::Sweep => {
            let range = if cfg.n_range.is_empty() {
                default_sweep(corpus, cfg.sensor)
            } else {
                cfg.n_range.clone()
            };
            run_object_count_sweep(corpus, cfg.sensor, &harness, &range, seed_value)
        }
    }
}

pub fn cmd_run(cfg: &RunConfig) -> Result<i32, CliError> {
    let corpus_path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no corpus given".into()))
        .stage("check config")?;
    let out = cfg
        .out
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("no output directory given".into()))
        .stage("check config")?;
    let corpus = load_corpus(corpus_path).stage("load corpus")?;
    if cfg.repeats == 1 {
        let report = evaluate(&corpus, cfg, cfg.seed).stage("evaluate")?;
        write_run_outputs(&report, out).stage("write outputs")?;
        print!("{}", report.summary());
    } else {
        let (reports, summary) =
            run_repeated(cfg.seed, cfg.repeats, |s| evaluate(&corpus, cfg, s)).stage("evaluate")?;
        for report in &reports {
            let seed_value = report.config["seed"].as_u64().unwrap_or_default();
            write_run_outputs(report, &out.join(format!("seed_{seed_value}"))).stage("write outputs")?;
        }
        let path = out.join("repeats.json");
        let text = serde_json::to_string_pretty(&summary)
            .map_err(Error::from)
            .stage("write outputs")?;
        fs::write(&path, text)
            .map_err(|e| Error::io(&path, e))
            .stage("write outputs")?;
        print!("{}", reports[0].summary());
        println!(
            "{} repeats: accuracy {:.4} ± {:.4}",
            cfg.repeats, summary.mean, summary.sd
        );
    }
    Ok(EXIT_OK)
}

fn write_text(path: &Path, text: &str) -> crate::Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the report, its CSV tables and the default figures into `out`.
pub fn write_run_outputs(report: &EvalReport, out: &Path) -> crate::Result<()> {
    let figures = out.join("figures");
    fs::create_dir_all(&figures).map_err(|e| Error::io(&figures, e))?;
    write_text(&out.join("report.json"), &report.to_json()?)?;
    write_text(&out.join("accuracy.csv"), &report.accuracy_csv())?;
    write_text(&out.join("confusion_material.csv"), &report.material_confusion.to_csv())?;
    write_text(&out.join("confusion_object.csv"), &report.object_confusion.to_csv())?;
    write_text(
        &figures.join("confusion_material.svg"),
        &report::confusion_svg(
            &report.material_confusion,
            &format!("{} {} material confusion", report.sensor, report.classifier),
        ),
    )?;
    write_text(
        &figures.join("confusion_object.svg"),
        &report::confusion_svg(
            &report.object_confusion,
            &format!("{} {} object confusion", report.sensor, report.classifier),
        ),
    )?;
    if !report.sweep.is_empty() {
        write_text(&out.join("sweep.csv"), &report::sweep_csv(&report.sweep))?;
        write_text(
            &figures.join("sweep.svg"),
            &report::sweep_svg(
                &report.sweep,
                &format!("{} {} accuracy vs. training objects", report.sensor, report.classifier),
            ),
        )?;
    }
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<i32, CliError> {
    fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(&args.out, e))
        .stage("write figure")?;
    let (svg, csv, stem) = match args.kind {
        FigureKind::Spectrum => {
            let path = args
                .corpus
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("spectrum figures need --corpus".into()))
                .stage("check arguments")?;
            let corpus = load_corpus(path).stage("load corpus")?;
            let ids: Vec<String> = match &args.objects {
                Some(ids) => ids.clone(),
                None => corpus
                    .samples_by_object(args.sensor)
                    .keys()
                    .map(|s| s.to_string())
                    .collect(),
            };
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let summaries = summarize_spectra(&corpus, args.sensor, &refs).stage("summarise spectra")?;
            (
                report::spectrum_svg(&summaries),
                report::spectrum_csv(&summaries),
                format!("spectrum_{}", args.sensor),
            )
        }
        FigureKind::Confusion | FigureKind::Sweep => {
            let path = args
                .report
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("confusion and sweep figures need --report".into()))
                .stage("check arguments")?;
            let text = fs::read_to_string(path)
                .map_err(|e| Error::io(path, e))
                .stage("read report")?;
            let report = EvalReport::from_json(&text).stage("parse report")?;
            if args.kind == FigureKind::Sweep {
                if report.sweep.is_empty() {
                    return Err(Error::InvalidData("report has no sweep points".into())).stage("draw sweep");
                }
                (
                    report::sweep_svg(&report.sweep, "accuracy vs. training objects"),
                    report::sweep_csv(&report.sweep),
                    "sweep".to_string(),
                )
            } else {
                let matrix = match args.matrix.as_str() {
                    "material" => &report.material_confusion,
                    "object" => &report.object_confusion,
                    other => {
                        return Err(Error::InvalidConfig(format!("unknown matrix `{other}`"))).stage("check arguments")
                    }
                };
                (
                    report::confusion_svg(matrix, &format!("{} confusion", args.matrix)),
                    matrix.to_csv(),
                    format!("confusion_{}", args.matrix),
                )
            }
        }
    };
    let svg_path = args.out.join(format!("{stem}.svg"));
    let csv_path = args.out.join(format!("{stem}.csv"));
    write_text(&svg_path, &svg).stage("write figure")?;
    write_text(&csv_path, &csv).stage("write figure")?;
    println!("wrote {} and {}", svg_path.display(), csv_path.display());
    Ok(EXIT_OK)
}
