//! Evaluation protocols and their bookkeeping.

pub mod confusion;
pub mod folds;
pub mod harness;
pub mod spectra_summary;
pub mod stats;

pub use confusion::ConfusionMatrix;
pub use folds::{
    check_plan, plan_leave_one_object_out, plan_stratified_kfold, subsample_per_object, Fold, FoldPlan, ObjectCount,
    Protocol,
};
pub use harness::{
    fold_seed, fold_subsample_seed, run_kfold, run_leave_one_object_out, run_object_count_sweep, run_repeated,
    ClassifierConfig, EvalReport, FeatureTable, FoldResult, HarnessConfig, MlpSettings, RepeatSummary, SweepPoint,
};
pub use spectra_summary::{summarize_spectra, SpectrumSummary};
