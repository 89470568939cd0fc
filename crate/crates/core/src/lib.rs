//! Spectral material classification.
//!
//! Turns visible-light and near-infrared spectrometer readings into
//! normalised derivative features, trains a small feed-forward network or a
//! one-vs-rest linear SVM on them, and evaluates the classifiers under
//! stratified k-fold, per-object sample budgets, leave-one-object-out and
//! training-object-count sweeps.
//!
//! The crate can work from a corpus on disk (see [`corpus::load_corpus`]) or
//! from the built-in generator in [`synth`].

pub mod corpus;
pub mod error;
pub mod eval;
pub mod filter;
pub mod mlp;
pub mod model;
pub mod numfmt;
pub mod preprocess;
pub mod report;
pub mod run;
pub mod seed;
pub mod spectra;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use spectra::{MaterialClass, SensorKind, SpectralSample};
