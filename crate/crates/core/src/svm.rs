//! One-vs-rest linear SVM trained with Pegasos stochastic subgradient steps.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::argmax;
use crate::seed;
use crate::spectra::MaterialClass;

pub const SVM_MODEL_KIND: &str = "linear_svm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 100,
            seed: 0,
        }
    }
}

/// Five linear scorers `w_c · x + b_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub model_kind: String,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Per class, the regularised mean hinge objective after every epoch.
    pub epoch_objectives: Vec<Vec<f64>>,
}

/// Weight vector stored as `scale * v` so the per-step shrink is O(1).
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
    bias: f64,
}

impl ScaledWeights {
    fn score(&self, x: &[f64]) -> f64 {
        self.scale * dot(&self.v, x) + self.bias
    }

    fn shrink(&mut self, factor: f64) {
        self.bias *= factor;
        if factor == 0.0 {
            self.v.iter_mut().for_each(|v| *v = 0.0);
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|v| *v *= self.scale);
            self.scale = 1.0;
        }
    }

    fn add(&mut self, step: f64, x: &[f64]) {
        let k = step / self.scale;
        self.v.iter_mut().zip(x).for_each(|(v, &xi)| *v += k * xi);
        self.bias += step;
    }

    fn materialise(&self) -> Vec<f64> {
        self.v.iter().map(|v| v * self.scale).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularised hinge objective; the bias is treated as the weight of a
/// constant unit feature.
fn objective(w: &[f64], b: f64, lambda: f64, rows: &[&[f64]], targets: &[f64]) -> f64 {
    let norm2 = dot(w, w) + b * b;
    let hinge: f64 = rows
        .iter()
        .zip(targets)
        .map(|(x, &y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * lambda * norm2 + hinge / rows.len() as f64
}

/// Trains one binary hinge classifier per material (that class vs. the rest).
pub fn train_svm(features: ArrayView2<f64>, labels: &[usize], cfg: &SvmConfig) -> Result<LinearSvmModel> {
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda {} must be positive", cfg.lambda)));
    }
    if features.nrows() == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            actual: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= MaterialClass::COUNT) {
        return Err(Error::InvalidData(format!("label {bad} out of range")));
    }
    let owned = features.as_standard_layout();
    let rows: Vec<&[f64]> = owned
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();
    let dim = features.ncols();

    let mut weights = Vec::with_capacity(MaterialClass::COUNT);
    let mut biases = Vec::with_capacity(MaterialClass::COUNT);
    let mut epoch_objectives = Vec::with_capacity(MaterialClass::COUNT);
    for class in 0..MaterialClass::COUNT {
        let targets: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        let mut rng = seed::derived_rng(cfg.seed, &[class as u64]);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut w = ScaledWeights {
            v: vec![0.0; dim],
            scale: 1.0,
            bias: 0.0,
        };
        let mut objectives = Vec::with_capacity(cfg.epochs);
        let mut t = 0u64;
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (cfg.lambda * t as f64);
                let margin = targets[i] * w.score(rows[i]);
                w.shrink(1.0 - 1.0 / t as f64);
                if margin < 1.0 {
                    w.add(eta * targets[i], rows[i]);
                }
            }
            objectives.push(objective(&w.materialise(), w.bias, cfg.lambda, &rows, &targets));
        }
        weights.push(w.materialise());
        biases.push(w.bias);
        epoch_objectives.push(objectives);
    }

    Ok(LinearSvmModel {
        model_kind: SVM_MODEL_KIND.to_string(),
        weights,
        biases,
        lambda: cfg.lambda,
        epochs: cfg.epochs,
        seed: cfg.seed,
        epoch_objectives,
    })
}

impl LinearSvmModel {
    pub fn zeros(dim: usize) -> Self {
        LinearSvmModel {
            model_kind: SVM_MODEL_KIND.to_string(),
            weights: vec![vec![0.0; dim]; MaterialClass::COUNT],
            biases: vec![0.0; MaterialClass::COUNT],
            lambda: SvmConfig::default().lambda,
            epochs: 0,
            seed: 0,
            epoch_objectives: vec![Vec::new(); MaterialClass::COUNT],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect())
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let x = x.as_standard_layout();
        x.rows()
            .into_iter()
            .map(|r| Ok(argmax(&self.scores(r.to_slice().expect("standard layout"))?)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: LinearSvmModel = serde_json::from_str(text)?;
        if model.model_kind != SVM_MODEL_KIND {
            return Err(Error::InvalidData(format!(
                "model_kind `{}` is not `{SVM_MODEL_KIND}`",
                model.model_kind
            )));
        }
        let dim = model.input_dim();
        let ok = model.weights.len() == MaterialClass::COUNT
            && model.biases.len() == MaterialClass::COUNT
            && model.weights.iter().all(|w| w.len() == dim)
            && model
                .weights
                .iter()
                .flatten()
                .chain(&model.biases)
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidData("malformed linear SVM model".into()));
        }
        Ok(model)
    }
}

/// Highest-scoring material; ties go to the lowest class code.
pub fn predict_svm(model: &LinearSvmModel, x: &[f64]) -> Result<MaterialClass> {
    let best = argmax(&model.scores(x)?);
    Ok(MaterialClass::from_code(best).expect("five class heads"))
}
