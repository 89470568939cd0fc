//! A trained classifier of either kind, with a shared JSON form.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::mlp::{self, MlpModel, MLP_MODEL_KIND};
use crate::spectra::MaterialClass;
use crate::svm::{LinearSvmModel, SVM_MODEL_KIND};

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Mlp(MlpModel),
    Svm(LinearSvmModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Mlp(_) => MLP_MODEL_KIND,
            TrainedModel::Svm(_) => SVM_MODEL_KIND,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Mlp(m) => m.architecture.input_dim,
            TrainedModel::Svm(m) => m.input_dim(),
        }
    }

    /// Predicted material and per-class scores: softmax probabilities for
    /// the network, decision values for the SVM.
    pub fn predict(&self, x: &[f64]) -> Result<(MaterialClass, Vec<f64>)> {
        let scores = match self {
            TrainedModel::Mlp(m) => mlp::predict(m, x)?.1,
            TrainedModel::Svm(m) => m.scores(x)?,
        };
        let class = MaterialClass::from_code(mlp::argmax(&scores)).expect("five class heads");
        Ok((class, scores))
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Mlp(m) => m.predict_batch(x),
            TrainedModel::Svm(m) => m.predict_batch(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            TrainedModel::Mlp(m) => m.to_json(),
            TrainedModel::Svm(m) => m.to_json(),
        }
    }

    /// Reads either model kind, dispatching on its `model_kind` field.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("model_kind").and_then(|k| k.as_str()) {
            Some(MLP_MODEL_KIND) => Ok(TrainedModel::Mlp(MlpModel::from_json(text)?)),
            Some(SVM_MODEL_KIND) => Ok(TrainedModel::Svm(LinearSvmModel::from_json(text)?)),
            Some(other) => Err(Error::InvalidData(format!("unknown model_kind `{other}`"))),
            None => Err(Error::InvalidData("model JSON has no model_kind".into())),
        }
    }
}
