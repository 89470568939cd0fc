use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::stats::mean_sd;
use crate::preprocess::normalize_unit;
use crate::spectra::SensorKind;

/// Per-wavelength mean and standard deviation of one object's samples,
/// each sample first scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub object_id: String,
    pub display_name: String,
    pub sensor: SensorKind,
    pub sample_count: usize,
    pub wavelengths: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Average of `sd` across wavelengths.
    pub mean_sd: f64,
}

pub fn summarize_spectra(corpus: &Corpus, sensor: SensorKind, object_ids: &[&str]) -> Result<Vec<SpectrumSummary>> {
    let by_object = corpus.samples_by_object(sensor);
    object_ids
        .iter()
        .map(|&object_id| {
            let object = corpus
                .object(object_id)
                .ok_or_else(|| Error::UnknownObject(object_id.to_string()))?;
            let ids = by_object.get(object_id).map(Vec::as_slice).unwrap_or(&[]);
            if ids.len() < 2 {
                return Err(Error::InvalidData(format!(
                    "object {object_id} has {} {sensor} samples; need at least 2",
                    ids.len()
                )));
            }
            let normalized = ids
                .iter()
                .map(|&i| normalize_unit(&corpus.samples()[i].intensities))
                .collect::<Result<Vec<_>>>()?;
            let dim = normalized[0].len();
            if normalized.iter().any(|n| n.len() != dim) {
                return Err(Error::InvalidData(format!(
                    "object {object_id} has samples of differing length"
                )));
            }
            let (mean, sd): (Vec<f64>, Vec<f64>) = (0..dim)
                .map(|j| {
                    let column: Vec<f64> = normalized.iter().map(|n| n[j]).collect();
                    mean_sd(&column)
                })
                .unzip();
            let mean_sd_value = sd.iter().sum::<f64>() / dim as f64;
            Ok(SpectrumSummary {
                object_id: object_id.to_string(),
                display_name: object.display_name.clone(),
                sensor,
                sample_count: ids.len(),
                wavelengths: corpus.samples()[ids[0]].wavelengths.to_vec(),
                mean,
                sd,
                mean_sd: mean_sd_value,
            })
        })
        .collect()
}
