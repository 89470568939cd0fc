//! Raw spectrum → feature vector.
//!
//! Visible-light samples are smoothed with a zero-phase Butterworth filter,
//! then every sample is differentiated against its wavelength grid and
//! min-max scaled to `[0, 1]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::filter::{design_butterworth, filtfilt, FilterSpec, IirCoefficients};
use crate::numfmt::fmt_sig9;
use crate::spectra::{SensorKind, SpectralSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub sensor: SensorKind,
    pub object_id: String,
}

/// Forward difference quotient; the last element repeats the one before it
/// so the output keeps the input length.
pub fn difference_quotient(signal: &[f64], wavelengths: &[f64]) -> Result<Vec<f64>> {
    if signal.len() != wavelengths.len() {
        return Err(Error::DimensionMismatch {
            expected: wavelengths.len(),
            actual: signal.len(),
        });
    }
    if signal.len() < 2 {
        return Err(Error::InvalidSignal("need at least two points to differentiate".into()));
    }
    if wavelengths
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::InvalidSignal("wavelengths must be strictly increasing".into()));
    }
    let mut out: Vec<f64> = signal
        .windows(2)
        .zip(wavelengths.windows(2))
        .map(|(s, w)| (s[1] - s[0]) / (w[1] - w[0]))
        .collect();
    out.push(out[out.len() - 1]);
    Ok(out)
}

/// Min-max scaling to `[0, 1]`; a constant input maps to all `0.5`.
pub fn normalize_unit(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::InvalidSignal("empty signal".into()));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSignal("non-finite value".into()));
    }
    let (lo, hi) = signal.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if hi == lo {
        return Ok(vec![0.5; signal.len()]);
    }
    let range = hi - lo;
    Ok(signal.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect())
}

/// Preprocessing with a pre-designed smoothing filter, for batch use.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    coeffs: IirCoefficients,
}

impl Preprocessor {
    pub fn new(filter: &FilterSpec) -> Result<Self> {
        Ok(Preprocessor {
            coeffs: design_butterworth(filter)?,
        })
    }

    pub fn apply(&self, sample: &SpectralSample) -> Result<FeatureVector> {
        let expected = sample.sensor.expected_dim();
        if sample.intensities.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: sample.intensities.len(),
            });
        }
        let derivative = match sample.sensor {
            SensorKind::Visible => {
                let smooth = filtfilt(&self.coeffs, &sample.intensities)?;
                difference_quotient(&smooth, &sample.wavelengths)?
            }
            SensorKind::Nir => difference_quotient(&sample.intensities, &sample.wavelengths)?,
        };
        Ok(FeatureVector {
            values: normalize_unit(&derivative)?,
            sensor: sample.sensor,
            object_id: sample.object_id.clone(),
        })
    }

    /// Preprocesses every sample of the corpus (all sensors), indexed like
    /// [`Corpus::samples`].
    pub fn apply_corpus(&self, corpus: &Corpus) -> Result<Vec<FeatureVector>> {
        corpus.samples().iter().map(|s| self.apply(s)).collect()
    }
}

pub fn preprocess_sample(sample: &SpectralSample, filter: &FilterSpec) -> Result<FeatureVector> {
    Preprocessor::new(filter)?.apply(sample)
}

/// Renders `features_<sensor>.csv` for one sensor of a corpus.
pub fn features_csv(corpus: &Corpus, sensor: SensorKind, filter: &FilterSpec) -> Result<String> {
    let pre = Preprocessor::new(filter)?;
    let mut out = String::from("object_id,sensor,sample_index");
    for i in 0..sensor.expected_dim() {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    for &id in &corpus.sample_ids(sensor) {
        let sample = &corpus.samples()[id];
        let fv = pre.apply(sample)?;
        let _ = write!(out, "{},{},{}", sample.object_id, sensor, sample.sample_index);
        for v in fv.values {
            out.push(',');
            out.push_str(&fmt_sig9(v));
        }
        out.push('\n');
    }
    Ok(out)
}
