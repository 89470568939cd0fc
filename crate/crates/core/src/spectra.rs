//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The five material categories, with canonical codes 0..=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialClass {
    Metal = 0,
    Plastic = 1,
    Wood = 2,
    Paper = 3,
    Fabric = 4,
}

impl MaterialClass {
    pub const COUNT: usize = 5;
    pub const ALL: [MaterialClass; 5] = [
        MaterialClass::Metal,
        MaterialClass::Plastic,
        MaterialClass::Wood,
        MaterialClass::Paper,
        MaterialClass::Fabric,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MaterialClass::Metal => "metal",
            MaterialClass::Plastic => "plastic",
            MaterialClass::Wood => "wood",
            MaterialClass::Paper => "paper",
            MaterialClass::Fabric => "fabric",
        }
    }
}

impl fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaterialClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMaterial(s.to_string()))
    }
}

/// Which spectrometer produced a reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    /// Visible-light spectrometer, 288 bins over 317–856 nm.
    Visible,
    /// Near-infrared spectrometer, 331 bins over 740–1070 nm.
    Nir,
}

impl SensorKind {
    pub const ALL: [SensorKind; 2] = [SensorKind::Visible, SensorKind::Nir];

    /// Tolerance on grid endpoints relative to [`SensorKind::range_nm`].
    pub const RANGE_TOLERANCE_NM: f64 = 2.0;

    pub fn expected_dim(self) -> usize {
        match self {
            SensorKind::Visible => 288,
            SensorKind::Nir => 331,
        }
    }

    pub fn range_nm(self) -> (f64, f64) {
        match self {
            SensorKind::Visible => (317.0, 856.0),
            SensorKind::Nir => (740.0, 1070.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Visible => "visible",
            SensorKind::Nir => "nir",
        }
    }

    /// Evenly spaced grid spanning the sensor range with `expected_dim` points.
    /// For the NIR sensor this is exactly the integers 740..=1070.
    pub fn default_grid(self) -> Vec<f64> {
        let (lo, hi) = self.range_nm();
        let n = self.expected_dim();
        let step = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
            .collect()
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "visible" => Ok(SensorKind::Visible),
            "nir" => Ok(SensorKind::Nir),
            other => Err(Error::UnknownSensor(other.to_string())),
        }
    }
}

/// One raw spectrometer reading.
///
/// The wavelength grid is shared between samples of the same sensor, hence
/// the `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub object_id: String,
    pub sensor: SensorKind,
    pub sample_index: u32,
    pub wavelengths: Arc<[f64]>,
    pub intensities: Vec<f64>,
}

impl SpectralSample {
    /// Lists every way this sample breaks the per-sample invariants.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        let expected = self.sensor.expected_dim();
        if self.intensities.len() != expected {
            out.push(format!("{} intensities, expected {expected}", self.intensities.len()));
        }
        if self.wavelengths.len() != expected {
            out.push(format!("{} wavelengths, expected {expected}", self.wavelengths.len()));
        }
        if self
            .wavelengths
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            out.push("wavelengths not strictly increasing".to_string());
        }
        if let (Some(&first), Some(&last)) = (self.wavelengths.first(), self.wavelengths.last()) {
            let (lo, hi) = self.sensor.range_nm();
            let tol = SensorKind::RANGE_TOLERANCE_NM;
            if (first - lo).abs() > tol || (last - hi).abs() > tol {
                out.push(format!("grid spans {first}..{last} nm, expected {lo}..{hi} nm"));
            }
        }
        if self.intensities.iter().any(|v| !v.is_finite()) {
            out.push("non-finite intensity".to_string());
        } else if self.intensities.iter().any(|&v| v < 0.0) {
            out.push("negative intensity".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: String,
    pub display_name: String,
    pub material: MaterialClass,
}
