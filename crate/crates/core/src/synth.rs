//! Synthetic corpus generator.
//!
//! Each material gets a base curve built from three Gaussian bumps at fixed
//! positions with amplitudes drawn once per class; each object adds a smooth
//! low-frequency perturbation; each sample is scaled by a random gain and
//! receives i.i.d. Gaussian noise. All components are defined on the
//! position `u ∈ [0, 1]` along the sensor grid, so both sensors share the
//! same class structure.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::preprocess::preprocess_sample;
use crate::seed;
use crate::spectra::{MaterialClass, ObjectRecord, SensorKind, SpectralSample};

const BUMP_CENTERS: [f64; 3] = [0.25, 0.5, 0.75];
const BUMP_WIDTH: f64 = 0.08;
/// Minimum distance between any two class amplitude vectors (before
/// scaling by `class_scale`).
const MIN_CLASS_SEPARATION: f64 = 0.6;
const PERTURBATION_TERMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub objects_per_material: usize,
    pub samples_per_object: usize,
    pub sensors: Vec<SensorKind>,
    /// Amplitude of the class-specific bumps.
    pub class_scale: f64,
    /// Amplitude of the per-object perturbation.
    pub object_scale: f64,
    /// Standard deviation of per-sample noise.
    pub noise_scale: f64,
    /// Per-sample gain is drawn uniformly from this closed range.
    pub gain_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            objects_per_material: 10,
            samples_per_object: 100,
            sensors: vec![SensorKind::Visible, SensorKind::Nir],
            class_scale: 0.3,
            object_scale: 0.03,
            noise_scale: 0.0005,
            gain_range: (0.9, 1.1),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.objects_per_material == 0 {
            return bad("objects_per_material must be positive");
        }
        if self.samples_per_object == 0 {
            return bad("samples_per_object must be positive");
        }
        if self.sensors.is_empty() {
            return bad("at least one sensor is required");
        }
        for (name, v) in [
            ("class_scale", self.class_scale),
            ("object_scale", self.object_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be a non-negative finite number"));
            }
        }
        let (lo, hi) = self.gain_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("gain_range must satisfy 0 < lo <= hi");
        }
        Ok(())
    }
}

fn bump(u: f64, center: f64) -> f64 {
    let d = (u - center) / BUMP_WIDTH;
    (-0.5 * d * d).exp()
}

/// Shared by every material: a gentle ramp on a positive floor.
fn baseline(u: f64) -> f64 {
    0.5 + 0.2 * u
}

fn class_amplitudes(seed_value: u64) -> [[f64; 3]; MaterialClass::COUNT] {
    let mut rng = seed::derived_rng(seed_value, &[0]);
    let mut out: Vec<[f64; 3]> = Vec::with_capacity(MaterialClass::COUNT);
    while out.len() < MaterialClass::COUNT {
        let cand: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        let far_enough = out.iter().all(|prev| {
            prev.iter()
                .zip(&cand)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                >= MIN_CLASS_SEPARATION
        });
        if far_enough {
            out.push(cand);
        }
    }
    std::array::from_fn(|i| out[i])
}

struct Perturbation {
    amplitude: [f64; PERTURBATION_TERMS],
    phase: [f64; PERTURBATION_TERMS],
}

impl Perturbation {
    fn draw(rng: &mut seed::Rng) -> Self {
        let mut amplitude = [0.0; PERTURBATION_TERMS];
        let mut phase = [0.0; PERTURBATION_TERMS];
        for j in 0..PERTURBATION_TERMS {
            let z: f64 = StandardNormal.sample(rng);
            amplitude[j] = z / (j + 1) as f64;
            phase[j] = rng.random_range(0.0..std::f64::consts::TAU);
        }
        Perturbation { amplitude, phase }
    }

    fn eval(&self, u: f64) -> f64 {
        (0..PERTURBATION_TERMS)
            .map(|j| self.amplitude[j] * (std::f64::consts::PI * (j + 1) as f64 * u + self.phase[j]).cos())
            .sum()
    }
}

/// Generates a labelled corpus. Deterministic in `(config, seed)`.
pub fn synth_corpus(config: &SynthConfig, seed_value: u64) -> Result<Corpus> {
    config.validate()?;
    let amplitudes = class_amplitudes(seed_value);

    let mut objects = Vec::new();
    let mut samples = Vec::new();
    let grids: Vec<(SensorKind, std::sync::Arc<[f64]>)> =
        config.sensors.iter().map(|&s| (s, s.default_grid().into())).collect();

    for material in MaterialClass::ALL {
        for k in 0..config.objects_per_material {
            let object_id = format!("{}_{:02}", material.name(), k + 1);
            let obj_code = (material.code() * config.objects_per_material + k) as u64;
            let mut obj_rng = seed::derived_rng(seed_value, &[1, obj_code]);
            let perturbation = Perturbation::draw(&mut obj_rng);

            for (sensor, grid) in &grids {
                let n = grid.len();
                let clean: Vec<f64> = (0..n)
                    .map(|i| {
                        let u = i as f64 / (n - 1) as f64;
                        let class: f64 = BUMP_CENTERS
                            .iter()
                            .zip(&amplitudes[material.code()])
                            .map(|(&c, &a)| a * bump(u, c))
                            .sum();
                        baseline(u) + config.class_scale * class + config.object_scale * perturbation.eval(u)
                    })
                    .collect();

                for idx in 0..config.samples_per_object {
                    let mut rng = seed::derived_rng(seed_value, &[2, *sensor as u64, obj_code, idx as u64]);
                    let (lo, hi) = config.gain_range;
                    let gain = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                    let intensities = clean
                        .iter()
                        .map(|&c| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (gain * c + config.noise_scale * z).max(0.0)
                        })
                        .collect();
                    samples.push(SpectralSample {
                        object_id: object_id.clone(),
                        sensor: *sensor,
                        sample_index: idx as u32,
                        wavelengths: grid.clone(),
                        intensities,
                    });
                }
            }
            objects.push(ObjectRecord {
                object_id,
                display_name: format!("synthetic {} {}", material.name(), k + 1),
                material,
            });
        }
    }
    Ok(Corpus::new(objects, samples, format!("synthetic seed={seed_value}")))
}

/// Accuracy of a nearest-class-centroid classifier on preprocessed
/// features. Within every object, samples at even positions (canonical
/// order) fit the centroids and samples at odd positions are scored; an
/// object with a single sample is used for both.
pub fn centroid_oracle_accuracy(corpus: &Corpus, sensor: SensorKind, filter: &FilterSpec) -> Result<f64> {
    let by_object = corpus.samples_by_object(sensor);
    if by_object.is_empty() {
        return Err(Error::InvalidData(format!("no {sensor} samples")));
    }
    let dim = sensor.expected_dim();
    let mut sums = vec![vec![0.0; dim]; MaterialClass::COUNT];
    let mut counts = [0usize; MaterialClass::COUNT];
    let mut tests = Vec::new();
    for (object_id, ids) in &by_object {
        let material = corpus
            .material_of(object_id)
            .ok_or_else(|| Error::UnknownObject(object_id.to_string()))?;
        for (pos, &id) in ids.iter().enumerate() {
            let features = preprocess_sample(&corpus.samples()[id], filter)?.values;
            if pos % 2 == 0 {
                for (s, v) in sums[material.code()].iter_mut().zip(&features) {
                    *s += v;
                }
                counts[material.code()] += 1;
            }
            if pos % 2 == 1 || ids.len() == 1 {
                tests.push((material, features));
            }
        }
    }
    let centroids: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    let correct = tests
        .iter()
        .filter(|(material, x)| {
            let mut best = (f64::INFINITY, 0usize);
            for (c, centroid) in centroids.iter().enumerate() {
                if let Some(centroid) = centroid {
                    let d: f64 = centroid.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best.0 {
                        best = (d, c);
                    }
                }
            }
            best.1 == material.code()
        })
        .count();
    Ok(correct as f64 / tests.len() as f64)
}
