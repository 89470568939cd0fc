use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use specmat::filter::{design_butterworth, filtfilt, FilterSpec};
use specmat::preprocess::{difference_quotient, normalize_unit, preprocess_sample};
use specmat::{SensorKind, SpectralSample};

fn sample(sensor: SensorKind, intensities: Vec<f64>) -> SpectralSample {
    SpectralSample {
        object_id: "probe".into(),
        sensor,
        sample_index: 0,
        wavelengths: Arc::from(sensor.default_grid()),
        intensities,
    }
}

#[test]
fn impulse_response_is_symmetric() {
    let coeffs = design_butterworth(&FilterSpec::default()).unwrap();
    let mut x = vec![0.0; 201];
    x[100] = 1.0;
    let y = filtfilt(&coeffs, &x).unwrap();
    let worst = (0..=100).map(|i| (y[100 - i] - y[100 + i]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
    // The smoothing kernel peaks at the impulse.
    assert!(y.iter().all(|&v| v <= y[100]));
}

#[test]
fn sinusoid_at_cutoff_is_halved() {
    // Forward-backward squares the single-pass magnitude: 0.7071² = 0.5.
    let coeffs = design_butterworth(&FilterSpec::default()).unwrap();
    let n = 4000;
    let x: Vec<f64> = (0..n).map(|i| (PI * 0.1 * i as f64).sin()).collect();
    let y = filtfilt(&coeffs, &x).unwrap();
    let middle = 1000..3000;
    let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
    let ratio = rms(&y[middle.clone()]) / rms(&x[middle]);
    assert!((ratio - 0.5).abs() < 0.5 * 0.02, "{ratio}");
}

#[test]
fn pure_dc_visible_sample_maps_to_half() {
    let fv = preprocess_sample(&sample(SensorKind::Visible, vec![0.37; 288]), &FilterSpec::default()).unwrap();
    assert!(fv.values.iter().all(|&v| v == 0.5));
    let fv = preprocess_sample(&sample(SensorKind::Nir, vec![2.0; 331]), &FilterSpec::default()).unwrap();
    assert!(fv.values.iter().all(|&v| v == 0.5));
}

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filtfilt_commutes_with_reversal(x in signal(120), order in 1usize..=8, cutoff in 0.05f64..0.9) {
        let coeffs = design_butterworth(&FilterSpec { order, cutoff }).unwrap();
        let forward = filtfilt(&coeffs, &x).unwrap();
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let backward = filtfilt(&coeffs, &rev).unwrap();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn designed_poles_are_stable(order in 1usize..=12, cutoff in 0.01f64..0.99) {
        match design_butterworth(&FilterSpec { order, cutoff }) {
            Ok(coeffs) => {
                for p in coeffs.poles() {
                    prop_assert!(p.norm() < 1.0 - 1e-9);
                }
            }
            // Only ill-conditioned high orders may be refused.
            Err(e) => prop_assert!(order > 8, "order {} cutoff {}: {}", order, cutoff, e),
        }
    }

    #[test]
    fn normalize_spans_unit_interval(x in prop::collection::vec(-1e3f64..1e3, 2..50)) {
        let y = normalize_unit(&x).unwrap();
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            prop_assert_eq!(y.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(y.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        } else {
            prop_assert!(y.iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn preprocess_output_in_unit_box(
        visible in prop::collection::vec(0.0f64..5.0, 288),
        nir in prop::collection::vec(0.0f64..5.0, 331),
    ) {
        for (sensor, values) in [(SensorKind::Visible, visible), (SensorKind::Nir, nir)] {
            let fv = preprocess_sample(&sample(sensor, values), &FilterSpec::default()).unwrap();
            prop_assert_eq!(fv.values.len(), sensor.expected_dim());
            prop_assert!(fv.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn preprocess_ignores_gain(
        values in prop::collection::vec(0.1f64..5.0, 288),
        alpha in 0.01f64..100.0,
        visible in any::<bool>(),
    ) {
        let sensor = if visible { SensorKind::Visible } else { SensorKind::Nir };
        let mut values = values;
        values.resize(sensor.expected_dim(), 1.0);
        let base = preprocess_sample(&sample(sensor, values.clone()), &FilterSpec::default()).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * alpha).collect();
        let other = preprocess_sample(&sample(sensor, scaled), &FilterSpec::default()).unwrap();
        for (a, b) in base.values.iter().zip(&other.values) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn difference_of_line_is_slope(slope in -5.0f64..5.0, offset in -5.0f64..5.0) {
        let w: Vec<f64> = SensorKind::Visible.default_grid().to_vec();
        let x: Vec<f64> = w.iter().map(|v| slope * v + offset).collect();
        let d = difference_quotient(&x, &w).unwrap();
        prop_assert!(d.iter().all(|v| (v - slope).abs() < 1e-9));
    }
}
