//! Butterworth low-pass design and zero-phase filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 12;

/// Low-pass Butterworth parameters. `cutoff` is a fraction of Nyquist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec { order: 5, cutoff: 0.1 }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.order) {
            return Err(Error::InvalidConfig(format!(
                "filter order {} outside 1..={MAX_ORDER}",
                self.order
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "filter cutoff {} outside (0, 1)",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// Transfer function `B(z)/A(z)` in powers of `z^-1`, with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirCoefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl IirCoefficients {
    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    /// Complex response at `freq`, a fraction of Nyquist (`1.0` is Nyquist).
    pub fn response(&self, freq: f64) -> Complex64 {
        let w = PI * freq;
        let eval = |c: &[f64]| -> Complex64 {
            c.iter()
                .enumerate()
                .map(|(k, &ck)| Complex64::from_polar(ck, -w * k as f64))
                .sum()
        };
        eval(&self.b) / eval(&self.a)
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Roots of `A`, found numerically (Durand–Kerner) from the coefficients.
    pub fn poles(&self) -> Vec<Complex64> {
        polynomial_roots(&self.a)
    }

    /// Steady-state direct-form-II-transposed state for a unit step input.
    fn step_state(&self) -> Vec<f64> {
        let n = self.order();
        let g = self.dc_gain();
        let mut zi = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc += self.b[i + 1] - self.a[i + 1] * g;
            zi[i] = acc;
        }
        zi
    }

    /// Single causal pass, starting from `state` (consumed).
    fn lfilter(&self, x: &[f64], mut state: Vec<f64>) -> Vec<f64> {
        let n = self.order();
        let mut y = Vec::with_capacity(x.len());
        for &xi in x {
            let yi = self.b[0] * xi + state.first().copied().unwrap_or(0.0);
            for k in 0..n {
                let next = if k + 1 < n { state[k + 1] } else { 0.0 };
                state[k] = self.b[k + 1] * xi - self.a[k + 1] * yi + next;
            }
            y.push(yi);
        }
        y
    }

    /// Causal pass whose initial state is the step steady state scaled by
    /// the first input value.
    fn lfilter_steady(&self, x: &[f64]) -> Vec<f64> {
        let x0 = x.first().copied().unwrap_or(0.0);
        let state = self.step_state().into_iter().map(|z| z * x0).collect();
        self.lfilter(x, state)
    }
}

fn reversed(x: &[f64]) -> Vec<f64> {
    x.iter().rev().copied().collect()
}

/// Designs a digital Butterworth low-pass: analog prototype poles, cutoff
/// pre-warping, bilinear transform, and a gain that pins the DC response to 1.
pub fn design_butterworth(spec: &FilterSpec) -> Result<IirCoefficients> {
    spec.validate()?;
    let n = spec.order;
    // Bilinear map s = (z - 1)/(z + 1), so the analog cutoff is tan(πf/2).
    let warped = (PI * spec.cutoff / 2.0).tan();
    let poles: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let s = Complex64::from_polar(warped, theta);
            (Complex64::new(1.0, 0.0) + s) / (Complex64::new(1.0, 0.0) - s)
        })
        .collect();

    let a_complex = poly_from_roots(&poles);
    let a: Vec<f64> = a_complex.iter().map(|c| c.re).collect();
    // All n zeros sit at z = -1.
    let binomial = poly_from_roots(&vec![Complex64::new(-1.0, 0.0); n]);
    let gain = a.iter().sum::<f64>() / 2f64.powi(n as i32);
    let b: Vec<f64> = binomial.iter().map(|c| gain * c.re).collect();
    let coeffs = IirCoefficients { b, a };
    // High orders at low cutoffs round to an unstable denominator.
    let radius = coeffs.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    if radius.is_nan() || radius >= 1.0 - 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "order {n} at cutoff {} is numerically unstable (pole radius {radius:.6}); lower the order or raise the cutoff",
            spec.cutoff
        )));
    }
    Ok(coeffs)
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let lead = coeffs[0];
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c / lead, 0.0)).collect();
    let n = monic.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| monic.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..1000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let zi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, &zj)| acc * (zi - zj));
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Zero-phase forward-backward filtering.
///
/// The signal is extended at each end by an odd reflection of `3 * order`
/// samples. Each causal pass starts from the step steady state scaled by its
/// first input. The result is the mean of the forward-then-backward and
/// backward-then-forward cascades, which makes the operator commute exactly
/// with time reversal; away from the edges both cascades agree. Filtering
/// runs on the deviation from the mean of the two end samples, so a
/// constant signal comes back bit-for-bit.
pub fn filtfilt(coeffs: &IirCoefficients, signal: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * coeffs.order();
    if signal.len() <= pad {
        return Err(Error::InvalidSignal(format!(
            "signal of length {} too short for padding of {pad}",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSignal("non-finite value".into()));
    }
    let n = signal.len();
    let offset = 0.5 * (signal[0] + signal[n - 1]);
    let signal: Vec<f64> = signal.iter().map(|v| v - offset).collect();
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(&signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let forward_backward = {
        let y = coeffs.lfilter_steady(&ext);
        reversed(&coeffs.lfilter_steady(&reversed(&y)))
    };
    let backward_forward = {
        let y = reversed(&coeffs.lfilter_steady(&reversed(&ext)));
        coeffs.lfilter_steady(&y)
    };
    Ok(forward_backward[pad..pad + n]
        .iter()
        .zip(&backward_forward[pad..pad + n])
        .map(|(p, q)| offset + 0.5 * (p + q))
        .collect())
}
