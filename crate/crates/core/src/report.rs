//! SVG figures and their CSV companions.
//!
//! Three figure kinds: mean ± SD spectrum bands, confusion heatmaps with
//! per-cell row percentages, and the training-object-count sweep curve.

use std::fmt::Write as _;

use crate::eval::{ConfusionMatrix, SpectrumSummary, SweepPoint};
use crate::numfmt::fmt_sig9;
use crate::spectra::MaterialClass;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Linear map from data range to pixel range; a degenerate range maps to
/// the middle.
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        if self.hi == self.lo {
            return (self.px_lo + self.px_hi) / 2.0;
        }
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn frame(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x.px_lo,
        y.px_hi,
        x.px_hi - x.px_lo,
        y.px_lo - y.px_hi
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x.px_lo + x.px_hi) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y.px_lo + y.px_hi) / 2.0,
        (y.px_lo + y.px_hi) / 2.0,
        escape(y_label)
    );
    for (v, px) in [(x.lo, x.px_lo), (x.hi, x.px_hi)] {
        let _ = writeln!(
            out,
            r#"<text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            y.px_lo + 15.0,
            fmt_sig9(round3(v))
        );
    }
    for (v, px) in [(y.lo, y.px_lo), (y.hi, y.px_hi)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{px}" text-anchor="end">{}</text>"#,
            x.px_lo - 4.0,
            fmt_sig9(round3(v))
        );
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Mean curve per object with a shaded band of ± one standard deviation.
pub fn spectrum_svg(summaries: &[SpectrumSummary]) -> String {
    let mut out = String::new();
    let title = summaries
        .first()
        .map(|s| format!("{} spectra, mean ± SD (normalized)", s.sensor))
        .unwrap_or_else(|| "spectra".to_string());
    header(&mut out, WIDTH, HEIGHT, &title);
    let (lo, hi) = summaries
        .iter()
        .flat_map(|s| s.wavelengths.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(w), b.max(w)));
    let x = Axis {
        lo: if lo.is_finite() { lo } else { 0.0 },
        hi: if hi.is_finite() { hi } else { 1.0 },
        px_lo: MARGIN,
        px_hi: WIDTH - MARGIN,
    };
    let y = Axis {
        lo: 0.0,
        hi: 1.0,
        px_lo: HEIGHT - MARGIN,
        px_hi: MARGIN,
    };
    frame(&mut out, &x, &y, "wavelength (nm)", "normalized intensity");
    for (i, s) in summaries.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = s
            .wavelengths
            .iter()
            .zip(s.mean.iter().zip(&s.sd))
            .map(|(&w, (&m, &sd))| format!("{},{}", coord(x.map(w)), coord(y.map(m + sd))))
            .collect();
        let lower: Vec<String> = s
            .wavelengths
            .iter()
            .zip(s.mean.iter().zip(&s.sd))
            .rev()
            .map(|(&w, (&m, &sd))| format!("{},{}", coord(x.map(w)), coord(y.map(m - sd))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon class="band" data-object="{}" points="{} {}" fill="{color}" fill-opacity="0.25" stroke="none"/>"#,
            escape(&s.object_id),
            upper.join(" "),
            lower.join(" ")
        );
        let mean: Vec<String> = s
            .wavelengths
            .iter()
            .zip(&s.mean)
            .map(|(&w, &m)| format!("{},{}", coord(x.map(w)), coord(y.map(m))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="mean" data-object="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            escape(&s.object_id),
            mean.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{} (SD {:.3})</text>"#,
            x.px_lo + 8.0,
            y.px_hi + 16.0 * (i + 1) as f64,
            escape(&s.display_name),
            s.mean_sd
        );
    }
    out.push_str("</svg>\n");
    out
}

/// `object_id,wavelength,mean,sd` rows.
pub fn spectrum_csv(summaries: &[SpectrumSummary]) -> String {
    let mut out = String::from("object_id,wavelength,mean,sd\n");
    for s in summaries {
        for ((&w, &m), &sd) in s.wavelengths.iter().zip(&s.mean).zip(&s.sd) {
            let _ = writeln!(out, "{},{},{},{}", s.object_id, fmt_sig9(w), fmt_sig9(m), fmt_sig9(sd));
        }
    }
    out
}

/// Row-normalised percentages rounded to one decimal; empty rows give zeros.
pub fn row_percentages(matrix: &ConfusionMatrix) -> Vec<[f64; MaterialClass::COUNT]> {
    (0..matrix.counts.len())
        .map(|r| {
            let total = matrix.row_total(r);
            std::array::from_fn(|c| {
                if total == 0 {
                    0.0
                } else {
                    (1000.0 * matrix.counts[r][c] as f64 / total as f64).round() / 10.0
                }
            })
        })
        .collect()
}

/// Heatmap with one cell per (row label, predicted material); each cell
/// shows its share of the row.
pub fn confusion_svg(matrix: &ConfusionMatrix, title: &str) -> String {
    let cell = 48.0;
    let label_w = 140.0;
    let top = 60.0;
    let width = label_w + cell * MaterialClass::COUNT as f64 + 20.0;
    let height = top + cell * matrix.counts.len() as f64 + 20.0;
    let mut out = String::new();
    header(&mut out, width, height, title);
    for (c, m) in MaterialClass::ALL.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{m}</text>"#,
            label_w + cell * (c as f64 + 0.5),
            top - 8.0
        );
    }
    let percentages = row_percentages(matrix);
    for (r, row) in percentages.iter().enumerate() {
        let y = top + cell * r as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            label_w - 6.0,
            y + cell / 2.0 + 4.0,
            escape(&matrix.row_labels[r])
        );
        for (c, &pct) in row.iter().enumerate() {
            let x = label_w + cell * c as f64;
            let shade = (255.0 - 2.2 * pct).round().clamp(35.0, 255.0) as u8;
            let text_color = if pct > 55.0 { "white" } else { "black" };
            let _ = writeln!(
                out,
                r#"<rect class="cell" data-row="{r}" data-col="{c}" data-count="{}" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/>"#,
                matrix.counts[r][c]
            );
            let _ = writeln!(
                out,
                r#"<text class="pct" x="{}" y="{}" text-anchor="middle" fill="{text_color}">{pct:.1}%</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Mean accuracy against training objects per material, one vertex per
/// point in input order.
pub fn sweep_svg(points: &[SweepPoint], title: &str) -> String {
    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, title);
    let x = Axis {
        lo: 0.0,
        hi: points.len().saturating_sub(1) as f64,
        px_lo: MARGIN,
        px_hi: WIDTH - MARGIN,
    };
    let y = Axis {
        lo: 0.0,
        hi: 1.0,
        px_lo: HEIGHT - MARGIN,
        px_hi: MARGIN,
    };
    frame(&mut out, &x, &y, "training objects per material", "accuracy");
    let vertices: Vec<String> = points
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{},{}", coord(x.map(i as f64)), coord(y.map(p.mean_accuracy))))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="sweep" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
        vertices.join(" "),
        PALETTE[0]
    );
    for (i, p) in points.iter().enumerate() {
        let px = x.map(i as f64);
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="3" fill="{}"/>"#,
            coord(px),
            coord(y.map(p.mean_accuracy)),
            PALETTE[0]
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            coord(px),
            y.px_lo + 28.0,
            p.n
        );
    }
    out.push_str("</svg>\n");
    out
}

/// `n,mean_accuracy,overall_accuracy` rows.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("n,mean_accuracy,overall_accuracy\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{}",
            p.n,
            fmt_sig9(p.mean_accuracy),
            fmt_sig9(p.overall_accuracy)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ObjectCount;
    use crate::spectra::SensorKind;

    #[test]
    fn percentages_sum_to_hundred() {
        let mut m = ConfusionMatrix::materials();
        for r in 0..5 {
            for i in 0..1000u64 {
                m.record(r, ((i * 7 + r as u64) % 11 % 5) as usize);
            }
        }
        for row in row_percentages(&m) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 100.0).abs() <= 0.25, "{sum}");
        }
        let svg = confusion_svg(&m, "test");
        assert_eq!(svg.matches(r#"class="cell""#).count(), 25);
        assert_eq!(svg.matches(r#"class="pct""#).count(), 25);
    }

    #[test]
    fn sweep_polyline_keeps_order() {
        let points: Vec<SweepPoint> = (1..=9)
            .map(|n| SweepPoint {
                n: ObjectCount::Count(n),
                mean_accuracy: 0.5 + 0.04 * n as f64,
                overall_accuracy: 0.5,
            })
            .collect();
        let svg = sweep_svg(&points, "sweep");
        let line = svg.lines().find(|l| l.contains(r#"class="sweep""#)).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let xs: Vec<f64> = pts
            .split(' ')
            .map(|p| p.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(xs.len(), 9);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_variance_band_is_flat() {
        let s = SpectrumSummary {
            object_id: "a".into(),
            display_name: "A".into(),
            sensor: SensorKind::Nir,
            sample_count: 2,
            wavelengths: vec![740.0, 741.0, 742.0],
            mean: vec![0.0, 0.5, 1.0],
            sd: vec![0.0; 3],
            mean_sd: 0.0,
        };
        let svg = spectrum_svg(std::slice::from_ref(&s));
        let band = svg.lines().find(|l| l.contains(r#"class="band""#)).unwrap();
        let pts: Vec<&str> = band
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap()
            .split(' ')
            .collect();
        // Upper edge forward then lower edge reversed: vertex i matches 5-i.
        assert_eq!(pts.len(), 6);
        for i in 0..3 {
            assert_eq!(pts[i], pts[5 - i]);
        }
    }
}
