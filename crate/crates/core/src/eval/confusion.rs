use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::numfmt::fmt_sig9;
use crate::spectra::MaterialClass;

/// Counts of predictions (columns: the five materials) per row label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub row_labels: Vec<String>,
    /// Material the row belongs to (for object rows, the object's material).
    pub row_materials: Vec<MaterialClass>,
    pub counts: Vec<[u64; MaterialClass::COUNT]>,
}

impl ConfusionMatrix {
    pub fn materials() -> Self {
        ConfusionMatrix {
            row_labels: MaterialClass::ALL.iter().map(|m| m.name().to_string()).collect(),
            row_materials: MaterialClass::ALL.to_vec(),
            counts: vec![[0; MaterialClass::COUNT]; MaterialClass::COUNT],
        }
    }

    pub fn with_rows(rows: impl IntoIterator<Item = (String, MaterialClass)>) -> Self {
        let (row_labels, row_materials): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let counts = vec![[0; MaterialClass::COUNT]; row_labels.len()];
        ConfusionMatrix {
            row_labels,
            row_materials,
            counts,
        }
    }

    pub fn record(&mut self, row: usize, predicted: usize) {
        self.counts[row][predicted] += 1;
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.counts.len()).map(|r| self.row_total(r)).sum()
    }

    /// Samples whose prediction matches the row's material.
    pub fn correct(&self) -> u64 {
        self.counts
            .iter()
            .zip(&self.row_materials)
            .map(|(row, m)| row[m.code()])
            .sum()
    }

    pub fn row_accuracy(&self, row: usize) -> Option<f64> {
        let total = self.row_total(row);
        (total > 0).then(|| self.counts[row][self.row_materials[row].code()] as f64 / total as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// `label,material,metal,plastic,wood,paper,fabric,total,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,material");
        for m in MaterialClass::ALL {
            let _ = write!(out, ",{m}");
        }
        out.push_str(",total,accuracy\n");
        for (r, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{},{}", self.row_labels[r], self.row_materials[r]);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            let acc = self.row_accuracy(r).map(fmt_sig9).unwrap_or_default();
            let _ = writeln!(out, ",{},{acc}", self.row_total(r));
        }
        out
    }
}
