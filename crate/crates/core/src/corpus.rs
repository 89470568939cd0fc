//! Corpus model, CSV ingestion and validation.
//!
//! On disk a corpus is a directory holding
//!
//! * `objects.csv` with header `object_id,display_name,material`,
//! * `samples.csv` with header `object_id,sensor,sample_index,v0,...` where
//!   each row carries exactly the sensor's dimension of values (the header
//!   names as many `v` columns as the widest sensor present),
//! * optionally `wavelengths_<sensor>.csv`, a single row of nm values; the
//!   sensor's default grid is used when it is absent.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt_sig9;
use crate::spectra::{MaterialClass, ObjectRecord, SensorKind, SpectralSample};

pub const OBJECTS_FILE: &str = "objects.csv";
pub const SAMPLES_FILE: &str = "samples.csv";

pub fn wavelengths_file(sensor: SensorKind) -> String {
    format!("wavelengths_{}.csv", sensor.name())
}

/// A labelled collection of spectral samples. Immutable once built.
#[derive(Debug, Clone)]
pub struct Corpus {
    objects: Vec<ObjectRecord>,
    samples: Vec<SpectralSample>,
    provenance: String,
    object_index: HashMap<String, usize>,
    validation: Option<ValidationReport>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects && self.samples == other.samples && self.provenance == other.provenance
    }
}

impl Corpus {
    /// Builds a corpus in canonical order: objects by id, samples by
    /// (sensor, object id, sample index). No validation happens here.
    pub fn new(
        mut objects: Vec<ObjectRecord>,
        mut samples: Vec<SpectralSample>,
        provenance: impl Into<String>,
    ) -> Self {
        objects.sort_by(|a, b| a.object_id.cmp(&b.object_id));
        samples.sort_by(|a, b| (a.sensor, &a.object_id, a.sample_index).cmp(&(b.sensor, &b.object_id, b.sample_index)));
        let object_index = objects
            .iter()
            .enumerate()
            .map(|(i, o)| (o.object_id.clone(), i))
            .collect();
        Corpus {
            objects,
            samples,
            provenance: provenance.into(),
            object_index,
            validation: None,
        }
    }

    pub fn objects(&self) -> &[ObjectRecord] {
        &self.objects
    }

    pub fn samples(&self) -> &[SpectralSample] {
        &self.samples
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Summary attached by [`load_corpus`].
    pub fn validation(&self) -> Option<&ValidationReport> {
        self.validation.as_ref()
    }

    pub fn object(&self, object_id: &str) -> Option<&ObjectRecord> {
        self.object_index.get(object_id).map(|&i| &self.objects[i])
    }

    /// Position of an object in [`Corpus::objects`].
    pub fn object_position(&self, object_id: &str) -> Option<usize> {
        self.object_index.get(object_id).copied()
    }

    pub fn material_of(&self, object_id: &str) -> Option<MaterialClass> {
        self.object(object_id).map(|o| o.material)
    }

    /// Label of a sample by its position in [`Corpus::samples`].
    pub fn label(&self, sample_id: usize) -> Option<MaterialClass> {
        self.material_of(&self.samples[sample_id].object_id)
    }

    /// Sample positions for one sensor, in canonical order.
    pub fn sample_ids(&self, sensor: SensorKind) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.sensor == sensor)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sample positions for one sensor grouped by object id (sorted).
    /// Objects with no samples for the sensor are absent.
    pub fn samples_by_object(&self, sensor: SensorKind) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            if s.sensor == sensor {
                map.entry(s.object_id.as_str()).or_default().push(i);
            }
        }
        map
    }

    pub fn count(&self, sensor: SensorKind) -> usize {
        self.samples.iter().filter(|s| s.sensor == sensor).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

/// Outcome of [`validate_corpus`]. Invariant breaks are `violations`;
/// deviations from a balanced, fully populated corpus are `warnings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub object_count: usize,
    pub sensor_totals: BTreeMap<SensorKind, usize>,
    pub objects_per_material: BTreeMap<MaterialClass, usize>,
    pub samples_per_object: BTreeMap<String, BTreeMap<SensorKind, usize>>,
    /// Set when every material has the same object count and every object
    /// has the same sample count for every sensor present.
    pub balanced: bool,
    /// The common per-object count for each sensor, when uniform.
    pub uniform_samples_per_object: BTreeMap<SensorKind, usize>,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "objects: {}", self.object_count);
        for (sensor, n) in &self.sensor_totals {
            let per = self
                .uniform_samples_per_object
                .get(sensor)
                .map(|n| n.to_string())
                .unwrap_or_else(|| "uneven".to_string());
            let _ = writeln!(out, "{sensor}: {n} samples ({per} per object)");
        }
        for (m, n) in &self.objects_per_material {
            let _ = writeln!(out, "  {m}: {n} objects");
        }
        let _ = writeln!(out, "balanced: {}", self.balanced);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        for v in &self.violations {
            let _ = writeln!(out, "violation: {}: {}", v.subject, v.message);
        }
        out
    }
}

/// Checks every corpus invariant and tallies counts. Never fails.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    let mut seen_ids = HashSet::new();
    for o in &corpus.objects {
        if !seen_ids.insert(o.object_id.as_str()) {
            violations.push(Violation {
                subject: o.object_id.clone(),
                message: "duplicate object id".into(),
            });
        }
    }

    let mut objects_per_material: BTreeMap<MaterialClass, usize> = MaterialClass::ALL.iter().map(|&m| (m, 0)).collect();
    for o in &corpus.objects {
        *objects_per_material.entry(o.material).or_default() += 1;
    }

    let mut samples_per_object: BTreeMap<String, BTreeMap<SensorKind, usize>> = corpus
        .objects
        .iter()
        .map(|o| (o.object_id.clone(), BTreeMap::new()))
        .collect();
    let mut sensor_totals: BTreeMap<SensorKind, usize> = BTreeMap::new();
    let mut keys = HashSet::new();
    for s in &corpus.samples {
        let subject = format!("{}/{}/{}", s.object_id, s.sensor, s.sample_index);
        *sensor_totals.entry(s.sensor).or_default() += 1;
        match samples_per_object.get_mut(&s.object_id) {
            Some(counts) => *counts.entry(s.sensor).or_default() += 1,
            None => violations.push(Violation {
                subject: subject.clone(),
                message: "object id not in object table".into(),
            }),
        }
        if !keys.insert((s.object_id.as_str(), s.sensor, s.sample_index)) {
            violations.push(Violation {
                subject: subject.clone(),
                message: "duplicate sample".into(),
            });
        }
        for message in s.defects() {
            violations.push(Violation {
                subject: subject.clone(),
                message,
            });
        }
    }

    if corpus.samples.is_empty() {
        warnings.push("corpus has no samples".to_string());
    }

    let max_objects = objects_per_material.values().copied().max().unwrap_or(0);
    let mut balanced = true;
    for (m, &n) in &objects_per_material {
        if n != max_objects {
            balanced = false;
            warnings.push(format!("material {m} has {n} objects, others up to {max_objects}"));
        }
    }

    let mut uniform_samples_per_object = BTreeMap::new();
    for &sensor in sensor_totals.keys() {
        let counts: Vec<(&String, usize)> = samples_per_object
            .iter()
            .map(|(id, c)| (id, c.get(&sensor).copied().unwrap_or(0)))
            .collect();
        let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
        let mut uniform = true;
        for (id, n) in counts {
            if n != max {
                uniform = false;
                warnings.push(format!("object {id} has {n} {sensor} samples, others up to {max}"));
            }
        }
        if uniform {
            uniform_samples_per_object.insert(sensor, max);
        } else {
            balanced = false;
        }
    }

    ValidationReport {
        object_count: corpus.objects.len(),
        sensor_totals,
        objects_per_material,
        samples_per_object,
        balanced,
        uniform_samples_per_object,
        violations,
        warnings,
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_number(path: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| malformed(path, line, format!("not a number: `{field}`")))
}

fn read_objects(path: &Path) -> Result<Vec<ObjectRecord>> {
    let text = read_file(path)?;
    let mut rdr = csv_reader(&text);
    let header = rdr.headers().map_err(|e| malformed(path, 1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["object_id", "display_name", "material"] {
        return Err(malformed(path, 1, "expected header object_id,display_name,material"));
    }
    let mut objects = Vec::new();
    let mut ids = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(path, 0, e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(malformed(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let object_id = rec[0].to_string();
        if object_id.is_empty() {
            return Err(malformed(path, line, "empty object_id"));
        }
        if !ids.insert(object_id.clone()) {
            return Err(malformed(path, line, format!("duplicate object id `{object_id}`")));
        }
        let material: MaterialClass = rec[2].parse()?;
        objects.push(ObjectRecord {
            object_id,
            display_name: rec[1].to_string(),
            material,
        });
    }
    Ok(objects)
}

fn read_grid(dir: &Path, sensor: SensorKind) -> Result<Arc<[f64]>> {
    let path = dir.join(wavelengths_file(sensor));
    if !path.exists() {
        return Ok(sensor.default_grid().into());
    }
    let text = read_file(&path)?;
    let line = text.lines().next().unwrap_or("");
    let grid = line
        .split(',')
        .map(|f| parse_number(&path, 1, f))
        .collect::<Result<Vec<f64>>>()?;
    if grid.len() != sensor.expected_dim() {
        return Err(Error::DimensionMismatch {
            expected: sensor.expected_dim(),
            actual: grid.len(),
        });
    }
    Ok(grid.into())
}

fn read_samples(path: &Path, grids: &BTreeMap<SensorKind, Arc<[f64]>>) -> Result<Vec<SpectralSample>> {
    let text = read_file(path)?;
    let mut rdr = csv_reader(&text);
    let header = rdr.headers().map_err(|e| malformed(path, 1, e.to_string()))?.clone();
    let fixed = ["object_id", "sensor", "sample_index"];
    if header.len() < 3 || header.iter().take(3).ne(fixed) {
        return Err(malformed(
            path,
            1,
            "expected header object_id,sensor,sample_index,v0,...",
        ));
    }
    for (i, name) in header.iter().skip(3).enumerate() {
        if name != format!("v{i}") {
            return Err(malformed(path, 1, format!("expected column v{i}, found `{name}`")));
        }
    }

    let mut samples = Vec::new();
    let mut keys = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(path, 0, e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() < 3 {
            return Err(malformed(path, line, "missing fields"));
        }
        let object_id = rec[0].to_string();
        let sensor: SensorKind = rec[1]
            .parse()
            .map_err(|_| malformed(path, line, format!("unknown sensor `{}`", &rec[1])))?;
        let sample_index: u32 = rec[2]
            .trim()
            .parse()
            .map_err(|_| malformed(path, line, format!("bad sample_index `{}`", &rec[2])))?;
        let values = rec
            .iter()
            .skip(3)
            .map(|f| parse_number(path, line, f))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != sensor.expected_dim() {
            return Err(malformed(
                path,
                line,
                format!(
                    "dimension mismatch: {sensor} expects {} values, found {}",
                    sensor.expected_dim(),
                    values.len()
                ),
            ));
        }
        if !keys.insert((object_id.clone(), sensor, sample_index)) {
            return Err(Error::DuplicateSample {
                object_id,
                sensor: sensor.to_string(),
                sample_index,
            });
        }
        samples.push(SpectralSample {
            object_id,
            sensor,
            sample_index,
            wavelengths: grids[&sensor].clone(),
            intensities: values,
        });
    }
    Ok(samples)
}

/// Resolves the corpus directory from either the directory itself or a path
/// to one of its manifest files.
fn corpus_dir(path: &Path) -> Result<PathBuf> {
    if path.is_dir() {
        Ok(path.to_path_buf())
    } else if path.is_file() {
        Ok(path.parent().unwrap_or(Path::new(".")).to_path_buf())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus not found"),
        ))
    }
}

/// Reads and validates a corpus directory. The validation summary is
/// attached to the returned corpus; deviations from a balanced corpus are
/// reported there, not raised.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let dir = corpus_dir(path.as_ref())?;
    let objects = read_objects(&dir.join(OBJECTS_FILE))?;
    let grids = SensorKind::ALL
        .iter()
        .map(|&s| Ok((s, read_grid(&dir, s)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let samples = read_samples(&dir.join(SAMPLES_FILE), &grids)?;
    let mut corpus = Corpus::new(objects, samples, dir.display().to_string());
    let report = validate_corpus(&corpus);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    corpus.validation = Some(report);
    Ok(corpus)
}

/// Writes the canonical on-disk form of `corpus` into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut objects = String::from("object_id,display_name,material\n");
    for o in &corpus.objects {
        let _ = writeln!(
            objects,
            "{},{},{}",
            csv_field(&o.object_id),
            csv_field(&o.display_name),
            o.material
        );
    }
    write_file(&dir.join(OBJECTS_FILE), &objects)?;

    let width = corpus
        .samples
        .iter()
        .map(|s| s.sensor.expected_dim())
        .max()
        .unwrap_or(0);
    let mut samples = String::from("object_id,sensor,sample_index");
    for i in 0..width {
        let _ = write!(samples, ",v{i}");
    }
    samples.push('\n');
    for s in &corpus.samples {
        let _ = write!(samples, "{},{},{}", csv_field(&s.object_id), s.sensor, s.sample_index);
        for &v in &s.intensities {
            samples.push(',');
            samples.push_str(&fmt_sig9(v));
        }
        samples.push('\n');
    }
    write_file(&dir.join(SAMPLES_FILE), &samples)?;

    for sensor in SensorKind::ALL {
        let mut grids = corpus
            .samples
            .iter()
            .filter(|s| s.sensor == sensor)
            .map(|s| &s.wavelengths);
        let Some(first) = grids.next() else { continue };
        if grids.any(|g| g != first) {
            return Err(Error::InvalidData(format!(
                "{sensor} samples do not share one wavelength grid"
            )));
        }
        let path = dir.join(wavelengths_file(sensor));
        if **first == *sensor.default_grid() {
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        } else {
            let row: Vec<String> = first.iter().map(|&w| fmt_sig9(w)).collect();
            write_file(&path, &(row.join(",") + "\n"))?;
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: &str, m: MaterialClass) -> ObjectRecord {
        ObjectRecord {
            object_id: id.into(),
            display_name: format!("{id} name"),
            material: m,
        }
    }

    fn nir_sample(id: &str, idx: u32, value: f64) -> SpectralSample {
        SpectralSample {
            object_id: id.into(),
            sensor: SensorKind::Nir,
            sample_index: idx,
            wavelengths: SensorKind::Nir.default_grid().into(),
            intensities: vec![value; 331],
        }
    }

    #[test]
    fn report_flags_short_nir_sample() {
        let mut bad = nir_sample("a", 1, 0.5);
        bad.intensities.pop();
        let c = Corpus::new(
            vec![obj("a", MaterialClass::Metal)],
            vec![nir_sample("a", 0, 0.5), bad],
            "test",
        );
        let r = validate_corpus(&c);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].message.contains("expected 331"));
        assert_eq!(r.violations[0].subject, "a/nir/1");
    }

    #[test]
    fn report_flags_orphans_and_duplicates() {
        let c = Corpus::new(
            vec![obj("a", MaterialClass::Metal)],
            vec![
                nir_sample("a", 0, 0.5),
                nir_sample("a", 0, 0.5),
                nir_sample("zz", 0, 0.5),
            ],
            "test",
        );
        let r = validate_corpus(&c);
        let messages: Vec<&str> = r.violations.iter().map(|v| v.message.as_str()).collect();
        assert!(messages.contains(&"duplicate sample"));
        assert!(messages.contains(&"object id not in object table"));
    }

    #[test]
    fn empty_corpus_warns() {
        let c = Corpus::new(vec![obj("a", MaterialClass::Wood)], vec![], "test");
        let r = validate_corpus(&c);
        assert!(r.is_valid());
        assert!(r.warnings.iter().any(|w| w.contains("no samples")));
    }

    #[test]
    fn csv_field_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
