//! Train/test splits: stratified k-fold, leave-one-object-out, and
//! per-object subsampling of a training split.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::seed;
use crate::spectra::{MaterialClass, SensorKind};

// Seed stream tags.
pub(crate) const STREAM_KFOLD: u64 = 10;
pub(crate) const STREAM_LOOBJ: u64 = 11;
pub(crate) const STREAM_SUBSAMPLE: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Kfold,
    Loobj,
    Sweep,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Kfold => "kfold",
            Protocol::Loobj => "loobj",
            Protocol::Sweep => "sweep",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kfold" => Ok(Protocol::Kfold),
            "loobj" => Ok(Protocol::Loobj),
            "sweep" => Ok(Protocol::Sweep),
            other => Err(Error::InvalidConfig(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Number of training objects per material in leave-one-object-out runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectCount {
    Count(usize),
    /// Every remaining object.
    All,
}

impl fmt::Display for ObjectCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectCount::Count(n) => write!(f, "{n}"),
            ObjectCount::All => f.write_str("all"),
        }
    }
}

impl FromStr for ObjectCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(ObjectCount::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(ObjectCount::Count(n)),
            _ => Err(Error::InvalidConfig(format!(
                "object count must be a positive integer or `all`, got `{s}`"
            ))),
        }
    }
}

impl Serialize for ObjectCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ObjectCount::Count(n) => s.serialize_u64(*n as u64),
            ObjectCount::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for ObjectCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) if n > 0 => Ok(ObjectCount::Count(n)),
            Raw::Int(_) => Err(serde::de::Error::custom("object count must be positive")),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    /// Sample positions in the corpus, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub held_out_object: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub sensor: SensorKind,
    pub seed: u64,
    pub folds: Vec<Fold>,
    pub warnings: Vec<String>,
}

/// Stratified k-fold: every object contributes the same number of randomly
/// chosen samples to every fold. Objects whose sample count is not a
/// multiple of `k` lose their surplus samples (with a warning).
pub fn plan_stratified_kfold(corpus: &Corpus, sensor: SensorKind, k: usize, seed_value: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k = {k}; need at least 2 folds")));
    }
    let by_object = corpus.samples_by_object(sensor);
    if by_object.is_empty() {
        return Err(Error::InvalidData(format!("no {sensor} samples to split")));
    }
    let mut warnings = Vec::new();
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (object_id, ids) in &by_object {
        let position = corpus
            .object_position(object_id)
            .ok_or_else(|| Error::UnknownObject(object_id.to_string()))?;
        let per_fold = ids.len() / k;
        if per_fold == 0 {
            return Err(Error::InvalidData(format!(
                "object {object_id} has {} {sensor} samples, fewer than k = {k}",
                ids.len()
            )));
        }
        if ids.len() % k != 0 {
            warnings.push(format!(
                "object {object_id}: {} samples not divisible by {k}; dropping {}",
                ids.len(),
                ids.len() % k
            ));
        }
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut seed::derived_rng(seed_value, &[STREAM_KFOLD, position as u64]));
        for (f, chunk) in shuffled.chunks_exact(per_fold).take(k).enumerate() {
            tests[f].extend_from_slice(chunk);
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let folds = (0..k)
        .map(|f| {
            let mut test = tests[f].clone();
            test.sort_unstable();
            let mut train: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| tests[g].iter().copied())
                .collect();
            train.sort_unstable();
            Fold {
                index: f,
                train,
                test,
                held_out_object: None,
            }
        })
        .collect();
    Ok(FoldPlan {
        protocol: Protocol::Kfold,
        sensor,
        seed: seed_value,
        folds,
        warnings,
    })
}

/// Objects with samples for `sensor`, grouped by material.
fn objects_by_material<'a>(
    corpus: &'a Corpus,
    by_object: &BTreeMap<&'a str, Vec<usize>>,
) -> Result<BTreeMap<MaterialClass, Vec<&'a str>>> {
    let mut out: BTreeMap<MaterialClass, Vec<&str>> = BTreeMap::new();
    for &object_id in by_object.keys() {
        let m = corpus
            .material_of(object_id)
            .ok_or_else(|| Error::UnknownObject(object_id.to_string()))?;
        out.entry(m).or_default().push(object_id);
    }
    Ok(out)
}

/// One fold per object holding that object's samples out. With
/// `ObjectCount::Count(n)` the training set is `n` randomly chosen objects
/// of every material, never including the held-out one.
pub fn plan_leave_one_object_out(
    corpus: &Corpus,
    sensor: SensorKind,
    n_objects: ObjectCount,
    seed_value: u64,
) -> Result<FoldPlan> {
    let by_object = corpus.samples_by_object(sensor);
    if by_object.is_empty() {
        return Err(Error::InvalidData(format!("no {sensor} samples to split")));
    }
    let materials = objects_by_material(corpus, &by_object)?;
    let fewest = materials.values().map(Vec::len).min().unwrap_or(0);
    match n_objects {
        ObjectCount::All if fewest < 2 => {
            return Err(Error::InvalidData(
                "leave-one-object-out needs at least 2 objects per material".into(),
            ))
        }
        ObjectCount::Count(n) if n == 0 || n + 1 > fewest => {
            return Err(Error::InvalidData(format!(
                "{n} training objects per material requested, but the smallest material has {fewest} objects"
            )))
        }
        _ => {}
    }

    let mut folds = Vec::with_capacity(by_object.len());
    for (index, (&held_out, test)) in by_object.iter().enumerate() {
        let mut train = Vec::new();
        for (material, objects) in &materials {
            let mut candidates: Vec<&str> = objects.iter().copied().filter(|&o| o != held_out).collect();
            if let ObjectCount::Count(n) = n_objects {
                let mut rng = seed::derived_rng(seed_value, &[STREAM_LOOBJ, index as u64, material.code() as u64]);
                candidates.shuffle(&mut rng);
                candidates.truncate(n);
            }
            for o in candidates {
                train.extend_from_slice(&by_object[o]);
            }
        }
        train.sort_unstable();
        folds.push(Fold {
            index,
            train,
            test: test.clone(),
            held_out_object: Some(held_out.to_string()),
        });
    }
    Ok(FoldPlan {
        protocol: Protocol::Loobj,
        sensor,
        seed: seed_value,
        folds,
        warnings: Vec::new(),
    })
}

/// Keeps exactly `n_per_object` randomly chosen training samples of every
/// object present in `train`.
pub fn subsample_per_object(
    corpus: &Corpus,
    train: &[usize],
    n_per_object: usize,
    seed_value: u64,
) -> Result<Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &id in train {
        let sample = corpus
            .samples()
            .get(id)
            .ok_or_else(|| Error::InvalidData(format!("sample id {id} out of range")))?;
        groups.entry(sample.object_id.as_str()).or_default().push(id);
    }
    let mut out = Vec::with_capacity(groups.len() * n_per_object);
    for (object_id, mut ids) in groups {
        if ids.len() < n_per_object {
            return Err(Error::InvalidData(format!(
                "object {object_id} has {} training samples, {n_per_object} requested",
                ids.len()
            )));
        }
        let position = corpus.object_position(object_id).unwrap_or(usize::MAX) as u64;
        ids.sort_unstable();
        ids.shuffle(&mut seed::derived_rng(seed_value, &[STREAM_SUBSAMPLE, position]));
        out.extend_from_slice(&ids[..n_per_object]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Lists every broken split invariant: train/test overlap, held-out object
/// samples leaking into training, and for k-fold plans, fold coverage and
/// per-object stratification.
pub fn check_plan(corpus: &Corpus, plan: &FoldPlan) -> Vec<String> {
    let mut problems = Vec::new();
    let object_of = |id: usize| corpus.samples()[id].object_id.as_str();
    for fold in &plan.folds {
        let test: HashSet<usize> = fold.test.iter().copied().collect();
        if test.len() != fold.test.len() {
            problems.push(format!("fold {}: duplicate test ids", fold.index));
        }
        if let Some(id) = fold.train.iter().find(|id| test.contains(id)) {
            problems.push(format!("fold {}: sample {id} in both train and test", fold.index));
        }
        let test_objects: HashSet<&str> = fold.test.iter().map(|&i| object_of(i)).collect();
        if plan.protocol != Protocol::Kfold {
            if let Some(&id) = fold.train.iter().find(|&&i| test_objects.contains(object_of(i))) {
                problems.push(format!(
                    "fold {}: training sample {id} belongs to held-out object {}",
                    fold.index,
                    object_of(id)
                ));
            }
            if let Some(held) = &fold.held_out_object {
                if test_objects.len() != 1 || !test_objects.contains(held.as_str()) {
                    problems.push(format!("fold {}: test set is not exactly object {held}", fold.index));
                }
            }
        }
    }
    if plan.protocol == Protocol::Kfold {
        let by_object = corpus.samples_by_object(plan.sensor);
        let mut seen = HashSet::new();
        for fold in &plan.folds {
            for &id in &fold.test {
                if !seen.insert(id) {
                    problems.push(format!("sample {id} tested in more than one fold"));
                }
            }
            let mut per_object: BTreeMap<&str, usize> = BTreeMap::new();
            for &id in &fold.test {
                *per_object.entry(object_of(id)).or_default() += 1;
            }
            for (object_id, ids) in &by_object {
                let expected = ids.len() / plan.folds.len();
                let got = per_object.get(object_id).copied().unwrap_or(0);
                if got != expected {
                    problems.push(format!(
                        "fold {}: object {object_id} has {got} test samples, expected {expected}",
                        fold.index
                    ));
                }
            }
        }
        let divisible = by_object.values().all(|ids| ids.len() % plan.folds.len() == 0);
        let total: usize = by_object.values().map(Vec::len).sum();
        if divisible && seen.len() != total {
            problems.push(format!("folds cover {} of {total} samples", seen.len()));
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{ObjectRecord, SpectralSample};

    fn corpus(objects: &[(&str, MaterialClass)], per_object: u32) -> Corpus {
        let grid: std::sync::Arc<[f64]> = SensorKind::Nir.default_grid().into();
        let objs = objects
            .iter()
            .map(|(id, m)| ObjectRecord {
                object_id: id.to_string(),
                display_name: id.to_string(),
                material: *m,
            })
            .collect();
        let samples = objects
            .iter()
            .flat_map(|(id, _)| {
                let grid = grid.clone();
                (0..per_object).map(move |i| SpectralSample {
                    object_id: id.to_string(),
                    sensor: SensorKind::Nir,
                    sample_index: i,
                    wavelengths: grid.clone(),
                    intensities: vec![1.0; 331],
                })
            })
            .collect();
        Corpus::new(objs, samples, "test")
    }

    #[test]
    fn single_object_ten_samples_five_folds() {
        let c = corpus(&[("a", MaterialClass::Metal)], 10);
        let plan = plan_stratified_kfold(&c, SensorKind::Nir, 5, 1).unwrap();
        assert_eq!(plan.folds.len(), 5);
        assert!(plan.folds.iter().all(|f| f.test.len() == 2 && f.train.len() == 8));
        assert!(check_plan(&c, &plan).is_empty());
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_truncates_with_warning() {
        let c = corpus(&[("a", MaterialClass::Metal)], 11);
        let plan = plan_stratified_kfold(&c, SensorKind::Nir, 5, 1).unwrap();
        assert_eq!(plan.warnings.len(), 1);
        assert_eq!(plan.folds.iter().map(|f| f.test.len()).sum::<usize>(), 10);
        assert!(check_plan(&c, &plan).is_empty());
    }

    #[test]
    fn kfold_errors() {
        let c = corpus(&[("a", MaterialClass::Metal)], 10);
        assert!(plan_stratified_kfold(&c, SensorKind::Nir, 1, 0).is_err());
        assert!(plan_stratified_kfold(&c, SensorKind::Visible, 5, 0).is_err());
        assert!(plan_stratified_kfold(&c, SensorKind::Nir, 11, 0).is_err());
    }

    #[test]
    fn loobj_subset_never_includes_held_out() {
        let objs = [
            ("m1", MaterialClass::Metal),
            ("m2", MaterialClass::Metal),
            ("m3", MaterialClass::Metal),
            ("w1", MaterialClass::Wood),
            ("w2", MaterialClass::Wood),
            ("w3", MaterialClass::Wood),
        ];
        let c = corpus(&objs, 3);
        let plan = plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::Count(2), 9).unwrap();
        assert_eq!(plan.folds.len(), 6);
        for f in &plan.folds {
            assert_eq!(f.test.len(), 3);
            assert_eq!(f.train.len(), 12);
        }
        assert!(check_plan(&c, &plan).is_empty());
        assert!(plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::Count(3), 9).is_err());
        let all = plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::All, 9).unwrap();
        assert!(all.folds.iter().all(|f| f.train.len() == 15));
    }

    #[test]
    fn leak_is_detected() {
        let objs = [("m1", MaterialClass::Metal), ("m2", MaterialClass::Metal)];
        let c = corpus(&objs, 2);
        let mut plan = plan_leave_one_object_out(&c, SensorKind::Nir, ObjectCount::All, 0).unwrap();
        let leaked = plan.folds[0].test[0];
        plan.folds[0].train.push(leaked);
        let problems = check_plan(&c, &plan);
        assert_eq!(problems.len(), 2, "{problems:?}");
    }

    #[test]
    fn subsample_counts_and_errors() {
        let objs = [("m1", MaterialClass::Metal), ("m2", MaterialClass::Metal)];
        let c = corpus(&objs, 5);
        let all: Vec<usize> = (0..10).collect();
        let one = subsample_per_object(&c, &all, 1, 3).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one, subsample_per_object(&c, &all, 1, 3).unwrap());
        assert_eq!(subsample_per_object(&c, &all, 5, 3).unwrap(), all);
        assert!(subsample_per_object(&c, &all, 6, 3).is_err());
    }

    #[test]
    fn object_count_parsing() {
        assert_eq!("all".parse::<ObjectCount>().unwrap(), ObjectCount::All);
        assert_eq!("4".parse::<ObjectCount>().unwrap(), ObjectCount::Count(4));
        assert!("0".parse::<ObjectCount>().is_err());
        let v: Vec<ObjectCount> = serde_json::from_str(r#"[3, "all"]"#).unwrap();
        assert_eq!(v, vec![ObjectCount::Count(3), ObjectCount::All]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[3,"all"]"#);
    }
}
