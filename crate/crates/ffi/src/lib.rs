//! C ABI over the `specmat` crate.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`SpecmatStatus`]; on failure a message is available from
//! [`specmat_last_error`] until the next failing call on the same thread.
//! No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use specmat::corpus::{load_corpus, Corpus};
use specmat::eval::{ClassifierConfig, FeatureTable};
use specmat::filter::FilterSpec;
use specmat::model::TrainedModel;
use specmat::preprocess::preprocess_sample;
use specmat::synth::{synth_corpus, SynthConfig};
use specmat::{Error, MaterialClass, SensorKind, SpectralSample};

/// Number of material classes; score buffers hold this many values.
pub const SPECMAT_CLASS_COUNT: usize = 5;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecmatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Malformed = 4,
    DimensionMismatch = 5,
    InvalidData = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecmatSensor {
    Visible = 0,
    Nir = 1,
}

impl From<SpecmatSensor> for SensorKind {
    fn from(s: SpecmatSensor) -> Self {
        match s {
            SpecmatSensor::Visible => SensorKind::Visible,
            SpecmatSensor::Nir => SensorKind::Nir,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecmatClassifier {
    Mlp = 0,
    Svm = 1,
}

/// A loaded or generated corpus.
pub struct SpecmatCorpus {
    inner: Corpus,
}

/// A trained classifier of either kind.
pub struct SpecmatModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: SpecmatStatus, message: impl Into<String>) -> SpecmatStatus {
    set_last_error(message.into());
    status
}

fn status_of(e: &Error) -> SpecmatStatus {
    match e {
        Error::Io { .. } => SpecmatStatus::Io,
        Error::Malformed { .. } | Error::Json(_) | Error::UnknownMaterial(_) | Error::UnknownSensor(_) => {
            SpecmatStatus::Malformed
        }
        Error::DimensionMismatch { .. } => SpecmatStatus::DimensionMismatch,
        Error::InvalidConfig(_) => SpecmatStatus::InvalidArgument,
        _ => SpecmatStatus::InvalidData,
    }
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), SpecmatStatus>) -> SpecmatStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SpecmatStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(SpecmatStatus::Panic, "internal panic"),
    }
}

trait IntoStatus<T> {
    fn or_status(self) -> Result<T, SpecmatStatus>;
}

impl<T> IntoStatus<T> for specmat::Result<T> {
    fn or_status(self) -> Result<T, SpecmatStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SpecmatStatus> {
    if p.is_null() {
        Err(fail(SpecmatStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn filter_spec(order: u32, cutoff: f64) -> FilterSpec {
    FilterSpec {
        order: order as usize,
        cutoff,
    }
}

/// Message of the last failure on this thread, or null if there was none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn specmat_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Lower-case material name for a class code, or null for codes above 4.
/// The string is static.
#[no_mangle]
pub extern "C" fn specmat_material_name(code: u32) -> *const c_char {
    const NAMES: [&CStr; SPECMAT_CLASS_COUNT] = [c"metal", c"plastic", c"wood", c"paper", c"fabric"];
    NAMES.get(code as usize).map_or(ptr::null(), |n| n.as_ptr())
}

/// Expected sample length for a sensor.
#[no_mangle]
pub extern "C" fn specmat_sensor_dim(sensor: SpecmatSensor) -> usize {
    SensorKind::from(sensor).expected_dim()
}

/// Loads a corpus directory (or one of its CSV files).
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_load(path: *const c_char, out: *mut *mut SpecmatCorpus) -> SpecmatStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(SpecmatStatus::InvalidArgument, "path is not UTF-8"))?;
        let corpus = load_corpus(path).or_status()?;
        *out = Box::into_raw(Box::new(SpecmatCorpus { inner: corpus }));
        Ok(())
    })
}

/// Generates a synthetic corpus with the default signal scales.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_synth(
    objects_per_material: usize,
    samples_per_object: usize,
    seed: u64,
    out: *mut *mut SpecmatCorpus,
) -> SpecmatStatus {
    guard(|| {
        non_null(out, "out")?;
        let cfg = SynthConfig {
            objects_per_material,
            samples_per_object,
            ..SynthConfig::default()
        };
        let corpus = synth_corpus(&cfg, seed).or_status()?;
        *out = Box::into_raw(Box::new(SpecmatCorpus { inner: corpus }));
        Ok(())
    })
}

/// Releases a corpus. Null is ignored.
///
/// # Safety
/// `corpus` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_free(corpus: *mut SpecmatCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of objects in the corpus.
///
/// # Safety
/// `corpus` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_object_count(corpus: *const SpecmatCorpus, out: *mut usize) -> SpecmatStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        *out = (*corpus).inner.objects().len();
        Ok(())
    })
}

/// Number of samples recorded with `sensor`.
///
/// # Safety
/// `corpus` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_sample_count(
    corpus: *const SpecmatCorpus,
    sensor: SpecmatSensor,
    out: *mut usize,
) -> SpecmatStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        *out = (*corpus).inner.count(sensor.into());
        Ok(())
    })
}

fn nth_sample(corpus: &Corpus, sensor: SensorKind, index: usize) -> Result<(usize, &SpectralSample), SpecmatStatus> {
    let ids = corpus.sample_ids(sensor);
    let id = *ids.get(index).ok_or_else(|| {
        fail(
            SpecmatStatus::InvalidArgument,
            format!("index {index} out of range for {} {sensor} samples", ids.len()),
        )
    })?;
    Ok((id, &corpus.samples()[id]))
}

/// Material code (0-4) of the `index`-th `sensor` sample in canonical order.
///
/// # Safety
/// `corpus` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_sample_label(
    corpus: *const SpecmatCorpus,
    sensor: SpecmatSensor,
    index: usize,
    out: *mut u32,
) -> SpecmatStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        let corpus = &(*corpus).inner;
        let (id, _) = nth_sample(corpus, sensor.into(), index)?;
        let label = corpus
            .label(id)
            .ok_or_else(|| fail(SpecmatStatus::InvalidData, "sample has no known object"))?;
        *out = label.code() as u32;
        Ok(())
    })
}

/// Writes the feature vector of the `index`-th `sensor` sample into `out`,
/// which must hold at least `specmat_sensor_dim(sensor)` values.
///
/// # Safety
/// `corpus` must be valid and `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn specmat_corpus_features(
    corpus: *const SpecmatCorpus,
    sensor: SpecmatSensor,
    index: usize,
    filter_order: u32,
    filter_cutoff: f64,
    out: *mut f64,
    out_len: usize,
) -> SpecmatStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        let (_, sample) = nth_sample(&(*corpus).inner, sensor.into(), index)?;
        let fv = preprocess_sample(sample, &filter_spec(filter_order, filter_cutoff)).or_status()?;
        copy_out(&fv.values, out, out_len)
    })
}

unsafe fn copy_out(values: &[f64], out: *mut f64, out_len: usize) -> Result<(), SpecmatStatus> {
    if out_len < values.len() {
        return Err(fail(
            SpecmatStatus::BufferTooSmall,
            format!("buffer holds {out_len} values, need {}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Preprocesses one raw reading. `len` must equal the sensor's dimension;
/// `out` receives `len` values.
///
/// # Safety
/// `wavelengths` and `intensities` must point to `len` readable doubles and
/// `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn specmat_preprocess(
    sensor: SpecmatSensor,
    wavelengths: *const f64,
    intensities: *const f64,
    len: usize,
    filter_order: u32,
    filter_cutoff: f64,
    out: *mut f64,
    out_len: usize,
) -> SpecmatStatus {
    guard(|| {
        non_null(wavelengths, "wavelengths")?;
        non_null(intensities, "intensities")?;
        non_null(out, "out")?;
        let sensor = SensorKind::from(sensor);
        if len != sensor.expected_dim() {
            return Err(fail(
                SpecmatStatus::DimensionMismatch,
                format!("{sensor} readings have {} values, got {len}", sensor.expected_dim()),
            ));
        }
        let sample = SpectralSample {
            object_id: String::new(),
            sensor,
            sample_index: 0,
            wavelengths: Arc::from(std::slice::from_raw_parts(wavelengths, len)),
            intensities: std::slice::from_raw_parts(intensities, len).to_vec(),
        };
        let fv = preprocess_sample(&sample, &filter_spec(filter_order, filter_cutoff)).or_status()?;
        copy_out(&fv.values, out, out_len)
    })
}

/// Trains a classifier with default hyperparameters on every `sensor`
/// sample of the corpus. `epochs` of 0 keeps the default.
///
/// # Safety
/// `corpus` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn specmat_model_train(
    corpus: *const SpecmatCorpus,
    sensor: SpecmatSensor,
    classifier: SpecmatClassifier,
    epochs: usize,
    seed: u64,
    out: *mut *mut SpecmatModel,
) -> SpecmatStatus {
    guard(|| {
        non_null(corpus, "corpus")?;
        non_null(out, "out")?;
        let corpus = &(*corpus).inner;
        let sensor = SensorKind::from(sensor);
        let mut config = match classifier {
            SpecmatClassifier::Mlp => ClassifierConfig::mlp(),
            SpecmatClassifier::Svm => ClassifierConfig::svm(),
        };
        if epochs > 0 {
            match &mut config {
                ClassifierConfig::Mlp(m) => m.train.epochs = epochs,
                ClassifierConfig::Svm(s) => s.epochs = epochs,
            }
        }
        let table = FeatureTable::new(corpus, sensor, &FilterSpec::default()).or_status()?;
        let model = table.fit(&config, &corpus.sample_ids(sensor), seed).or_status()?;
        *out = Box::into_raw(Box::new(SpecmatModel { inner: model }));
        Ok(())
    })
}

/// Reads a model from its JSON form (either kind).
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn specmat_model_from_json(json: *const c_char, out: *mut *mut SpecmatModel) -> SpecmatStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(SpecmatStatus::InvalidArgument, "json is not UTF-8"))?;
        let model = TrainedModel::from_json(text).or_status()?;
        *out = Box::into_raw(Box::new(SpecmatModel { inner: model }));
        Ok(())
    })
}

/// Serialises a model to JSON. Release the string with
/// [`specmat_string_free`].
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn specmat_model_to_json(model: *const SpecmatModel, out: *mut *mut c_char) -> SpecmatStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let text = (*model).inner.to_json().or_status()?;
        let c = CString::new(text).map_err(|_| fail(SpecmatStatus::InvalidData, "JSON contains a nul byte"))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// Input length the model expects.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn specmat_model_input_dim(model: *const SpecmatModel, out: *mut usize) -> SpecmatStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = (*model).inner.input_dim();
        Ok(())
    })
}

/// Classifies one feature vector. `class_out` receives the material code;
/// `scores_out`, if not null, receives `SPECMAT_CLASS_COUNT` per-class
/// scores (probabilities for the network, decision values for the SVM).
///
/// # Safety
/// `features` must point to `len` readable doubles, `class_out` must be
/// valid, and `scores_out` must be null or point to 5 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn specmat_model_predict(
    model: *const SpecmatModel,
    features: *const f64,
    len: usize,
    class_out: *mut u32,
    scores_out: *mut f64,
) -> SpecmatStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(features, "features")?;
        non_null(class_out, "class_out")?;
        let x = std::slice::from_raw_parts(features, len);
        let (class, scores) = (*model).inner.predict(x).or_status()?;
        *class_out = class.code() as u32;
        if !scores_out.is_null() {
            ptr::copy_nonoverlapping(scores.as_ptr(), scores_out, MaterialClass::COUNT);
        }
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn specmat_model_free(model: *mut SpecmatModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn specmat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
