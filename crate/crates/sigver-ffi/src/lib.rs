//! C ABI for the sigver library.
//!
//! Models are handed out as opaque pointers owned by the library; every
//! function that can fail returns a [`SigverStatus`] and leaves a
//! human-readable message retrievable through
//! [`sigver_last_error_message`]. Pointers returned by the library stay
//! valid until the corresponding `*_free` call; the error message buffer
//! is thread-local and valid until the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use sigver::{
    classify, cosine_similarity, enroll, load_model_file, save_model_file, score_probe,
    Aggregation, EnrollConfig, Error, FeatureVector, Label, ModelFile, SignatureSample,
    SplitSpec, FORMAT_VERSION,
};

/// Opaque handle to an enrolled model plus its file metadata.
pub struct SigverModel {
    file: ModelFile,
}

/// Result code of a C ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigverStatus {
    Ok = 0,
    /// A null pointer, an out-of-domain parameter, or a malformed value.
    InvalidArgument = 1,
    /// Vector dimensions disagree.
    DimensionMismatch = 2,
    /// A zero-norm vector has no cosine similarity.
    DegenerateVector = 3,
    /// Not enough samples for the requested gallery split.
    InsufficientSamples = 4,
    /// The underlying file could not be read or written.
    Io = 5,
    /// A file exists but its contents do not parse or validate.
    Parse = 6,
    /// Any other library failure.
    Internal = 7,
}

/// Probe verdict.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigverDecision {
    Forge = 0,
    Genuine = 1,
}

/// Probe score aggregation over the gallery references.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigverAggregation {
    Mean = 0,
    Max = 1,
    Min = 2,
}

impl From<SigverAggregation> for Aggregation {
    fn from(a: SigverAggregation) -> Self {
        match a {
            SigverAggregation::Mean => Aggregation::Mean,
            SigverAggregation::Max => Aggregation::Max,
            SigverAggregation::Min => Aggregation::Min,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> SigverStatus {
    match error {
        Error::DimensionMismatch { .. } => SigverStatus::DimensionMismatch,
        Error::DegenerateVector => SigverStatus::DegenerateVector,
        Error::InsufficientSamples { .. } => SigverStatus::InsufficientSamples,
        Error::Io { .. } => SigverStatus::Io,
        Error::Parse { .. } | Error::Json { .. } | Error::CountMismatch { .. } => {
            SigverStatus::Parse
        }
        Error::MatrixEntry { source, .. } | Error::Sample { source, .. } => status_of(source),
        Error::EmptyVector
        | Error::NonFiniteFeature
        | Error::EmptyMatrix
        | Error::WriterNotFound(_)
        | Error::LengthMismatch { .. }
        | Error::UndefinedRate { .. }
        | Error::EmptyClass { .. }
        | Error::InvalidParameter(_) => SigverStatus::InvalidArgument,
    }
}

fn fail(error: &Error) -> SigverStatus {
    set_error(&error.to_string());
    status_of(error)
}

fn fail_invalid(message: &str) -> SigverStatus {
    set_error(message);
    SigverStatus::InvalidArgument
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sigver_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread, or an empty
/// string if none. The pointer is invalidated by the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn sigver_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Cosine similarity of two `dim`-length vectors into `out`.
///
/// # Safety
/// `a` and `b` must point to `dim` readable f64 values and `out` to one
/// writable f64.
#[no_mangle]
pub unsafe extern "C" fn sigver_cosine_similarity(
    a: *const f64,
    b: *const f64,
    dim: usize,
    out: *mut f64,
) -> SigverStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        return fail_invalid("null pointer argument");
    }
    if dim == 0 {
        return fail_invalid("dim must be at least 1");
    }
    let to_vector = |ptr: *const f64| -> Result<FeatureVector, Error> {
        FeatureVector::new(std::slice::from_raw_parts(ptr, dim).to_vec())
    };
    let result = to_vector(a)
        .and_then(|va| to_vector(b).map(|vb| (va, vb)))
        .and_then(|(va, vb)| cosine_similarity(&va, &vb));
    match result {
        Ok(value) => {
            *out = value;
            SigverStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Enrolls one writer from `n` genuine feature vectors laid out row-major
/// in `features` (`n * dim` values). `n_gallery_a + n_gallery_b` rows form
/// the gallery; the remainder are the held-out genuine probes. On success
/// `*out_model` owns the new model; free it with [`sigver_model_free`].
///
/// # Safety
/// `features` must point to `n * dim` readable f64 values, `writer_id`
/// must be NUL-terminated or null, and `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sigver_enroll(
    features: *const f64,
    n: usize,
    dim: usize,
    n_gallery_a: usize,
    n_gallery_b: usize,
    alpha: f64,
    e_consensus: f64,
    e_threshold: f64,
    aggregation: SigverAggregation,
    seed: u64,
    writer_id: *const c_char,
    out_model: *mut *mut SigverModel,
) -> SigverStatus {
    if features.is_null() || out_model.is_null() {
        return fail_invalid("null pointer argument");
    }
    if dim == 0 || n == 0 {
        return fail_invalid("n and dim must be at least 1");
    }
    if n_gallery_a + n_gallery_b > n {
        return fail_invalid("gallery sizes exceed the number of samples");
    }
    let writer = if writer_id.is_null() {
        "writer".to_string()
    } else {
        match CStr::from_ptr(writer_id).to_str() {
            Ok(s) => s.to_string(),
            Err(_) => return fail_invalid("writer_id is not valid UTF-8"),
        }
    };
    let split = match SplitSpec::new(
        n_gallery_a,
        n_gallery_b,
        n - n_gallery_a - n_gallery_b,
        0,
    ) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let values = std::slice::from_raw_parts(features, n * dim);
    let mut samples = Vec::with_capacity(n);
    for (i, row) in values.chunks_exact(dim).enumerate() {
        let feature = match FeatureVector::new(row.to_vec()) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        samples.push(SignatureSample {
            writer_id: writer.clone(),
            sample_id: format!("g{:03}", i + 1),
            label: Label::Genuine,
            feature,
        });
    }
    let mut config = EnrollConfig::new(split, seed);
    config.alpha = alpha;
    config.e_consensus = e_consensus;
    config.e_threshold = e_threshold;
    config.aggregation = aggregation.into();
    match enroll(&samples, &config) {
        Ok((model, _probes)) => {
            let handle = Box::new(SigverModel {
                file: ModelFile {
                    format_version: FORMAT_VERSION,
                    writer_id: writer,
                    dataset: "ffi".to_string(),
                    feature_model: "raw".to_string(),
                    model,
                },
            });
            *out_model = Box::into_raw(handle);
            SigverStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

unsafe fn path_from(raw: *const c_char) -> Result<&'static Path, SigverStatus> {
    if raw.is_null() {
        return Err(fail_invalid("null path"));
    }
    match CStr::from_ptr(raw).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail_invalid("path is not valid UTF-8")),
    }
}

/// Writes a model to `path` as JSON.
///
/// # Safety
/// `model` must be a live pointer from this library and `path` a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sigver_model_save(
    model: *const SigverModel,
    path: *const c_char,
) -> SigverStatus {
    if model.is_null() {
        return fail_invalid("null model");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match save_model_file(&(*model).file, path) {
        Ok(()) => SigverStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// Loads a model previously written by [`sigver_model_save`] (or the CLI).
/// On success `*out_model` owns the handle.
///
/// # Safety
/// `path` must be NUL-terminated and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn sigver_model_load(
    path: *const c_char,
    out_model: *mut *mut SigverModel,
) -> SigverStatus {
    if out_model.is_null() {
        return fail_invalid("null out_model");
    }
    let path = match path_from(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_model_file(path) {
        Ok(file) => {
            *out_model = Box::into_raw(Box::new(SigverModel { file }));
            SigverStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// The model's acceptance threshold, or NaN for a null model.
///
/// # Safety
/// `model` must be null or a live pointer from this library.
#[no_mangle]
pub unsafe extern "C" fn sigver_model_tau(model: *const SigverModel) -> f64 {
    if model.is_null() {
        return f64::NAN;
    }
    (*model).file.model.tau_c
}

/// Feature dimension the model was enrolled with, or 0 for a null model.
///
/// # Safety
/// `model` must be null or a live pointer from this library.
#[no_mangle]
pub unsafe extern "C" fn sigver_model_dim(model: *const SigverModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).file.model.dim()
}

/// Number of similarity values retained by the consensus filter, or 0 for
/// a null model or a baseline-strategy model.
///
/// # Safety
/// `model` must be null or a live pointer from this library.
#[no_mangle]
pub unsafe extern "C" fn sigver_model_consensus_size(model: *const SigverModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).file.model.consensus_size()
}

unsafe fn probe_score(
    model: *const SigverModel,
    probe: *const f64,
    dim: usize,
) -> Result<f64, SigverStatus> {
    if model.is_null() || probe.is_null() {
        return Err(fail_invalid("null pointer argument"));
    }
    if dim == 0 {
        return Err(fail_invalid("dim must be at least 1"));
    }
    let feature = FeatureVector::new(std::slice::from_raw_parts(probe, dim).to_vec())
        .map_err(|e| fail(&e))?;
    score_probe(&feature, &(*model).file.model).map_err(|e| fail(&e))
}

/// Scores a probe against the model's gallery into `out_score`.
///
/// # Safety
/// `model` must be a live pointer from this library, `probe` must point to
/// `dim` readable f64 values, and `out_score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sigver_score(
    model: *const SigverModel,
    probe: *const f64,
    dim: usize,
    out_score: *mut f64,
) -> SigverStatus {
    if out_score.is_null() {
        return fail_invalid("null out_score");
    }
    match probe_score(model, probe, dim) {
        Ok(score) => {
            *out_score = score;
            SigverStatus::Ok
        }
        Err(status) => status,
    }
}

/// Scores a probe and applies the acceptance rule. `out_score` may be null
/// if only the decision is wanted.
///
/// # Safety
/// As [`sigver_score`], except `out_score` may be null; `out_decision`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sigver_verify(
    model: *const SigverModel,
    probe: *const f64,
    dim: usize,
    out_decision: *mut SigverDecision,
    out_score: *mut f64,
) -> SigverStatus {
    if out_decision.is_null() {
        return fail_invalid("null out_decision");
    }
    match probe_score(model, probe, dim) {
        Ok(score) => {
            let decision = match classify(score, (*model).file.model.tau_c) {
                sigver::Decision::Genuine => SigverDecision::Genuine,
                sigver::Decision::Forge => SigverDecision::Forge,
            };
            *out_decision = decision;
            if !out_score.is_null() {
                *out_score = score;
            }
            SigverStatus::Ok
        }
        Err(status) => status,
    }
}

/// Releases a model returned by [`sigver_enroll`] or [`sigver_model_load`].
/// Passing null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer previously returned by this library
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn sigver_model_free(model: *mut SigverModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
