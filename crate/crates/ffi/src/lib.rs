//! C ABI over the localization toolkit.
//!
//! Radio maps and models are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call
//! returns a [`WsdStatus`]; on failure the message is kept per thread and
//! read with [`wsd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wlan_sde::locate::{OpCount, SdeLocator};
use wlan_sde::sde::train_sde;
use wlan_sde::{EmbeddingModel, Error, IntrinsicDim, ObservationSet, RadioMap, RssVector, TrainParams};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WsdStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument, configuration, parse or schema error.
    InvalidArgument = 2,
    /// Solver failure, e.g. a non-positive-definite scatter matrix.
    Numerical = 3,
    Io = 4,
    /// Model file failed to load or validate.
    ModelFormat = 5,
    Panic = 6,
}

/// Opaque radio map.
pub struct WsdRadioMap {
    inner: RadioMap,
}

/// Opaque trained model with its prepared locator.
pub struct WsdModel {
    model: EmbeddingModel,
    locator: SdeLocator,
}

impl WsdModel {
    fn new(model: EmbeddingModel) -> Self {
        let locator = SdeLocator::new(&model);
        Self { model, locator }
    }
}

/// Training parameters. `intrinsic_dim = 0` picks the dimension automatically;
/// `heat_t` and `kernel_lambda` of 0 select their data-driven defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WsdTrainParams {
    pub intrinsic_dim: usize,
    pub dim_energy: f64,
    pub n_clusters: usize,
    pub affinity_k: usize,
    pub heat_t: f64,
    pub kernel_lambda: f64,
    pub reg_sigma: f64,
    pub fuzzifier_m: f64,
    pub converge_eps: f64,
    pub max_iter: usize,
    pub match_eps: f64,
    pub match_threshold: usize,
    pub update_ratio: f64,
    pub knn_k: usize,
    pub fill_dbm: f64,
    pub seed: u64,
}

impl From<&TrainParams> for WsdTrainParams {
    fn from(p: &TrainParams) -> Self {
        Self {
            intrinsic_dim: match p.intrinsic_dim {
                IntrinsicDim::Auto => 0,
                IntrinsicDim::Fixed(d) => d,
            },
            dim_energy: p.dim_energy,
            n_clusters: p.n_clusters,
            affinity_k: p.affinity_k,
            heat_t: p.heat_t.unwrap_or(0.0),
            kernel_lambda: p.kernel_lambda.unwrap_or(0.0),
            reg_sigma: p.reg_sigma,
            fuzzifier_m: p.fuzzifier_m,
            converge_eps: p.converge_eps,
            max_iter: p.max_iter,
            match_eps: p.match_eps,
            match_threshold: p.match_threshold,
            update_ratio: p.update_ratio,
            knn_k: p.knn_k,
            fill_dbm: p.fill_dbm,
            seed: p.seed,
        }
    }
}

impl From<&WsdTrainParams> for TrainParams {
    fn from(p: &WsdTrainParams) -> Self {
        let positive = |v: f64| (v != 0.0).then_some(v);
        Self {
            intrinsic_dim: match p.intrinsic_dim {
                0 => IntrinsicDim::Auto,
                d => IntrinsicDim::Fixed(d),
            },
            dim_energy: p.dim_energy,
            n_clusters: p.n_clusters,
            affinity_k: p.affinity_k,
            heat_t: positive(p.heat_t),
            kernel_lambda: positive(p.kernel_lambda),
            reg_sigma: p.reg_sigma,
            fuzzifier_m: p.fuzzifier_m,
            converge_eps: p.converge_eps,
            max_iter: p.max_iter,
            match_eps: p.match_eps,
            match_threshold: p.match_threshold,
            update_ratio: p.update_ratio,
            knn_k: p.knn_k,
            fill_dbm: p.fill_dbm,
            seed: p.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> WsdStatus {
    match err {
        Error::Io { .. } => WsdStatus::Io,
        Error::Numerical(_) | Error::DegenerateCluster(_) => WsdStatus::Numerical,
        Error::ModelFormat(_) => WsdStatus::ModelFormat,
        _ => WsdStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard<F>(f: F) -> WsdStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (WsdStatus::Ok, String::new()),
        Ok(Err(Failure::Null(what))) => (WsdStatus::NullPointer, format!("{what} is null")),
        Ok(Err(Failure::Invalid(msg))) => (WsdStatus::InvalidArgument, msg),
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Err(_) => (WsdStatus::Panic, "internal panic".to_string()),
    };
    set_error(msg);
    status
}

unsafe fn path_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn out_arg<T>(p: *mut T, what: &'static str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(p)
    }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, excluding
/// the terminator; 0 after a successful call.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wsd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a radio map CSV; APs missing in every sample of an RP take `fill_dbm`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsd_radio_map_load(path: *const c_char, fill_dbm: f64, out: *mut *mut WsdRadioMap) -> WsdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = path_arg(path, "path")?;
        let inner = RadioMap::load(path, fill_dbm)?;
        *out = Box::into_raw(Box::new(WsdRadioMap { inner }));
        Ok(())
    })
}

/// Number of reference points, 0 for a null handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsd_radio_map_len(map: *const WsdRadioMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.len())
}

/// Number of APs, 0 for a null handle.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsd_radio_map_n_aps(map: *const WsdRadioMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.n_aps())
}

/// # Safety
/// `map` must be null or a handle from [`wsd_radio_map_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wsd_radio_map_free(map: *mut WsdRadioMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Fills `out` with the default training parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsd_train_params_default(out: *mut WsdTrainParams) -> WsdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = WsdTrainParams::from(&TrainParams::default());
        Ok(())
    })
}

/// Trains a model on `map`, admitting observations from the unlabeled pool
/// CSV at `unlabeled_path` (may be null for none).
///
/// # Safety
/// `map` must be a live handle, `params` readable, `unlabeled_path` null or
/// NUL-terminated, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wsd_train(
    map: *const WsdRadioMap,
    unlabeled_path: *const c_char,
    params: *const WsdTrainParams,
    out: *mut *mut WsdModel,
) -> WsdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let map = &ref_arg(map, "map")?.inner;
        let params = TrainParams::from(ref_arg(params, "params")?);
        let pool = if unlabeled_path.is_null() {
            Vec::new()
        } else {
            let set = ObservationSet::load(path_arg(unlabeled_path, "unlabeled_path")?)?;
            if set.ap_ids != map.ap_ids() {
                return Err(Failure::Invalid("unlabeled AP roster differs from the radio map".into()));
            }
            set.samples
        };
        let outcome = train_sde(map, &pool, &params)?;
        *out = Box::into_raw(Box::new(WsdModel::new(outcome.model)));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsd_model_load(path: *const c_char, out: *mut *mut WsdModel) -> WsdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = EmbeddingModel::load(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(WsdModel::new(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wsd_model_save(model: *const WsdModel, path: *const c_char) -> WsdStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        model.model.save(path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Embedding dimension, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsd_model_dim(model: *const WsdModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// APs a query must carry, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsd_model_n_aps(model: *const WsdModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n_aps())
}

/// Unlabeled samples the model was trained with.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsd_model_admitted(model: *const WsdModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.provenance.admitted)
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wsd_model_free(model: *mut WsdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Locates one query of `n_aps` RSS values (dBm). `missing` may be null;
/// otherwise a nonzero entry marks that AP unheard and it takes `fill_dbm`.
/// `k = 0` uses the model's own neighbor count.
///
/// # Safety
/// `model` must be a live handle; `rss` (and `missing` if non-null) must
/// hold `n_aps` elements; `out_x` and `out_y` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wsd_locate(
    model: *const WsdModel,
    rss: *const f64,
    missing: *const u8,
    n_aps: usize,
    k: usize,
    fill_dbm: f64,
    out_x: *mut f64,
    out_y: *mut f64,
) -> WsdStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let out_x = out_arg(out_x, "out_x")?;
        let out_y = out_arg(out_y, "out_y")?;
        if rss.is_null() {
            return Err(Failure::Null("rss"));
        }
        let values = std::slice::from_raw_parts(rss, n_aps).to_vec();
        let mask = if missing.is_null() {
            vec![false; n_aps]
        } else {
            std::slice::from_raw_parts(missing, n_aps).iter().map(|&m| m != 0).collect()
        };
        let query = RssVector::new(values, mask)?;
        let k = if k == 0 { model.model.params.knn_k } else { k };
        let fix = model.locator.locate(&query, k, fill_dbm, &mut OpCount::default())?;
        *out_x = fix.coord.x;
        *out_y = fix.coord.y;
        Ok(())
    })
}
