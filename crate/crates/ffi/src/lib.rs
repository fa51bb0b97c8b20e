//! C ABI over the discount-cml estimators.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`DcmlStatus`]; on failure the message is available from
//! [`dcml_last_error_message`] on the same thread. Panics are caught and
//! reported as [`DcmlStatus::Panic`].

use discount_cml::causal_forest::{self, CausalForest, CausalForestParams};
use discount_cml::data::{
    filter_always_buyers, load_survey, write_schema, write_survey, Dataset, Schema, TreatmentSpec,
};
use discount_cml::dml::{dml_ate, DmlParams};
use discount_cml::matrix::Matrix;
use discount_cml::simulator::{simulate, DgpConfig};
use discount_cml::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EstimationFailed = 3,
    Io = 4,
    Panic = 5,
}

/// One estimate with its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DcmlEstimate {
    pub effect: f64,
    pub se: f64,
    pub p_value: f64,
    pub n: u64,
    pub n_trimmed: u64,
}

/// Survey sample.
pub struct DcmlDataset {
    inner: Dataset,
}

/// Fitted causal forest.
pub struct DcmlCausalForest {
    inner: CausalForest,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> DcmlStatus {
    match e {
        Error::Io { .. } => DcmlStatus::Io,
        Error::Estimation(_) | Error::Json(_) => DcmlStatus::EstimationFailed,
        _ => DcmlStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DcmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DcmlStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is a null pointer"));
            DcmlStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            DcmlStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DcmlStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn string_arg(p: *const c_char, what: &'static str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dcml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Bytes needed to hold the last error message, including the NUL.
#[no_mangle]
pub extern "C" fn dcml_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len() + 1)
}

/// Copies the last error message of this thread into `buf` (truncated to
/// `len - 1` bytes, always NUL-terminated) and returns the bytes copied.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dcml_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Simulates a survey. `config` holds `key = value` lines and may be null
/// for the default configuration; `seed` overrides any seed in it.
///
/// # Safety
/// `config` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_simulate(config: *const c_char, seed: u64, out: *mut *mut DcmlDataset) -> DcmlStatus {
    guard(|| {
        let mut cfg = if config.is_null() {
            DgpConfig::default()
        } else {
            DgpConfig::parse(&string_arg(config, "config")?)?
        };
        cfg.seed = seed;
        let sim = simulate(&cfg)?;
        write_out(out, Box::into_raw(Box::new(DcmlDataset { inner: sim.observed })), "out")
    })
}

/// Loads a survey CSV. A null `schema_path` means the data path with a
/// `.schema` extension.
///
/// # Safety
/// Paths must be NUL-terminated strings (`schema_path` may be null); `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_dataset_load(
    data_path: *const c_char,
    schema_path: *const c_char,
    max_discount: f64,
    binarize_at: f64,
    out: *mut *mut DcmlDataset,
) -> DcmlStatus {
    guard(|| {
        let data = PathBuf::from(string_arg(data_path, "data_path")?);
        let schema = if schema_path.is_null() {
            data.with_extension("schema")
        } else {
            PathBuf::from(string_arg(schema_path, "schema_path")?)
        };
        let schema = Schema::from_file(schema)?;
        let (ds, _) = load_survey(&data, &schema, TreatmentSpec::new(max_discount, binarize_at)?)?;
        write_out(out, Box::into_raw(Box::new(DcmlDataset { inner: ds })), "out")
    })
}

/// Writes a dataset and its schema in the ingestible layout.
///
/// # Safety
/// `ds` must be a live handle; paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dcml_dataset_write(
    ds: *const DcmlDataset,
    data_path: *const c_char,
    schema_path: *const c_char,
) -> DcmlStatus {
    guard(|| {
        let ds = as_ref(ds, "ds")?;
        write_survey(&ds.inner, string_arg(data_path, "data_path")?)?;
        write_schema(&ds.inner, string_arg(schema_path, "schema_path")?)?;
        Ok(())
    })
}

/// Number of rows.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_dataset_len(ds: *const DcmlDataset, out: *mut usize) -> DcmlStatus {
    guard(|| write_out(out, as_ref(ds, "ds")?.inner.len(), "out"))
}

/// Number of control covariates (X, imputation indicators and W) used by
/// the estimators.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_dataset_n_covariates(ds: *const DcmlDataset, out: *mut usize) -> DcmlStatus {
    guard(|| write_out(out, as_ref(ds, "ds")?.inner.xw_matrix().n_cols(), "out"))
}

/// New dataset with the always buyers (`S(0) = 1`) of `ds`.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_dataset_always_buyers(ds: *const DcmlDataset, out: *mut *mut DcmlDataset) -> DcmlStatus {
    guard(|| {
        let ab = filter_always_buyers(&as_ref(ds, "ds")?.inner);
        write_out(out, Box::into_raw(Box::new(DcmlDataset { inner: ab })), "out")
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcml_dataset_free(ds: *mut DcmlDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits a causal forest of the outcome on the discount with all control
/// covariates.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_causal_forest_fit(
    ds: *const DcmlDataset,
    n_trees: usize,
    seed: u64,
    out: *mut *mut DcmlCausalForest,
) -> DcmlStatus {
    guard(|| {
        let ds = &as_ref(ds, "ds")?.inner;
        let params = CausalForestParams::with_trees(n_trees, seed);
        let (_, cf) = causal_forest::fit(&ds.xw_matrix(), &ds.y(), &ds.d(), &params)?;
        write_out(out, Box::into_raw(Box::new(DcmlCausalForest { inner: cf })), "out")
    })
}

/// Average partial effect with its standard error.
///
/// # Safety
/// `cf` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_causal_forest_ape(cf: *const DcmlCausalForest, out: *mut DcmlEstimate) -> DcmlStatus {
    guard(|| {
        let ape = as_ref(cf, "cf")?.inner.estimate_ape()?;
        let est = DcmlEstimate {
            effect: ape.theta,
            se: ape.se,
            p_value: ape.p_value,
            n: ape.n as u64,
            n_trimmed: 0,
        };
        write_out(out, est, "out")
    })
}

/// Number of covariates the forest expects per row.
///
/// # Safety
/// `cf` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_causal_forest_n_features(cf: *const DcmlCausalForest, out: *mut usize) -> DcmlStatus {
    guard(|| write_out(out, as_ref(cf, "cf")?.inner.feature_names.len(), "out"))
}

/// Conditional effects at `n_rows` row-major covariate rows. `se_out` may
/// be null.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` values; `tau_out` (and `se_out` unless
/// null) must hold `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn dcml_causal_forest_predict(
    cf: *const DcmlCausalForest,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    tau_out: *mut f64,
    se_out: *mut f64,
) -> DcmlStatus {
    guard(|| {
        let cf = &as_ref(cf, "cf")?.inner;
        if n_cols != cf.feature_names.len() {
            return Err(Failure::Arg(format!(
                "forest expects {} columns, got {n_cols}",
                cf.feature_names.len()
            )));
        }
        if n_rows == 0 {
            return Ok(());
        }
        if x.is_null() {
            return Err(Failure::Null("x"));
        }
        if tau_out.is_null() {
            return Err(Failure::Null("tau_out"));
        }
        let values = std::slice::from_raw_parts(x, n_rows * n_cols);
        let columns: Vec<Vec<f64>> = (0..n_cols)
            .map(|j| (0..n_rows).map(|i| values[i * n_cols + j]).collect())
            .collect();
        let m = Matrix::from_columns(cf.feature_names.clone(), columns)?;
        let est = cf.predict_cape(&m)?;
        for (i, e) in est.iter().enumerate() {
            *tau_out.add(i) = e.tau;
            if !se_out.is_null() {
                *se_out.add(i) = e.se;
            }
        }
        Ok(())
    })
}

/// Releases a forest; null is ignored.
///
/// # Safety
/// `cf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcml_causal_forest_free(cf: *mut DcmlCausalForest) {
    if !cf.is_null() {
        drop(Box::from_raw(cf));
    }
}

/// Cross-fitted doubly-robust effect of the binary discount with all
/// control covariates.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcml_dml_ate(
    ds: *const DcmlDataset,
    n_trees: usize,
    k_folds: usize,
    trim: f64,
    seed: u64,
    out: *mut DcmlEstimate,
) -> DcmlStatus {
    guard(|| {
        let ds = &as_ref(ds, "ds")?.inner;
        let mut params = DmlParams::new(n_trees, seed);
        params.k_folds = k_folds;
        params.trim_threshold = trim;
        let fit = dml_ate(&ds.xw_matrix(), &ds.y(), &ds.dtilde(), &params)?;
        let r = fit.result;
        let est = DcmlEstimate {
            effect: r.ate,
            se: r.se,
            p_value: r.p_value,
            n: r.n_used as u64,
            n_trimmed: r.n_trimmed as u64,
        };
        write_out(out, est, "out")
    })
}
