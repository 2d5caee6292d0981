//! C ABI for `ginibre-overlap`.
//!
//! Every fallible function returns a [`GoStatus`]; on failure a message is
//! kept per thread and can be copied out with [`go_last_error_message`].
//! Models are opaque handles created by [`go_model_new`] and released with
//! [`go_model_free`]. Panics never cross the boundary.

use ginibre_overlap::asymptotics::{self, EvaluationPoint, Scaling};
use ginibre_overlap::exactrep::{self, GStrategy, QuadSettings};
use ginibre_overlap::model::{JordanSpec, ModelParams};
use ginibre_overlap::sampler::{self, EstimatorConfig};
use ginibre_overlap::{specfun, Error};
use num_complex::Complex64 as C;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoStatus {
    Ok = 0,
    Domain = 1,
    InvalidSpec = 2,
    Dimension = 3,
    UnsupportedRank = 4,
    Config = 5,
    Accuracy = 6,
    Eigensolver = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

/// Values of [`GoPoint::scaling`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoScaling {
    EdgeMultiplicative = 0,
    OutlierAdditive = 1,
    OutlierAdditiveNormalized = 2,
    Additive = 3,
}

/// Evaluation point `z0`, `zhat` and a [`GoScaling`] value; `rho` is only
/// read for `Additive`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GoPoint {
    pub z0_re: f64,
    pub z0_im: f64,
    pub zhat_re: f64,
    pub zhat_im: f64,
    pub scaling: i32,
    pub rho: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GoEstimate {
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
    /// Non-zero when no eigenvalue fell in the bin.
    pub starved: i32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GoExact {
    /// `O_N(z)`.
    pub value: f64,
    /// `value` in the limit law's normalization.
    pub normalized: f64,
    /// Node-doubling change, or a negative number when not checked.
    pub delta: f64,
    pub nodes: u64,
}

/// Opaque model handle.
pub struct GoModel {
    params: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GoStatus {
    match e {
        Error::Domain(_) => GoStatus::Domain,
        Error::InvalidSpec(_) => GoStatus::InvalidSpec,
        Error::Dimension(_) => GoStatus::Dimension,
        Error::UnsupportedRank(_) => GoStatus::UnsupportedRank,
        Error::Config(_) | Error::Json(_) | Error::Csv(_) => GoStatus::Config,
        Error::Accuracy(_) => GoStatus::Accuracy,
        Error::Eigensolver(_) => GoStatus::Eigensolver,
        Error::Io(_) => GoStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GoStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GoStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GoStatus::Panic
        }
    }
}

fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller promises `p` is null or valid for writes.
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

fn model_ref<'a>(m: *const GoModel) -> Result<&'a GoModel, Failure> {
    // SAFETY: handles come from `go_model_new` and are live until freed.
    unsafe { m.as_ref() }.ok_or(Failure::Null("model"))
}

fn point_of(p: &GoPoint) -> Result<EvaluationPoint, Failure> {
    let scaling = match p.scaling {
        0 => Scaling::EdgeMultiplicative,
        1 => Scaling::OutlierAdditive,
        2 => Scaling::OutlierAdditiveNormalized,
        3 => Scaling::Additive { rho: p.rho },
        s => return Err(Error::Config(format!("unknown scaling {s}")).into()),
    };
    Ok(EvaluationPoint::new(C::new(p.z0_re, p.z0_im), C::new(p.zhat_re, p.zhat_im), scaling))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one, or 0 when
/// there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn go_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                // SAFETY: `buf` holds `len >= n` bytes by contract.
                unsafe {
                    std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                    *buf.add(n - 1) = 0;
                }
            }
            bytes.len()
        }
    })
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn go_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a model of size `n` with variance `tau`. `spec_json` holds the
/// Jordan data of `X0` as JSON, or is null for `X0 = 0`.
///
/// # Safety
/// `spec_json` must be null or a NUL-terminated string; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn go_model_new(n: usize, tau: f64, spec_json: *const c_char, out: *mut *mut GoModel) -> GoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = if spec_json.is_null() {
            JordanSpec::empty()
        } else {
            // SAFETY: non-null and NUL-terminated by contract.
            let s = unsafe { CStr::from_ptr(spec_json) }
                .to_str()
                .map_err(|_| Error::Config("spec is not UTF-8".into()))?;
            JordanSpec::from_json(s)?
        };
        let params = ModelParams::new(n, tau, spec)?;
        *out = Box::into_raw(Box::new(GoModel { params }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`go_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn go_model_free(model: *mut GoModel) {
    if !model.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Rank of the perturbation.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_model_rank(model: *const GoModel, out: *mut usize) -> GoStatus {
    guard(|| {
        *out_ref(out, "out")? = model_ref(model)?.params.rank();
        Ok(())
    })
}

/// `IE_s(x)`, or `exp(x^2/2) IE_s(x)` when `scaled` is non-zero.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_ie(s: f64, x: f64, scaled: i32, out: *mut f64) -> GoStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = if scaled != 0 { specfun::ie_scaled(s, x)? } else { specfun::ie(s, x)? };
        Ok(())
    })
}

/// Edge limit law for geometric multiplicity `t`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_edge_density(t: u32, tau: f64, zhat_re: f64, zhat_im: f64, out: *mut f64) -> GoStatus {
    guard(|| {
        *out_ref(out, "out")? = asymptotics::edge_density(t, tau, C::new(zhat_re, zhat_im))?;
        Ok(())
    })
}

/// Outlier limit law for `r` copies of a simple eigenvalue `z0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_outlier_identity_density(
    r: u32,
    tau: f64,
    z0_re: f64,
    z0_im: f64,
    zhat_re: f64,
    zhat_im: f64,
    out: *mut f64,
) -> GoStatus {
    guard(|| {
        *out_ref(out, "out")? =
            asymptotics::outlier_identity_density(r, tau, C::new(z0_re, z0_im), C::new(zhat_re, zhat_im))?;
        Ok(())
    })
}

/// Outlier limit law of the model's single Jordan block.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_outlier_jordan_density(
    model: *const GoModel,
    zhat_re: f64,
    zhat_im: f64,
    out: *mut f64,
) -> GoStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_ref(out, "out")? = asymptotics::outlier_jordan_density(&m.params.spec, m.params.tau, C::new(zhat_re, zhat_im))?;
        Ok(())
    })
}

/// Monte Carlo estimate with `trials` matrices, bin radius `eps_hat` in
/// `zhat` units and random streams derived from `seed`.
///
/// # Safety
/// `model` must be a live handle, `point` readable and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_estimate_density(
    model: *const GoModel,
    point: *const GoPoint,
    trials: usize,
    eps_hat: f64,
    seed: u64,
    out: *mut GoEstimate,
) -> GoStatus {
    guard(|| {
        let m = model_ref(model)?;
        // SAFETY: readable by contract.
        let p = point_of(unsafe { point.as_ref() }.ok_or(Failure::Null("point"))?)?;
        let out = out_ref(out, "out")?;
        let e = sampler::estimate_density(&m.params, &p, &EstimatorConfig::new(trials, eps_hat, seed))?;
        *out = GoEstimate { value: e.value, std_error: e.stderr, count: e.count, starved: e.starved as i32 };
        Ok(())
    })
}

/// Exact density by quadrature with `radial` and `angular` nodes (0 selects
/// the defaults). A non-zero `check` repeats on the doubled grid.
///
/// # Safety
/// `model` must be a live handle, `point` readable and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn go_exact_density(
    model: *const GoModel,
    point: *const GoPoint,
    radial: usize,
    angular: usize,
    check: i32,
    out: *mut GoExact,
) -> GoStatus {
    guard(|| {
        let m = model_ref(model)?;
        // SAFETY: readable by contract.
        let p = point_of(unsafe { point.as_ref() }.ok_or(Failure::Null("point"))?)?;
        let out = out_ref(out, "out")?;
        let d = QuadSettings::default();
        let q = QuadSettings {
            radial: if radial == 0 { d.radial } else { radial },
            angular: if angular == 0 { d.angular } else { angular },
            strategy: GStrategy::MuExtraction,
            check: check != 0,
        };
        let r = exactrep::exact_density(&m.params, &p, &q)?;
        *out = GoExact { value: r.value, normalized: r.normalized, delta: r.delta.unwrap_or(-1.0), nodes: r.nodes as u64 };
        Ok(())
    })
}
