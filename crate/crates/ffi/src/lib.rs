//! C ABI over the `siseg` engine.
//!
//! Networks are opaque handles created by [`siseg_network_load`] and released by
//! [`siseg_network_free`]. Every fallible call returns a [`SisegStatus`]; on
//! failure a message is kept per thread and read with [`siseg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use siseg::homotopy::PathOptions;
use siseg::hypothesis::NoiseModel;
use siseg::inference::{naive_p, selective_p_pipeline, truncated_two_sided_p, PipelineOptions, SearchRange, TestOutcome};
use siseg::network::{forward, load_network_with, LoadOptions, NetworkSpec};
use siseg::region::{RegionFlavor, TruncationRegion};
use siseg::{Error, ImageVector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SisegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Validation = 5,
    Numeric = 6,
    Consistency = 7,
    PathExplosion = 8,
    DegenerateRegion = 9,
    Panic = 10,
}

impl From<&Error> for SisegStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => SisegStatus::Io,
            Error::Format(_) => SisegStatus::Format,
            Error::Validation { .. } => SisegStatus::Validation,
            Error::Argument(_) => SisegStatus::InvalidArgument,
            Error::Numeric(_) => SisegStatus::Numeric,
            Error::Consistency(_) => SisegStatus::Consistency,
            Error::PathExplosion { .. } => SisegStatus::PathExplosion,
            Error::DegenerateRegion(_) => SisegStatus::DegenerateRegion,
        }
    }
}

/// Opaque network handle.
pub struct SisegNetwork {
    spec: NetworkSpec,
}

/// Options for [`siseg_infer`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SisegInferOptions {
    /// Known noise standard deviation (isotropic).
    pub sigma: f64,
    /// Search range half-width in units of the statistic's standard deviation.
    pub range_sigmas: f64,
    /// Nonzero to also compute the over-conditioned p-value.
    pub over_conditioned: u8,
}

/// Output of [`siseg_infer`]. When `detected` is 0 only `object_pixels` is meaningful;
/// `p_oc` is NaN unless requested.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SisegInferResult {
    pub detected: u8,
    pub object_pixels: usize,
    pub z_obs: f64,
    pub sigma_eta: f64,
    pub p_naive: f64,
    pub p_selective: f64,
    pub p_oc: f64,
    pub region_count: usize,
    pub truncation_intervals: usize,
    pub truncation_length: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SisegStatus, message: impl Into<String>) -> SisegStatus {
    set_error(message.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), SisegStatus>) -> SisegStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SisegStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(SisegStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: siseg::Result<T>) -> Result<T, SisegStatus> {
    r.map_err(|e| fail(SisegStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), SisegStatus> {
    if p.is_null() {
        Err(fail(SisegStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn image_from(net: &NetworkSpec, values: *const f64, len: usize) -> Result<ImageVector, SisegStatus> {
    non_null(values, "values")?;
    let shape = net.input_shape();
    if len != shape.height * shape.width {
        return Err(fail(
            SisegStatus::InvalidArgument,
            format!("expected {} values, got {len}", shape.height * shape.width),
        ));
    }
    let data = slice::from_raw_parts(values, len).to_vec();
    lift(ImageVector::new(data, shape.height, shape.width))
}

/// Message for the last failed call on this thread, or null. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn siseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn siseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a weight manifest. `smooth_cuts` sets the piece count for sigmoid/tanh
/// layers that do not declare one (0 leaves them undeclared).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn siseg_network_load(
    path: *const c_char,
    smooth_cuts: usize,
    out: *mut *mut SisegNetwork,
) -> SisegStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(SisegStatus::InvalidArgument, "path is not UTF-8"))?;
        let options = LoadOptions {
            smooth_cuts: (smooth_cuts > 0).then_some(smooth_cuts),
        };
        let spec = lift(load_network_with(Path::new(path), options))?;
        *out = Box::into_raw(Box::new(SisegNetwork { spec }));
        Ok(())
    })
}

/// Releases a handle from [`siseg_network_load`]. Null is ignored.
///
/// # Safety
/// `net` must come from [`siseg_network_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn siseg_network_free(net: *mut SisegNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input image height and width.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn siseg_network_shape(
    net: *const SisegNetwork,
    height: *mut usize,
    width: *mut usize,
) -> SisegStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(height, "height")?;
        non_null(width, "width")?;
        let shape = (*net).spec.input_shape();
        *height = shape.height;
        *width = shape.width;
        Ok(())
    })
}

/// Segments one image; writes one 0/1 label per pixel into `labels`.
///
/// # Safety
/// `values` and `labels` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn siseg_segment(
    net: *const SisegNetwork,
    values: *const f64,
    len: usize,
    labels: *mut u8,
) -> SisegStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(labels, "labels")?;
        let net = &(*net).spec;
        let image = image_from(net, values, len)?;
        let mask = lift(forward(net, &image))?;
        let out = slice::from_raw_parts_mut(labels, len);
        for (o, &l) in out.iter_mut().zip(mask.labels()) {
            *o = l as u8;
        }
        Ok(())
    })
}

/// Segments one image and computes the naive and selective p-values.
///
/// # Safety
/// `values` must hold `len` elements; `options` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn siseg_infer(
    net: *const SisegNetwork,
    values: *const f64,
    len: usize,
    options: *const SisegInferOptions,
    out: *mut SisegInferResult,
) -> SisegStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(options, "options")?;
        non_null(out, "out")?;
        let net = &(*net).spec;
        let opts = *options;
        let image = image_from(net, values, len)?;
        let noise = lift(NoiseModel::isotropic(opts.sigma))?;
        let pipeline = PipelineOptions {
            range: SearchRange::Sigmas(opts.range_sigmas),
            over_conditioned: opts.over_conditioned != 0,
            path: PathOptions::default(),
        };
        let outcome = lift(selective_p_pipeline(net, &image, &noise, pipeline))?;
        *out = match outcome {
            TestOutcome::NoDetection => SisegInferResult {
                detected: 0,
                object_pixels: lift(forward(net, &image))?.object_count(),
                z_obs: f64::NAN,
                sigma_eta: f64::NAN,
                p_naive: f64::NAN,
                p_selective: f64::NAN,
                p_oc: f64::NAN,
                region_count: 0,
                truncation_intervals: 0,
                truncation_length: 0.0,
            },
            TestOutcome::Tested(r) => SisegInferResult {
                detected: 1,
                object_pixels: r.object_pixels,
                z_obs: r.z_obs,
                sigma_eta: r.sigma_eta,
                p_naive: r.p_naive,
                p_selective: r.p_selective,
                p_oc: r.p_oc.unwrap_or(f64::NAN),
                region_count: r.region_count,
                truncation_intervals: r.truncation.intervals().len(),
                truncation_length: r.truncation.total_length(),
            },
        };
        Ok(())
    })
}

/// Two-sided p-value of `z` under `N(0, sigma^2)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn siseg_naive_p(z: f64, sigma: f64, out: *mut f64) -> SisegStatus {
    guard(|| {
        non_null(out, "out")?;
        if !(sigma > 0.0) || !z.is_finite() {
            return Err(fail(SisegStatus::InvalidArgument, "need finite z and sigma > 0"));
        }
        *out = naive_p(z, sigma);
        Ok(())
    })
}

/// Two-sided p-value of `z` under `N(0, sigma^2)` truncated to a union of
/// intervals, given as `count` (lo, hi) pairs in `bounds` (2 * count values,
/// sorted and disjoint; infinities allowed).
///
/// # Safety
/// `bounds` must hold `2 * count` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn siseg_truncated_p(
    z: f64,
    sigma: f64,
    bounds: *const f64,
    count: usize,
    out: *mut f64,
) -> SisegStatus {
    guard(|| {
        non_null(bounds, "bounds")?;
        non_null(out, "out")?;
        let flat = slice::from_raw_parts(bounds, 2 * count);
        let intervals = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let region = lift(TruncationRegion::new(intervals, RegionFlavor::Explicit))?;
        *out = lift(truncated_two_sided_p(z, sigma, &region))?;
        Ok(())
    })
}
