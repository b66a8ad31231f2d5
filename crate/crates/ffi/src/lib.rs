//! C ABI over `freeinit-core`.
//!
//! Objects cross the boundary as opaque handles created by `fi_*_new`,
//! `fi_*_load` or an operation with an `out` parameter, and released with the
//! matching `fi_*_free`. Every fallible call returns an [`FiStatus`]; on
//! failure the message is available from [`fi_last_error`] on the same
//! thread. Panics are caught and reported as [`FiStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use freeinit_core::analysis::temporal_consistency;
use freeinit_core::model::{load_model, Network};
use freeinit_core::sampler::{coarse_to_fine_steps, freeinit_sample, FreeInitConfig};
use freeinit_core::schedule::{ScheduleKind, ScheduleSpec};
use freeinit_core::spectral::{high_pass, low_pass, make_mask, reinitialize_noise, FilterFamily, FilterSpec, FrequencyMask};
use freeinit_core::tensorio::{gaussian_tensor, load_tensor, save_tensor};
use freeinit_core::{Error, NoiseSchedule, RngState, Shape, VideoTensor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Format = 5,
    MissingArtifact = 6,
    NonFinite = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiFilterFamily {
    Ideal = 0,
    Gaussian = 1,
    Butterworth = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiScheduleKind {
    Linear = 0,
    ScaledLinear = 1,
}

/// A `(F, C, H, W)` float video tensor.
pub struct FiTensor(VideoTensor);

pub struct FiSchedule(NoiseSchedule);

/// Low-pass mask over a `(F, H, W)` frequency grid.
pub struct FiMask(FrequencyMask);

/// A trained denoiser together with the schedule it was trained on.
pub struct FiModel {
    net: Network<f32>,
    schedule: NoiseSchedule,
}

/// FreeInit sampling settings. `class_label < 0` samples unconditionally.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FiSampleParams {
    pub iterations: usize,
    pub family: FiFilterFamily,
    pub d0: f64,
    pub order: u32,
    pub ddim_steps: usize,
    pub coarse_to_fine: bool,
    pub guidance_weight: f64,
    pub reuse_eps: bool,
    pub noise_reinit: bool,
    pub seed: u64,
    pub class_label: i64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(FiStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidShape(_) | Error::ShapeMismatch { .. } | Error::LengthMismatch { .. } => {
                FiStatus::ShapeMismatch
            }
            Error::NonFinite { .. } | Error::Divergence { .. } => FiStatus::NonFinite,
            Error::Format { .. } | Error::Json(_) => FiStatus::Format,
            Error::MissingArtifact(_) => FiStatus::MissingArtifact,
            Error::Io { .. } => FiStatus::Io,
            _ => FiStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> FiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FiStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FiStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FiStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FiStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn family(f: FiFilterFamily) -> FilterFamily {
    match f {
        FiFilterFamily::Ideal => FilterFamily::Ideal,
        FiFilterFamily::Gaussian => FilterFamily::Gaussian,
        FiFilterFamily::Butterworth => FilterFamily::Butterworth,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn fi_status_name(status: FiStatus) -> *const c_char {
    let s: &'static CStr = match status {
        FiStatus::Ok => c"ok",
        FiStatus::NullPointer => c"null pointer",
        FiStatus::InvalidArgument => c"invalid argument",
        FiStatus::ShapeMismatch => c"shape mismatch",
        FiStatus::Io => c"i/o error",
        FiStatus::Format => c"format error",
        FiStatus::MissingArtifact => c"missing artifact",
        FiStatus::NonFinite => c"non-finite value",
        FiStatus::BufferTooSmall => c"buffer too small",
        FiStatus::Panic => c"panic",
    };
    s.as_ptr()
}

// ---- tensors ----

/// Standard normal tensor drawn from the named substream of `seed`.
///
/// # Safety
/// `stream` must be a valid C string or null (meaning `"eps"`); `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_gaussian(
    frames: usize,
    channels: usize,
    height: usize,
    width: usize,
    seed: u64,
    stream: *const c_char,
    out: *mut *mut FiTensor,
) -> FiStatus {
    guard(|| {
        let name = if stream.is_null() {
            "eps".to_string()
        } else {
            CStr::from_ptr(stream).to_string_lossy().into_owned()
        };
        let shape = Shape::new(frames, channels, height, width)?;
        let t = gaussian_tensor(shape, &mut RngState::substream(seed, &name))?;
        put(out, FiTensor(t))
    })
}

/// Copies `len` floats laid out as `(F, C, H, W)` into a new tensor.
///
/// # Safety
/// `dims` must point to 4 values and `data` to `len` floats.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_from_data(
    dims: *const usize,
    data: *const f32,
    len: usize,
    out: *mut *mut FiTensor,
) -> FiStatus {
    guard(|| {
        if dims.is_null() {
            return Err(null("dims"));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        let d = std::slice::from_raw_parts(dims, 4);
        let shape = Shape::new(d[0], d[1], d[2], d[3])?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        put(out, FiTensor(VideoTensor::new(shape, values)?))
    })
}

/// # Safety
/// `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_load(path: *const c_char, out: *mut *mut FiTensor) -> FiStatus {
    guard(|| {
        let t = load_tensor(path_arg(path)?)?;
        put(out, FiTensor(t))
    })
}

/// # Safety
/// `t` must be a live tensor handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_save(t: *const FiTensor, path: *const c_char) -> FiStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        save_tensor(&t.0, path_arg(path)?)?;
        Ok(())
    })
}

/// Writes `(F, C, H, W)` into `dims`.
///
/// # Safety
/// `dims` must have room for 4 values.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_shape(t: *const FiTensor, dims: *mut usize) -> FiStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        for (i, d) in t.0.shape().dims().into_iter().enumerate() {
            *dims.add(i) = d;
        }
        Ok(())
    })
}

/// Copies the tensor values into `buf`, which must hold at least
/// `F * C * H * W` floats.
///
/// # Safety
/// `buf` must be writable for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_copy_data(t: *const FiTensor, buf: *mut f32, len: usize) -> FiStatus {
    guard(|| {
        let t = deref(t, "tensor")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = t.0.data();
        if len < data.len() {
            return Err(Failure(
                FiStatus::BufferTooSmall,
                format!("need {} floats, got {len}", data.len()),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn fi_tensor_free(t: *mut FiTensor) {
    free(t)
}

// ---- schedules ----

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fi_schedule_new(
    kind: FiScheduleKind,
    steps: usize,
    beta_start: f64,
    beta_end: f64,
    out: *mut *mut FiSchedule,
) -> FiStatus {
    guard(|| {
        let kind = match kind {
            FiScheduleKind::Linear => ScheduleKind::Linear,
            FiScheduleKind::ScaledLinear => ScheduleKind::ScaledLinear,
        };
        let s = NoiseSchedule::from_spec(ScheduleSpec {
            kind,
            steps,
            beta_start,
            beta_end,
        })?;
        put(out, FiSchedule(s))
    })
}

/// The scaled-linear 1000-step preset.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fi_schedule_sd(out: *mut *mut FiSchedule) -> FiStatus {
    guard(|| put(out, FiSchedule(NoiseSchedule::sd())))
}

/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_schedule_alpha_bar(s: *const FiSchedule, t: usize, out: *mut f64) -> FiStatus {
    guard(|| {
        let s = deref(s, "schedule")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.0.alpha_bar(t)?;
        Ok(())
    })
}

/// `sqrt(abar_t) z0 + sqrt(1 - abar_t) eps`.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_q_sample(
    s: *const FiSchedule,
    z0: *const FiTensor,
    t: usize,
    eps: *const FiTensor,
    out: *mut *mut FiTensor,
) -> FiStatus {
    guard(|| {
        let s = deref(s, "schedule")?;
        let z = s.0.q_sample(&deref(z0, "z0")?.0, t, &deref(eps, "eps")?.0)?;
        put(out, FiTensor(z))
    })
}

/// # Safety
/// `s` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn fi_schedule_free(s: *mut FiSchedule) {
    free(s)
}

// ---- spectral ----

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fi_mask_new(
    family_: FiFilterFamily,
    d0: f64,
    order: u32,
    frames: usize,
    height: usize,
    width: usize,
    out: *mut *mut FiMask,
) -> FiStatus {
    guard(|| {
        Shape::new(frames, 1, height, width)?;
        let spec = FilterSpec::new(family(family_), d0, order)?;
        put(out, FiMask(make_mask(&spec, frames, height, width)))
    })
}

/// # Safety
/// `m` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn fi_mask_free(m: *mut FiMask) {
    free(m)
}

/// Low band of `z_t` plus the high band of `eta`.
///
/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_reinitialize_noise(
    z_t: *const FiTensor,
    eta: *const FiTensor,
    mask: *const FiMask,
    out: *mut *mut FiTensor,
) -> FiStatus {
    guard(|| {
        let z = reinitialize_noise(&deref(z_t, "z_t")?.0, &deref(eta, "eta")?.0, &deref(mask, "mask")?.0)?;
        put(out, FiTensor(z))
    })
}

/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_low_pass(x: *const FiTensor, mask: *const FiMask, out: *mut *mut FiTensor) -> FiStatus {
    guard(|| {
        let y = low_pass(&deref(x, "x")?.0, &deref(mask, "mask")?.0)?;
        put(out, FiTensor(y))
    })
}

/// # Safety
/// All handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_high_pass(x: *const FiTensor, mask: *const FiMask, out: *mut *mut FiTensor) -> FiStatus {
    guard(|| {
        let y = high_pass(&deref(x, "x")?.0, &deref(mask, "mask")?.0)?;
        put(out, FiTensor(y))
    })
}

/// Mean cosine similarity of consecutive mean-subtracted frames.
///
/// # Safety
/// `v` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_temporal_consistency(v: *const FiTensor, out: *mut f64) -> FiStatus {
    guard(|| {
        let v = deref(v, "video")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = temporal_consistency(&v.0)?;
        Ok(())
    })
}

// ---- model and sampling ----

/// Loads a model directory written by `freeinit train`.
///
/// # Safety
/// `dir` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_model_load(dir: *const c_char, out: *mut *mut FiModel) -> FiStatus {
    guard(|| {
        let (net, manifest) = load_model(path_arg(dir)?)?;
        let schedule = NoiseSchedule::from_spec(manifest.schedule)?;
        put(out, FiModel { net, schedule })
    })
}

/// Sample shape `(F, C, H, W)` of the model.
///
/// # Safety
/// `dims` must have room for 4 values.
#[no_mangle]
pub unsafe extern "C" fn fi_model_shape(m: *const FiModel, dims: *mut usize) -> FiStatus {
    guard(|| {
        let m = deref(m, "model")?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        for (i, d) in m.net.config().shape().dims().into_iter().enumerate() {
            *dims.add(i) = d;
        }
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn fi_model_free(m: *mut FiModel) {
    free(m)
}

/// Default settings: 4 Gaussian refinements at `d0 = 0.25`, 25 DDIM steps,
/// guidance 7.5, unconditional.
#[no_mangle]
pub extern "C" fn fi_sample_params_default() -> FiSampleParams {
    let c = FreeInitConfig::default();
    FiSampleParams {
        iterations: c.iterations,
        family: FiFilterFamily::Gaussian,
        d0: c.filter.d0,
        order: c.filter.order,
        ddim_steps: c.ddim_steps,
        coarse_to_fine: c.coarse_to_fine,
        guidance_weight: c.guidance_weight,
        reuse_eps: c.reuse_eps,
        noise_reinit: c.noise_reinit,
        seed: c.seed,
        class_label: -1,
    }
}

/// Runs FreeInit and returns the clean sample of the last pass.
///
/// # Safety
/// `m` and `params` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fi_freeinit_sample(
    m: *const FiModel,
    params: *const FiSampleParams,
    out: *mut *mut FiTensor,
) -> FiStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let p = deref(params, "params")?;
        let config = FreeInitConfig {
            iterations: p.iterations,
            filter: FilterSpec::new(family(p.family), p.d0, p.order)?,
            ddim_steps: p.ddim_steps,
            coarse_to_fine: p.coarse_to_fine,
            guidance_weight: p.guidance_weight,
            reuse_eps: p.reuse_eps,
            noise_reinit: p.noise_reinit,
            seed: p.seed,
        };
        let class = match usize::try_from(p.class_label) {
            Ok(c) if c >= m.net.config().classes => {
                return Err(Failure(
                    FiStatus::InvalidArgument,
                    format!("class {c} out of range 0..{}", m.net.config().classes),
                ))
            }
            Ok(c) => Some(c),
            Err(_) => None,
        };
        let result = freeinit_sample(&m.net, &config, class, &m.schedule)?;
        put(out, FiTensor(result.final_z0))
    })
}

/// Writes the `n` coarse-to-fine DDIM budgets for `total_steps` into `buf`.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn fi_coarse_to_fine_steps(total_steps: usize, n: usize, buf: *mut usize, len: usize) -> FiStatus {
    guard(|| {
        if buf.is_null() {
            return Err(null("buf"));
        }
        let steps = coarse_to_fine_steps(total_steps, n)?;
        if len < steps.len() {
            return Err(Failure(
                FiStatus::BufferTooSmall,
                format!("need {} values, got {len}", steps.len()),
            ));
        }
        ptr::copy_nonoverlapping(steps.as_ptr(), buf, steps.len());
        Ok(())
    })
}
