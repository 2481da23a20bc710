//! C interface to the modulation classifier.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a
//! [`ModclassStatus`]; on failure the message is kept per thread and can be
//! fetched with [`modclass_last_error`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modclass::cnn::{load_model, CnnModel};
use modclass::fusion::{fuse, FusionRule};
use modclass::harness::{synthesize, Scenario};
use modclass::seed;
use modclass::sigsynth::{ModulationScheme, RealSignal, SignalParams};
use modclass::tfa::{ImageConfig, RgbImage};
use modclass::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModclassStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Io = 4,
    Format = 5,
    UnsupportedVersion = 6,
    Numeric = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque spectrogram image (`height × width × channels`, row-major `f32`).
pub struct ModclassImage(RgbImage);

/// Opaque trained classifier.
pub struct ModclassModel(CnnModel<f32>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ModclassStatus {
    match e {
        Error::Config(_) => ModclassStatus::InvalidArgument,
        Error::Data(_) => ModclassStatus::Data,
        Error::Io { .. } => ModclassStatus::Io,
        Error::Format { .. } => ModclassStatus::Format,
        Error::UnsupportedVersion { .. } => ModclassStatus::UnsupportedVersion,
        Error::Numeric(_) => ModclassStatus::Numeric,
    }
}

struct Fail(ModclassStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ModclassStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ModclassStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ModclassStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ModclassStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ModclassStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            ModclassStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in bytes
/// without the terminator; 0 means the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn modclass_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Number of samples of one synthesized waveform under default parameters.
#[no_mangle]
pub extern "C" fn modclass_signal_len() -> usize {
    SignalParams::default().signal_len().unwrap_or(0)
}

/// Synthesizes one received SISO waveform of `scheme` (e.g. `"16QAM"`)
/// under default parameters. A non-finite `snr_db` means no noise. Writes
/// [`modclass_signal_len`] samples into `out`.
///
/// # Safety
/// `scheme` must be a NUL-terminated string; `out` must point to `out_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn modclass_synthesize(
    scheme: *const c_char,
    snr_db: f64,
    seed_value: u64,
    out: *mut f64,
    out_len: usize,
) -> ModclassStatus {
    guard(|| {
        let scheme: ModulationScheme = str_arg(scheme, "scheme")?.parse()?;
        let snr = if snr_db.is_nan() { f64::INFINITY } else { snr_db };
        let bundle = synthesize(scheme, &SignalParams::default(), Scenario::Siso, snr, seed_value)?;
        let y = &bundle.branches[0].samples;
        out_slice(out, out_len, y.len(), "out")?.copy_from_slice(y);
        Ok(())
    })
}

/// Renders `len` samples taken at `sample_rate_hz` into a jet-colored
/// `target × target × 3` spectrogram with the default STFT settings.
///
/// # Safety
/// `samples` must point to `len` readable doubles and `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn modclass_spectrogram(
    samples: *const f64,
    len: usize,
    sample_rate_hz: f64,
    target: usize,
    out: *mut *mut ModclassImage,
) -> ModclassStatus {
    guard(|| {
        if samples.is_null() {
            return Err(null("samples"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let y = RealSignal::new(std::slice::from_raw_parts(samples, len).to_vec(), sample_rate_hz);
        let cfg = ImageConfig {
            target,
            ..ImageConfig::default()
        };
        let img = cfg.render(&y)?;
        *out = Box::into_raw(Box::new(ModclassImage(img)));
        Ok(())
    })
}

/// # Safety
/// `image` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn modclass_image_shape(
    image: *const ModclassImage,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> ModclassStatus {
    guard(|| {
        let img = &image.as_ref().ok_or_else(|| null("image"))?.0;
        for (p, v) in [(height, img.height), (width, img.width), (channels, img.channels)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the pixel values (row-major, channels last) into `out`.
///
/// # Safety
/// `image` must be a live handle and `out` point to `out_len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn modclass_image_data(
    image: *const ModclassImage,
    out: *mut f32,
    out_len: usize,
) -> ModclassStatus {
    guard(|| {
        let img = &image.as_ref().ok_or_else(|| null("image"))?.0;
        out_slice(out, out_len, img.data.len(), "out")?.copy_from_slice(&img.data);
        Ok(())
    })
}

/// # Safety
/// `image` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modclass_image_free(image: *mut ModclassImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Loads a `CNN1` model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn modclass_model_load(path: *const c_char, out: *mut *mut ModclassModel) -> ModclassStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_model(path)?;
        *out = Box::into_raw(Box::new(ModclassModel(model)));
        Ok(())
    })
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn modclass_model_num_classes(model: *const ModclassModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_classes())
}

/// Class probabilities for one image; writes `num_classes` doubles.
///
/// # Safety
/// Handles must be live and `probs` point to `probs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn modclass_model_predict(
    model: *const ModclassModel,
    image: *const ModclassImage,
    probs: *mut f64,
    probs_len: usize,
) -> ModclassStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let img = &image.as_ref().ok_or_else(|| null("image"))?.0;
        let d = model.forward(img)?;
        out_slice(probs, probs_len, d.len(), "probs")?.copy_from_slice(d.probs());
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modclass_model_free(model: *mut ModclassModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fuses `count` per-antenna class indices. `n_out_of == 0` selects the
/// plurality vote, otherwise the n-out-of rule. `*label` is set to the fused
/// class, or -1 when no class reaches `n_out_of` votes.
///
/// # Safety
/// `labels` must point to `count` readable values and `label` be writable.
#[no_mangle]
pub unsafe extern "C" fn modclass_fuse(
    labels: *const u32,
    count: usize,
    n_out_of: usize,
    seed_value: u64,
    label: *mut i64,
) -> ModclassStatus {
    guard(|| {
        if labels.is_null() {
            return Err(null("labels"));
        }
        if label.is_null() {
            return Err(null("label"));
        }
        let rule = if n_out_of == 0 {
            FusionRule::Majority
        } else {
            FusionRule::NOutOf(n_out_of)
        };
        let labels = std::slice::from_raw_parts(labels, count);
        let out = fuse(labels, rule, &mut seed::rng(seed_value))?;
        *label = out.final_label.map_or(-1, i64::from);
        Ok(())
    })
}
