//! C ABI over `sbr-core`.
//!
//! Models are exposed as opaque handles created by `*_load` and released by
//! the matching `*_free`. Every fallible function returns an [`SbrStatus`];
//! on failure a description is kept per thread and can be read with
//! [`sbr_last_error_message`]. Panics never cross the boundary.

#![deny(unsafe_op_in_unsafe_fn)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sbr_core::classifier::{load_checkpoint, Checkpoint, ModelKind};
use sbr_core::dbvae::train::score_images_dbvae;
use sbr_core::nn::{Temperature, Tensor};
use sbr_core::sbr::AuditRecord;
use sbr_core::svm::{load_svm, SvmModel};
use sbr_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Checkpoint = 4,
    Integrity = 5,
    Config = 6,
    Domain = 7,
    Dimension = 8,
    Numeric = 9,
    NotConverged = 10,
    Format = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbrModelKind {
    Cnn = 0,
    Dbvae = 1,
}

/// Loaded model checkpoint.
pub struct SbrCheckpoint(Checkpoint);

/// Loaded SVM head.
pub struct SbrSvm(SvmModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SbrStatus {
    match e {
        Error::Io { .. } => SbrStatus::Io,
        Error::Checkpoint(_) => SbrStatus::Checkpoint,
        Error::Integrity { .. } => SbrStatus::Integrity,
        Error::Config(_) | Error::Usage(_) => SbrStatus::Config,
        Error::Domain(_) => SbrStatus::Domain,
        Error::Dimension(_) => SbrStatus::Dimension,
        Error::Numeric(_) => SbrStatus::Numeric,
        Error::NotConverged { .. } => SbrStatus::NotConverged,
        Error::Json { .. } | Error::Manifest(_) | Error::Image { .. } => SbrStatus::Format,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (SbrStatus, String)>) -> SbrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SbrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SbrStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (SbrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SbrStatus, String) {
    (SbrStatus::NullArgument, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (SbrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and NUL-terminated per the caller's contract.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str()
        .map(PathBuf::from)
        .map_err(|_| (SbrStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or null if the last
/// call succeeded. Valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn sbr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sbr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sbr_checkpoint_load(path: *const c_char, out: *mut *mut SbrCheckpoint) -> SbrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let path = unsafe { path_arg(path, "path") }?;
        let ckpt = load_checkpoint(&path).map_err(core_err)?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(SbrCheckpoint(ckpt))) };
        Ok(())
    })
}

/// Releases a checkpoint. Null is ignored.
///
/// # Safety
/// `ckpt` must be null or a handle from [`sbr_checkpoint_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbr_checkpoint_free(ckpt: *mut SbrCheckpoint) {
    if !ckpt.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(ckpt) });
    }
}

/// # Safety
/// `h` must be null or a live handle.
unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, (SbrStatus, String)> {
    // SAFETY: caller guarantees liveness when non-null.
    unsafe { h.as_ref() }.ok_or_else(|| null(what))
}

/// Writes the model kind to `*kind` and the expected square input side to
/// `*input_size` (images have three channels).
///
/// # Safety
/// `ckpt` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbr_checkpoint_info(
    ckpt: *const SbrCheckpoint,
    kind: *mut SbrModelKind,
    input_size: *mut usize,
) -> SbrStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let c = &unsafe { handle(ckpt, "ckpt") }?.0;
        if kind.is_null() || input_size.is_null() {
            return Err(null("output pointer"));
        }
        let k = match c.kind {
            ModelKind::Cnn => SbrModelKind::Cnn,
            ModelKind::Dbvae => SbrModelKind::Dbvae,
        };
        // SAFETY: both checked non-null above.
        unsafe {
            *kind = k;
            *input_size = c.architecture.input_size;
        }
        Ok(())
    })
}

/// Copies the 16-hex-digit checkpoint identity plus a NUL into `buf`,
/// which must hold at least 17 bytes.
///
/// # Safety
/// `ckpt` must be a live handle and `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sbr_checkpoint_id(ckpt: *const SbrCheckpoint, buf: *mut c_char, len: usize) -> SbrStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let c = &unsafe { handle(ckpt, "ckpt") }?.0;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let id = c.id().map_err(core_err)?;
        if len < id.len() + 1 {
            return Err((SbrStatus::InvalidArgument, format!("buffer of {len} bytes cannot hold the id")));
        }
        // SAFETY: buf holds at least id.len() + 1 bytes.
        unsafe {
            ptr::copy_nonoverlapping(id.as_ptr().cast(), buf, id.len());
            *buf.add(id.len()) = 0;
        }
        Ok(())
    })
}

/// Scores `n` images given as `n * size * size * 3` floats in [0, 1],
/// row-major with interleaved RGB, at temperature `temperature`. `size`
/// must equal the checkpoint's input size. Writes `n` scores.
///
/// # Safety
/// `pixels` must be readable for the stated length and `scores` writable
/// for `n` values.
#[no_mangle]
pub unsafe extern "C" fn sbr_checkpoint_score(
    ckpt: *const SbrCheckpoint,
    pixels: *const f32,
    n: usize,
    size: usize,
    temperature: f64,
    scores: *mut f64,
) -> SbrStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let c = &unsafe { handle(ckpt, "ckpt") }?.0;
        if pixels.is_null() || scores.is_null() {
            return Err(null("pixels or scores"));
        }
        if n == 0 {
            return Ok(());
        }
        let t = Temperature::new(temperature).map_err(core_err)?;
        if size != c.architecture.input_size {
            return Err((
                SbrStatus::Dimension,
                format!("images are {size}x{size} but the model expects {0}x{0}", c.architecture.input_size),
            ));
        }
        let per = size * size * 3;
        let total = n.checked_mul(per).ok_or_else(|| (SbrStatus::InvalidArgument, "image count overflows".into()))?;
        // SAFETY: readable for `total` floats per the contract.
        let data = unsafe { std::slice::from_raw_parts(pixels, total) };
        let out = match c.kind {
            ModelKind::Cnn => {
                let batch = Tensor::new(&[n, size, size, 3], data.to_vec()).map_err(core_err)?;
                c.to_cnn().map_err(core_err)?.scores(&batch, t).map_err(core_err)?
            }
            ModelKind::Dbvae => {
                let images: Vec<Tensor<f32>> = data
                    .chunks_exact(per)
                    .map(|chunk| Tensor::new(&[size, size, 3], chunk.to_vec()))
                    .collect::<Result<_, _>>()
                    .map_err(core_err)?;
                let (model, _) = c.to_dbvae().map_err(core_err)?;
                score_images_dbvae(&model, &images, t, 64).map_err(core_err)?
            }
        };
        // SAFETY: writable for `n` values.
        unsafe { ptr::copy_nonoverlapping(out.as_ptr(), scores, n) };
        Ok(())
    })
}

/// Loads an SVM head from its JSON file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbr_svm_load(path: *const c_char, out: *mut *mut SbrSvm) -> SbrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let path = unsafe { path_arg(path, "path") }?;
        let svm = load_svm(&path).map_err(core_err)?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(SbrSvm(svm))) };
        Ok(())
    })
}

/// Releases an SVM head. Null is ignored.
///
/// # Safety
/// `svm` must be null or a handle from [`sbr_svm_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sbr_svm_free(svm: *mut SbrSvm) {
    if !svm.is_null() {
        // SAFETY: the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(svm) });
    }
}

/// Classifies one score: writes the label (0 or 1) and the signed margin.
///
/// # Safety
/// `svm` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbr_svm_predict(svm: *const SbrSvm, score: f64, label: *mut u8, margin: *mut f64) -> SbrStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let m = &unsafe { handle(svm, "svm") }?.0;
        if label.is_null() || margin.is_null() {
            return Err(null("output pointer"));
        }
        let (l, d) = m.predict(score);
        // SAFETY: both checked non-null above.
        unsafe {
            *label = l;
            *margin = d;
        }
        Ok(())
    })
}

/// Audit rule for one sample: the score-to-label distance and whether it
/// exceeds `threshold`.
///
/// # Safety
/// The out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbr_audit_sample(
    score: f64,
    label: u8,
    threshold: f64,
    distance: *mut f64,
    flagged: *mut bool,
) -> SbrStatus {
    guard(|| {
        if distance.is_null() || flagged.is_null() {
            return Err(null("output pointer"));
        }
        if !(0.0..=1.0).contains(&score) || label > 1 {
            return Err((SbrStatus::Domain, format!("need a score in [0, 1] and a 0/1 label, got {score} and {label}")));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err((SbrStatus::Config, format!("threshold must lie in (0, 1), got {threshold}")));
        }
        let r = AuditRecord::new("", label, score, threshold);
        // SAFETY: both checked non-null above.
        unsafe {
            *distance = r.distance;
            *flagged = r.flagged;
        }
        Ok(())
    })
}
