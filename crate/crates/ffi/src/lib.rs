//! C ABI over the `ada2ms` crate.
//!
//! An optimizer is an opaque handle owning its parameter tensors and state:
//! register tensors with `ada2ms_optimizer_add_tensor`, then call
//! `ada2ms_optimizer_step` with one flat gradient buffer (tensors
//! concatenated in registration order) per step and read parameters back
//! with `ada2ms_optimizer_get_values`. The tensor set is frozen by the first
//! step.
//!
//! Every fallible function returns an [`Ada2msStatus`]; on failure a
//! description is kept per thread and can be copied out with
//! `ada2ms_last_error_message`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ada2ms::optim::{self, align_hyperparams};
use ada2ms::params::{init_state, HyperParams, OptimizerState, ParamTensor};
use ada2ms::schedule::{AlphaSchedule, LrKind, LrSchedule};
use ada2ms::{Error, OptimizerKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ada2msStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    /// A gradient contained NaN or infinity; nothing was updated.
    NonFinite = 4,
    /// The call is not allowed in the optimizer's current state.
    StateError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ada2msOptimizerKind {
    Sgdm = 0,
    Adamw = 1,
    Ada2ms = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ada2msLrKind {
    Wsds = 0,
    Wsd = 1,
}

/// Mirror of the optimizer hyperparameters. `lambda` is the weight-decay
/// rate, applied to tensors of rank two or more.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ada2msHyperParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

impl From<Ada2msHyperParams> for HyperParams {
    fn from(h: Ada2msHyperParams) -> Self {
        HyperParams {
            beta1: h.beta1,
            beta2: h.beta2,
            epsilon: h.epsilon,
            lambda: h.lambda,
        }
    }
}

impl From<Ada2msOptimizerKind> for OptimizerKind {
    fn from(k: Ada2msOptimizerKind) -> Self {
        match k {
            Ada2msOptimizerKind::Sgdm => OptimizerKind::Sgdm,
            Ada2msOptimizerKind::Adamw => OptimizerKind::Adamw,
            Ada2msOptimizerKind::Ada2ms => OptimizerKind::Ada2ms,
        }
    }
}

/// Opaque optimizer handle.
pub struct Ada2msOptimizer {
    kind: OptimizerKind,
    hp: HyperParams,
    params: Vec<ParamTensor>,
    state: Option<OptimizerState>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: Ada2msStatus, msg: impl Into<String>) -> Ada2msStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> Ada2msStatus {
    let status = match e {
        Error::NonFiniteGradient { .. } => Ada2msStatus::NonFinite,
        Error::ShapeMismatch { .. } | Error::TensorCountMismatch { .. } => {
            Ada2msStatus::ShapeMismatch
        }
        _ => Ada2msStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Run `f`, converting panics into [`Ada2msStatus::Panic`].
fn guard(f: impl FnOnce() -> Ada2msStatus) -> Ada2msStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(Ada2msStatus::Panic, "internal panic"),
    }
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the buffer size needed for the
/// whole message including the terminator; `buf` may be null to query it.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Write the default hyperparameters into `out`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_hyperparams_default(out: *mut Ada2msHyperParams) -> Ada2msStatus {
    if out.is_null() {
        return fail(Ada2msStatus::NullPointer, "out is null");
    }
    let d = HyperParams::default();
    *out = Ada2msHyperParams {
        beta1: d.beta1,
        beta2: d.beta2,
        epsilon: d.epsilon,
        lambda: d.lambda,
    };
    Ada2msStatus::Ok
}

/// Create an optimizer. `hp` may be null for the defaults. On success
/// `*out` receives a handle to release with `ada2ms_optimizer_free`.
///
/// # Safety
/// `hp` must be null or point to a valid struct; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_new(
    kind: Ada2msOptimizerKind,
    hp: *const Ada2msHyperParams,
    out: *mut *mut Ada2msOptimizer,
) -> Ada2msStatus {
    guard(|| {
        if out.is_null() {
            return fail(Ada2msStatus::NullPointer, "out is null");
        }
        let hp: HyperParams = if hp.is_null() {
            HyperParams::default()
        } else {
            (*hp).into()
        };
        if let Err(e) = hp.validate() {
            return from_error(e);
        }
        let opt = Box::new(Ada2msOptimizer {
            kind: kind.into(),
            hp,
            params: Vec::new(),
            state: None,
        });
        *out = Box::into_raw(opt);
        Ada2msStatus::Ok
    })
}

/// Release an optimizer. Null is ignored.
///
/// # Safety
/// `opt` must be null or a handle from `ada2ms_optimizer_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_free(opt: *mut Ada2msOptimizer) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

/// Register a parameter tensor with initial values. `rank` may be 0 for a
/// scalar, in which case `shape` may be null and `len` must be 1.
///
/// # Safety
/// `opt` must be a live handle, `name` a NUL-terminated string, `shape`
/// valid for `rank` reads and `values` for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_add_tensor(
    opt: *mut Ada2msOptimizer,
    name: *const c_char,
    shape: *const usize,
    rank: usize,
    values: *const f64,
    len: usize,
) -> Ada2msStatus {
    guard(|| {
        if opt.is_null() || name.is_null() || values.is_null() || (rank > 0 && shape.is_null()) {
            return fail(Ada2msStatus::NullPointer, "null argument");
        }
        let opt = &mut *opt;
        if opt.state.is_some() {
            return fail(
                Ada2msStatus::StateError,
                "tensors cannot be added after the first step",
            );
        }
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            return fail(Ada2msStatus::InvalidArgument, "tensor name is not UTF-8");
        };
        if opt.params.iter().any(|p| p.name() == name) {
            return from_error(Error::DuplicateTensor(name.to_string()));
        }
        let shape = if rank == 0 {
            Vec::new()
        } else {
            slice::from_raw_parts(shape, rank).to_vec()
        };
        let values = slice::from_raw_parts(values, len).to_vec();
        match ParamTensor::new(name, shape, values) {
            Ok(p) => {
                opt.params.push(p);
                Ada2msStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Apply one optimizer step. `grads` holds `len` values: every tensor's
/// gradient, concatenated in registration order. `alpha` is the switching
/// exponent and is ignored by SGDM and AdamW. On error nothing changes.
///
/// # Safety
/// `opt` must be a live handle and `grads` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_step(
    opt: *mut Ada2msOptimizer,
    grads: *const f64,
    len: usize,
    lr: f64,
    alpha: f64,
) -> Ada2msStatus {
    guard(|| {
        if opt.is_null() || (grads.is_null() && len > 0) {
            return fail(Ada2msStatus::NullPointer, "null argument");
        }
        let opt = &mut *opt;
        let total: usize = opt.params.iter().map(ParamTensor::len).sum();
        if len != total {
            return fail(
                Ada2msStatus::ShapeMismatch,
                format!("expected {total} gradient values, got {len}"),
            );
        }
        if !(lr.is_finite() && lr >= 0.0) {
            return fail(
                Ada2msStatus::InvalidArgument,
                format!("invalid learning rate {lr}"),
            );
        }
        let flat = if len == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(grads, len)
        };
        let mut split = Vec::with_capacity(opt.params.len());
        let mut offset = 0;
        for p in &opt.params {
            split.push(flat[offset..offset + p.len()].to_vec());
            offset += p.len();
        }
        if opt.state.is_none() {
            match init_state(&opt.params) {
                Ok(s) => opt.state = Some(s),
                Err(e) => return from_error(e),
            }
        }
        let state = opt.state.as_mut().expect("state initialised above");
        match optim::step(opt.kind, &mut opt.params, state, &split, lr, alpha, &opt.hp) {
            Ok(_) => Ada2msStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Number of registered tensors.
///
/// # Safety
/// `opt` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_tensor_count(
    opt: *const Ada2msOptimizer,
    out: *mut usize,
) -> Ada2msStatus {
    if opt.is_null() || out.is_null() {
        return fail(Ada2msStatus::NullPointer, "null argument");
    }
    *out = (&*opt).params.len();
    Ada2msStatus::Ok
}

/// Number of steps taken so far.
///
/// # Safety
/// `opt` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_step_count(
    opt: *const Ada2msOptimizer,
    out: *mut u64,
) -> Ada2msStatus {
    if opt.is_null() || out.is_null() {
        return fail(Ada2msStatus::NullPointer, "null argument");
    }
    let opt = &*opt;
    *out = opt.state.as_ref().map_or(0, |s| s.t);
    Ada2msStatus::Ok
}

/// Copy the current values of tensor `index` into `out`, which must hold
/// exactly the tensor's element count `len`.
///
/// # Safety
/// `opt` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_optimizer_get_values(
    opt: *const Ada2msOptimizer,
    index: usize,
    out: *mut f64,
    len: usize,
) -> Ada2msStatus {
    if opt.is_null() || out.is_null() {
        return fail(Ada2msStatus::NullPointer, "null argument");
    }
    let opt = &*opt;
    let Some(p) = opt.params.get(index) else {
        return fail(
            Ada2msStatus::InvalidArgument,
            format!("no tensor at index {index}"),
        );
    };
    if p.len() != len {
        return fail(
            Ada2msStatus::ShapeMismatch,
            format!(
                "tensor `{}` has {} values, buffer holds {len}",
                p.name(),
                p.len()
            ),
        );
    }
    ptr::copy_nonoverlapping(p.values().as_ptr(), out, len);
    Ada2msStatus::Ok
}

/// Learning rate at step `t` of a `total_steps` schedule with the default
/// breakpoints, initial rate and floor.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_lr_at(
    kind: Ada2msLrKind,
    peak: f64,
    total_steps: u64,
    t: u64,
    out: *mut f64,
) -> Ada2msStatus {
    guard(|| {
        if out.is_null() {
            return fail(Ada2msStatus::NullPointer, "out is null");
        }
        let kind = match kind {
            Ada2msLrKind::Wsds => LrKind::Wsds,
            Ada2msLrKind::Wsd => LrKind::Wsd,
        };
        match LrSchedule::with_defaults(kind, peak, total_steps).and_then(|s| s.lr_at(t)) {
            Ok(lr) => {
                *out = lr;
                Ada2msStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Switching exponent at step `t` of a `total_steps` run switching at
/// fraction `switch_frac`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_alpha_at(
    total_steps: u64,
    switch_frac: f64,
    t: u64,
    out: *mut f64,
) -> Ada2msStatus {
    guard(|| {
        if out.is_null() {
            return fail(Ada2msStatus::NullPointer, "out is null");
        }
        let s = AlphaSchedule {
            total_steps,
            switch_frac,
        };
        match s.validate().and_then(|_| s.alpha_at(t)) {
            Ok(a) => {
                *out = a;
                Ada2msStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Transfer a learning rate and weight decay from an optimizer with mean
/// update norm `norm1` to one with `norm2`, keeping their product.
///
/// # Safety
/// `eta2` and `lambda2` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ada2ms_align(
    eta1: f64,
    lambda1: f64,
    norm1: f64,
    norm2: f64,
    eta2: *mut f64,
    lambda2: *mut f64,
) -> Ada2msStatus {
    if eta2.is_null() || lambda2.is_null() {
        return fail(Ada2msStatus::NullPointer, "null argument");
    }
    match align_hyperparams(eta1, lambda1, norm1, norm2) {
        Ok((e, l)) => {
            *eta2 = e;
            *lambda2 = l;
            Ada2msStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
