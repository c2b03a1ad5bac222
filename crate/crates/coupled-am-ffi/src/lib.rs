//! C ABI for the coupled-am analysis engine: opaque model handles, status
//! codes, and plain-buffer entry points so other languages can bind the
//! threshold and density-evolution machinery directly.
//!
//! The generated header lives at `include/coupled_am.h`.

use std::ffi::c_char;
use std::slice;

use coupled_am::de::{self, DEModel, ErrorProfile};
use coupled_am::error::Error;
use coupled_am::poly::{Convention, EdgePolynomial};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamStatus {
    CamOk = 0,
    CamNullPointer = 1,
    CamInvalidArgument = 2,
    CamOutOfDomain = 3,
    CamDegenerate = 4,
}

fn status_of(e: &Error) -> CamStatus {
    match e {
        Error::Domain { .. } => CamStatus::CamOutOfDomain,
        Error::Degenerate(_) | Error::Infeasible(_) => CamStatus::CamDegenerate,
        _ => CamStatus::CamInvalidArgument,
    }
}

/// Opaque handle to a density-evolution model.
pub struct CamModel {
    inner: DEModel,
}

/// NUL-terminated library version string; storage is static.
#[no_mangle]
pub extern "C" fn cam_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates a model from coefficient buffers.
///
/// `lambda[i]` is the pattern-side coefficient of logical index i+1
/// (exponent i+1); `rho[i]` the cluster-side coefficient of index i+1
/// (exponent i). With `normalize` set, coefficient lists are rescaled to sum
/// to one before validation. On success writes a heap handle to `out`; free
/// it with `cam_model_free`.
///
/// # Safety
/// `lambda` and `rho` must point to readable buffers of the stated lengths
/// and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cam_model_new(
    lambda: *const f64,
    lambda_len: usize,
    rho: *const f64,
    rho_len: usize,
    e: u32,
    omega: usize,
    chain_len: usize,
    normalize: bool,
    out: *mut *mut CamModel,
) -> CamStatus {
    if lambda.is_null() || rho.is_null() || out.is_null() {
        return CamStatus::CamNullPointer;
    }
    let lam = slice::from_raw_parts(lambda, lambda_len).to_vec();
    let rh = slice::from_raw_parts(rho, rho_len).to_vec();
    let build = || -> Result<DEModel, Error> {
        let (lam, rh) = if normalize {
            (
                EdgePolynomial::new_normalized(lam, Convention::PatternSide)?,
                EdgePolynomial::new_normalized(rh, Convention::ClusterSide)?,
            )
        } else {
            (
                EdgePolynomial::new(lam, Convention::PatternSide)?,
                EdgePolynomial::new(rh, Convention::ClusterSide)?,
            )
        };
        DEModel::new(lam, rh, e, omega, chain_len)
    };
    match build() {
        Ok(model) => {
            *out = Box::into_raw(Box::new(CamModel { inner: model }));
            CamStatus::CamOk
        }
        Err(err) => status_of(&err),
    }
}

/// Releases a model handle. Passing NULL is a no-op.
///
/// # Safety
/// `model` must be NULL or a pointer returned by `cam_model_new` that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn cam_model_free(model: *mut CamModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(model: *const CamModel) -> Option<&'a DEModel> {
    model.as_ref().map(|m| &m.inner)
}

macro_rules! write_result {
    ($out:expr, $value:expr) => {{
        match $value {
            Ok(v) => {
                *$out = v;
                CamStatus::CamOk
            }
            Err(e) => status_of(&e),
        }
    }};
}

/// Cluster failure probability g(z).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cam_g(model: *const CamModel, z: f64, out: *mut f64) -> CamStatus {
    let (Some(m), false) = (model_ref(model), out.is_null()) else {
        return CamStatus::CamNullPointer;
    };
    write_result!(out, de::g_func(m, z))
}

/// Pattern-side map f(z; p_e) = p_e * lambda(z).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cam_f(
    model: *const CamModel,
    z: f64,
    p_e: f64,
    out: *mut f64,
) -> CamStatus {
    let (Some(m), false) = (model_ref(model), out.is_null()) else {
        return CamStatus::CamNullPointer;
    };
    write_result!(out, de::f_func(m, z, p_e))
}

/// Scalar potential U_s(z; p_e).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cam_potential_scalar(
    model: *const CamModel,
    z: f64,
    p_e: f64,
    out: *mut f64,
) -> CamStatus {
    let (Some(m), false) = (model_ref(model), out.is_null()) else {
        return CamStatus::CamNullPointer;
    };
    write_result!(out, de::potential_scalar(m, z, p_e))
}

/// Energy gap at `p_e`: minimum of the potential over the contraction-
/// violating region, its location, and the below-threshold degeneracy flag.
///
/// # Safety
/// `model` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cam_energy_gap(
    model: *const CamModel,
    p_e: f64,
    out_value: *mut f64,
    out_z: *mut f64,
    out_degenerate: *mut bool,
) -> CamStatus {
    let Some(m) = model_ref(model) else {
        return CamStatus::CamNullPointer;
    };
    if out_value.is_null() || out_z.is_null() || out_degenerate.is_null() {
        return CamStatus::CamNullPointer;
    }
    match de::energy_gap(m, p_e) {
        Ok(gap) => {
            *out_value = gap.value;
            *out_z = gap.z_at;
            *out_degenerate = gap.degenerate;
            CamStatus::CamOk
        }
        Err(e) => status_of(&e),
    }
}

/// Uncoupled and coupled thresholds of the model.
///
/// # Safety
/// `model` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cam_thresholds(
    model: *const CamModel,
    out_dagger: *mut f64,
    out_star: *mut f64,
) -> CamStatus {
    let Some(m) = model_ref(model) else {
        return CamStatus::CamNullPointer;
    };
    if out_dagger.is_null() || out_star.is_null() {
        return CamStatus::CamNullPointer;
    }
    match de::thresholds(m) {
        Ok(t) => {
            *out_dagger = t.p_dagger;
            *out_star = t.p_star;
            CamStatus::CamOk
        }
        Err(e) => status_of(&e),
    }
}

/// One coupled density-evolution step applied in place to `z[0..len]`.
/// `len` must equal the model's chain length; with `constrained` set the
/// first and last omega entries are pinned to zero after the step.
///
/// # Safety
/// `model` must be a live handle; `z` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cam_de_step_coupled(
    model: *const CamModel,
    z: *mut f64,
    len: usize,
    p_e: f64,
    constrained: bool,
) -> CamStatus {
    let Some(m) = model_ref(model) else {
        return CamStatus::CamNullPointer;
    };
    if z.is_null() {
        return CamStatus::CamNullPointer;
    }
    let buf = slice::from_raw_parts_mut(z, len);
    let profile = match ErrorProfile::new(buf.to_vec()) {
        Ok(p) => p,
        Err(e) => return status_of(&e),
    };
    match de::de_step_coupled(m, &profile, p_e) {
        Ok(mut next) => {
            if constrained {
                next.pin_boundary(m.omega());
            }
            buf.copy_from_slice(next.values());
            CamStatus::CamOk
        }
        Err(e) => status_of(&e),
    }
}

/// Finite-difference estimate of the sufficient coupling width
/// ||U''||_inf / Delta_E at `p_e`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cam_sufficient_coupling(
    model: *const CamModel,
    p_e: f64,
    out: *mut f64,
) -> CamStatus {
    let (Some(m), false) = (model_ref(model), out.is_null()) else {
        return CamStatus::CamNullPointer;
    };
    write_result!(out, de::sufficient_coupling(m, p_e))
}
