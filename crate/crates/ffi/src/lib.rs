//! C ABI over `spinor-squeeze`.
//!
//! Every fallible call returns an [`SsStatus`]; on failure a message is kept
//! per thread and read back with [`ss_last_error`]. Handles are opaque and
//! owned by the caller, who releases them with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use spinor_squeeze::basis::{ModelParams, SectorState};
use spinor_squeeze::error::Error;
use spinor_squeeze::hamiltonian::build_spin_hamiltonian;
use spinor_squeeze::observables::{self, measure};
use spinor_squeeze::propagator::{Propagator, PropagatorConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Convergence = 4,
    Degenerate = 5,
    Panic = 6,
}

impl From<&Error> for SsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } | Error::AtomNumberMismatch { .. } => SsStatus::DimensionMismatch,
            Error::KrylovConvergence { .. } | Error::EigenConvergence { .. } => SsStatus::Convergence,
            Error::DegenerateDenominator { .. } => SsStatus::Degenerate,
            Error::AtGridIndex { source, .. } => SsStatus::from(source.as_ref()),
            _ => SsStatus::InvalidArgument,
        }
    }
}

/// Sector state `sum_n c_n |N - 2n, n, n>`.
pub struct SsState(SectorState);

/// Propagator bound to one atom number and coupling.
pub struct SsPropagator {
    atom_count: usize,
    inner: Propagator,
}

/// Observables of one state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SsObservables {
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub e3_bits: f64,
    pub pop_m0: f64,
    pub quad_criterion: f64,
    pub norm_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status.
fn guard<F>(body: F) -> SsStatus
where
    F: FnOnce() -> Result<(), (SsStatus, String)>,
{
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            SsStatus::Panic
        }
    }
}

fn core(e: Error) -> (SsStatus, String) {
    (SsStatus::from(&e), e.to_string())
}

fn null(name: &str) -> (SsStatus, String) {
    (SsStatus::NullPointer, format!("{name} is null"))
}

/// Message for the last failed call on this thread, or null if it succeeded.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of pair states `floor(N / 2) + 1`.
#[no_mangle]
pub extern "C" fn ss_sector_dimension(n_atoms: usize) -> usize {
    spinor_squeeze::basis::sector_dimension(n_atoms)
}

/// Writes a new polar state (all atoms in `m_f = 0`) to `*out`.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ss_state_polar(n_atoms: usize, out: *mut *mut SsState) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let state = SectorState::polar(n_atoms).map_err(core)?;
        *out = Box::into_raw(Box::new(SsState(state)));
        Ok(())
    })
}

/// Builds a state from `dimension` real and imaginary parts.
///
/// # Safety
/// `re` and `im` must each be valid for `dimension` reads; `out` for a write.
#[no_mangle]
pub unsafe extern "C" fn ss_state_from_amplitudes(
    n_atoms: usize,
    re: *const f64,
    im: *const f64,
    dimension: usize,
    out: *mut *mut SsState,
) -> SsStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("amplitude buffer"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let re = std::slice::from_raw_parts(re, dimension);
        let im = std::slice::from_raw_parts(im, dimension);
        let amplitudes = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let state = SectorState::from_amplitudes(n_atoms, amplitudes).map_err(core)?;
        *out = Box::into_raw(Box::new(SsState(state)));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_state_free(state: *mut SsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Sector dimension of `state`, or 0 if it is null.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_state_dimension(state: *const SsState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dimension())
}

/// Copies the amplitudes into `re` and `im`, each of length `capacity`.
///
/// # Safety
/// `state` must be a live handle; `re` and `im` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn ss_state_amplitudes(
    state: *const SsState,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
) -> SsStatus {
    guard(|| {
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let amps = state.0.amplitudes();
        if capacity != amps.len() {
            return Err(core(Error::DimensionMismatch {
                expected: amps.len(),
                actual: capacity,
            }));
        }
        let re = std::slice::from_raw_parts_mut(re, capacity);
        let im = std::slice::from_raw_parts_mut(im, capacity);
        for ((r, i), c) in re.iter_mut().zip(im.iter_mut()).zip(amps) {
            *r = c.re;
            *i = c.im;
        }
        Ok(())
    })
}

/// Measures the squeezing, entanglement and population observables.
///
/// # Safety
/// `state` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ss_measure(state: *const SsState, out: *mut SsObservables) -> SsStatus {
    guard(|| {
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = measure(&state.0).map_err(core)?;
        *out = SsObservables {
            xi_plus: r.xi_plus,
            xi_minus: r.xi_minus,
            theta_plus: r.theta_plus,
            theta_minus: r.theta_minus,
            e3_bits: r.e3_bits,
            pop_m0: r.pop_m0,
            quad_criterion: r.quad_criterion,
            norm_error: r.norm_error,
        };
        Ok(())
    })
}

/// Propagator for `N` atoms with coupling `lambda_a_prime` (rad/s), default
/// tolerances and Zeeman shift zero.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ss_propagator_new(
    n_atoms: usize,
    lambda_a_prime: f64,
    out: *mut *mut SsPropagator,
) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::new(n_atoms, lambda_a_prime);
        params.validate().map_err(core)?;
        let h = build_spin_hamiltonian(&params).map_err(core)?;
        let inner = Propagator::new(&h, lambda_a_prime, PropagatorConfig::default()).map_err(core)?;
        *out = Box::into_raw(Box::new(SsPropagator {
            atom_count: n_atoms,
            inner,
        }));
        Ok(())
    })
}

/// # Safety
/// `prop` must be null or a pointer from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_propagator_free(prop: *mut SsPropagator) {
    if !prop.is_null() {
        drop(Box::from_raw(prop));
    }
}

/// Writes `exp(-i (H / lambda') tau) state` to a new handle in `*out`.
///
/// # Safety
/// `prop` and `state` must be live handles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ss_propagator_evolve(
    prop: *const SsPropagator,
    state: *const SsState,
    tau: f64,
    out: *mut *mut SsState,
) -> SsStatus {
    guard(|| {
        let prop = prop.as_ref().ok_or_else(|| null("propagator"))?;
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if state.0.atom_count() != prop.atom_count {
            return Err(core(Error::AtomNumberMismatch {
                left: state.0.atom_count(),
                right: prop.atom_count,
            }));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err((
                SsStatus::InvalidArgument,
                format!("tau must be finite and non-negative, got {tau}"),
            ));
        }
        let evolved = prop.inner.evolve(&state.0, tau).map_err(core)?;
        *out = Box::into_raw(Box::new(SsState(evolved)));
        Ok(())
    })
}

/// One-axis-twisting reference `xi(tau)` for the coherent state of `N` atoms
/// under `4 lambda' (J^x)^2`, at `len` increasing times starting from 0.
///
/// # Safety
/// `taus` must be valid for `len` reads and `out` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ss_oat_squeezing(
    n_atoms: usize,
    lambda_a_prime: f64,
    taus: *const f64,
    len: usize,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        if taus.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let grid = std::slice::from_raw_parts(taus, len);
        let curve = observables::oat_squeezing_curve(n_atoms, lambda_a_prime, grid).map_err(core)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&curve);
        Ok(())
    })
}
