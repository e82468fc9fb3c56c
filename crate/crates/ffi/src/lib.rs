//! C ABI over `qrd-core`.
//!
//! Instances and results are opaque heap handles created by `qrd_*_new` /
//! `qrd_solve` and released with the matching `*_free`. Every fallible call
//! returns a [`QrdStatus`]; on failure [`qrd_last_error_message`] describes
//! the error for the calling thread. Matrices cross the boundary as
//! row-major `double` arrays of real and imaginary parts, where a null
//! imaginary pointer means a real matrix.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qrd_core::hermitian::HermitianMatrix;
use qrd_core::problem::{self, DensityMatrix, ProblemInstance};
use qrd_core::solver::{self, SolverConfig, SolverPath, SolverResult, SolverStatus};
use qrd_core::{oracles, sym, Error};

/// Return code of every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotHermitian = 3,
    NotDensity = 4,
    DimensionMismatch = 5,
    Infeasible = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Termination state of a solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrdSolveStatus {
    Converged = 0,
    MaxIterReached = 1,
    RateZeroShortcut = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrdPath {
    Dense = 0,
    Symmetric = 1,
    DenseFallback = 2,
}

/// Solver settings; obtain defaults from [`qrd_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QrdConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub alpha: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
}

/// Opaque problem instance.
pub struct QrdInstance {
    inner: ProblemInstance,
}

/// Opaque solver result.
pub struct QrdResult {
    inner: SolverResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> QrdStatus {
    match err {
        Error::NotHermitian { .. } => QrdStatus::NotHermitian,
        Error::NotDensity(_) => QrdStatus::NotDensity,
        Error::DimensionMismatch { .. } | Error::NotSquare { .. } | Error::EmptyMatrix => {
            QrdStatus::DimensionMismatch
        }
        Error::Infeasible { .. } => QrdStatus::Infeasible,
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::DistortionNotPsd { .. } => {
            QrdStatus::InvalidArgument
        }
        Error::AtIteration { source, .. } => status_of(source),
        _ => QrdStatus::Numerical,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (QrdStatus, String)>) -> QrdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            QrdStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (QrdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (QrdStatus, String) {
    (QrdStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `re` must point to `dim*dim` doubles; `im` is null or does too.
unsafe fn read_matrix(
    dim: usize,
    re: *const f64,
    im: *const f64,
) -> Result<HermitianMatrix, (QrdStatus, String)> {
    if re.is_null() {
        return Err(null_err("real part"));
    }
    let len = dim
        .checked_mul(dim)
        .ok_or((QrdStatus::InvalidArgument, "dimension overflow".into()))?;
    let re = std::slice::from_raw_parts(re, len);
    let im = if im.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(im, len))
    };
    let rows = |s: &[f64]| {
        s.chunks(dim.max(1))
            .map(<[f64]>::to_vec)
            .collect::<Vec<_>>()
    };
    let re_rows = rows(re);
    let im_rows = im.map(rows).unwrap_or_else(|| vec![vec![0.0; dim]; dim]);
    HermitianMatrix::from_parts(&re_rows, &im_rows, 1e-10).map_err(core_err)
}

fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (QrdStatus, String)> {
    if out.is_null() {
        return Err(null_err("output handle"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn qrd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qrd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn qrd_config_default() -> QrdConfig {
    let c = SolverConfig::default();
    QrdConfig {
        max_iter: c.max_iter,
        tol: c.tol,
        alpha: c.alpha,
        newton_tol: c.newton_tol,
        newton_max: c.newton_max,
    }
}

/// Closed-form rate in nats of the maximally mixed source.
#[no_mangle]
pub extern "C" fn qrd_analytic_uniform_rd(n: usize, d: f64) -> f64 {
    oracles::analytic_uniform_rd(n, d)
}

/// Maximally mixed source of dimension `n` with the entanglement-fidelity
/// distortion.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn qrd_instance_new_uniform(
    n: usize,
    d: f64,
    out: *mut *mut QrdInstance,
) -> QrdStatus {
    guard(|| {
        if n == 0 {
            return Err((QrdStatus::InvalidArgument, "n must be at least 1".into()));
        }
        let inner = ProblemInstance::entanglement_fidelity(problem::uniform_input(n), d)
            .map_err(core_err)?;
        emit(out, QrdInstance { inner })
    })
}

/// Hilbert-Schmidt random source with the entanglement-fidelity distortion.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn qrd_instance_new_random(
    n: usize,
    seed: u64,
    d: f64,
    out: *mut *mut QrdInstance,
) -> QrdStatus {
    guard(|| {
        if n == 0 {
            return Err((QrdStatus::InvalidArgument, "n must be at least 1".into()));
        }
        let rho = problem::hilbert_schmidt_random(n, seed);
        let inner = ProblemInstance::entanglement_fidelity(rho, d).map_err(core_err)?;
        emit(out, QrdInstance { inner })
    })
}

/// Source given as an `n × n` density matrix. A null `delta_re` selects the
/// entanglement-fidelity distortion; otherwise `delta_*` hold an
/// `(n·m) × (n·m)` distortion matrix.
///
/// # Safety
/// `rho_re` points to `n*n` doubles and `rho_im` is null or does too;
/// `delta_re`/`delta_im` likewise for `(n*m)^2`; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn qrd_instance_new(
    n: usize,
    rho_re: *const f64,
    rho_im: *const f64,
    m: usize,
    delta_re: *const f64,
    delta_im: *const f64,
    d: f64,
    out: *mut *mut QrdInstance,
) -> QrdStatus {
    guard(|| {
        if n == 0 {
            return Err((QrdStatus::InvalidArgument, "n must be at least 1".into()));
        }
        let rho = DensityMatrix::new(read_matrix(n, rho_re, rho_im)?).map_err(core_err)?;
        let inner = if delta_re.is_null() {
            ProblemInstance::entanglement_fidelity(rho, d)
        } else {
            if m == 0 {
                return Err((QrdStatus::InvalidArgument, "m must be at least 1".into()));
            }
            let delta = read_matrix(n * m, delta_re, delta_im)?;
            ProblemInstance::with_distortion(rho, delta, m, d)
        }
        .map_err(core_err)?;
        emit(out, QrdInstance { inner })
    })
}

/// # Safety
/// `inst` is null or a handle from a `qrd_instance_new*` call, freed once.
#[no_mangle]
pub unsafe extern "C" fn qrd_instance_free(inst: *mut QrdInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` is a valid instance handle.
#[no_mangle]
pub unsafe extern "C" fn qrd_instance_dims(
    inst: *const QrdInstance,
    n: *mut usize,
    m: *mut usize,
) -> QrdStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null_err("instance"))?;
        if n.is_null() || m.is_null() {
            return Err(null_err("dimension output"));
        }
        *n = inst.inner.n();
        *m = inst.inner.m();
        Ok(())
    })
}

/// Solves `inst` on the requested path. A null `config` uses the defaults.
/// Non-convergence is not an error: inspect [`qrd_result_status`].
///
/// # Safety
/// `inst` is a valid instance handle, `config` is null or valid, `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn qrd_solve(
    inst: *const QrdInstance,
    config: *const QrdConfig,
    path: QrdPath,
    out: *mut *mut QrdResult,
) -> QrdStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null_err("instance"))?;
        let c = config
            .as_ref()
            .copied()
            .unwrap_or_else(|| qrd_config_default());
        let cfg = SolverConfig {
            max_iter: c.max_iter,
            tol: c.tol,
            alpha: c.alpha,
            newton_tol: c.newton_tol,
            newton_max: c.newton_max,
            record_trace: false,
        };
        let inner = match path {
            QrdPath::Symmetric => sym::solve_sym(&inst.inner, &cfg),
            QrdPath::Dense | QrdPath::DenseFallback => solver::solve(&inst.inner, &cfg),
        }
        .map_err(core_err)?;
        emit(out, QrdResult { inner })
    })
}

/// # Safety
/// `res` is null or a handle from [`qrd_solve`], freed once.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_free(res: *mut QrdResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Rate in nats, or NaN for a null handle.
///
/// # Safety
/// `res` is null or a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_rate(res: *const QrdResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.rate)
}

/// Final multiplier β (`+inf` at `D = 0`), or NaN for a null handle.
///
/// # Safety
/// `res` is null or a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_beta(res: *const QrdResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.dual.beta)
}

/// # Safety
/// `res` is null or a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_final_e_opt(res: *const QrdResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.final_e_opt)
}

/// # Safety
/// `res` is null or a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_iterations(res: *const QrdResult) -> usize {
    res.as_ref().map_or(0, |r| r.inner.iterations)
}

/// # Safety
/// `res` is a valid result handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_status(
    res: *const QrdResult,
    out: *mut QrdSolveStatus,
) -> QrdStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null_err("result"))?;
        let out = out.as_mut().ok_or_else(|| null_err("status output"))?;
        *out = match r.inner.status {
            SolverStatus::Converged => QrdSolveStatus::Converged,
            SolverStatus::MaxIterReached => QrdSolveStatus::MaxIterReached,
            SolverStatus::RateZeroShortcut => QrdSolveStatus::RateZeroShortcut,
        };
        Ok(())
    })
}

/// # Safety
/// `res` is a valid result handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_path(res: *const QrdResult, out: *mut QrdPath) -> QrdStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null_err("result"))?;
        let out = out.as_mut().ok_or_else(|| null_err("path output"))?;
        *out = match r.inner.path {
            SolverPath::Dense => QrdPath::Dense,
            SolverPath::Symmetric => QrdPath::Symmetric,
            SolverPath::DenseFallback => QrdPath::DenseFallback,
        };
        Ok(())
    })
}

/// # Safety
/// `re` and `im` each point to `len` writable doubles.
unsafe fn write_matrix(
    m: &HermitianMatrix,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> Result<(), (QrdStatus, String)> {
    let dim = m.dim();
    if re.is_null() || im.is_null() {
        return Err(null_err("output buffer"));
    }
    if len < dim * dim {
        return Err((
            QrdStatus::BufferTooSmall,
            format!("buffer holds {len} entries, {} needed", dim * dim),
        ));
    }
    let re = std::slice::from_raw_parts_mut(re, dim * dim);
    let im = std::slice::from_raw_parts_mut(im, dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let z = m.get(i, j);
            re[i * dim + j] = z.re;
            im[i * dim + j] = z.im;
        }
    }
    Ok(())
}

/// Copies the `m × m` output state `σ_B` in row-major order.
///
/// # Safety
/// `res` is valid; `re` and `im` point to at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_sigma_b(
    res: *const QrdResult,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QrdStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null_err("result"))?;
        write_matrix(r.inner.sigma_b.as_hermitian(), re, im, len)
    })
}

/// Copies the `n × n` multiplier `exp(-Λ_R)`.
///
/// # Safety
/// `res` is valid; `re` and `im` point to at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_exp_neg_lambda(
    res: *const QrdResult,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QrdStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null_err("result"))?;
        write_matrix(r.inner.dual.exp_neg_lambda(), re, im, len)
    })
}

/// Copies the `(n·m) × (n·m)` joint state. Symmetric-path results are
/// expanded to dense form, which costs `O(n⁶)` memory traffic.
///
/// # Safety
/// `res` is valid; `re` and `im` point to at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qrd_result_rho_rb(
    res: *const QrdResult,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QrdStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null_err("result"))?;
        write_matrix(&r.inner.rho_rb.to_dense(), re, im, len)
    })
}
