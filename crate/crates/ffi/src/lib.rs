//! C ABI over the `tfch` library.
//!
//! Conventions:
//! * every fallible function returns a [`TfchStatus`]; results go through
//!   out-pointers;
//! * on failure a message is stored per thread and can be copied out with
//!   [`tfch_last_error_message`];
//! * meshes and solvers are opaque handles created by `*_new`-style
//!   functions and released by the matching `*_free`;
//! * panics never cross the boundary; they surface as `TFCH_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use tfch::solver::{Forcing, ModelParams, Scheme, Solver};
use tfch::spectral::{Field2D, Grid2D};
use tfch::{Error, KernelRow, TimeMesh};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfchStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Mesh = 4,
    FixedPoint = 5,
    NoConvergence = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

/// Time discretisation selector for [`tfch_solver_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfchScheme {
    Fbdf2 = 0,
    Bdf2 = 1,
}

/// Source term selector for [`tfch_solver_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfchForcing {
    None = 0,
    Manufactured = 1,
}

/// Opaque time mesh.
pub struct TfchMesh {
    inner: TimeMesh,
}

/// Opaque solver state.
pub struct TfchSolver {
    inner: Solver,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> TfchStatus {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::NonzeroMean { .. } => TfchStatus::Domain,
        Error::Index(_) | Error::LengthMismatch { .. } | Error::Missing(_) => TfchStatus::InvalidArgument,
        Error::Mesh(_) => TfchStatus::Mesh,
        Error::FixedPoint { .. } => TfchStatus::FixedPoint,
        Error::NoConvergence(_) => TfchStatus::NoConvergence,
        Error::Io(_) | Error::Json(_) => TfchStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F: FnOnce() -> Result<(), (TfchStatus, String)>>(f: F) -> TfchStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TfchStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            TfchStatus::Panic
        }
    }
}

fn lib<T>(r: tfch::Result<T>) -> Result<T, (TfchStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TfchStatus, String) {
    (TfchStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (TfchStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], (TfchStatus, String)> {
    if len < need {
        return Err((TfchStatus::BufferTooSmall, format!("{what} holds {len} values, {need} needed")));
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, need))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (TfchStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

// ---------------------------------------------------------------------------
// errors

/// Length in bytes of the last error message of this thread (without the
/// terminating NUL); 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn tfch_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tfch_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

// ---------------------------------------------------------------------------
// ratio bounds

/// Lower ratio bound `R_* ~ 0.4753`.
#[no_mangle]
pub extern "C" fn tfch_ratio_lower_bound() -> f64 {
    tfch::bounds::R_STAR_LOWER
}

/// Upper ratio bound `r*(alpha)`, `alpha in (0, 1]`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn tfch_r_star(alpha: f64, out: *mut f64) -> TfchStatus {
    guard(|| write(out, lib(tfch::bounds::r_star(alpha))?, "out"))
}

/// Largest admissible grading exponent `gamma_max(alpha)`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn tfch_gamma_max(alpha: f64, out: *mut f64) -> TfchStatus {
    guard(|| write(out, lib(tfch::bounds::gamma_max(alpha))?, "out"))
}

// ---------------------------------------------------------------------------
// meshes

/// Mesh from `n` positive steps.
///
/// # Safety
/// `steps` must point to `n` doubles; `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn tfch_mesh_from_steps(steps: *const f64, n: usize, out: *mut *mut TfchMesh) -> TfchStatus {
    guard(|| {
        let steps = input(steps, n, "steps")?;
        let mesh = lib(TimeMesh::from_steps(steps))?;
        write(out, Box::into_raw(Box::new(TfchMesh { inner: mesh })), "out")
    })
}

/// Graded mesh `t_k = t_end (k/n)^gamma`.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn tfch_mesh_graded(t_end: f64, n: usize, gamma: f64, out: *mut *mut TfchMesh) -> TfchStatus {
    guard(|| {
        let mesh = lib(TimeMesh::graded(t_end, n, gamma))?;
        write(out, Box::into_raw(Box::new(TfchMesh { inner: mesh })), "out")
    })
}

/// Releases a mesh; null is ignored.
///
/// # Safety
/// `mesh` must come from a mesh constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tfch_mesh_free(mesh: *mut TfchMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of steps; 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfch_mesh_num_steps(mesh: *const TfchMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_steps())
}

/// Writes the compact FBDF2 row `B^{(n)}_0 .. B^{(n)}_{n-1}` (lag-indexed)
/// into `out`, which must hold at least `n` values.
///
/// # Safety
/// `mesh` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tfch_mesh_kernel_row(
    mesh: *const TfchMesh,
    alpha: f64,
    n: usize,
    out: *mut f64,
    len: usize,
) -> TfchStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let row = lib(KernelRow::build(&mesh.inner, n, alpha))?;
        output(out, len, n, "out")?.copy_from_slice(&row.b);
        Ok(())
    })
}

/// FBDF2 approximation of the Caputo derivative at level `n` of the
/// values `v^0 .. v^N` (`len = N + 1`).
///
/// # Safety
/// `mesh` must be a live handle; `values` must point to `len` doubles and
/// `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn tfch_caputo(
    mesh: *const TfchMesh,
    alpha: f64,
    values: *const f64,
    len: usize,
    n: usize,
    out: *mut f64,
) -> TfchStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let values = input(values, len, "values")?;
        let d = lib(tfch::kernels::apply_caputo(&mesh.inner, alpha, values, n))?;
        write(out, d, "out")
    })
}

// ---------------------------------------------------------------------------
// solver

/// Creates a solver on an `mx x my` periodic grid of size `lx x ly` with
/// initial data `phi0` (row-major, `mx * my` values). Fixed-point
/// tolerance 1e-12, at most 500 iterations, automatic stabilisation.
/// `scheme` takes a [`TfchScheme`] value and `forcing` a [`TfchForcing`]
/// value; anything else is rejected with `TFCH_STATUS_INVALID_ARGUMENT`.
///
/// # Safety
/// `phi0` must point to `len` doubles; `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_new(
    alpha: f64,
    kappa: f64,
    eps: f64,
    mx: usize,
    my: usize,
    lx: f64,
    ly: f64,
    phi0: *const f64,
    len: usize,
    scheme: i32,
    forcing: i32,
    out: *mut *mut TfchSolver,
) -> TfchStatus {
    guard(|| {
        let params = lib(ModelParams::new(alpha, kappa, eps))?;
        let grid = lib(Grid2D::new(mx, my, lx, ly))?;
        let values = input(phi0, len, "phi0")?.to_vec();
        let field = lib(Field2D::from_values(grid, values))?;
        let scheme = match scheme {
            s if s == TfchScheme::Fbdf2 as i32 => Scheme::Fbdf2,
            s if s == TfchScheme::Bdf2 as i32 => Scheme::Bdf2,
            s => return Err((TfchStatus::InvalidArgument, format!("unknown scheme {s}"))),
        };
        let forcing = match forcing {
            f if f == TfchForcing::None as i32 => Forcing::None,
            f if f == TfchForcing::Manufactured as i32 => Forcing::Manufactured,
            f => return Err((TfchStatus::InvalidArgument, format!("unknown forcing {f}"))),
        };
        let solver = lib(Solver::new(params, scheme, field, forcing))?;
        write(out, Box::into_raw(Box::new(TfchSolver { inner: solver })), "out")
    })
}

/// Releases a solver; null is ignored.
///
/// # Safety
/// `solver` must come from [`tfch_solver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_free(solver: *mut TfchSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Advances one level with step `tau`. On failure the solver is unchanged.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_step(solver: *mut TfchSolver, tau: f64) -> TfchStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        lib(s.inner.step(tau))?;
        Ok(())
    })
}

/// Current level `n`; 0 for a null handle.
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_level(solver: *const TfchSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.inner.n())
}

/// Current time `t_n`; 0 for a null handle.
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_time(solver: *const TfchSolver) -> f64 {
    solver.as_ref().map_or(0.0, |s| s.inner.t())
}

/// Copies the current field (row-major, `mx * my` values) into `out`.
///
/// # Safety
/// `solver` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_field(solver: *const TfchSolver, out: *mut f64, len: usize) -> TfchStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        let values = &s.inner.phi().values;
        output(out, len, values.len(), "out")?.copy_from_slice(values);
        Ok(())
    })
}

/// Ginzburg-Landau energy, mean (volume) and, when already known, the
/// modified energy of the current level. `e_alpha` receives NaN while it
/// is pending (it needs the next step ratio).
///
/// # Safety
/// `solver` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_diagnostics(
    solver: *const TfchSolver,
    energy: *mut f64,
    volume: *mut f64,
    e_alpha: *mut f64,
) -> TfchStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        let entry = s.inner.ledger().last().expect("ledger has the initial entry");
        write(energy, entry.e, "energy")?;
        write(volume, entry.volume, "volume")?;
        write(e_alpha, entry.e_alpha.unwrap_or(f64::NAN), "e_alpha")
    })
}

/// Modified energy of the previous level `n - 1` (known once level `n`
/// exists); NaN when unavailable.
///
/// # Safety
/// `solver` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfch_solver_previous_e_alpha(solver: *const TfchSolver, out: *mut f64) -> TfchStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        let ledger = s.inner.ledger();
        let v = ledger
            .len()
            .checked_sub(2)
            .and_then(|i| ledger[i].e_alpha)
            .unwrap_or(f64::NAN);
        write(out, v, "out")
    })
}

// ---------------------------------------------------------------------------
// certification

/// Runs the randomized kernel/bridging/DGS suites; `all_passed` receives
/// 1 when every suite passed and 0 otherwise.
///
/// # Safety
/// `all_passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfch_verify(seed: u64, trials: usize, max_n: usize, all_passed: *mut i32) -> TfchStatus {
    guard(|| {
        if trials == 0 || max_n < 2 {
            return Err((TfchStatus::InvalidArgument, "need trials >= 1 and max_n >= 2".into()));
        }
        let cfg = tfch::verify::VerifyConfig {
            seed,
            trials,
            max_n,
            ..Default::default()
        };
        let report = lib(tfch::verify::run(&cfg))?;
        write(all_passed, i32::from(report.all_passed), "all_passed")
    })
}
