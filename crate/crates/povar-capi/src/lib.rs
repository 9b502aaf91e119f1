//! C interface for the povar solver.
//!
//! The API hands out an opaque [`PovarSolver`] that owns a calibrated
//! solution (plus, for power utility, the strategy evaluation context).
//! Construction takes the run configuration as a JSON document with the same
//! schema as the CLI's TOML file.
//!
//! Conventions:
//! - functions returning a pointer yield NULL on failure;
//! - functions returning `int` yield 0 on success or a nonzero error class
//!   (2 invalid input/config, 3 infeasible, 4 domain/capability/numeric),
//!   with -1 reserved for NULL arguments;
//! - scalar getters on a NULL handle return NaN (or -1 for the regime);
//! - after any failure, `povar_last_error` returns a message valid on the
//!   calling thread until the next API call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use povar::config::{Parts, RunConfig};
use povar::error::Error;
use povar::solver::{optimal_terminal_wealth, solve, Regime, Solution};
use povar::strategy::StrategyContext;

/// Opaque calibrated-solver handle.
pub struct PovarSolver {
    parts: Parts,
    solution: Solution,
    strategy: Option<StrategyContext>,
}

thread_local! {
    static LAST_ERROR: RefCell<(CString, c_int)> =
        RefCell::new((CString::new("").unwrap(), 0));
}

fn set_error(message: &str, code: c_int) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = (CString::new(sanitized).unwrap(), code);
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = (CString::new("").unwrap(), 0);
    });
}

fn set_error_from(err: &Error) -> c_int {
    let code = err.exit_code();
    set_error(&err.to_string(), code);
    code
}

const PANIC_CODE: c_int = 4;

/// Run `body`, translating panics into an error code instead of unwinding
/// across the FFI boundary.
fn guarded<T>(fallback: T, body: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(value) => value,
        Err(_) => {
            set_error("internal panic", PANIC_CODE);
            fallback
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn povar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread ("" if none).
/// The pointer stays valid until the next povar call on the same thread.
#[no_mangle]
pub extern "C" fn povar_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().0.as_ptr())
}

/// Error class of the most recent failure on this thread (0 if none).
#[no_mangle]
pub extern "C" fn povar_last_error_code() -> c_int {
    LAST_ERROR.with(|slot| slot.borrow().1)
}

/// Calibrate a solver from a JSON run configuration. Returns NULL on
/// failure; inspect `povar_last_error`/`povar_last_error_code`.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_new_json(config_json: *const c_char) -> *mut PovarSolver {
    if config_json.is_null() {
        set_error("config_json is NULL", -1);
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config_json is not valid UTF-8", 2);
            return std::ptr::null_mut();
        }
    };
    guarded(std::ptr::null_mut(), || match build_solver(text) {
        Ok(solver) => {
            clear_error();
            Box::into_raw(Box::new(solver))
        }
        Err(err) => {
            set_error_from(&err);
            std::ptr::null_mut()
        }
    })
}

fn build_solver(config_json: &str) -> Result<PovarSolver, Error> {
    let config: RunConfig = serde_json::from_str(config_json)
        .map_err(|e| Error::Config(format!("cannot parse config JSON: {e}")))?;
    let parts = config.to_parts()?;
    let solution = solve(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &parts.constraint,
        parts.floor,
    )?;
    // The strategy context exists only for power utility; its absence is
    // reported lazily by the evaluation calls.
    let strategy = StrategyContext::new(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &solution,
        parts.floor,
    )
    .ok();
    Ok(PovarSolver {
        parts,
        solution,
        strategy,
    })
}

/// Destroy a handle obtained from `povar_solver_new_json`. NULL is a no-op.
///
/// # Safety
/// `solver` must be NULL or a pointer previously returned by
/// `povar_solver_new_json` that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_free(solver: *mut PovarSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

unsafe fn solver_ref<'a>(solver: *const PovarSolver) -> Option<&'a PovarSolver> {
    if solver.is_null() {
        set_error("solver handle is NULL", -1);
        None
    } else {
        Some(&*solver)
    }
}

/// Budget multiplier λ₁. NaN on NULL.
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_lambda1(solver: *const PovarSolver) -> f64 {
    solver_ref(solver).map_or(f64::NAN, |s| s.solution.lambda1)
}

/// Lower threshold ξ̲ = U′(L)/λ₁ (+∞ when the floor is zero). NaN on NULL.
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_xi_lower(solver: *const PovarSolver) -> f64 {
    solver_ref(solver).map_or(f64::NAN, |s| s.solution.xi_lower)
}

/// Upper threshold ξ̄; NaN when the solution has none (or on NULL).
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_xi_upper(solver: *const PovarSolver) -> f64 {
    solver_ref(solver).map_or(f64::NAN, |s| s.solution.xi_upper.unwrap_or(f64::NAN))
}

/// Residual of the budget identity at the calibrated multiplier. NaN on NULL.
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_budget_residual(solver: *const PovarSolver) -> f64 {
    solver_ref(solver).map_or(f64::NAN, |s| s.solution.budget_residual)
}

/// Regime of the calibrated solution: 0 Merton, 1 constrained, 2 insurance;
/// -1 on NULL.
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_regime(solver: *const PovarSolver) -> c_int {
    solver_ref(solver).map_or(-1, |s| match s.solution.regime {
        Regime::Merton => 0,
        Regime::Constrained => 1,
        Regime::Insurance => 2,
    })
}

/// Number of per-belief constraint probabilities available.
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_constraint_count(solver: *const PovarSolver) -> c_int {
    solver_ref(solver).map_or(-1, |s| s.solution.constraint_prob.len() as c_int)
}

/// P̃ᵢ(X*_T ≥ L) for belief index `index`; NaN when out of range or NULL.
///
/// # Safety
/// `solver` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn povar_solver_constraint_prob(
    solver: *const PovarSolver,
    index: c_int,
) -> f64 {
    solver_ref(solver).map_or(f64::NAN, |s| {
        usize::try_from(index)
            .ok()
            .and_then(|i| s.solution.constraint_prob.get(i).copied())
            .unwrap_or(f64::NAN)
    })
}

unsafe fn eval_out(
    solver: *const PovarSolver,
    out: *mut f64,
    eval: impl FnOnce(&PovarSolver) -> Result<f64, Error>,
) -> c_int {
    let Some(s) = solver_ref(solver) else {
        return -1;
    };
    if out.is_null() {
        set_error("output pointer is NULL", -1);
        return -1;
    }
    guarded(PANIC_CODE, || match eval(s) {
        Ok(value) => {
            clear_error();
            *out = value;
            0
        }
        Err(err) => set_error_from(&err),
    })
}

/// Optimal terminal wealth X*(ξ) at state price `xi`.
///
/// # Safety
/// `solver` must be NULL or a live handle; `out` must be NULL or valid for
/// one f64 write.
#[no_mangle]
pub unsafe extern "C" fn povar_terminal_wealth(
    solver: *const PovarSolver,
    xi: f64,
    out: *mut f64,
) -> c_int {
    eval_out(solver, out, |s| {
        optimal_terminal_wealth(&s.solution, &s.parts.utility, s.parts.floor, xi)
    })
}

fn strategy_of(s: &PovarSolver) -> Result<&StrategyContext, Error> {
    s.strategy.as_ref().ok_or_else(|| {
        Error::Capability(
            "strategy evaluation is available for power utility with a non-negative prior \
             support only"
                .into(),
        )
    })
}

/// Wealth h(t, y) of the optimal strategy (power utility only).
///
/// # Safety
/// `solver` must be NULL or a live handle; `out` must be NULL or valid for
/// one f64 write.
#[no_mangle]
pub unsafe extern "C" fn povar_wealth(
    solver: *const PovarSolver,
    t: f64,
    y: f64,
    out: *mut f64,
) -> c_int {
    eval_out(solver, out, |s| strategy_of(s)?.h(t, y))
}

/// Optimal invested amount π*(t, y) (power utility only; refuses t closer to
/// the horizon than 1e-6).
///
/// # Safety
/// `solver` must be NULL or a live handle; `out` must be NULL or valid for
/// one f64 write.
#[no_mangle]
pub unsafe extern "C" fn povar_pi_star(
    solver: *const PovarSolver,
    t: f64,
    y: f64,
    out: *mut f64,
) -> c_int {
    eval_out(solver, out, |s| strategy_of(s)?.pi_star(t, y))
}

/// Invested fraction π*(t, y)/h(t, y) (power utility only).
///
/// # Safety
/// `solver` must be NULL or a live handle; `out` must be NULL or valid for
/// one f64 write.
#[no_mangle]
pub unsafe extern "C" fn povar_pi_fraction(
    solver: *const PovarSolver,
    t: f64,
    y: f64,
    out: *mut f64,
) -> c_int {
    eval_out(solver, out, |s| strategy_of(s)?.pi_fraction(t, y))
}
