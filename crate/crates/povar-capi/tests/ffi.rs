//! Exercises the C API through the same entry points a foreign caller would
//! use, comparing results against the underlying library.

use std::ffi::{CStr, CString};

use povar::config::RunConfig;
use povar::solver::{optimal_terminal_wealth, solve, Regime};
use povar_capi::*;

fn default_config_json() -> CString {
    let json = serde_json::to_string(&RunConfig::default()).unwrap();
    CString::new(json).unwrap()
}

fn last_error_string() -> String {
    unsafe { CStr::from_ptr(povar_last_error()) }
        .to_str()
        .unwrap()
        .to_owned()
}

#[test]
fn version_is_the_package_version() {
    let version = unsafe { CStr::from_ptr(povar_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn getters_match_the_library_solution() {
    let config = RunConfig::default();
    let parts = config.to_parts().unwrap();
    let core = solve(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &parts.constraint,
        parts.floor,
    )
    .unwrap();
    assert_eq!(core.regime, Regime::Constrained);

    let json = default_config_json();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null(), "{}", last_error_string());
        assert_eq!(povar_last_error_code(), 0);

        assert_eq!(povar_solver_lambda1(handle), core.lambda1);
        assert_eq!(povar_solver_xi_lower(handle), core.xi_lower);
        assert_eq!(povar_solver_xi_upper(handle), core.xi_upper.unwrap());
        assert_eq!(povar_solver_budget_residual(handle), core.budget_residual);
        assert_eq!(povar_solver_regime(handle), 1);
        assert_eq!(povar_solver_constraint_count(handle), 1);
        assert_eq!(
            povar_solver_constraint_prob(handle, 0),
            core.constraint_prob[0]
        );
        assert!(povar_solver_constraint_prob(handle, 1).is_nan());
        assert!(povar_solver_constraint_prob(handle, -1).is_nan());

        povar_solver_free(handle);
    }
}

#[test]
fn terminal_wealth_matches_the_library_map() {
    let config = RunConfig::default();
    let parts = config.to_parts().unwrap();
    let core = solve(
        &parts.prior,
        &parts.params,
        &parts.utility,
        &parts.constraint,
        parts.floor,
    )
    .unwrap();

    let json = default_config_json();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null());
        for xi in [0.3, 1.2, 1.5, 1.7, 2.4] {
            let mut out = f64::NAN;
            assert_eq!(povar_terminal_wealth(handle, xi, &mut out), 0);
            let expected = optimal_terminal_wealth(&core, &parts.utility, parts.floor, xi).unwrap();
            assert_eq!(out, expected, "xi = {xi}");
        }
        // Inside the flat region the payoff is exactly the floor.
        let mut out = f64::NAN;
        assert_eq!(povar_terminal_wealth(handle, 1.5, &mut out), 0);
        assert_eq!(out, 120.0);

        // Invalid state price: domain error, output untouched.
        let mut out = 7.0;
        assert_eq!(povar_terminal_wealth(handle, -1.0, &mut out), 4);
        assert_eq!(out, 7.0);
        assert!(!last_error_string().is_empty());

        povar_solver_free(handle);
    }
}

#[test]
fn wealth_at_the_origin_is_the_initial_capital() {
    let json = default_config_json();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null());

        let mut wealth = f64::NAN;
        assert_eq!(povar_wealth(handle, 0.0, 0.0, &mut wealth), 0);
        assert!(
            (wealth - 100.0).abs() < 1e-6,
            "h(0,0) = {wealth}, expected the initial capital 100"
        );

        let mut pi = f64::NAN;
        assert_eq!(povar_pi_star(handle, 0.0, 0.0, &mut pi), 0);
        let mut frac = f64::NAN;
        assert_eq!(povar_pi_fraction(handle, 0.0, 0.0, &mut frac), 0);
        assert!((frac - pi / wealth).abs() < 1e-12);

        povar_solver_free(handle);
    }
}

#[test]
fn strategy_refuses_queries_too_close_to_the_horizon() {
    let json = default_config_json();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null());

        let mut out = f64::NAN;
        let code = povar_pi_star(handle, 10.0 - 1e-9, 0.0, &mut out);
        assert_eq!(code, 4);
        assert_eq!(povar_last_error_code(), 4);
        assert!(!last_error_string().is_empty());
        assert!(out.is_nan());

        povar_solver_free(handle);
    }
}

#[test]
fn log_utility_solves_but_has_no_strategy_evaluator() {
    let config = RunConfig {
        utility: povar::utility::Utility::Log,
        ..RunConfig::default()
    };
    let json = CString::new(serde_json::to_string(&config).unwrap()).unwrap();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null(), "{}", last_error_string());
        assert!(povar_solver_lambda1(handle) > 0.0);

        let mut out = f64::NAN;
        assert_eq!(povar_wealth(handle, 0.0, 0.0, &mut out), 4);
        assert!(last_error_string().contains("power utility"));

        povar_solver_free(handle);
    }
}

#[test]
fn malformed_json_reports_a_config_error() {
    let json = CString::new("this is not json").unwrap();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(handle.is_null());
    }
    assert_eq!(povar_last_error_code(), 2);
    assert!(last_error_string().contains("config"));
}

#[test]
fn unknown_fields_are_rejected() {
    let json = CString::new(
        r#"{"market":{"r":0.03,"sigma":0.25,"T":10.0,"x0":100.0,"typo":1},
            "prior":{"values":[0.35],"probs":[1.0]},
            "utility":{"kind":"power","gamma":3.0},
            "constraint":{"kind":"unconstrained","L":0.0}}"#,
    )
    .unwrap();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(handle.is_null());
    }
    assert_eq!(povar_last_error_code(), 2);
}

#[test]
fn infeasible_floor_reports_code_three() {
    let mut config = RunConfig::default();
    config.market.x0 = 60.0;
    let json = CString::new(serde_json::to_string(&config).unwrap()).unwrap();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(handle.is_null());
    }
    assert_eq!(povar_last_error_code(), 3);
    assert!(last_error_string().contains("infeasible"));
}

#[test]
fn null_arguments_are_safe() {
    unsafe {
        povar_solver_free(std::ptr::null_mut());

        assert!(povar_solver_lambda1(std::ptr::null()).is_nan());
        assert!(povar_solver_xi_lower(std::ptr::null()).is_nan());
        assert!(povar_solver_xi_upper(std::ptr::null()).is_nan());
        assert!(povar_solver_budget_residual(std::ptr::null()).is_nan());
        assert_eq!(povar_solver_regime(std::ptr::null()), -1);
        assert_eq!(povar_solver_constraint_count(std::ptr::null()), -1);
        assert!(povar_solver_constraint_prob(std::ptr::null(), 0).is_nan());

        let mut out = f64::NAN;
        assert_eq!(povar_terminal_wealth(std::ptr::null(), 1.0, &mut out), -1);
        assert_eq!(povar_wealth(std::ptr::null(), 0.0, 0.0, &mut out), -1);
        assert_eq!(povar_pi_star(std::ptr::null(), 0.0, 0.0, &mut out), -1);
        assert_eq!(
            povar_solver_new_json(std::ptr::null()),
            std::ptr::null_mut()
        );
        assert_eq!(povar_last_error_code(), -1);

        let json = default_config_json();
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null());
        assert_eq!(povar_terminal_wealth(handle, 1.0, std::ptr::null_mut()), -1);
        povar_solver_free(handle);
    }
}

#[test]
fn merton_regime_is_reported_as_zero() {
    let mut config = RunConfig::default();
    config.constraint.kind = povar::config::ConstraintKind::Unconstrained;
    config.constraint.floor = 0.0;
    config.constraint.beta = None;
    let json = CString::new(serde_json::to_string(&config).unwrap()).unwrap();
    unsafe {
        let handle = povar_solver_new_json(json.as_ptr());
        assert!(!handle.is_null(), "{}", last_error_string());
        assert_eq!(povar_solver_regime(handle), 0);
        assert!(povar_solver_xi_upper(handle).is_nan());
        assert_eq!(povar_solver_xi_lower(handle), f64::INFINITY);
        povar_solver_free(handle);
    }
}
