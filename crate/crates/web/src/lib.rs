//! Browser bindings for the trajectory engine.
//!
//! Three operations, each taking a JSON parameter string and returning a JSON
//! result string, so the page needs no generated glue beyond wasm-bindgen's
//! string passing:
//!
//! * [`reference_curve`]: integrate the deterministic nonlinear mean-field
//!   equation and return the Bloch-coordinate path of the solution.
//! * [`trajectory_curve`]: run one interacting stochastic ensemble and return
//!   the Bloch path of its empirical mean next to the reference path.
//! * [`convergence_points`]: run a small ensemble-size ladder and return the
//!   per-size mean squared errors with the fitted log-log slope.
//!
//! The model is the shipped qubit example with the interaction strength
//! exposed as a knob; parameter budgets keep every call comfortably inside an
//! interactive frame on one thread. Each operation lives as a plain function
//! returning `Result<String, String>` (unit-testable on any target) with a
//! thin wasm-bindgen wrapper converting errors at the JS boundary only,
//! because `JsValue` cannot be constructed off-wasm.

use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use unravel_core::experiments::convergence_study;
use unravel_core::generators::{solve_meanfield_reference, ModelSpec, TimeSeries};
use unravel_core::kernel::InteractionKernel;
use unravel_core::ops;
use unravel_core::trajectories::{simulate, SchemeConfig, SchemeMode};

/// Hard ceilings so a mistyped parameter cannot freeze the browser tab.
const MAX_STEPS: usize = 20_000;
const MAX_PARTICLES: usize = 4_096;
const MAX_PARTICLE_STEPS: usize = 8_000_000;
const MAX_COUPLING: f64 = 20.0;
const MAX_HORIZON: f64 = 5.0;

const LADDER: [usize; 5] = [8, 16, 32, 64, 128];
const LADDER_SEEDS: [u64; 6] = [1, 2, 3, 4, 5, 6];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoParams {
    #[serde(default = "defaults::n")]
    n: usize,
    #[serde(default = "defaults::seed")]
    seed: u64,
    #[serde(default = "defaults::dt")]
    dt: f64,
    #[serde(default = "defaults::t_final")]
    t_final: f64,
    /// Scale of the alignment-projector interaction kernel; 0 decouples the
    /// particles, 3 is the shipped example.
    #[serde(default = "defaults::coupling")]
    coupling: f64,
    #[serde(default = "defaults::mode")]
    mode: SchemeMode,
}

mod defaults {
    use unravel_core::trajectories::SchemeMode;

    pub fn n() -> usize {
        128
    }
    pub fn seed() -> u64 {
        7
    }
    pub fn dt() -> f64 {
        5e-3
    }
    pub fn t_final() -> f64 {
        1.0
    }
    pub fn coupling() -> f64 {
        3.0
    }
    pub fn mode() -> SchemeMode {
        SchemeMode::NormalizedDensity
    }
}

fn parse(params: &str) -> Result<DemoParams, String> {
    let p: DemoParams = serde_json::from_str(params).map_err(|e| format!("bad parameters: {e}"))?;
    if !(p.dt > 0.0 && p.dt.is_finite()) {
        return Err("dt must be positive".into());
    }
    if !(p.t_final > 0.0 && p.t_final <= MAX_HORIZON) {
        return Err(format!("t_final must lie in (0, {MAX_HORIZON}]"));
    }
    if !(p.coupling.is_finite() && p.coupling.abs() <= MAX_COUPLING) {
        return Err(format!(
            "coupling must lie in [-{MAX_COUPLING}, {MAX_COUPLING}]"
        ));
    }
    if p.n == 0 || p.n > MAX_PARTICLES {
        return Err(format!("n must lie in 1..={MAX_PARTICLES}"));
    }
    Ok(p)
}

fn demo_spec(coupling: f64) -> Result<ModelSpec, String> {
    ModelSpec::qubit_example()
        .with_kernel(InteractionKernel::alignment_projector().scaled(coupling))
        .map_err(|e| e.to_string())
}

fn scheme_for(p: &DemoParams, budget_particles: usize) -> Result<SchemeConfig, String> {
    let scheme = SchemeConfig::new(p.mode, p.dt, p.t_final);
    let steps = scheme.steps().map_err(|e| e.to_string())?;
    if steps > MAX_STEPS {
        return Err(format!(
            "{steps} steps exceed the demo budget of {MAX_STEPS}"
        ));
    }
    if budget_particles * steps > MAX_PARTICLE_STEPS {
        return Err(format!(
            "n x steps = {} exceeds the demo budget of {MAX_PARTICLE_STEPS}",
            budget_particles * steps
        ));
    }
    Ok(scheme)
}

fn bloch_path(series: &TimeSeries) -> (Vec<f64>, Vec<[f64; 3]>, Vec<f64>) {
    let mut t = Vec::with_capacity(series.len());
    let mut bloch = Vec::with_capacity(series.len());
    let mut purity = Vec::with_capacity(series.len());
    for (k, state) in series.states.iter().enumerate() {
        let (x, y, z) = ops::bloch_coords(state);
        t.push(series.time(k));
        bloch.push([x, y, z]);
        purity.push(ops::purity(state));
    }
    (t, bloch, purity)
}

fn reference_curve_impl(params: &str) -> Result<String, String> {
    let p = parse(params)?;
    let spec = demo_spec(p.coupling)?;
    let scheme = scheme_for(&p, 1)?;
    let (series, report) =
        solve_meanfield_reference(&spec, scheme.dt, scheme.t_final).map_err(|e| e.to_string())?;
    let (t, bloch, purity) = bloch_path(&series);
    Ok(json!({
        "t": t,
        "bloch": bloch,
        "purity": purity,
        "min_eigenvalue": report.min_eigenvalue,
    })
    .to_string())
}

fn trajectory_curve_impl(params: &str) -> Result<String, String> {
    let p = parse(params)?;
    let spec = demo_spec(p.coupling)?;
    let scheme = scheme_for(&p, p.n)?;
    let record = simulate(&spec, &scheme, p.n, p.seed).map_err(|e| e.to_string())?;
    let (reference, _) =
        solve_meanfield_reference(&spec, scheme.dt, scheme.t_final).map_err(|e| e.to_string())?;
    let (ref_t, ref_bloch, _) = bloch_path(&reference);
    Ok(json!({
        "t": record.times,
        "bloch": record.bloch,
        "purity": record.purity,
        "trace_re": record.trace_re,
        "n": record.n_particles,
        "seed": record.seed,
        "mode": scheme.mode.as_str(),
        "reference_t": ref_t,
        "reference_bloch": ref_bloch,
    })
    .to_string())
}

fn convergence_points_impl(params: &str) -> Result<String, String> {
    let p = parse(params)?;
    let spec = demo_spec(p.coupling)?;
    let total: usize = LADDER.iter().sum::<usize>() * LADDER_SEEDS.len();
    let scheme = scheme_for(&p, total)?;
    let report =
        convergence_study(&spec, &scheme, &LADDER, &LADDER_SEEDS).map_err(|e| e.to_string())?;
    let (slope, r_squared) = match &report.fit {
        Some(fit) => (Some(fit.slope), Some(fit.r_squared)),
        None => (None, None),
    };
    Ok(json!({
        "n_values": report.n_values,
        "mean_sq_errors": report.mean_sq_errors,
        "stderrs": report.stderrs,
        "slope": slope,
        "r_squared": r_squared,
        "excluded_cells": report.excluded_cells,
        "valid": report.valid,
    })
    .to_string())
}

/// Deterministic mean-field reference path for the given coupling and grid.
#[wasm_bindgen]
pub fn reference_curve(params: &str) -> Result<String, JsValue> {
    reference_curve_impl(params).map_err(|e| JsValue::from_str(&e))
}

/// One interacting ensemble next to the reference it should track.
#[wasm_bindgen]
pub fn trajectory_curve(params: &str) -> Result<String, JsValue> {
    trajectory_curve_impl(params).map_err(|e| JsValue::from_str(&e))
}

/// Mean squared error of the empirical mean against the reference on a fixed
/// ensemble-size ladder, with the fitted log-log slope. The 1/N law shows as
/// slope near -1.
#[wasm_bindgen]
pub fn convergence_points(params: &str) -> Result<String, JsValue> {
    convergence_points_impl(params).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_operation_round_trips_json() {
        let out = reference_curve_impl(r#"{"dt": 0.01, "t_final": 1.0, "coupling": 3.0}"#)
            .expect("reference op must succeed");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), 101);
        assert_eq!(v["bloch"].as_array().unwrap().len(), 101);
        assert!(v["min_eigenvalue"].as_f64().unwrap() >= -1e-6);
    }

    #[test]
    fn trajectory_operation_tracks_the_reference_loosely() {
        let out = trajectory_curve_impl(r#"{"n": 64, "seed": 3, "dt": 0.01, "t_final": 1.0}"#)
            .expect("trajectory op must succeed");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let bloch = v["bloch"].as_array().unwrap();
        let reference = v["reference_bloch"].as_array().unwrap();
        assert_eq!(bloch.len(), reference.len());
        let last = bloch.last().unwrap()[2].as_f64().unwrap();
        let ref_last = reference.last().unwrap()[2].as_f64().unwrap();
        assert!((last - ref_last).abs() < 0.5);
    }

    #[test]
    fn convergence_operation_reports_a_negative_slope() {
        let out = convergence_points_impl(r#"{"dt": 0.01, "t_final": 1.0, "coupling": 3.0}"#)
            .expect("convergence op must succeed");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["n_values"].as_array().unwrap().len(), 5);
        assert!(v["slope"].as_f64().unwrap() < -0.5);
    }

    #[test]
    fn parameter_budgets_are_enforced() {
        assert!(trajectory_curve_impl(r#"{"n": 100000}"#).is_err());
        assert!(trajectory_curve_impl(r#"{"dt": 1e-6, "t_final": 1.0}"#).is_err());
        assert!(trajectory_curve_impl(r#"{"coupling": 1e9}"#).is_err());
        assert!(trajectory_curve_impl(r#"{"typo": 1}"#).is_err());
    }
}
