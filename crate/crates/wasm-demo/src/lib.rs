//! Browser bindings over the bundled default scenario.
//!
//! Each exported function returns a flat `Float64Array` so the page can plot
//! it without any glue besides the generated module.

use mimo_ee::bench::{db_to_watts, default_scenario};
use mimo_ee::optimizer::{joint_optimize, EeProblem};
use mimo_ee::scenario::{PowerParams, Scenario};
use mimo_ee::Result;
use wasm_bindgen::prelude::*;

/// Transmit powers of the power sweep, in dB relative to the noise power.
pub const POWER_DB: (f64, f64, f64) = (-10.0, 40.0, 0.5);

fn scenario(pilot_length: usize) -> Result<Scenario> {
    default_scenario().with_pilot_length(pilot_length)
}

fn js(e: mimo_ee::Error) -> JsError {
    JsError::new(&e.to_string())
}

pub fn antenna_curve(pilot_length: usize, p_db: f64) -> Result<Vec<f64>> {
    let s = scenario(pilot_length)?;
    let p = EeProblem::from_scenario(&s);
    let p_d = db_to_watts(p_db, p.noise_power_w);
    Ok((p.min_antennas..=p.max_antennas)
        .map(|n| p.ee(n, p_d) / 1e6)
        .collect())
}

pub fn power_curve(pilot_length: usize, n: usize) -> Result<Vec<f64>> {
    let s = scenario(pilot_length)?;
    s.check_antennas(n)?;
    let p = EeProblem::from_scenario(&s);
    let (lo, hi, step) = POWER_DB;
    let count = ((hi - lo) / step).round() as usize + 1;
    Ok((0..count)
        .map(|i| p.ee(n, db_to_watts(lo + step * i as f64, p.noise_power_w)) / 1e6)
        .collect())
}

/// `[N, P_d (dB), EE (Mb/J), rate (Mb/s), consumption (W)]` of the joint optimum.
pub fn joint_point(pilot_length: usize, budget_w: f64, rate_floor_mbps: f64) -> Result<Vec<f64>> {
    let mut s = scenario(pilot_length)?;
    s.power = PowerParams::new(s.power.baseband_w(), s.power.rf_chain_w(), budget_w)?;
    s.config.rate_floor_bps = rate_floor_mbps * 1e6;
    let p = EeProblem::from_scenario(&s);
    let r = joint_optimize(&p, 1e-9, 50)?.point;
    Ok(vec![
        r.n_antennas as f64,
        10.0 * (r.transmit_power_w / p.noise_power_w).log10(),
        r.ee_bpj / 1e6,
        r.rate_bps / 1e6,
        r.total_power_w,
    ])
}

/// `[K, M]` of the default scenario.
#[wasm_bindgen]
pub fn antenna_range() -> Vec<f64> {
    let s = default_scenario();
    vec![s.config.users_per_cell as f64, s.config.max_antennas as f64]
}

/// EE in Mb/J for every antenna count from `K` to `M`.
#[wasm_bindgen]
pub fn ee_vs_antennas(pilot_length: usize, p_db: f64) -> std::result::Result<Vec<f64>, JsError> {
    antenna_curve(pilot_length, p_db).map_err(js)
}

/// EE in Mb/J on the fixed transmit-power grid.
#[wasm_bindgen]
pub fn ee_vs_power(pilot_length: usize, n: usize) -> std::result::Result<Vec<f64>, JsError> {
    power_curve(pilot_length, n).map_err(js)
}

#[wasm_bindgen]
pub fn optimize(
    pilot_length: usize,
    budget_w: f64,
    rate_floor_mbps: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    joint_point(pilot_length, budget_w, rate_floor_mbps).map_err(js)
}
