//! Browser bindings for the `www/` demo page.
//!
//! Each export takes plain numbers and returns a JSON string; the page calls
//! `JSON.parse` on it. The `*_report` functions hold the logic and are
//! tested natively.

use noma_farey::design::{
    design_weights, distance_sweep, log_grid, oma_min_distance, regime_thresholds, sum_constellation, Channel,
    ConstellationPair, PowerBudget,
};
use noma_farey::farey::PunchedFarey;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest bound accepted from the page, to keep the UI responsive.
pub const MAX_FAREY_BOUND: u64 = 200;

pub fn farey_report(k: u64, l: u64) -> Result<Value, String> {
    if k > MAX_FAREY_BOUND || l > MAX_FAREY_BOUND {
        return Err(format!("bounds are capped at {MAX_FAREY_BOUND} in the demo"));
    }
    let seq = PunchedFarey::new(k, l).map_err(|e| e.to_string())?;
    let terms: Vec<[u64; 2]> = seq.terms().iter().map(|f| [f.num(), f.den()]).collect();
    // the quadruple check is cubic; skip it for long sequences
    let verified = if seq.len() <= 120 { Some(seq.verify().map_err(|e| e.to_string())?) } else { None };
    Ok(json!({
        "K": k,
        "L": l,
        "terms": terms,
        "text": seq.to_compact(),
        "verified": verified,
    }))
}

pub fn design_report(h1: f64, h2: f64, p1: f64, p2: f64, m1: u32, m2: u32) -> Result<Value, String> {
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err("channel magnitudes must be positive".into());
    }
    let ch = Channel::from_magnitudes(h1, h2).map_err(|e| e.to_string())?;
    let power = PowerBudget::new(p1, p2).map_err(|e| e.to_string())?;
    let sizes = ConstellationPair::new(m1, m2).map_err(|e| e.to_string())?;
    if m1 > 64 || m2 > 64 {
        return Err("PAM sizes are capped at 64 in the demo".into());
    }
    let d = design_weights(&ch, &power, &sizes);
    let d_oma = oma_min_distance(&ch, &power, &sizes);
    let thresholds = sizes.both_active().then(|| regime_thresholds(&power, &sizes));
    Ok(json!({
        "w1": d.w1,
        "w2": d.w2,
        "w1_tilde": d.w1_tilde,
        "w2_tilde": d.w2_tilde,
        "d_noma": d.d_noma,
        "d_oma": d_oma,
        "case": d.regime.label(),
        "gain_ratio": d.gain_ratio,
        "thresholds": thresholds,
        "points": sum_constellation(&d, &ch, &sizes),
    }))
}

pub fn sweep_report(m: u32, m1: u32, h1: f64, h2_min: f64, h2_max: f64, points: usize) -> Result<Value, String> {
    if m1 == 0 || !m.is_multiple_of(m1) {
        return Err(format!("M1 = {m1} does not divide M = {m}"));
    }
    if !(h2_min > 0.0 && h2_max > h2_min) || !(2..=2000).contains(&points) {
        return Err("need 0 < min < max and 2..2000 points".into());
    }
    let sizes = ConstellationPair::new(m1, m / m1).map_err(|e| e.to_string())?;
    let power = PowerBudget::unit();
    let grid = log_grid(h2_min, h2_max, points);
    let rows = distance_sweep(h1, &grid, &power, &sizes).map_err(|e| e.to_string())?;
    Ok(json!({
        "h2": grid,
        "d_noma": rows.iter().map(|r| r.d_noma).collect::<Vec<_>>(),
        "d_oma": rows.iter().map(|r| r.d_oma).collect::<Vec<_>>(),
        "case": rows.iter().map(|r| r.case.label()).collect::<Vec<_>>(),
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Punched Farey sequence with denominators up to `k` and numerators up to `l`.
#[wasm_bindgen]
pub fn farey(k: u32, l: u32) -> Result<String, JsError> {
    to_js(farey_report(u64::from(k), u64::from(l)))
}

/// Optimal weights and the received constellation for one channel.
#[wasm_bindgen]
pub fn design(h1: f64, h2: f64, p1: f64, p2: f64, m1: u32, m2: u32) -> Result<String, JsError> {
    to_js(design_report(h1, h2, p1, p2, m1, m2))
}

/// NOMA and TDMA minimum distance over a log grid of `|h2|`.
#[wasm_bindgen]
pub fn sweep(m: u32, m1: u32, h1: f64, h2_min: f64, h2_max: f64, points: u32) -> Result<String, JsError> {
    to_js(sweep_report(m, m1, h1, h2_min, h2_max, points as usize))
}
