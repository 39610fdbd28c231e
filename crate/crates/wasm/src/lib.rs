//! Browser bindings: operator profiles, flow norm curves and the exponent phase diagram.
//!
//! Every export returns a JSON string. The plain functions in [`api`] carry the logic
//! and are usable (and tested) off the browser; the `wasm_bindgen` wrappers only
//! translate errors into exceptions.

use wasm_bindgen::prelude::*;

pub mod api;

fn js<T>(r: Result<T, String>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Ground state, first eigenvalues and fitted boundary exponent of an operator.
#[wasm_bindgen]
pub fn operator_profile(kind: &str, s: f64, n: usize) -> Result<String, JsValue> {
    js(api::operator_profile(kind, s, n))
}

/// Norm curves of the flow from one of the built-in data.
#[wasm_bindgen]
pub fn flow_curves(kind: &str, s: f64, n: usize, m: f64, datum: &str, t_max: f64) -> Result<String, JsValue> {
    js(api::flow_curves(kind, s, n, m, datum, t_max))
}

/// Critical exponents and regime for one parameter set.
#[wasm_bindgen]
pub fn exponent_table(dim: usize, s: f64, m: f64, gamma: f64) -> Result<String, JsValue> {
    js(api::exponent_table(dim, s, m, gamma))
}

/// Predicted critical curves over `m ∈ (0, 1)`.
#[wasm_bindgen]
pub fn phase_lines(dim: usize, s: f64, gamma: f64, samples: usize) -> Result<String, JsValue> {
    js(api::phase_lines(dim, s, gamma, samples))
}

/// Empirical smoothing constants from point-mass data on a small `(m, p, n)` grid.
#[wasm_bindgen]
pub fn smoothing_cells(kind: &str, s: f64, ms: &[f64], ps: &[f64], ns: &[u32]) -> Result<String, JsValue> {
    let ns: Vec<usize> = ns.iter().map(|&n| n as usize).collect();
    js(api::smoothing_cells(kind, s, ms, ps, &ns))
}
