//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every call takes the experiment config as TOML text and returns JSON,
//! so the page only needs `JSON.parse`. Errors come back as the same
//! `{"error", "message"}` object the command line prints.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ldi_control::controller::{ControllerState, TraceRecord};
use ldi_control::experiments::{self, ExperimentConfig};
use ldi_control::linalg::{mat_to_rows, Vector};
use ldi_control::Error;

fn config(text: &str) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::from_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn trace(records: &[TraceRecord]) -> Value {
    records
        .iter()
        .map(|r| json!({ "k": r.k, "x": vec(&r.x), "u": vec(&r.u), "gamma": r.gamma, "mode": r.mode, "v": r.lyapunov }))
        .collect()
}

fn finish(r: Result<Value, Error>) -> Result<String, JsValue> {
    r.map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&json!({ "error": e.kind(), "message": e.to_string() }).to_string()))
}

/// Benchmark configuration as TOML, for the page's editor.
#[wasm_bindgen]
pub fn default_config() -> String {
    ExperimentConfig::default().to_toml()
}

pub fn simulate_json(text: &str) -> Result<Value, Error> {
    let r = experiments::run_single(&config(text)?)?;
    Ok(json!({
        "offline_attempts": r.offline_attempts,
        "pinned_gain": r.pinned_gain.as_ref().map(mat_to_rows),
        "j_adaptive": r.j_adaptive(),
        "j_robust": r.j_robust(),
        "variation": r.variation(),
        "adaptive": trace(&r.adaptive.trace()),
        "robust": trace(&r.robust.trace()),
    }))
}

/// Paired adaptive and robust closed loops with their costs.
#[wasm_bindgen]
pub fn simulate(config_toml: &str) -> Result<String, JsValue> {
    finish(simulate_json(config_toml))
}

pub fn synthesize_json(text: &str) -> Result<Value, Error> {
    let cfg = config(text)?;
    let offline = experiments::generate_offline(&cfg)?;
    Ok(serde_json::to_value(experiments::synthesize(&cfg, &offline.datasets, None)?)?)
}

/// Robust stabilizing gain from fresh offline data, with the closed-loop
/// spectral radius across the parameter range.
#[wasm_bindgen]
pub fn synthesize(config_toml: &str) -> Result<String, JsValue> {
    finish(synthesize_json(config_toml))
}

pub fn ellipsoid_json(text: &str, x1: f64, x2: f64) -> Result<Value, Error> {
    let cfg = config(text)?;
    let offline = experiments::generate_offline(&cfg)?;
    let state = ControllerState::new(&offline.datasets, cfg.cost_weights()?, cfg.polytope()?, cfg.controller_settings())?;
    let (d, _) = state.robust_step(&Vector::from_vec(vec![x1, x2]))?;
    Ok(json!({
        "u": vec(&d.u),
        "k": mat_to_rows(&d.k),
        "p": mat_to_rows(&d.p),
        "gamma": d.gamma,
        "mode": d.mode,
    }))
}

/// One robust step at `(x1, x2)`: the input and the invariant ellipsoid
/// `{z : z' P z <= gamma}` that bounds the cost-to-go.
#[wasm_bindgen]
pub fn ellipsoid(config_toml: &str, x1: f64, x2: f64) -> Result<String, JsValue> {
    finish(ellipsoid_json(config_toml, x1, x2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> String {
        let mut cfg = ExperimentConfig::default();
        cfg.run.horizon = 6;
        cfg.to_toml()
    }

    #[test]
    fn default_config_parses() {
        assert!(config(&default_config()).is_ok());
    }

    #[test]
    fn simulate_returns_both_traces() {
        let v = simulate_json(&small()).unwrap();
        assert_eq!(v["adaptive"].as_array().unwrap().len(), 7);
        assert_eq!(v["robust"].as_array().unwrap().len(), 7);
        assert_eq!(v["adaptive"][0]["mode"], "robust_warmup");
    }

    #[test]
    fn ellipsoid_contains_the_state() {
        let v = ellipsoid_json(&small(), 0.5, -0.2).unwrap();
        let p: Vec<Vec<f64>> = serde_json::from_value(v["p"].clone()).unwrap();
        let x = [0.5, -0.2];
        let q: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| x[i] * p[i][j] * x[j]).sum();
        assert!(q <= v["gamma"].as_f64().unwrap() * (1.0 + 1e-8));
    }

    #[test]
    fn malformed_config_is_a_toml_error() {
        let e = synthesize_json("[plant]\nkappa = \"x\"\n").unwrap_err();
        assert_eq!(e.kind(), "toml");
    }
}
