//! Browser bindings: three JSON-in, JSON-out operations for the demo page.

use irs_handover::baseline::run_baseline;
use irs_handover::channel::{
    serving_distance_from_threshold, threshold_from_serving_distance, ChannelParams,
};
use irs_handover::config::{db_to_linear, dbm_to_watts, linear_to_db};
use irs_handover::ho_engine::{run_analysis, HoMetrics};
use irs_handover::irs_chain::propagate;
use irs_handover::{RunConfig, Side};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curves {
    pub x_over_l: Vec<f64>,
    pub trigger: Vec<f64>,
    pub execution: Vec<f64>,
    pub p_hof: f64,
    pub p_pp: f64,
    pub e_x_ht_over_l: Option<f64>,
    pub trigger_mass: f64,
}

impl From<&HoMetrics> for Curves {
    fn from(m: &HoMetrics) -> Self {
        Self {
            x_over_l: m.x.iter().map(|x| x / m.length).collect(),
            trigger: m.p_ht.clone(),
            execution: m.p_ho.clone(),
            p_hof: m.p_hof,
            p_pp: m.p_pp,
            e_x_ht_over_l: m.e_x_ht.map(|x| x / m.length),
            trigger_mass: m.trigger_mass(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub irs: Curves,
    pub baseline: Curves,
    pub length_m: f64,
    pub serving_distance_m: f64,
}

/// Full analysis plus its N = 0 baseline from a JSON run config.
pub fn analyze_json(config: &str) -> Result<String, String> {
    let cfg = RunConfig::from_json(config)
        .and_then(|c| c.to_network())
        .map_err(|e| e.to_string())?;
    let m = run_analysis(&cfg).map_err(|e| e.to_string())?;
    let b = run_baseline(&cfg).map_err(|e| e.to_string())?;
    let out = Analysis {
        irs: Curves::from(&m),
        baseline: Curves::from(&b),
        length_m: m.length,
        serving_distance_m: cfg.serving_distance,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct StateTrace {
    pub x_over_l: Vec<f64>,
    /// `[side][state][step]`, states in I1..I4 order.
    pub original: [Vec<f64>; 4],
    pub target: [Vec<f64>; 4],
}

/// IRS connection-state probabilities along the trajectory on both sides.
pub fn connection_states_json(config: &str) -> Result<String, String> {
    let cfg = RunConfig::from_json(config)
        .and_then(|c| c.to_network())
        .map_err(|e| e.to_string())?;
    let g = cfg.geometry().map_err(|e| e.to_string())?;
    let split = |side| -> Result<[Vec<f64>; 4], String> {
        let tr = propagate(side, &g, &cfg).map_err(|e| e.to_string())?;
        Ok(std::array::from_fn(|k| {
            tr.vectors.iter().map(|v| v[k]).collect()
        }))
    };
    let out = StateTrace {
        x_over_l: (0..=g.step_count)
            .map(|i| g.x(i as isize) / g.length)
            .collect(),
        original: split(Side::Original)?,
        target: split(Side::Target)?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct ServingDistance {
    pub serving_distance_m: f64,
    pub gamma_irs_db: f64,
}

/// Serving distance for a beamforming threshold, or the threshold for a
/// distance when `gamma_irs_db` is not finite.
pub fn serving_distance_json(
    n_elements: u32,
    p_t_dbm: f64,
    f_c_ghz: f64,
    alpha: f64,
    gamma_irs_db: f64,
    distance_m: f64,
) -> Result<String, String> {
    let ch = ChannelParams::new(dbm_to_watts(p_t_dbm), f_c_ghz * 1e9, alpha, n_elements, 1.0)
        .map_err(|e| e.to_string())?;
    if n_elements == 0 {
        return Err("a serving distance needs at least one element".into());
    }
    let out = if gamma_irs_db.is_finite() {
        ServingDistance {
            serving_distance_m: serving_distance_from_threshold(db_to_linear(gamma_irs_db), &ch),
            gamma_irs_db,
        }
    } else {
        ServingDistance {
            serving_distance_m: distance_m,
            gamma_irs_db: linear_to_db(threshold_from_serving_distance(distance_m, &ch)),
        }
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn analyze(config: &str) -> Result<String, JsValue> {
    analyze_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn connection_states(config: &str) -> Result<String, JsValue> {
    connection_states_json(config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn serving_distance(
    n_elements: u32,
    p_t_dbm: f64,
    f_c_ghz: f64,
    alpha: f64,
    gamma_irs_db: f64,
    distance_m: f64,
) -> Result<String, JsValue> {
    serving_distance_json(
        n_elements,
        p_t_dbm,
        f_c_ghz,
        alpha,
        gamma_irs_db,
        distance_m,
    )
    .map_err(|e| JsValue::from_str(&e))
}
