//! Grid search over time-to-trigger and HO margin for settings that keep
//! both HOF and PP probabilities below a target.
//!
//! The failure probabilities depend on neither grid axis, and the trigger
//! and ping-pong probabilities depend only on the margin, so each margin
//! costs one pass of step probabilities and each TTT value only a chain
//! propagation.

use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, NetworkConfig};
use crate::error::{ModelError, Result};
use crate::ho_engine::{
    chains_from_table, event_probabilities, irs_traces, Event, StepEvaluator, StepTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineGrid {
    pub t_t_ms: Vec<f64>,
    pub gamma_ho_db: Vec<f64>,
}

impl Default for MineGrid {
    fn default() -> Self {
        Self {
            t_t_ms: (0..=32).map(|k| 20.0 * k as f64).collect(),
            gamma_ho_db: (0..=24).map(|k| -8.0 + 0.5 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinePoint {
    pub t_t_ms: f64,
    pub gamma_ho_db: f64,
    pub p_hof: f64,
    pub p_pp: f64,
    pub feasible: bool,
}

impl MinePoint {
    pub fn worst(&self) -> f64 {
        self.p_hof.max(self.p_pp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineResult {
    pub target: f64,
    /// Points ordered by TTT, then by margin.
    pub points: Vec<MinePoint>,
    /// Index of the point with the smallest `max(P_hof, P_pp)`.
    pub best: Option<usize>,
}

impl MineResult {
    pub fn feasible(&self) -> impl Iterator<Item = &MinePoint> {
        self.points.iter().filter(|p| p.feasible)
    }

    pub fn contains_feasible(&self, t_t_ms: f64, gamma_ho_db: f64) -> bool {
        self.feasible()
            .any(|p| (p.t_t_ms - t_t_ms).abs() < 1e-9 && (p.gamma_ho_db - gamma_ho_db).abs() < 1e-9)
    }
}

/// `max(P_hof, P_pp) < target`; a target of 1 or more admits everything.
pub fn is_feasible(worst: f64, target: f64) -> bool {
    worst < target || target >= 1.0
}

pub fn mine(config: &NetworkConfig, grid: &MineGrid, target: f64) -> Result<MineResult> {
    if grid.t_t_ms.is_empty() || grid.gamma_ho_db.is_empty() {
        return Err(ModelError::invalid(
            "grid",
            "both axes need at least one value",
        ));
    }
    if !(target > 0.0) {
        return Err(ModelError::invalid("target", "must be positive"));
    }
    let geometry = config.geometry()?;
    let traces = irs_traces(config)?;
    let p_f = event_probabilities(&StepEvaluator::new(config)?, &traces, Event::Failure)?;
    let mut per_gamma = Vec::with_capacity(grid.gamma_ho_db.len());
    for &g in &grid.gamma_ho_db {
        let cfg = NetworkConfig {
            gamma_ho: db_to_linear(g),
            ..*config
        };
        let eval = StepEvaluator::new(&cfg)?;
        per_gamma.push((
            event_probabilities(&eval, &traces, Event::Trigger)?,
            event_probabilities(&eval, &traces, Event::PingPong)?,
        ));
    }
    let mut points = Vec::with_capacity(grid.t_t_ms.len() * grid.gamma_ho_db.len());
    for &tt in &grid.t_t_ms {
        for (k, &g) in grid.gamma_ho_db.iter().enumerate() {
            let cfg = NetworkConfig {
                gamma_ho: db_to_linear(g),
                t_t: tt / 1000.0,
                ..*config
            };
            cfg.validate()?;
            let table = StepTable {
                p_h: per_gamma[k].0.clone(),
                p_f: p_f.clone(),
                p_pp: per_gamma[k].1.clone(),
            };
            let m = chains_from_table(&cfg, &geometry, table)?;
            points.push(MinePoint {
                t_t_ms: tt,
                gamma_ho_db: g,
                p_hof: m.p_hof,
                p_pp: m.p_pp,
                feasible: is_feasible(m.p_hof.max(m.p_pp), target),
            });
        }
    }
    let best = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.worst().total_cmp(&b.1.worst()))
        .map(|(k, _)| k);
    Ok(MineResult {
        target,
        points,
        best,
    })
}
