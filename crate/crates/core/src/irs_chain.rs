//! Four-state IRS connection chain per side.
//!
//! States, in order: no connection (I₁), initial connection (I₂),
//! disconnection (I₃) and keep connection (I₄). A state at step `i` records
//! whether a serving IRS existed at steps `i−1` and `i`, so the matrix that
//! moves the vector from step `i−1` to step `i` is built from the frames at
//! `i−1` and `i`.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::Result;
use crate::par;
use crate::regions::{area_reachable, area_reachable_overlap, RegionFrame, Side};
use crate::scenario::ScenarioGeometry;

pub type IrsStateVector = [f64; 4];
pub type IrsTransitionMatrix = [[f64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IrsState {
    NoConnection,
    InitialConnection,
    Disconnection,
    KeepConnection,
}

impl IrsState {
    pub const ALL: [IrsState; 4] = [
        IrsState::NoConnection,
        IrsState::InitialConnection,
        IrsState::Disconnection,
        IrsState::KeepConnection,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether an IRS serves the user in this state.
    pub fn serving(self) -> bool {
        matches!(self, IrsState::InitialConnection | IrsState::KeepConnection)
    }

    pub fn from_occupancy(before: bool, now: bool) -> IrsState {
        match (before, now) {
            (false, false) => IrsState::NoConnection,
            (false, true) => IrsState::InitialConnection,
            (true, false) => IrsState::Disconnection,
            (true, true) => IrsState::KeepConnection,
        }
    }
}

/// Number of negative area differences clamped to zero across all calls.
static AREA_CLAMPS: AtomicUsize = AtomicUsize::new(0);

pub fn area_clamp_count() -> usize {
    AREA_CLAMPS.load(Ordering::Relaxed)
}

/// Probabilities `(p₁₁, p₂₃)` of finding no IRS at step `i` given none, or
/// given some, at step `i−1`.
pub fn step_void_probabilities(
    side: Side,
    frame: &RegionFrame,
    lambda_r: f64,
) -> Result<(f64, f64)> {
    if lambda_r == 0.0 {
        return Ok((1.0, 1.0));
    }
    let s_now = area_reachable(side, frame);
    let s_prev = area_reachable(side, &frame.previous());
    let s_cap = area_reachable_overlap(side, frame)?;
    let mut fresh = s_now - s_cap;
    if fresh < 0.0 {
        // the overlap comes from quadrature with absolute tolerance 1e-10·D²
        let d = frame.serving_distance;
        if fresh < -1e-9 * d * d {
            AREA_CLAMPS.fetch_add(1, Ordering::Relaxed);
        }
        fresh = 0.0;
    }
    let p11 = (-lambda_r * fresh).exp();
    let s_cap = s_cap.min(s_prev);
    let denom = -(-lambda_r * s_prev).exp_m1();
    let p23 = if denom > 0.0 {
        // P(no IRS in the shared part | some IRS before) · P(no IRS in the fresh part)
        let keep_void = -(-lambda_r * s_cap).exp() * (-lambda_r * (s_prev - s_cap)).exp_m1();
        (keep_void / denom).clamp(0.0, 1.0) * p11
    } else {
        p11
    };
    Ok((p11, p23))
}

pub fn matrix_from(p11: f64, p23: f64) -> IrsTransitionMatrix {
    [
        [p11, 1.0 - p11, 0.0, 0.0],
        [0.0, 0.0, p23, 1.0 - p23],
        [p11, 1.0 - p11, 0.0, 0.0],
        [0.0, 0.0, p23, 1.0 - p23],
    ]
}

pub fn transition_matrix(
    side: Side,
    frame: &RegionFrame,
    lambda_r: f64,
) -> Result<IrsTransitionMatrix> {
    let (p11, p23) = step_void_probabilities(side, frame, lambda_r)?;
    Ok(matrix_from(p11, p23))
}

/// Stationary vector of a matrix with the four-state pattern, in closed form.
pub fn stationary_closed_form(t: &IrsTransitionMatrix) -> IrsStateVector {
    let p11 = t[0][0];
    let p12 = t[0][1];
    let p23 = t[1][2];
    let p24 = t[1][3];
    let z = p23 + p12;
    if z < 1e-300 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    [p11 * p23 / z, p12 * p23 / z, p12 * p23 / z, p12 * p24 / z]
}

/// Starting vector: steady state of the step-0 matrix on the original side,
/// and certainly unconnected on the target side.
pub fn initial_state(
    side: Side,
    frame_at_0: &RegionFrame,
    lambda_r: f64,
) -> Result<IrsStateVector> {
    match side {
        Side::Target => Ok([1.0, 0.0, 0.0, 0.0]),
        Side::Original => {
            if lambda_r == 0.0 {
                return Ok([1.0, 0.0, 0.0, 0.0]);
            }
            Ok(stationary_closed_form(&transition_matrix(
                side, frame_at_0, lambda_r,
            )?))
        }
    }
}

/// Row vector times matrix, with each entry summed by Neumaier's method.
pub fn step_vector(s: &IrsStateVector, t: &IrsTransitionMatrix) -> IrsStateVector {
    let mut out = [0.0; 4];
    for (n, o) in out.iter_mut().enumerate() {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for m in 0..4 {
            let term = s[m] * t[m][n];
            let next = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - next) + term;
            } else {
                comp += (term - next) + sum;
            }
            sum = next;
        }
        *o = sum + comp;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsTrace {
    pub side: Side,
    /// State vectors for steps `0..=I`.
    pub vectors: Vec<IrsStateVector>,
    /// `matrices[i]` moves step `i−1` to step `i`; `matrices[0]` is the
    /// matrix whose steady state seeds the original side.
    pub matrices: Vec<IrsTransitionMatrix>,
}

pub fn propagate(
    side: Side,
    geometry: &ScenarioGeometry,
    config: &NetworkConfig,
) -> Result<IrsTrace> {
    let n = geometry.step_count + 1;
    let d = config.serving_distance;
    let lambda_r = config.lambda_r;
    let matrices: Vec<Result<IrsTransitionMatrix>> = par::map_indexed(n, |i| {
        transition_matrix(side, &RegionFrame::new(*geometry, d, i as isize), lambda_r)
    });
    let matrices = matrices.into_iter().collect::<Result<Vec<_>>>()?;
    let start = match side {
        Side::Target => [1.0, 0.0, 0.0, 0.0],
        Side::Original if lambda_r == 0.0 => [1.0, 0.0, 0.0, 0.0],
        Side::Original => stationary_closed_form(&matrices[0]),
    };
    let mut vectors = Vec::with_capacity(n);
    vectors.push(start);
    for t in matrices.iter().skip(1) {
        let next = step_vector(vectors.last().unwrap(), t);
        vectors.push(next);
    }
    Ok(IrsTrace {
        side,
        vectors,
        matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_setup() -> (ScenarioGeometry, NetworkConfig) {
        let cfg = NetworkConfig {
            length: Some(248.36),
            ..NetworkConfig::default()
        };
        (cfg.geometry().unwrap(), cfg)
    }

    #[test]
    fn zero_density_freezes() {
        let (g, cfg) = default_setup();
        let cfg = NetworkConfig {
            lambda_r: 0.0,
            ..cfg
        };
        for side in [Side::Original, Side::Target] {
            let tr = propagate(side, &g, &cfg).unwrap();
            assert!(tr.vectors.iter().all(|v| *v == [1.0, 0.0, 0.0, 0.0]));
        }
    }

    #[test]
    fn departure_branches_are_certain() {
        let (g, cfg) = default_setup();
        let i = ((g.x_mid + g.band_half_width(50.0)) / g.delta_x).ceil() as isize + 2;
        let t =
            transition_matrix(Side::Original, &RegionFrame::new(g, 50.0, i), cfg.lambda_r).unwrap();
        assert_eq!(t[0][0], 1.0);
        assert_eq!(t[1][2], 1.0);
    }

    #[test]
    fn target_side_idle_before_band() {
        let (g, cfg) = default_setup();
        let tr = propagate(Side::Target, &g, &cfg).unwrap();
        let edge = g.x_mid - g.band_half_width(50.0);
        for (i, v) in tr.vectors.iter().enumerate() {
            if g.x(i as isize) <= edge {
                assert_eq!(*v, [1.0, 0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn stochastic_rows_and_pattern() {
        let (g, cfg) = default_setup();
        for side in [Side::Original, Side::Target] {
            let tr = propagate(side, &g, &cfg).unwrap();
            for t in &tr.matrices {
                for row in t {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(row.iter().all(|p| *p >= 0.0));
                }
                assert_eq!(t[0][2] + t[0][3] + t[2][2] + t[2][3], 0.0);
                assert_eq!(t[1][0] + t[1][1] + t[3][0] + t[3][1], 0.0);
            }
            for v in &tr.vectors {
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dense_field_keeps_connection() {
        let (g, cfg) = default_setup();
        let cfg = NetworkConfig {
            lambda_r: 200.0 / (std::f64::consts::PI * 2500.0),
            ..cfg
        };
        let tr = propagate(Side::Original, &g, &cfg).unwrap();
        assert!(tr.vectors[50][3] > 0.99);
    }
}
