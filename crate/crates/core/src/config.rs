//! Physical and protocol parameters.
//!
//! [`NetworkConfig`] holds everything in SI units and linear ratios. The
//! unit-bearing JSON form lives in [`RunConfig`], which converts on ingestion.

use serde::{Deserialize, Serialize};

use crate::channel::{serving_distance_from_threshold, ChannelParams};
use crate::error::{ModelError, Result};
use crate::scenario::{self, ScenarioGeometry};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1e3)
}

pub fn per_km2_to_per_m2(x: f64) -> f64 {
    x * 1e-6
}

pub fn per_m2_to_per_km2(x: f64) -> f64 {
    x * 1e6
}

/// Slack used when turning time ratios into integer step counts, so that
/// 0.48 / 0.01 counts as 48 and not 47.
const STEP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// BS density, per m².
    pub lambda_b: f64,
    /// IRS density, per m².
    pub lambda_r: f64,
    /// Transmit power, W.
    pub p_t: f64,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    pub alpha: f64,
    pub n_elements: u32,
    /// IRS serving distance D, m.
    pub serving_distance: f64,
    /// User speed, m/s.
    pub speed: f64,
    /// Measurement period, s.
    pub t_d: f64,
    /// HO margin as a linear ratio.
    pub gamma_ho: f64,
    /// Time-to-trigger, s.
    pub t_t: f64,
    /// Minimum sojourn time, s.
    pub t_p: f64,
    /// HOF SIR threshold as a linear ratio.
    pub q_out: f64,
    pub r_o: Option<f64>,
    pub r_t: Option<f64>,
    pub length: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            lambda_b: per_km2_to_per_m2(10.0),
            lambda_r: per_km2_to_per_m2(1000.0),
            p_t: dbm_to_watts(40.0),
            f_c: 3.0e9,
            alpha: 4.0,
            n_elements: 100,
            serving_distance: 50.0,
            speed: 20.0,
            t_d: 0.010,
            gamma_ho: 1.0,
            t_t: 0.480,
            t_p: 1.0,
            q_out: db_to_linear(-8.0),
            r_o: None,
            r_t: None,
            length: None,
        }
    }
}

fn require(cond: bool, field: &str, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::invalid(field, message))
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        require(
            self.lambda_b.is_finite() && self.lambda_b > 0.0,
            "lambda_b",
            "must be positive",
        )?;
        require(
            self.lambda_r.is_finite() && self.lambda_r >= 0.0,
            "lambda_r",
            "must be non-negative",
        )?;
        require(
            self.p_t.is_finite() && self.p_t > 0.0,
            "p_t",
            "must be positive",
        )?;
        require(
            self.f_c.is_finite() && self.f_c > 0.0,
            "f_c",
            "must be positive",
        )?;
        require(
            self.alpha.is_finite() && self.alpha > 2.0,
            "alpha",
            "must exceed 2",
        )?;
        require(
            self.serving_distance.is_finite() && self.serving_distance > 0.0,
            "serving_distance",
            "must be positive",
        )?;
        require(
            self.speed.is_finite() && self.speed > 0.0,
            "speed",
            "must be positive",
        )?;
        require(
            self.t_d.is_finite() && self.t_d > 0.0,
            "t_d",
            "must be positive",
        )?;
        require(
            self.gamma_ho.is_finite() && self.gamma_ho > 0.0,
            "gamma_ho",
            "must be a positive ratio",
        )?;
        require(
            self.q_out.is_finite() && self.q_out > 0.0,
            "q_out",
            "must be a positive ratio",
        )?;
        require(
            self.t_t.is_finite() && self.t_t >= 0.0,
            "t_t",
            "must be non-negative",
        )?;
        require(
            self.t_p.is_finite() && self.t_p > self.t_t,
            "t_p",
            "must exceed t_t",
        )?;
        if let Some(r) = self.r_o {
            require(r.is_finite(), "r_o", "must be finite")?;
        }
        if let Some(r) = self.r_t {
            require(r.is_finite(), "r_t", "must be finite")?;
        }
        if let Some(l) = self.length {
            require(l.is_finite() && l > 0.0, "length", "must be positive")?;
        }
        Ok(())
    }

    /// Number of TTT steps plus one, `floor(T_t / T_d) + 1`.
    pub fn ttt_states(&self) -> usize {
        ((self.t_t / self.t_d) + STEP_SLACK).floor() as usize + 1
    }

    /// Sojourn window in steps, `ceil((T_p − T_t) / T_d)`.
    pub fn sojourn_states(&self) -> usize {
        (((self.t_p - self.t_t) / self.t_d) - STEP_SLACK)
            .ceil()
            .max(1.0) as usize
    }

    pub fn delta_x(&self) -> f64 {
        self.speed * self.t_d
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::new(
            self.p_t,
            self.f_c,
            self.alpha,
            self.n_elements,
            self.serving_distance,
        )
    }

    /// Crossing length, either the override or the mean under the BS process.
    pub fn crossing_length(&self) -> Result<f64> {
        match self.length {
            Some(l) => Ok(l),
            None => scenario::cached_expected_crossing_length(self.lambda_b),
        }
    }

    pub fn offsets(&self) -> (f64, f64) {
        let (ro, rt) = scenario::default_offsets(self.lambda_b);
        (self.r_o.unwrap_or(ro), self.r_t.unwrap_or(rt))
    }

    pub fn geometry(&self) -> Result<ScenarioGeometry> {
        let (r_o, r_t) = self.offsets();
        let l = self.crossing_length()?;
        scenario::build_geometry(r_o, r_t, l, self.speed, self.t_d)
    }

    /// Copy with the IRS terms removed.
    pub fn without_irs(&self) -> Self {
        Self {
            n_elements: 0,
            ..*self
        }
    }
}

/// Unit-bearing configuration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda_b_per_km2: f64,
    pub lambda_r_per_km2: f64,
    pub p_t_dbm: f64,
    pub f_c_ghz: f64,
    pub alpha: f64,
    pub serving_distance_m: Option<f64>,
    pub gamma_irs_db: Option<f64>,
    pub n_elements: u32,
    pub speed_mps: f64,
    pub t_d_ms: f64,
    pub gamma_ho_db: f64,
    pub t_t_ms: f64,
    pub t_p_s: f64,
    pub q_out_db: f64,
    pub r_o_m: Option<f64>,
    pub r_t_m: Option<f64>,
    pub length_m: Option<f64>,
    pub seed: u64,
    pub n_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda_b_per_km2: 10.0,
            lambda_r_per_km2: 1000.0,
            p_t_dbm: 40.0,
            f_c_ghz: 3.0,
            alpha: 4.0,
            serving_distance_m: None,
            gamma_irs_db: None,
            n_elements: 100,
            speed_mps: 20.0,
            t_d_ms: 10.0,
            gamma_ho_db: 0.0,
            t_t_ms: 480.0,
            t_p_s: 1.0,
            q_out_db: -8.0,
            r_o_m: None,
            r_t_m: None,
            length_m: None,
            seed: 1,
            n_trials: 10_000,
        }
    }
}

pub const DEFAULT_SERVING_DISTANCE_M: f64 = 50.0;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::invalid("<json>", e.to_string()))
    }

    pub fn to_network(&self) -> Result<NetworkConfig> {
        let mut cfg = NetworkConfig {
            lambda_b: per_km2_to_per_m2(self.lambda_b_per_km2),
            lambda_r: per_km2_to_per_m2(self.lambda_r_per_km2),
            p_t: dbm_to_watts(self.p_t_dbm),
            f_c: self.f_c_ghz * 1e9,
            alpha: self.alpha,
            n_elements: self.n_elements,
            serving_distance: DEFAULT_SERVING_DISTANCE_M,
            speed: self.speed_mps,
            t_d: self.t_d_ms * 1e-3,
            gamma_ho: db_to_linear(self.gamma_ho_db),
            t_t: self.t_t_ms * 1e-3,
            t_p: self.t_p_s,
            q_out: db_to_linear(self.q_out_db),
            r_o: self.r_o_m,
            r_t: self.r_t_m,
            length: self.length_m,
        };
        match (self.serving_distance_m, self.gamma_irs_db) {
            (Some(_), Some(_)) => {
                return Err(ModelError::invalid(
                    "serving_distance_m",
                    "give either serving_distance_m or gamma_irs_db, not both",
                ))
            }
            (Some(d), None) => cfg.serving_distance = d,
            (None, Some(g)) => {
                if cfg.n_elements == 0 {
                    return Err(ModelError::invalid(
                        "gamma_irs_db",
                        "cannot derive a serving distance with zero elements",
                    ));
                }
                let ch = ChannelParams::new(
                    cfg.p_t,
                    cfg.f_c,
                    cfg.alpha.max(2.0 + 1e-9),
                    cfg.n_elements,
                    1.0,
                )?;
                cfg.serving_distance = serving_distance_from_threshold(db_to_linear(g), &ch);
            }
            (None, None) => {}
        }
        cfg.validate().map_err(|e| match e {
            ModelError::InvalidConfig { field, message } => ModelError::InvalidConfig {
                field: json_key(&field).to_string(),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }
}

/// JSON key of a `NetworkConfig` field.
fn json_key(field: &str) -> &str {
    match field {
        "lambda_b" => "lambda_b_per_km2",
        "lambda_r" => "lambda_r_per_km2",
        "p_t" => "p_t_dbm",
        "f_c" => "f_c_ghz",
        "serving_distance" => "serving_distance_m",
        "speed" => "speed_mps",
        "t_d" => "t_d_ms",
        "gamma_ho" => "gamma_ho_db",
        "q_out" => "q_out_db",
        "t_t" => "t_t_ms",
        "t_p" => "t_p_s",
        "r_o" => "r_o_m",
        "r_t" => "r_t_m",
        "length" => "length_m",
        other => other,
    }
}
