//! The two-BS mobility frame and its statistical inputs.
//!
//! The original BS sits at `(0, r_o)`, the target BS at `(L, r_t)`, and the
//! user walks along the x axis from the original foot point towards the
//! target foot point in steps of `Δx = v·T_d`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::quad::{integrate, integrate_with_breaks, QuadOptions};

const EDGE: f64 = 1e-9;

/// Crossing-length density in units where `λ_b = 1`.
///
/// The inner variables run over the triangle `υ + τ < π`; outside it the
/// two ratios `ρ_υ`, `ρ_τ` turn negative and the formula stops being a
/// density.
fn unit_crossing_density(u: f64, rel_tol: f64) -> Result<f64> {
    let u2 = u * u;
    let inner_opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: rel_tol * 0.1,
        max_intervals: 4000,
    };
    let outer_opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol,
        max_intervals: 4000,
    };
    let mut err = None;
    let outer = integrate(
        |ups: f64| {
            let hi = PI - ups - EDGE;
            if hi <= EDGE {
                return 0.0;
            }
            let inner = integrate(
                |tau: f64| {
                    let sn = (ups + tau).sin();
                    let r_u = ups.sin() / sn;
                    let r_t = tau.sin() / sn;
                    let v2 = (1.0 + r_t * r_t - 2.0 * r_t * ups.cos())
                        * (1.0 - tau / PI + (2.0 * tau).sin() / (2.0 * PI))
                        + r_t * r_t * (1.0 - ups / PI + (2.0 * ups).sin() / (2.0 * PI));
                    let e = (-PI * u2 * v2).exp();
                    if e == 0.0 {
                        return 0.0;
                    }
                    let b0 = ((PI - tau) * tau.cos() + tau.sin()) / PI;
                    let c0 = ((PI - tau) + tau.sin() * tau.cos()) / PI;
                    PI * PI * u2 * r_u * r_t * (2.0 * PI * u2 * b0 * b0 * r_u * r_u - c0) / sn * e
                },
                EDGE,
                hi,
                inner_opts,
            );
            match inner {
                Ok(r) => r.value,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        EDGE,
        PI - EDGE,
        outer_opts,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(outer?.value)
}

/// Density of the crossing length `L` between the foot points of two
/// neighbouring BSs, per metre.
pub fn crossing_length_pdf(l: f64, lambda_b: f64) -> Result<f64> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(ModelError::Domain(format!(
            "crossing length must be positive, got {l}"
        )));
    }
    if !(lambda_b > 0.0 && lambda_b.is_finite()) {
        return Err(ModelError::Domain(format!(
            "BS density must be positive, got {lambda_b}"
        )));
    }
    let s = lambda_b.sqrt();
    Ok(s * unit_crossing_density(l * s, 1e-6)?.max(0.0))
}

fn unit_chunk(a: f64, b: f64, power: i32, opts: QuadOptions) -> Result<f64> {
    let mut err = None;
    let r = integrate(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            match unit_crossing_density(u, 1e-7) {
                Ok(g) => u.powi(power) * g,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        a,
        b,
        opts,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(r?.value)
}

/// Integrates the unit density in chunks until a chunk's mass drops below
/// `tail_mass`. Returns `(∫ g, ∫ u g)`.
fn unit_moments(tail_mass: f64) -> Result<(f64, f64)> {
    let opts = QuadOptions {
        abs_tol: tail_mass * 1e-2,
        rel_tol: 1e-8,
        max_intervals: 400,
    };
    let width = 0.5;
    let mut mass = 0.0;
    let mut first = 0.0;
    let mut a = 0.0;
    loop {
        let b = a + width;
        let chunk = unit_chunk(a, b, 0, opts)?;
        mass += chunk;
        first += unit_chunk(a, b, 1, opts)?;
        a = b;
        if a > 2.0 && chunk < tail_mass {
            return Ok((mass, first));
        }
        if a > 50.0 {
            return Err(ModelError::Quadrature {
                achieved: chunk,
                requested: tail_mass,
            });
        }
    }
}

/// Mean crossing length `E[L]` for BS density `lambda_b` (per m²), with the
/// integral truncated once the remaining mass falls below `tail_mass`.
pub fn expected_crossing_length_with_tail(lambda_b: f64, tail_mass: f64) -> Result<f64> {
    if !(lambda_b > 0.0 && lambda_b.is_finite()) {
        return Err(ModelError::Domain(format!(
            "BS density must be positive, got {lambda_b}"
        )));
    }
    let (_, first) = unit_moments(tail_mass)?;
    Ok(first / lambda_b.sqrt())
}

pub fn expected_crossing_length(lambda_b: f64) -> Result<f64> {
    expected_crossing_length_with_tail(lambda_b, 1e-6)
}

/// Total mass of the crossing-length density (should be 1).
pub fn crossing_length_mass(tail_mass: f64) -> Result<f64> {
    Ok(unit_moments(tail_mass)?.0)
}

static UNIT_MEAN_LENGTH: OnceLock<std::result::Result<f64, ModelError>> = OnceLock::new();

/// Same as [`expected_crossing_length`], computed once per process in unit
/// density and rescaled by `1/√λ_b`.
pub fn cached_expected_crossing_length(lambda_b: f64) -> Result<f64> {
    if !(lambda_b > 0.0 && lambda_b.is_finite()) {
        return Err(ModelError::Domain(format!(
            "BS density must be positive, got {lambda_b}"
        )));
    }
    let unit = UNIT_MEAN_LENGTH
        .get_or_init(|| unit_moments(1e-6).map(|(_, f)| f))
        .clone()?;
    Ok(unit / lambda_b.sqrt())
}

/// Mean perpendicular offset of the nearest BS, `∫∫ |sin φ| r² λ_b e^{−λ_b π r²} dφ dr`,
/// returned as `(r_o, −r_o)`.
pub fn default_offsets(lambda_b: f64) -> (f64, f64) {
    let opts = QuadOptions::default();
    let angular = integrate_with_breaks(|p: f64| p.sin().abs(), 0.0, 2.0 * PI, &[PI], opts)
        .map(|r| r.value)
        .unwrap_or(4.0);
    let scale = 1.0 / (PI * lambda_b).sqrt();
    let radial = integrate(
        |r: f64| r * r * lambda_b * (-lambda_b * PI * r * r).exp(),
        0.0,
        12.0 * scale,
        QuadOptions::rel(1e-12).with_abs(0.0),
    )
    .map(|r| r.value)
    .unwrap_or(0.25 / (PI * lambda_b.sqrt()));
    let r_o = angular * radial;
    (r_o, -r_o)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub r_o: f64,
    pub r_t: f64,
    pub length: f64,
    pub x_mid: f64,
    /// Acute angle between the trajectory and the BS bisector.
    pub theta: f64,
    pub delta_x: f64,
    pub step_count: usize,
}

pub fn build_geometry(
    r_o: f64,
    r_t: f64,
    length: f64,
    speed: f64,
    t_d: f64,
) -> Result<ScenarioGeometry> {
    if length == 0.0 && r_o == r_t {
        return Err(ModelError::DegenerateGeometry("both BSs coincide".into()));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(ModelError::Domain(format!(
            "crossing length must be positive, got {length}"
        )));
    }
    if !(speed > 0.0 && t_d > 0.0) {
        return Err(ModelError::Domain(
            "speed and measurement period must be positive".into(),
        ));
    }
    if !(r_o.is_finite() && r_t.is_finite()) {
        return Err(ModelError::Domain("BS offsets must be finite".into()));
    }
    let delta_x = speed * t_d;
    // point on the trajectory equidistant from both BSs
    let x_mid = ((r_t * r_t - r_o * r_o) + length * length) / (2.0 * length);
    let theta = length.atan2((r_o - r_t).abs());
    let ratio = length / delta_x;
    let mut step_count = ratio.ceil().max(1.0) as usize;
    // guard against ceil landing one short through rounding of the division
    while (step_count as f64) * delta_x < length {
        step_count += 1;
    }
    Ok(ScenarioGeometry {
        r_o,
        r_t,
        length,
        x_mid,
        theta,
        delta_x,
        step_count,
    })
}

impl ScenarioGeometry {
    pub fn x(&self, i: isize) -> f64 {
        i as f64 * self.delta_x
    }

    pub fn original_bs(&self) -> (f64, f64) {
        (0.0, self.r_o)
    }

    pub fn target_bs(&self) -> (f64, f64) {
        (self.length, self.r_t)
    }

    /// Distance between the two BSs.
    pub fn separation(&self) -> f64 {
        self.length.hypot(self.r_o - self.r_t)
    }

    pub fn sin_theta(&self) -> f64 {
        self.length / self.separation()
    }

    /// Signed distance from the trajectory point `x` to the bisector,
    /// positive on the original side.
    pub fn offset(&self, x: f64) -> f64 {
        (self.x_mid - x) * self.sin_theta()
    }

    /// Direction, as seen from any point, of the normal pointing from the
    /// original side into the target side.
    pub fn target_normal_angle(&self) -> f64 {
        (self.r_t - self.r_o).atan2(self.length)
    }

    /// Half-width along the trajectory of the band in which a radius-`d`
    /// disc straddles the bisector.
    pub fn band_half_width(&self, d: f64) -> f64 {
        d / self.sin_theta()
    }

    pub fn frame(&self, i: isize) -> StepFrame {
        let x_i = self.x(i);
        StepFrame::at(self, i, x_i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFrame {
    pub i: isize,
    pub x_i: f64,
    pub x_o: f64,
    pub x_t: f64,
    /// Direction from the user to the original BS.
    pub dir_o: f64,
    /// Direction from the user to the target BS.
    pub dir_t: f64,
}

impl StepFrame {
    pub fn at(g: &ScenarioGeometry, i: isize, x_i: f64) -> Self {
        Self {
            i,
            x_i,
            x_o: x_i.hypot(g.r_o),
            x_t: (g.length - x_i).hypot(g.r_t),
            dir_o: g.r_o.atan2(-x_i),
            dir_t: g.r_t.atan2(g.length - x_i),
        }
    }

    /// Original BS–user–IRS angle for an IRS seen at trajectory angle `phi_prime`.
    pub fn phi_o(&self, phi_prime: f64) -> f64 {
        self.dir_o - phi_prime
    }

    pub fn phi_t(&self, phi_prime: f64) -> f64 {
        phi_prime - self.dir_t
    }
}
