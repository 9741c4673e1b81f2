//! Direct and IRS-cascaded path gains.

use std::f64::consts::PI;

use crate::config::SPEED_OF_LIGHT;
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub p_t: f64,
    pub f_c: f64,
    pub alpha: f64,
    pub n_elements: u32,
    pub beta: f64,
    /// Beamforming array gain `(π²/16)N² + (1 − π²/16)N`.
    pub g_bf: f64,
    pub serving_distance: f64,
}

pub fn beamforming_gain(n: u32) -> f64 {
    let n = n as f64;
    let k = PI * PI / 16.0;
    k * n * n + (1.0 - k) * n
}

impl ChannelParams {
    pub fn new(
        p_t: f64,
        f_c: f64,
        alpha: f64,
        n_elements: u32,
        serving_distance: f64,
    ) -> Result<Self> {
        if !(alpha > 2.0) {
            return Err(ModelError::invalid(
                "alpha",
                "path-loss exponent must exceed 2",
            ));
        }
        if !(f_c > 0.0) {
            return Err(ModelError::invalid("f_c", "must be positive"));
        }
        let beta = (4.0 * PI * f_c / SPEED_OF_LIGHT).powi(-2);
        Ok(Self {
            p_t,
            f_c,
            alpha,
            n_elements,
            beta,
            g_bf: beamforming_gain(n_elements),
            serving_distance,
        })
    }

    /// `g(x) = β x^{−α}` without argument checks. Infinite distance gives 0.
    #[inline]
    pub fn gain(&self, dist: f64) -> f64 {
        self.beta * dist.powf(-self.alpha)
    }

    /// Γ_bf with the BS–IRS distance supplied directly.
    #[inline]
    pub fn gamma_bf_direct(&self, x: f64, d: f64, x_prime: f64) -> f64 {
        let gb = self.gain(x);
        if self.n_elements == 0 || !d.is_finite() {
            return gb;
        }
        let gr = self.gain(d);
        let gbp = self.gain(x_prime);
        let n = self.n_elements as f64;
        gb + self.g_bf * gr * gbp + n * (PI / 4.0) * (PI * gb * gr * gbp).sqrt()
    }

    /// Γ_sc with the BS–IRS distance supplied directly.
    #[inline]
    pub fn gamma_sc_direct(&self, x: f64, d: f64, x_prime: f64) -> f64 {
        let gb = self.gain(x);
        if self.n_elements == 0 || !d.is_finite() {
            return gb;
        }
        gb + self.n_elements as f64 * self.gain(x_prime) * self.gain(d)
    }
}

/// BS–IRS distance by the law of cosines.
pub fn bs_irs_distance(x: f64, d: f64, phi: f64) -> f64 {
    let c = phi.cos().clamp(-1.0, 1.0);
    (x * x + d * d - 2.0 * x * d * c).max(0.0).sqrt()
}

fn check_args(x: f64, d: f64, phi: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(ModelError::Domain(format!(
            "BS distance must be positive, got {x}"
        )));
    }
    if !(d > 0.0) {
        return Err(ModelError::Domain(format!(
            "IRS distance must be positive, got {d}"
        )));
    }
    if !d.is_finite() {
        return Ok(f64::INFINITY);
    }
    let xp = bs_irs_distance(x, d, phi);
    if !(xp > 0.0) {
        return Err(ModelError::Domain("IRS coincides with the BS".into()));
    }
    Ok(xp)
}

pub fn pathloss_direct(dist: f64, params: &ChannelParams) -> Result<f64> {
    if !(dist > 0.0) {
        return Err(ModelError::Domain(format!(
            "distance must be positive, got {dist}"
        )));
    }
    Ok(params.gain(dist))
}

pub fn gamma_bf(x: f64, d: f64, phi: f64, params: &ChannelParams) -> Result<f64> {
    let xp = check_args(x, d, phi)?;
    Ok(params.gamma_bf_direct(x, d, xp))
}

pub fn gamma_sc(x: f64, d: f64, phi: f64, params: &ChannelParams) -> Result<f64> {
    let xp = check_args(x, d, phi)?;
    Ok(params.gamma_sc_direct(x, d, xp))
}

/// Power from the serving BS: beamformed when `d ≤ D`, scattered otherwise.
pub fn received_power_serving(x: f64, d: f64, phi: f64, params: &ChannelParams) -> Result<f64> {
    if d <= params.serving_distance {
        Ok(params.p_t * gamma_bf(x, d, phi, params)?)
    } else {
        Ok(params.p_t * gamma_sc(x, d, phi, params)?)
    }
}

/// Power from a neighbour BS, which never gets a beamformed reflection.
pub fn received_power_neighbor(x: f64, d: f64, phi: f64, params: &ChannelParams) -> Result<f64> {
    Ok(params.p_t * gamma_sc(x, d, phi, params)?)
}

/// Serving distance implied by a relative-gain threshold, `(G_bf β / γ)^{1/α}`.
pub fn serving_distance_from_threshold(gamma_irs: f64, params: &ChannelParams) -> f64 {
    (params.g_bf * params.beta / gamma_irs).powf(1.0 / params.alpha)
}

pub fn threshold_from_serving_distance(d: f64, params: &ChannelParams) -> f64 {
    params.g_bf * params.beta / d.powf(params.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32) -> ChannelParams {
        ChannelParams::new(10.0, 3e9, 4.0, n, 50.0).unwrap()
    }

    #[test]
    fn beta_and_array_gain() {
        let p = params(100);
        assert!((p.beta - (40.0 * PI).powi(-2)).abs() < 1e-18);
        assert!((p.beta - 6.3326e-5).abs() < 1e-8);
        assert!((p.g_bf - 6206.8).abs() < 0.1);
        assert_eq!(params(0).g_bf, 0.0);
    }

    #[test]
    fn pathloss_cases() {
        let p = params(100);
        assert_eq!(pathloss_direct(1.0, &p).unwrap(), p.beta);
        let r = pathloss_direct(10.0, &p).unwrap() / pathloss_direct(20.0, &p).unwrap();
        assert!((r - 16.0).abs() < 1e-12);
        assert!(pathloss_direct(0.0, &p).is_err());
    }

    #[test]
    fn zero_elements_collapse() {
        let p = params(0);
        let gb = p.gain(120.0);
        assert_eq!(gamma_bf(120.0, 5.0, 0.3, &p).unwrap(), gb);
        assert_eq!(gamma_sc(120.0, 5.0, 0.3, &p).unwrap(), gb);
        assert_eq!(
            received_power_serving(120.0, 5.0, 0.3, &p).unwrap(),
            received_power_neighbor(120.0, 5.0, 0.3, &p).unwrap()
        );
    }

    #[test]
    fn right_angle_uses_pythagoras() {
        assert!((bs_irs_distance(30.0, 40.0, PI / 2.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn far_scatterer_vanishes() {
        let p = params(100);
        let gb = p.gain(200.0);
        let g = gamma_sc(200.0, 1e9, 1.0, &p).unwrap();
        assert!(((g - gb) / gb).abs() < 1e-12);
    }

    #[test]
    fn serving_branch_boundary() {
        let p = params(100);
        let at = received_power_serving(200.0, 50.0, 1.0, &p).unwrap();
        assert_eq!(at, p.p_t * gamma_bf(200.0, 50.0, 1.0, &p).unwrap());
        let past = received_power_serving(200.0, 50.0 + 1e-9, 1.0, &p).unwrap();
        let jump = p.p_t
            * (gamma_bf(200.0, 50.0, 1.0, &p).unwrap() - gamma_sc(200.0, 50.0, 1.0, &p).unwrap());
        assert!(((at - past) - jump).abs() <= 1e-6 * jump);
    }

    #[test]
    fn coincident_irs_rejected() {
        let p = params(100);
        assert!(gamma_bf(10.0, 10.0, 0.0, &p).is_err());
    }

    #[test]
    fn threshold_round_trip() {
        let p = params(100);
        assert!((serving_distance_from_threshold(p.g_bf * p.beta, &p) - 1.0).abs() < 1e-15);
        for d in [3.0, 10.0, 50.0] {
            let back = serving_distance_from_threshold(threshold_from_serving_distance(d, &p), &p);
            assert!((back - d).abs() < 1e-12 * d);
        }
    }
}
