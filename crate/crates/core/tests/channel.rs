use std::f64::consts::PI;

use irs_handover::channel::{
    beamforming_gain, gamma_bf, gamma_sc, pathloss_direct, received_power_neighbor,
    received_power_serving, serving_distance_from_threshold, threshold_from_serving_distance,
    ChannelParams,
};
use proptest::prelude::*;

fn params(n: u32) -> ChannelParams {
    ChannelParams::new(10.0, 3.0e9, 4.0, n, 50.0).unwrap()
}

#[test]
fn beta_at_three_gigahertz() {
    let p = params(100);
    let expect = (40.0 * PI).powi(-2);
    assert!((p.beta / expect - 1.0).abs() < 1e-3);
    assert!((p.beta - 6.333e-5).abs() < 1e-7);
    assert_eq!(pathloss_direct(1.0, &p).unwrap(), p.beta);
    assert!(pathloss_direct(0.0, &p).is_err());
}

#[test]
fn array_gain_values() {
    assert_eq!(beamforming_gain(0), 0.0);
    assert!((beamforming_gain(100) - 6206.8).abs() < 0.1);
}

#[test]
fn serving_power_branches() {
    let p = params(100);
    let (x, phi) = (120.0, 1.1);
    let at = received_power_serving(x, 50.0, phi, &p).unwrap();
    assert_eq!(at, p.p_t * gamma_bf(x, 50.0, phi, &p).unwrap());
    let past = received_power_serving(x, 50.0 + 1e-9, phi, &p).unwrap();
    assert!((past - p.p_t * gamma_sc(x, 50.0, phi, &p).unwrap()).abs() < 1e-6 * past);
    let p0 = params(0);
    let a = received_power_serving(x, 10.0, phi, &p0).unwrap();
    let b = received_power_serving(x, 90.0, phi, &p0).unwrap();
    assert_eq!(a, p0.p_t * pathloss_direct(x, &p0).unwrap());
    assert_eq!(a, b);
}

#[test]
fn neighbor_power_is_scattered() {
    let p = params(100);
    for (x, d, phi) in [(80.0, 12.0, 0.3), (210.0, 75.0, 2.9)] {
        assert_eq!(
            received_power_neighbor(x, d, phi, &p).unwrap(),
            p.p_t * gamma_sc(x, d, phi, &p).unwrap()
        );
    }
}

#[test]
fn right_angle_and_far_field() {
    let p = params(100);
    let (x, d): (f64, f64) = (90.0, 40.0);
    let direct = p.gamma_sc_direct(x, d, x.hypot(d));
    assert!((gamma_sc(x, d, PI / 2.0, &p).unwrap() / direct - 1.0).abs() < 1e-12);
    let far = gamma_sc(x, 1e9, 0.4, &p).unwrap();
    assert!((far / pathloss_direct(x, &p).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_geometry_rejected() {
    let p = params(100);
    assert!(gamma_bf(50.0, 50.0, 0.0, &p).is_err());
    assert!(gamma_sc(0.0, 5.0, 1.0, &p).is_err());
}

#[test]
fn threshold_identity_and_round_trip() {
    let p = params(100);
    assert!((serving_distance_from_threshold(p.g_bf * p.beta, &p) - 1.0).abs() < 1e-15);
    for d in [3.0, 10.0, 50.0, 77.7] {
        let back = serving_distance_from_threshold(threshold_from_serving_distance(d, &p), &p);
        assert!((back / d - 1.0).abs() < 1e-14);
    }
}

/// Solves `Γ_bf/Γ_sc − 1 = γ` in `d` by bisection, for an IRS at right angles
/// to the BS direction, optionally without the coherent cross term.
fn exact_root(p: &ChannelParams, x: f64, gamma: f64, cross_term: bool) -> f64 {
    let g = |z: f64| p.beta * z.powf(-p.alpha);
    let excess = |d: f64| {
        let xp = x.hypot(d);
        let (gb, gr, gbp) = (g(x), g(d), g(xp));
        let n = p.n_elements as f64;
        let mut bf = gb + p.g_bf * gr * gbp;
        if cross_term {
            bf += n * PI / 4.0 * (PI * gb * gr * gbp).sqrt();
        }
        let sc = gb + n * gbp * gr;
        bf / sc - 1.0 - gamma
    };
    let (mut lo, mut hi): (f64, f64) = (1e-6, 1e6);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn closed_form_is_the_reflected_term_balance() {
    // Without the coherent cross term, and with the IRS close to the user,
    // Γ_bf/Γ_sc − 1 ≈ G_bf β d^{−α}·g_b(x′)/g_b(x), which is the closed form.
    for n in [100, 500] {
        let p = params(n);
        for d in [2.0, 5.0] {
            let gamma = threshold_from_serving_distance(d, &p);
            let root = exact_root(&p, 200.0, gamma, false);
            assert!((root / d - 1.0).abs() < 0.05, "N={n} D={d}: root {root}");
        }
    }
}

#[test]
fn cross_term_moves_the_root_outward() {
    let p = params(100);
    let gamma = threshold_from_serving_distance(10.0, &p);
    let with = exact_root(&p, 200.0, gamma, true);
    let without = exact_root(&p, 200.0, gamma, false);
    assert!(with > without);
}

proptest! {
    #[test]
    fn beamformed_dominates_scattered(x in 1.0f64..500.0, d in 0.5f64..300.0, phi in 0.0f64..(2.0 * PI), n in 1u32..600) {
        let p = params(n);
        if let (Ok(bf), Ok(sc)) = (gamma_bf(x, d, phi, &p), gamma_sc(x, d, phi, &p)) {
            prop_assert!(bf >= sc);
            prop_assert!(sc > 0.0 && bf.is_finite());
        }
    }

    #[test]
    fn gains_decrease_in_bs_distance(x in 1.0f64..400.0, d in 0.5f64..200.0, n in 0u32..400) {
        let p = params(n);
        // φ = π keeps the IRS behind the user so x′ also grows with x
        let a = gamma_bf(x, d, PI, &p).unwrap();
        let b = gamma_bf(x * 1.1, d, PI, &p).unwrap();
        prop_assert!(b < a);
        let a = gamma_sc(x, d, PI, &p).unwrap();
        let b = gamma_sc(x * 1.1, d, PI, &p).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn gains_decrease_in_irs_distance(x in 1.0f64..400.0, d in 0.5f64..200.0, n in 1u32..400) {
        let p = params(n);
        let direct = pathloss_direct(x, &p).unwrap();
        // the reflected part can sit below the resolution of the total
        let (a, b) = (gamma_bf(x, d, PI, &p).unwrap(), gamma_bf(x, d * 1.1, PI, &p).unwrap());
        prop_assert!(b <= a);
        prop_assert!(p.gamma_bf_direct(x, d * 1.1, x + d * 1.1) - direct < p.gamma_bf_direct(x, d, x + d) - direct || b == a);
        let refl = |d: f64| p.n_elements as f64 * p.gain(x + d) * p.gain(d);
        prop_assert!(refl(d * 1.1) < refl(d));
        let (a, b) = (gamma_sc(x, d, PI, &p).unwrap(), gamma_sc(x, d * 1.1, PI, &p).unwrap());
        prop_assert!(b <= a);
    }
}
