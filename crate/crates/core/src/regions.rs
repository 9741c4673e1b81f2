//! Areas of the IRS reachability regions and their overlaps.
//!
//! Everything is expressed in polar coordinates around the user at step `i`.
//! At radius `ρ` the set of directions that lie in a side's half-plane is an
//! arc, and so is the set of directions that fall inside the previous step's
//! disc. Areas follow from integrating `ρ · |arc set|` over `ρ`, and their
//! radial derivatives are `d · |arc set at d|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::arcs::ArcSet;
use crate::error::Result;
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::scenario::ScenarioGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Original,
    Target,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Original => Side::Target,
            Side::Target => Side::Original,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionFrame {
    pub geometry: ScenarioGeometry,
    pub serving_distance: f64,
    pub i: isize,
}

impl RegionFrame {
    pub fn new(geometry: ScenarioGeometry, serving_distance: f64, i: isize) -> Self {
        Self {
            geometry,
            serving_distance,
            i,
        }
    }

    pub fn x_i(&self) -> f64 {
        self.geometry.x(self.i)
    }

    /// Signed distance from the user to the bisector, positive on the original side.
    pub fn offset(&self) -> f64 {
        self.geometry.offset(self.x_i())
    }

    pub fn delta_x(&self) -> f64 {
        self.geometry.delta_x
    }

    pub fn previous(&self) -> RegionFrame {
        RegionFrame {
            i: self.i - 1,
            ..*self
        }
    }

    /// Whether the radius-`D` disc crosses the bisector at this step.
    pub fn straddles(&self) -> bool {
        self.offset().abs() < self.serving_distance
    }

    /// Directions at radius `rho` that lie in `side`'s half-plane.
    pub fn side_arc(&self, side: Side, rho: f64) -> ArcSet {
        side_arc(
            side,
            self.offset(),
            self.geometry.target_normal_angle(),
            rho,
        )
    }

    /// Directions at radius `rho` that fall inside the previous step's disc.
    pub fn previous_disc_arc(&self, rho: f64) -> ArcSet {
        previous_disc_arc(rho, self.serving_distance, self.delta_x())
    }

    /// Directions at radius `rho` inside `side`'s half-plane and inside the
    /// previous disc.
    pub fn overlap_arc(&self, side: Side, rho: f64) -> ArcSet {
        self.side_arc(side, rho)
            .intersect(&self.previous_disc_arc(rho))
    }

    /// Directions at radius `rho` inside `side`'s half-plane but outside the
    /// previous disc.
    pub fn fresh_arc(&self, side: Side, rho: f64) -> ArcSet {
        self.side_arc(side, rho)
            .difference(&self.previous_disc_arc(rho))
    }
}

/// Arc of directions at radius `rho` on `side` of a line at signed distance
/// `h` (positive towards the original side) whose target-pointing normal has
/// direction `psi`.
pub fn side_arc(side: Side, h: f64, psi: f64, rho: f64) -> ArcSet {
    let target = if rho <= 0.0 {
        if h < 0.0 {
            ArcSet::full()
        } else {
            ArcSet::empty()
        }
    } else {
        let c = h / rho;
        if c >= 1.0 {
            ArcSet::empty()
        } else if c <= -1.0 {
            ArcSet::full()
        } else {
            ArcSet::centered(psi, c.acos())
        }
    };
    match side {
        Side::Target => target,
        Side::Original => target.complement(),
    }
}

/// Arc of directions at radius `rho` inside a radius-`big_r` disc centred
/// `dx` behind the user along the trajectory.
pub fn previous_disc_arc(rho: f64, big_r: f64, dx: f64) -> ArcSet {
    if rho <= 0.0 || dx <= 0.0 {
        return if rho < big_r {
            ArcSet::full()
        } else {
            ArcSet::empty()
        };
    }
    let c = (big_r * big_r - rho * rho - dx * dx) / (2.0 * rho * dx);
    if c >= 1.0 {
        ArcSet::full()
    } else if c <= -1.0 {
        ArcSet::empty()
    } else {
        ArcSet::centered(PI, PI - c.acos())
    }
}

/// Intersection area of two discs with radii `r1`, `r2` and centre separation `sep`.
pub fn lens_area(r1: f64, r2: f64, sep: f64) -> f64 {
    let (r1, r2, sep) = (r1.max(0.0), r2.max(0.0), sep.abs());
    if sep >= r1 + r2 {
        return 0.0;
    }
    if sep <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((sep * sep + r1 * r1 - r2 * r2) / (2.0 * sep * r1))
        .clamp(-1.0, 1.0)
        .acos();
    let a2 = ((sep * sep + r2 * r2 - r1 * r1) / (2.0 * sep * r2))
        .clamp(-1.0, 1.0)
        .acos();
    let k = (-sep + r1 + r2) * (sep + r1 - r2) * (sep - r1 + r2) * (sep + r1 + r2);
    (r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.max(0.0).sqrt()).max(0.0)
}

/// Area of the part of a radius-`r` disc on `side` of a line at signed
/// distance `h` from its centre.
fn side_disc_area(side: Side, h: f64, r: f64) -> f64 {
    let full = PI * r * r;
    let eps = 2.0 * (h / r).clamp(-1.0, 1.0).acos();
    let target = (r * r * (eps - eps.sin()) / 2.0).clamp(0.0, full);
    match side {
        Side::Target => target,
        Side::Original => full - target,
    }
}

/// `S_i^s`: area of the radius-`D` disc around the user lying in `side`'s cell.
pub fn area_reachable(side: Side, frame: &RegionFrame) -> f64 {
    side_disc_area(side, frame.offset(), frame.serving_distance)
}

/// `S_{i,d}^s`: the same with the disc shrunk to radius `d`.
pub fn area_reachable_within(side: Side, frame: &RegionFrame, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    side_disc_area(side, frame.offset(), d)
}

fn side_state(side: Side, h: f64, d: f64) -> Option<bool> {
    // Some(true): half-plane covers the whole radius-d disc; Some(false): misses it.
    let towards = match side {
        Side::Original => h,
        Side::Target => -h,
    };
    if towards >= d {
        Some(true)
    } else if towards <= -d {
        Some(false)
    } else {
        None
    }
}

/// `S_{i,d}^{s,∩}`: area within `d` of the user that is in `side`'s cell and
/// inside the previous step's radius-`D` disc.
pub fn area_overlap_within(side: Side, frame: &RegionFrame, d: f64) -> Result<f64> {
    if d <= 0.0 {
        return Ok(0.0);
    }
    let big_d = frame.serving_distance;
    let dx = frame.delta_x();
    let h = frame.offset();
    match side_state(side, h, d) {
        Some(true) => return Ok(lens_area(d, big_d, dx)),
        Some(false) => return Ok(0.0),
        None => {}
    }
    let upper = d.min(big_d + dx);
    if upper <= 0.0 || dx >= big_d + d {
        return Ok(0.0);
    }
    let breaks = [big_d - dx, dx - big_d, h.abs()];
    let r = integrate_with_breaks(
        |rho: f64| rho * frame.overlap_arc(side, rho).measure(),
        0.0,
        upper,
        &breaks,
        QuadOptions {
            abs_tol: 1e-10 * big_d * big_d,
            rel_tol: 1e-10,
            max_intervals: 2000,
        },
    )?;
    Ok(r.value.max(0.0))
}

/// `S_i^{s,∩}`: overlap of this step's and the previous step's reachability regions.
pub fn area_reachable_overlap(side: Side, frame: &RegionFrame) -> Result<f64> {
    area_overlap_within(side, frame, frame.serving_distance)
}

/// Step used by the finite-difference fallback of the derivatives.
pub fn fd_step(serving_distance: f64) -> f64 {
    (1e-6 * serving_distance).max(1e-4)
}

/// `∂S_{i,d}^s/∂d` via the closed-form segment derivative. Close to the
/// tangency `d ≈ |h|`, where the closed form is a product of a vanishing and a
/// diverging factor, a central difference is used instead.
pub fn deriv_area_within(side: Side, frame: &RegionFrame, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let h = frame.offset();
    match side_state(side, h, d) {
        Some(true) => return 2.0 * PI * d,
        Some(false) => return 0.0,
        None => {}
    }
    let step = fd_step(frame.serving_distance);
    if d - h.abs() < 2.0 * step {
        let lo = (d - step).max(0.0);
        let hi = d + step;
        return (area_reachable_within(side, frame, hi) - area_reachable_within(side, frame, lo))
            / (hi - lo);
    }
    let eps = 2.0 * (h / d).clamp(-1.0, 1.0).acos();
    let eps_prime = 2.0 * h / (d * (d * d - h * h).sqrt());
    let target = (eps - eps.sin() + (eps_prime * d / 2.0) * (1.0 - eps.cos())) * d;
    match side {
        Side::Target => target,
        Side::Original => 2.0 * PI * d - target,
    }
}

/// `∂S_{i,d}^{s,∩}/∂d`: length of the overlap boundary arc at radius `d`.
pub fn deriv_overlap_within(side: Side, frame: &RegionFrame, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let h = frame.offset();
    let big_d = frame.serving_distance;
    let dx = frame.delta_x();
    match side_state(side, h, d) {
        Some(true) => {
            let c = ((d * d - big_d * big_d + dx * dx) / (2.0 * d * dx)).clamp(-1.0, 1.0);
            2.0 * d * c.acos()
        }
        Some(false) => 0.0,
        None => d * frame.overlap_arc(side, d).measure(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_geometry;

    fn frame(i: isize) -> RegionFrame {
        let g = build_geometry(100.66, -100.66, 248.36, 20.0, 0.01).unwrap();
        RegionFrame::new(g, 50.0, i)
    }

    #[test]
    fn lens_limits() {
        assert_eq!(lens_area(2.0, 3.0, 5.0), 0.0);
        assert!((lens_area(3.0, 3.0, 0.0) - 9.0 * PI).abs() < 1e-12);
        assert!((lens_area(1.0, 5.0, 2.0) - PI).abs() < 1e-12);
        let r: f64 = 4.0;
        let s: f64 = 1.0;
        let expected =
            2.0 * r * r * (s / (2.0 * r)).acos() - 0.5 * s * (4.0 * r * r - s * s).sqrt();
        assert!((lens_area(r, r, s) - expected).abs() < 1e-12);
    }

    #[test]
    fn sides_partition_disc() {
        for i in [0, 300, 600, 621, 650, 900, 1242] {
            let f = frame(i);
            let sum = area_reachable(Side::Original, &f) + area_reachable(Side::Target, &f);
            assert!((sum - PI * 2500.0).abs() < 1e-9 * PI * 2500.0);
        }
        let f = frame(10);
        assert_eq!(area_reachable(Side::Original, &f), PI * 2500.0);
        assert_eq!(area_reachable(Side::Target, &f), 0.0);
    }

    #[test]
    fn within_at_full_radius_matches() {
        let f = frame(600);
        for side in [Side::Original, Side::Target] {
            assert_eq!(
                area_reachable_within(side, &f, 50.0),
                area_reachable(side, &f)
            );
        }
    }

    #[test]
    fn overlap_off_boundary_is_lens() {
        let f = frame(5);
        let v = area_reachable_overlap(Side::Original, &f).unwrap();
        assert!((v - lens_area(50.0, 50.0, 0.2)).abs() < 1e-9);
        assert_eq!(area_reachable_overlap(Side::Target, &f).unwrap(), 0.0);
        let small = area_overlap_within(Side::Original, &f, 10.0).unwrap();
        assert!((small - 100.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn overlap_numeric_continuous_with_lens() {
        // disc just touching the bisector: numeric and closed form must meet
        let g = frame(0).geometry;
        let h_edge = g.x_mid - 50.0 / g.sin_theta();
        let i = (h_edge / g.delta_x).ceil() as isize;
        let f = frame(i);
        let numeric = area_reachable_overlap(Side::Original, &f).unwrap();
        let lens = lens_area(50.0, 50.0, 0.2);
        assert!((numeric - lens).abs() / lens < 1e-3);
    }

    #[test]
    fn derivative_interior_and_sides() {
        let f = frame(10);
        assert!((deriv_area_within(Side::Original, &f, 20.0) - 40.0 * PI).abs() < 1e-12);
        assert_eq!(deriv_area_within(Side::Target, &f, 20.0), 0.0);
        let f = frame(600);
        let h = f.offset().abs();
        for d in [h + 1.0, h + 5.0, 49.0] {
            let sum =
                deriv_area_within(Side::Original, &f, d) + deriv_area_within(Side::Target, &f, d);
            assert!((sum - 2.0 * PI * d).abs() < 1e-9 * d);
        }
    }

    #[test]
    fn overlap_derivative_containment() {
        let f = frame(5);
        assert!((deriv_overlap_within(Side::Original, &f, 20.0) - 40.0 * PI).abs() < 1e-9);
        let g = f.geometry;
        let far = RegionFrame::new(
            ScenarioGeometry {
                delta_x: 100.0,
                ..g
            },
            30.0,
            0,
        );
        assert_eq!(deriv_overlap_within(Side::Original, &far, 60.0), 0.0);
    }
}
