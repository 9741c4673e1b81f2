//! Sets of angular intervals on the circle.
//!
//! An [`ArcSet`] is a sorted list of disjoint half-open intervals inside
//! `[0, 2π)`. Arcs that wrap through zero are stored as two pieces.

use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArcSet {
    pieces: Vec<(f64, f64)>,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl ArcSet {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn full() -> Self {
        Self {
            pieces: vec![(0.0, TAU)],
        }
    }

    /// Arc of angles within `half_width` of `center`.
    pub fn centered(center: f64, half_width: f64) -> Self {
        if half_width <= 0.0 {
            return Self::empty();
        }
        if half_width >= PI {
            return Self::full();
        }
        let start = wrap_angle(center - half_width);
        let end = start + 2.0 * half_width;
        if end <= TAU {
            Self {
                pieces: vec![(start, end)],
            }
        } else {
            Self {
                pieces: vec![(0.0, end - TAU), (start, TAU)],
            }
        }
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, phi: f64) -> bool {
        let p = wrap_angle(phi);
        self.pieces.iter().any(|&(a, b)| p >= a && p < b)
    }

    pub fn intersect(&self, other: &ArcSet) -> ArcSet {
        let mut out = Vec::new();
        for &(a1, b1) in &self.pieces {
            for &(a2, b2) in &other.pieces {
                let lo = a1.max(a2);
                let hi = b1.min(b2);
                if hi > lo {
                    out.push((lo, hi));
                }
            }
        }
        out.sort_by(|x, y| x.0.total_cmp(&y.0));
        ArcSet { pieces: out }
    }

    pub fn complement(&self) -> ArcSet {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for &(a, b) in &self.pieces {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < TAU {
            out.push((cursor, TAU));
        }
        ArcSet { pieces: out }
    }

    pub fn difference(&self, other: &ArcSet) -> ArcSet {
        self.intersect(&other.complement())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping_arc_splits() {
        let arc = ArcSet::centered(0.0, 0.5);
        assert_eq!(arc.pieces().len(), 2);
        assert!((arc.measure() - 1.0).abs() < 1e-15);
        assert!(arc.contains(0.2));
        assert!(arc.contains(-0.2));
        assert!(!arc.contains(PI));
    }

    #[test]
    fn complement_and_difference() {
        let a = ArcSet::centered(PI, 1.0);
        let c = a.complement();
        assert!((a.measure() + c.measure() - TAU).abs() < 1e-14);
        assert!(a.intersect(&c).measure() < 1e-15);
        let b = ArcSet::centered(PI + 0.5, 1.0);
        let d = a.difference(&b);
        assert!((d.measure() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn degenerate_widths() {
        assert!(ArcSet::centered(1.0, 0.0).is_empty());
        assert_eq!(ArcSet::centered(1.0, 4.0), ArcSet::full());
        assert!(ArcSet::empty().complement() == ArcSet::full());
    }
}
