//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate drops below `max(abs_tol, rel_tol * |I|)` or the
//! subdivision budget runs out. In the latter case the caller gets a
//! [`ModelError::Quadrature`] carrying the error that was actually reached.

use crate::error::{ModelError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`. Breakpoints, when given, split the initial
/// interval so known kinks sit on segment boundaries.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(ModelError::Domain(format!(
            "quadrature bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut segments = Vec::with_capacity(64);
    let mut left = lo;
    for c in cuts.into_iter().chain(std::iter::once(hi)) {
        if c > left {
            segments.push(gk15(&mut f, left, c));
            left = c;
        }
    }

    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if !(err.is_finite() && total.is_finite()) {
            return Err(ModelError::Domain("non-finite integrand value".into()));
        }
        if err <= target {
            return Ok(QuadResult {
                value: sign * total,
                error: err,
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(ModelError::Quadrature {
                achieved: err,
                requested: target,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .unwrap();
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            // interval collapsed to machine resolution
            return Err(ModelError::Quadrature {
                achieved: err,
                requested: target,
            });
        }
        segments.push(gk15(&mut f, s.a, mid));
        segments.push(gk15(&mut f, mid, s.b));
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    integrate_with_breaks(f, a, b, &[], opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(
            |x| x.powi(5) - 3.0 * x * x,
            -1.0,
            2.0,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let r = integrate(|x| x.sqrt(), 0.0, 1.0, QuadOptions::rel(1e-10)).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let r = integrate(|x| x.sin(), PI, 0.0, QuadOptions::default()).unwrap();
        assert!((r.value + 2.0).abs() < 1e-12);
    }

    #[test]
    fn kink_with_breakpoint() {
        let r = integrate_with_breaks(
            |x: f64| (x - 0.3).abs(),
            0.0,
            1.0,
            &[0.3],
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_reports_achieved_error() {
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-15,
            max_intervals: 3,
        };
        match integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, opts) {
            Err(ModelError::Quadrature {
                achieved,
                requested,
            }) => assert!(achieved > requested),
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }
}
