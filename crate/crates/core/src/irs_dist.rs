//! Conditional laws of the user–IRS distance `d` and trajectory-to-IRS angle
//! `φ′` in each connection state, and expectations of indicator functions
//! of `(d, φ′)` under them.
//!
//! Distances are handled through their CDFs, so cell masses are exact
//! increments. The angle is uniform on the arc set that is admissible at
//! the given distance.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use crate::arcs::ArcSet;
use crate::channel::ChannelParams;
use crate::error::{ModelError, Result};
use crate::irs_chain::IrsState;
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::regions::{
    area_reachable_within, deriv_area_within, deriv_overlap_within, RegionFrame, Side,
};
use crate::scenario::StepFrame;

/// Upper quantile at which the no-serving distance law is truncated.
pub const TAIL_QUANTILE: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalPdfSpec {
    pub side: Side,
    pub state: IrsState,
    pub frame: RegionFrame,
    pub lambda_r: f64,
    z: Option<f64>,
}

impl ConditionalPdfSpec {
    pub fn new(side: Side, state: IrsState, frame: RegionFrame, lambda_r: f64) -> Self {
        let mut spec = Self {
            side,
            state,
            frame,
            lambda_r,
            z: None,
        };
        spec.z = spec.compute_normalizer().ok();
        spec
    }

    fn big_d(&self) -> f64 {
        self.frame.serving_distance
    }

    /// Area whose void probability drives the distance CDF, as a function
    /// of the radius `d`.
    fn driving_area(&self, d: f64) -> Result<f64> {
        match self.state {
            IrsState::KeepConnection => Ok(area_reachable_within(self.side, &self.frame, d)),
            IrsState::InitialConnection => self.fresh_area(d),
            _ => Ok(PI * (d * d - self.big_d() * self.big_d())),
        }
    }

    /// Area within `d` that lies in the side's cell but outside the
    /// previous step's disc.
    fn fresh_area(&self, d: f64) -> Result<f64> {
        let big_d = self.big_d();
        let lo = (big_d - self.frame.delta_x()).max(0.0);
        let hi = d.min(big_d);
        if hi <= lo {
            return Ok(0.0);
        }
        let h = self.frame.offset().abs();
        let mut edges = vec![lo];
        if h > lo && h < hi {
            edges.push(h);
        }
        edges.push(hi);
        let opts = QuadOptions {
            abs_tol: 1e-12 * big_d * big_d,
            rel_tol: 1e-10,
            max_intervals: 500,
        };
        let mut total = 0.0;
        for w in edges.windows(2) {
            let a = w[0];
            // the arc opens like √(ρ − a) past each edge; ρ = a + t² removes it
            let r = integrate_with_breaks(
                |t: f64| {
                    let rho = a + t * t;
                    2.0 * t * rho * self.frame.fresh_arc(self.side, rho).measure()
                },
                0.0,
                (w[1] - a).sqrt(),
                &[],
                opts,
            )?;
            total += r.value;
        }
        Ok(total.max(0.0))
    }

    /// `1 − e^{−λ·A(D)}`, the probability that the conditioning event has
    /// any IRS at all. Zero means the state cannot occur.
    pub fn normalizer(&self) -> Result<f64> {
        match self.z {
            Some(z) => Ok(z),
            None => self.compute_normalizer(),
        }
    }

    fn compute_normalizer(&self) -> Result<f64> {
        if self.lambda_r <= 0.0 {
            return Ok(0.0);
        }
        if !self.state.serving() {
            return Ok(1.0);
        }
        let a = self.driving_area(self.big_d())?;
        Ok(-(-self.lambda_r * a).exp_m1())
    }

    pub fn is_reachable(&self) -> Result<bool> {
        Ok(self.normalizer()? > 0.0)
    }

    /// Interval carrying the distance law. For no-serving states it ends at
    /// the truncation quantile.
    pub fn support(&self) -> (f64, f64) {
        let big_d = self.big_d();
        match self.state {
            IrsState::KeepConnection => (0.0, big_d),
            IrsState::InitialConnection => ((big_d - self.frame.delta_x()).max(0.0), big_d),
            _ => {
                let q = -(1.0 - TAIL_QUANTILE).ln() / (self.lambda_r * PI);
                (big_d, (big_d * big_d + q).sqrt())
            }
        }
    }

    /// Radii where the law or its angle arcs change form.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let mut b = vec![
            self.frame.offset().abs(),
            self.big_d() - self.frame.delta_x(),
        ];
        b.retain(|x| *x > lo && *x < hi);
        b.sort_by(f64::total_cmp);
        b
    }

    pub fn cdf_distance(&self, d: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if d <= lo {
            return Ok(0.0);
        }
        if !self.state.serving() {
            if self.lambda_r <= 0.0 {
                return Err(ModelError::UnreachableState);
            }
            return Ok(-(-self.lambda_r * PI * (d * d - lo * lo)).exp_m1());
        }
        let z = self.normalizer()?;
        if z <= 0.0 {
            return Err(ModelError::UnreachableState);
        }
        if d >= hi {
            return Ok(1.0);
        }
        let a = self.driving_area(d)?;
        Ok((-(-self.lambda_r * a).exp_m1() / z).clamp(0.0, 1.0))
    }

    /// Arc set on which the angle is uniform given distance `d`.
    pub fn angle_arcs(&self, d: f64) -> ArcSet {
        let arcs = self.raw_arcs(d);
        if arcs.measure() > 0.0 || !self.state.serving() {
            return arcs;
        }
        // Corner radii where the admissible arc shrinks to a point: take the
        // limit from inside the support.
        let (lo, hi) = self.support();
        let nudge = 1e-9 * self.big_d().max(1.0);
        for probe in [d + nudge, d - nudge] {
            if probe > lo && probe <= hi {
                let a = self.raw_arcs(probe);
                if a.measure() > 0.0 {
                    return a;
                }
            }
        }
        arcs
    }

    fn raw_arcs(&self, d: f64) -> ArcSet {
        match self.state {
            IrsState::KeepConnection => self.frame.side_arc(self.side, d),
            IrsState::InitialConnection => self.frame.fresh_arc(self.side, d),
            _ => ArcSet::full(),
        }
    }
}

/// Density of `d` in the given state.
pub fn pdf_distance(spec: &ConditionalPdfSpec, d: f64) -> Result<f64> {
    let (lo, hi) = spec.support();
    let lambda = spec.lambda_r;
    if !spec.state.serving() {
        if lambda <= 0.0 {
            return Err(ModelError::UnreachableState);
        }
        if d <= lo {
            return Ok(0.0);
        }
        return Ok(2.0 * PI * lambda * d * (-lambda * PI * (d * d - lo * lo)).exp());
    }
    let z = spec.normalizer()?;
    if z <= 0.0 {
        return Err(ModelError::UnreachableState);
    }
    if d <= lo || d > hi {
        return Ok(0.0);
    }
    let frame = &spec.frame;
    let (rate, area) = match spec.state {
        IrsState::KeepConnection => (
            deriv_area_within(spec.side, frame, d),
            area_reachable_within(spec.side, frame, d),
        ),
        _ => {
            let whole = deriv_area_within(spec.side, frame, d);
            let rate = whole - deriv_overlap_within(spec.side, frame, d);
            // cancellation residue where the fresh arc is empty
            let rate = if rate <= 1e-10 * whole { 0.0 } else { rate };
            (rate, spec.driving_area(d)?)
        }
    };
    Ok(rate * lambda * (-lambda * area).exp() / z)
}

/// Density of `φ′` given `d`.
pub fn pdf_angle(spec: &ConditionalPdfSpec, d: f64, phi_prime: f64) -> Result<f64> {
    if spec.state.serving() && !spec.is_reachable()? {
        return Err(ModelError::UnreachableState);
    }
    let arcs = spec.angle_arcs(d);
    let m = arcs.measure();
    if m <= 0.0 || !arcs.contains(phi_prime) {
        return Ok(0.0);
    }
    Ok(1.0 / m)
}

fn segments(spec: &ConditionalPdfSpec) -> Vec<(f64, f64)> {
    let (lo, hi) = spec.support();
    let mut edges = vec![lo];
    edges.extend(spec.breakpoints());
    edges.push(hi);
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect()
}

fn tensor_pass<P: Fn(f64, f64) -> bool>(
    spec: &ConditionalPdfSpec,
    predicate: &P,
    nd: usize,
    nphi: usize,
) -> Result<f64> {
    let segs = segments(spec);
    let last = segs.len().saturating_sub(1);
    let mut total = 0.0;
    for (si, &(a, b)) in segs.iter().enumerate() {
        let h = (b - a) / nd as f64;
        let mut f_lo = spec.cdf_distance(a)?;
        for k in 0..nd {
            let d_hi = a + (k + 1) as f64 * h;
            // the final cell of the truncated tail absorbs the remaining mass
            let f_hi = if si == last && k + 1 == nd {
                1.0
            } else {
                spec.cdf_distance(d_hi)?
            };
            let mass = f_hi - f_lo;
            f_lo = f_hi;
            if mass <= 0.0 {
                continue;
            }
            let d = a + (k as f64 + 0.5) * h;
            let arcs = spec.angle_arcs(d);
            let m = arcs.measure();
            if m <= 0.0 {
                continue;
            }
            let mut hit = 0.0;
            for &(p0, p1) in arcs.pieces() {
                let w = (p1 - p0) / nphi as f64;
                let count = (0..nphi)
                    .filter(|&j| predicate(d, p0 + (j as f64 + 0.5) * w))
                    .count();
                hit += count as f64 * w;
            }
            total += mass * hit / m;
        }
    }
    Ok(total)
}

/// `E_{d,φ′}[1{predicate(d, φ′)}]` by a midpoint tensor rule: 256 radial
/// cells per branch interval and 512 angular samples per arc, refined once
/// by doubling if the two estimates differ by more than 5e-4.
pub fn expect_indicator<P: Fn(f64, f64) -> bool>(
    spec: &ConditionalPdfSpec,
    predicate: P,
) -> Result<f64> {
    if spec.state.serving() && !spec.is_reachable()? {
        return Err(ModelError::UnreachableState);
    }
    if !spec.state.serving() && spec.lambda_r <= 0.0 {
        return Ok(if predicate(f64::INFINITY, 0.0) {
            1.0
        } else {
            0.0
        });
    }
    let coarse = tensor_pass(spec, &predicate, 256, 512)?;
    let fine = tensor_pass(spec, &predicate, 512, 1024)?;
    if (fine - coarse).abs() > 5e-4 {
        Ok(fine)
    } else {
        Ok(coarse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsRef {
    Original,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMode {
    Beamformed,
    Scattered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    AtLeast,
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainTerm {
    pub bs: BsRef,
    pub mode: PathMode,
}

/// Test of a ratio of two path gains, both evaluated against the same IRS,
/// against a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTest {
    pub num: GainTerm,
    pub den: GainTerm,
    pub threshold: f64,
    pub cmp: Comparison,
}

/// Everything needed to evaluate gains at one measurement position.
#[derive(Debug, Clone, Copy)]
pub struct GainContext {
    pub step: StepFrame,
    pub bs_o: (f64, f64),
    pub bs_t: (f64, f64),
    pub channel: ChannelParams,
}

impl GainContext {
    fn bs(&self, b: BsRef) -> ((f64, f64), f64) {
        match b {
            BsRef::Original => (self.bs_o, self.step.x_o),
            BsRef::Target => (self.bs_t, self.step.x_t),
        }
    }

    fn gain(&self, term: GainTerm, x: f64, d: f64, x_prime: f64) -> f64 {
        match term.mode {
            PathMode::Beamformed => self.channel.gamma_bf_direct(x, d, x_prime),
            PathMode::Scattered => self.channel.gamma_sc_direct(x, d, x_prime),
        }
    }

    fn irs_point(&self, d: f64, phi: f64) -> (f64, f64) {
        (self.step.x_i + d * phi.cos(), d * phi.sin())
    }

    pub fn term_value(&self, term: GainTerm, d: f64, phi: f64) -> f64 {
        let (p, x) = self.bs(term.bs);
        if !d.is_finite() {
            return self.channel.gain(x);
        }
        let q = self.irs_point(d, phi);
        let xp = (q.0 - p.0).hypot(q.1 - p.1);
        self.gain(term, x, d, xp)
    }

    /// Bounds of a gain over an annular cell `[d0, d1] × [φ0, φ1]`.
    fn term_bounds(&self, term: GainTerm, d0: f64, d1: f64, p0: f64, p1: f64) -> (f64, f64) {
        let (p, x) = self.bs(term.bs);
        let dm = 0.5 * (d0 + d1);
        let pm = 0.5 * (p0 + p1);
        let c = self.irs_point(dm, pm);
        let centre = (c.0 - p.0).hypot(c.1 - p.1);
        let radius = 0.5 * (d1 - d0) + dm * 0.5 * (p1 - p0);
        let xp_lo = (centre - radius).max(1e-9);
        let xp_hi = centre + radius;
        let hi = if d0 > 0.0 {
            self.gain(term, x, d0, xp_lo)
        } else {
            f64::INFINITY
        };
        let lo = self.gain(term, x, d1, xp_hi);
        (lo, hi)
    }
}

impl RatioTest {
    fn decide(&self, eta: f64) -> bool {
        match self.cmp {
            Comparison::AtLeast => eta >= self.threshold,
            Comparison::Below => eta < self.threshold,
            Comparison::Above => eta > self.threshold,
        }
    }

    pub fn eval(&self, ctx: &GainContext, d: f64, phi: f64) -> bool {
        let eta = ctx.term_value(self.num, d, phi) / ctx.term_value(self.den, d, phi);
        self.decide(eta)
    }

    /// `Some(v)` when the test has the same outcome `v` everywhere in the cell.
    fn classify(&self, ctx: &GainContext, d0: f64, d1: f64, p0: f64, p1: f64) -> Option<bool> {
        let (n_lo, n_hi) = ctx.term_bounds(self.num, d0, d1, p0, p1);
        let (m_lo, m_hi) = ctx.term_bounds(self.den, d0, d1, p0, p1);
        let eta_lo = n_lo / m_hi;
        let eta_hi = n_hi / m_lo;
        if !(eta_lo.is_finite() && eta_hi.is_finite()) {
            return None;
        }
        let a = self.decide(eta_lo);
        let b = self.decide(eta_hi);
        // the decision is monotone in η, so agreement at both ends settles it
        if a == b {
            Some(a)
        } else {
            None
        }
    }
}

/// Tuning of the adaptive expectation.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// Cells whose probability mass falls below this are resolved at their centre.
    pub leaf_mass: f64,
    pub max_depth: u32,
    pub initial_radial: usize,
    pub initial_angular: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            leaf_mass: 2e-7,
            max_depth: 30,
            initial_radial: 4,
            initial_angular: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Expectation {
    pub value: f64,
    /// Mass of cells resolved by a single sample rather than by bounds.
    pub unresolved_mass: f64,
}

struct CdfCache<'a> {
    spec: &'a ConditionalPdfSpec,
    memo: RefCell<HashMap<u64, f64>>,
    hi: f64,
}

impl<'a> CdfCache<'a> {
    fn get(&self, d: f64) -> Result<f64> {
        if d >= self.hi {
            return Ok(1.0);
        }
        if let Some(v) = self.memo.borrow().get(&d.to_bits()) {
            return Ok(*v);
        }
        let v = self.spec.cdf_distance(d)?;
        self.memo.borrow_mut().insert(d.to_bits(), v);
        Ok(v)
    }
}

fn arc_overlap(arcs: &ArcSet, p0: f64, p1: f64) -> (f64, f64) {
    // measure of arcs ∩ [p0, p1) and a representative angle inside it
    let mut m = 0.0;
    let mut best = (0.0, 0.5 * (p0 + p1));
    for &(a, b) in arcs.pieces() {
        let lo = a.max(p0);
        let hi = b.min(p1);
        if hi > lo {
            m += hi - lo;
            if hi - lo > best.0 {
                best = (hi - lo, 0.5 * (lo + hi));
            }
        }
    }
    (m, best.1)
}

/// Probability that `test` holds under the state's `(d, φ′)` law, by
/// recursive bisection of `(d, φ′)` cells. Cells on which interval bounds
/// of the gain ratio settle the test are counted whole; the rest are split
/// until their mass is below `opts.leaf_mass`.
pub fn expect_ratio(
    spec: &ConditionalPdfSpec,
    ctx: &GainContext,
    test: &RatioTest,
    opts: AdaptiveOptions,
) -> Result<Expectation> {
    if ctx.channel.n_elements == 0 || (!spec.state.serving() && spec.lambda_r <= 0.0) {
        let v = test.eval(ctx, f64::INFINITY, 0.0);
        return Ok(Expectation {
            value: if v { 1.0 } else { 0.0 },
            unresolved_mass: 0.0,
        });
    }
    if spec.state.serving() && !spec.is_reachable()? {
        return Err(ModelError::UnreachableState);
    }
    let (_, hi) = spec.support();
    let cdf = CdfCache {
        spec,
        memo: RefCell::new(HashMap::new()),
        hi,
    };
    let full_circle = !spec.state.serving();
    let mut out = Expectation::default();
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::new();
    for (a, b) in segments(spec) {
        let n = opts.initial_radial.max(1);
        let w = (b - a) / n as f64;
        for k in 0..n {
            let d0 = a + k as f64 * w;
            let d1 = if k + 1 == n {
                b
            } else {
                a + (k + 1) as f64 * w
            };
            let na = opts.initial_angular.max(1);
            for j in 0..na {
                let p0 = TAU * j as f64 / na as f64;
                let p1 = TAU * (j + 1) as f64 / na as f64;
                stack.push((d0, d1, p0, p1, 0));
            }
        }
    }
    while let Some((d0, d1, p0, p1, depth)) = stack.pop() {
        let mass_d = cdf.get(d1)? - cdf.get(d0)?;
        if mass_d <= 0.0 {
            continue;
        }
        let dm = 0.5 * (d0 + d1);
        let (frac, rep) = if full_circle {
            ((p1 - p0) / TAU, 0.5 * (p0 + p1))
        } else {
            let arcs = spec.angle_arcs(dm);
            let total = arcs.measure();
            if total <= 0.0 {
                // the admissible arc opens inside this radial range
                if depth < opts.max_depth && mass_d * (p1 - p0) / TAU >= opts.leaf_mass {
                    stack.push((d0, dm, p0, p1, depth + 1));
                    stack.push((dm, d1, p0, p1, depth + 1));
                } else {
                    out.unresolved_mass += mass_d * (p1 - p0) / TAU;
                }
                continue;
            }
            let (m, rep) = arc_overlap(&arcs, p0, p1);
            (m / total, rep)
        };
        let mass = mass_d * frac;
        let bounds = test.classify(ctx, d0, d1, p0, p1);
        if let Some(v) = bounds {
            if v {
                out.value += mass;
            }
            continue;
        }
        if mass <= 0.0 && frac == 0.0 && (d1 - d0) < 1e-6 * spec.frame.serving_distance {
            continue;
        }
        if mass < opts.leaf_mass || depth >= opts.max_depth {
            out.unresolved_mass += mass;
            if test.eval(ctx, dm, rep) {
                out.value += mass;
            }
            continue;
        }
        if (d1 - d0) >= dm * (p1 - p0) {
            stack.push((d0, dm, p0, p1, depth + 1));
            stack.push((dm, d1, p0, p1, depth + 1));
        } else {
            let pm = 0.5 * (p0 + p1);
            stack.push((d0, d1, p0, pm, depth + 1));
            stack.push((d0, d1, pm, p1, depth + 1));
        }
    }
    out.value = out.value.clamp(0.0, 1.0);
    Ok(out)
}

/// Total mass assigned by the adaptive scheme; used to check normalisation.
pub fn adaptive_mass(spec: &ConditionalPdfSpec, ctx: &GainContext) -> Result<f64> {
    let always = RatioTest {
        num: GainTerm {
            bs: BsRef::Original,
            mode: PathMode::Scattered,
        },
        den: GainTerm {
            bs: BsRef::Original,
            mode: PathMode::Scattered,
        },
        threshold: 0.0,
        cmp: Comparison::Above,
    };
    Ok(expect_ratio(spec, ctx, &always, AdaptiveOptions::default())?.value)
}
