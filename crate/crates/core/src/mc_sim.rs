//! Monte Carlo oracles.
//!
//! The matched mode keeps the two-BS frame fixed and samples only the IRS
//! field. The full-topology mode also samples the BSs and picks the
//! crossing from each topology. Every trial draws from its own ChaCha
//! stream keyed by `(seed, trial)`, so results do not depend on how
//! trials are spread over threads.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::config::NetworkConfig;
use crate::error::{ModelError, Result};
use crate::irs_chain::{IrsState, IrsTransitionMatrix};
use crate::par;
use crate::regions::{RegionFrame, Side};
use crate::scenario::{build_geometry, ScenarioGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub n: usize,
    /// `1.96·s/√n` with `s` the sample standard deviation.
    pub ci95: f64,
    pub seed: u64,
}

impl McEstimate {
    /// Estimate of a Bernoulli mean from a success count.
    pub fn from_count(successes: u64, n: usize, seed: u64) -> Self {
        if n == 0 {
            return Self {
                mean: 0.0,
                n,
                ci95: f64::INFINITY,
                seed,
            };
        }
        let nf = n as f64;
        let mean = successes as f64 / nf;
        let var = if n > 1 {
            mean * (1.0 - mean) * nf / (nf - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            n,
            ci95: 1.96 * var.sqrt() / nf.sqrt(),
            seed,
        }
    }

    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                n,
                ci95: f64::INFINITY,
                seed,
            };
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let var = if n > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            n,
            ci95: 1.96 * var.sqrt() / nf.sqrt(),
            seed,
        }
    }
}

/// Random stream of one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Homogeneous PPP of intensity `lambda` on `rect`.
pub fn sample_irs_field<R: Rng>(rng: &mut R, lambda: f64, rect: Rect) -> Vec<(f64, f64)> {
    let mean = lambda * rect.area();
    if !(mean > 0.0) {
        return Vec::new();
    }
    let count = Poisson::new(mean)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(0);
    (0..count)
        .map(|_| {
            (
                rng.gen_range(rect.x0..rect.x1),
                rng.gen_range(rect.y0..rect.y1),
            )
        })
        .collect()
}

/// Margin around the trajectory inside which IRSs are sampled: covers the
/// serving distance and the no-serving distance law up to its truncation.
pub fn sampling_margin(config: &NetworkConfig) -> f64 {
    let d = config.serving_distance;
    let tail = if config.lambda_r > 0.0 {
        (d * d + (1e6f64).ln() / (config.lambda_r * PI)).sqrt()
    } else {
        d
    };
    tail.max(d) + config.delta_x()
}

/// Event kinds in a trial log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialEvent {
    Trigger,
    Execute,
    Fail,
    PingPong,
}

impl TrialEvent {
    pub fn label(self) -> &'static str {
        match self {
            TrialEvent::Trigger => "trigger",
            TrialEvent::Execute => "execute",
            TrialEvent::Fail => "fail",
            TrialEvent::PingPong => "pingpong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub trial: usize,
    pub step: usize,
    pub event: TrialEvent,
    pub x_i: f64,
    /// Distance and trajectory angle of the IRS used in the test, or
    /// infinite distance when there is none.
    pub d: f64,
    pub phi_prime: f64,
}

/// One line per event: `trial,step,event,x_i,d,phi_prime`.
pub fn format_events(events: &[EventRecord]) -> String {
    let mut out = String::from("trial,step,event,x_i,d,phi_prime\n");
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{},{:.6}",
            e.trial,
            e.step,
            e.event.label(),
            e.x_i,
            if e.d.is_finite() {
                format!("{:.6}", e.d)
            } else {
                "inf".into()
            },
            e.phi_prime
        );
    }
    out
}

/// What the user sees at one step: the serving IRS per side (if any) and
/// the nearest IRS overall.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Observation {
    serving: [Option<(f64, f64)>; 2],
    nearest: Option<(f64, f64)>,
}

/// Per-IRS cell label: 0 original, 1 target, 2 any other cell.
struct Field {
    points: Vec<(f64, f64)>,
    cell: Vec<u8>,
}

impl Field {
    fn observe(&self, user: (f64, f64), serving_distance: f64) -> Observation {
        let d2max = serving_distance * serving_distance;
        let mut best = [f64::INFINITY; 2];
        let mut serving = [None; 2];
        let mut nearest_d2 = f64::INFINITY;
        let mut nearest = None;
        for (p, &c) in self.points.iter().zip(&self.cell) {
            let d2 = (p.0 - user.0).powi(2) + (p.1 - user.1).powi(2);
            if d2 < nearest_d2 {
                nearest_d2 = d2;
                nearest = Some(*p);
            }
            if c < 2 && d2 <= d2max && d2 < best[c as usize] {
                best[c as usize] = d2;
                serving[c as usize] = Some(*p);
            }
        }
        Observation { serving, nearest }
    }
}

/// Fixed quantities of one walk.
struct Walk<'a> {
    geometry: &'a ScenarioGeometry,
    channel: ChannelParams,
    config: &'a NetworkConfig,
}

struct Measured {
    a3: bool,
    hof: bool,
    pp: bool,
    irs_o: (f64, f64),
    irs_t: (f64, f64),
}

impl Walk<'_> {
    fn gains(&self, user: (f64, f64), irs: Option<(f64, f64)>) -> (f64, f64, f64, f64, f64, f64) {
        // (Γ_sc,o, Γ_bf,o, Γ_sc,t, Γ_bf,t, d, φ′)
        let bo = self.geometry.original_bs();
        let bt = self.geometry.target_bs();
        let x_o = (user.0 - bo.0).hypot(user.1 - bo.1);
        let x_t = (user.0 - bt.0).hypot(user.1 - bt.1);
        let ch = &self.channel;
        match irs {
            None => {
                let go = ch.gain(x_o);
                let gt = ch.gain(x_t);
                (go, go, gt, gt, f64::INFINITY, 0.0)
            }
            Some(p) => {
                let d = (p.0 - user.0).hypot(p.1 - user.1);
                let xo_p = (p.0 - bo.0).hypot(p.1 - bo.1);
                let xt_p = (p.0 - bt.0).hypot(p.1 - bt.1);
                let phi = (p.1 - user.1).atan2(p.0 - user.0).rem_euclid(TAU);
                (
                    ch.gamma_sc_direct(x_o, d, xo_p),
                    ch.gamma_bf_direct(x_o, d, xo_p),
                    ch.gamma_sc_direct(x_t, d, xt_p),
                    ch.gamma_bf_direct(x_t, d, xt_p),
                    d,
                    phi,
                )
            }
        }
    }

    fn measure(&self, user: (f64, f64), obs: &Observation) -> Measured {
        let cfg = self.config;
        let so = obs.serving[0];
        let (sc_o, bf_o, sc_t, _, d_o, phi_o) = self.gains(user, so.or(obs.nearest));
        let serve_o = if so.is_some() { bf_o } else { sc_o };
        let a3 = sc_t / serve_o >= cfg.gamma_ho;
        let hof = serve_o / sc_t < cfg.q_out;
        let st = obs.serving[1];
        let (sc_o2, _, sc_t2, bf_t2, d_t, phi_t) = self.gains(user, st.or(obs.nearest));
        let serve_t = if st.is_some() { bf_t2 } else { sc_t2 };
        let pp = sc_o2 / serve_t > cfg.gamma_ho;
        Measured {
            a3,
            hof,
            pp,
            irs_o: (d_o, phi_o),
            irs_t: (d_t, phi_t),
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Default)]
struct TrialOutcome {
    triggers: Vec<usize>,
    execute: Option<usize>,
    fail: Option<usize>,
    hof_absorbed: bool,
    pingpong: Option<usize>,
    pp_absorbed: bool,
    states: [Vec<u8>; 2],
    /// Steps at which the trigger, failure and ping-pong conditions held.
    conditions: [Vec<usize>; 3],
    events: Vec<EventRecord>,
    inconsistent: bool,
}

fn run_walk(walk: &Walk, field: &Field, trial: usize, keep_events: bool) -> TrialOutcome {
    let g = walk.geometry;
    let n = g.step_count + 1;
    let j = walk.config.ttt_states();
    let u = walk.config.sojourn_states();
    let dd = walk.config.serving_distance;
    let mut out = TrialOutcome {
        states: [Vec::with_capacity(n), Vec::with_capacity(n)],
        ..TrialOutcome::default()
    };
    // HO machine: 0..=j, j+1 = complete
    let mut h = 0usize;
    // HOF machine: 0..=j, j+1 = failing, j+2 = failed
    let mut f = 0usize;
    // PP machine: 0..=u, u+1 = ping-pong, u+2 = done
    let mut p = 0usize;
    let mut prev_conn = [false; 2];
    for k in 0..n {
        let x = g.x(k as isize);
        let user = (x, 0.0);
        let obs = field.observe(user, dd);
        let conn = [obs.serving[0].is_some(), obs.serving[1].is_some()];
        for s in 0..2 {
            let before = if k == 0 { conn[s] } else { prev_conn[s] };
            out.states[s].push(IrsState::from_occupancy(before, conn[s]).index() as u8);
        }
        prev_conn = conn;
        if k == 0 {
            continue;
        }
        let m = walk.measure(user, &obs);
        for (c, held) in [m.a3, m.hof, m.pp].into_iter().enumerate() {
            if held {
                out.conditions[c].push(k);
            }
        }
        let mut log = |event: TrialEvent, irs: (f64, f64)| {
            if keep_events {
                out.events.push(EventRecord {
                    trial,
                    step: k,
                    event,
                    x_i: x,
                    d: irs.0,
                    phi_prime: irs.1,
                });
            }
        };
        // HO
        if h < j {
            if m.a3 {
                h += 1;
                if h == 1 {
                    out.triggers.push(k);
                    log(TrialEvent::Trigger, m.irs_o);
                }
                if h == j {
                    out.execute.get_or_insert(k);
                    log(TrialEvent::Execute, m.irs_o);
                }
            } else {
                h = 0;
            }
        } else if h == j {
            h = j + 1;
        }
        // HOF
        if f == j + 1 {
            f = j + 2;
            out.hof_absorbed = true;
        } else if f == 0 {
            if m.a3 {
                f = 1;
            }
        } else if f < j {
            if m.hof {
                f = j + 1;
                out.fail = Some(k);
                log(TrialEvent::Fail, m.irs_o);
            } else if m.a3 {
                f += 1;
            } else {
                f = 0;
            }
        }
        // PP, fed by the HO machine's execution state at this step
        if p == u + 1 {
            p = u + 2;
            out.pp_absorbed = true;
        } else if p == 0 {
            if h == j {
                p = 1;
            }
        } else if p < u {
            if m.pp {
                p = u + 1;
                out.pingpong = Some(k);
                log(TrialEvent::PingPong, m.irs_t);
            } else {
                p += 1;
            }
        }
    }
    if let (Some(fs), Some(es)) = (out.fail, out.execute) {
        if fs > es {
            out.inconsistent = true;
        }
    }
    if let Some(ps) = out.pingpong {
        if out.execute.is_none_or(|es| ps <= es) {
            out.inconsistent = true;
        }
    }
    out
}

/// Aggregated statistics of a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub trials: usize,
    pub seed: u64,
    pub p_hof: McEstimate,
    pub p_pp: McEstimate,
    /// Probability that the HO is executed by the end of the trajectory.
    pub p_ho: McEstimate,
    /// Trigger counts per step divided by the trial count (may sum above 1).
    pub trigger_pmf: Vec<f64>,
    pub execution_pmf: Vec<f64>,
    pub hof_pmf: Vec<f64>,
    pub pp_pmf: Vec<f64>,
    /// Per-step frequencies of the trigger, failure and ping-pong conditions,
    /// the sample counterparts of `p^H`, `p^F` and `p^PP`.
    pub condition_freq: [Vec<f64>; 3],
    /// Per-step connection-state frequencies on the original and target sides.
    pub state_freq: [Vec<[f64; 4]>; 2],
    /// Pooled `(m → n)` transition counts over all steps, per side.
    pub transition_counts: [[[u64; 4]; 4]; 2],
    /// Topologies discarded and redrawn (full-topology mode only).
    pub resampled: usize,
    /// Trials whose event sequence broke the ordering rules.
    pub inconsistent: usize,
    /// Crossing lengths of accepted topologies (full-topology mode only).
    pub crossing_lengths: Vec<f64>,
    #[serde(skip)]
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone)]
struct Accumulator {
    n_steps: usize,
    trials: usize,
    hof: u64,
    pp: u64,
    ho: u64,
    trig: Vec<u64>,
    exec: Vec<u64>,
    fail: Vec<u64>,
    ping: Vec<u64>,
    cond: [Vec<u64>; 3],
    states: [Vec<[u64; 4]>; 2],
    trans: [[[u64; 4]; 4]; 2],
    inconsistent: usize,
    events: Vec<EventRecord>,
}

impl Accumulator {
    fn new(n_steps: usize) -> Self {
        Self {
            n_steps,
            trials: 0,
            hof: 0,
            pp: 0,
            ho: 0,
            trig: vec![0; n_steps],
            exec: vec![0; n_steps],
            fail: vec![0; n_steps],
            ping: vec![0; n_steps],
            cond: [vec![0; n_steps], vec![0; n_steps], vec![0; n_steps]],
            states: [vec![[0; 4]; n_steps], vec![[0; 4]; n_steps]],
            trans: [[[0; 4]; 4]; 2],
            inconsistent: 0,
            events: Vec::new(),
        }
    }

    fn add(&mut self, t: TrialOutcome) {
        self.trials += 1;
        self.hof += t.hof_absorbed as u64;
        self.pp += t.pp_absorbed as u64;
        self.ho += t.execute.is_some() as u64;
        for k in t.triggers {
            self.trig[k] += 1;
        }
        if let Some(k) = t.execute {
            self.exec[k] += 1;
        }
        if let Some(k) = t.fail {
            self.fail[k] += 1;
        }
        if let Some(k) = t.pingpong {
            self.ping[k] += 1;
        }
        for (c, ks) in t.conditions.iter().enumerate() {
            for &k in ks {
                self.cond[c][k] += 1;
            }
        }
        for s in 0..2 {
            let st = &t.states[s];
            for (k, &m) in st.iter().enumerate().take(self.n_steps) {
                self.states[s][k][m as usize] += 1;
                if k > 0 {
                    self.trans[s][st[k - 1] as usize][m as usize] += 1;
                }
            }
        }
        self.inconsistent += t.inconsistent as usize;
        self.events.extend(t.events);
    }

    fn merge(&mut self, o: Accumulator) {
        self.trials += o.trials;
        self.hof += o.hof;
        self.pp += o.pp;
        self.ho += o.ho;
        for k in 0..self.n_steps {
            self.trig[k] += o.trig[k];
            self.exec[k] += o.exec[k];
            self.fail[k] += o.fail[k];
            self.ping[k] += o.ping[k];
            for c in 0..3 {
                self.cond[c][k] += o.cond[c][k];
            }
            for s in 0..2 {
                for m in 0..4 {
                    self.states[s][k][m] += o.states[s][k][m];
                }
            }
        }
        for s in 0..2 {
            for a in 0..4 {
                for b in 0..4 {
                    self.trans[s][a][b] += o.trans[s][a][b];
                }
            }
        }
        self.inconsistent += o.inconsistent;
        self.events.extend(o.events);
    }

    fn finish(self, seed: u64, resampled: usize, crossing_lengths: Vec<f64>) -> McSummary {
        let n = self.trials;
        let nf = n.max(1) as f64;
        let norm = |v: &[u64]| v.iter().map(|c| *c as f64 / nf).collect::<Vec<_>>();
        let freq = |v: &[[u64; 4]]| {
            v.iter()
                .map(|c| {
                    [
                        c[0] as f64 / nf,
                        c[1] as f64 / nf,
                        c[2] as f64 / nf,
                        c[3] as f64 / nf,
                    ]
                })
                .collect::<Vec<_>>()
        };
        McSummary {
            trials: n,
            seed,
            p_hof: McEstimate::from_count(self.hof, n, seed),
            p_pp: McEstimate::from_count(self.pp, n, seed),
            p_ho: McEstimate::from_count(self.ho, n, seed),
            trigger_pmf: norm(&self.trig),
            execution_pmf: norm(&self.exec),
            hof_pmf: norm(&self.fail),
            pp_pmf: norm(&self.ping),
            condition_freq: [
                norm(&self.cond[0]),
                norm(&self.cond[1]),
                norm(&self.cond[2]),
            ],
            state_freq: [freq(&self.states[0]), freq(&self.states[1])],
            transition_counts: self.trans,
            resampled,
            inconsistent: self.inconsistent,
            crossing_lengths,
            events: self.events,
        }
    }
}

/// Splits `n_trials` into contiguous chunks processed in parallel and
/// merged in chunk order.
fn chunked<F>(n_trials: usize, n_steps: usize, f: F) -> Accumulator
where
    F: Fn(usize, &mut Accumulator) + Sync + Send,
{
    let chunk = 64usize;
    let n_chunks = n_trials.div_ceil(chunk);
    let parts = par::map_indexed(n_chunks, |c| {
        let mut acc = Accumulator::new(n_steps);
        for t in c * chunk..((c + 1) * chunk).min(n_trials) {
            f(t, &mut acc);
        }
        acc
    });
    let mut total = Accumulator::new(n_steps);
    for p in parts {
        total.merge(p);
    }
    total
}

/// Options shared by the simulators.
#[derive(Debug, Clone, Copy, Default)]
pub struct McOptions {
    /// Keep a per-event log of every trial.
    pub keep_events: bool,
}

/// Matched-geometry simulation: the two BSs and the trajectory are those of
/// `geometry`; cells are the two half-planes of the bisector.
pub fn simulate_matched(
    config: &NetworkConfig,
    geometry: &ScenarioGeometry,
    n_trials: usize,
    seed: u64,
    opts: McOptions,
) -> Result<McSummary> {
    if n_trials == 0 {
        return Err(ModelError::invalid("n_trials", "must be at least 1"));
    }
    let walk = Walk {
        geometry,
        channel: config.channel()?,
        config,
    };
    let m = sampling_margin(config);
    let rect = Rect {
        x0: -m,
        x1: geometry.length + m,
        y0: -m,
        y1: m,
    };
    let bo = geometry.original_bs();
    let bt = geometry.target_bs();
    let n_steps = geometry.step_count + 1;
    let acc = chunked(n_trials, n_steps, |t, acc| {
        let mut rng = trial_rng(seed, t as u64);
        let points = sample_irs_field(&mut rng, config.lambda_r, rect);
        let cell = points
            .iter()
            .map(|p| {
                let d_o = (p.0 - bo.0).powi(2) + (p.1 - bo.1).powi(2);
                let d_t = (p.0 - bt.0).powi(2) + (p.1 - bt.1).powi(2);
                if d_o < d_t {
                    0
                } else {
                    1
                }
            })
            .collect();
        let field = Field { points, cell };
        acc.add(run_walk(&walk, &field, t, opts.keep_events));
    });
    Ok(acc.finish(seed, 0, Vec::new()))
}

/// Crossing extracted from one sampled topology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub geometry: ScenarioGeometry,
    /// Map from the crossing frame back to the square: origin and unit direction.
    pub origin: (f64, f64),
    pub dir: (f64, f64),
    pub bs_o: usize,
    pub bs_t: usize,
}

fn nearest_index(bss: &[(f64, f64)], p: (f64, f64)) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (k, b) in bss.iter().enumerate() {
        let d = (b.0 - p.0).powi(2) + (b.1 - p.1).powi(2);
        if d < bd {
            bd = d;
            best = k;
        }
    }
    best
}

/// Walks a ray from the centre of the square in a random direction until
/// the serving BS changes, and builds the two-BS frame of that crossing.
pub fn sample_crossing<R: Rng>(
    rng: &mut R,
    config: &NetworkConfig,
    region_side: f64,
) -> Option<(Vec<(f64, f64)>, Crossing)> {
    let half = region_side / 2.0;
    let sq = Rect {
        x0: -half,
        x1: half,
        y0: -half,
        y1: half,
    };
    let bss = sample_irs_field(rng, config.lambda_b, sq);
    if bss.len() < 2 {
        return None;
    }
    let ang = rng.gen_range(0.0..TAU);
    let dir = (ang.cos(), ang.sin());
    let start = (0.0, 0.0);
    let serving = nearest_index(&bss, start);
    let step = 0.5;
    let mut s = 0.0;
    let target = loop {
        s += step;
        if s > half {
            return None;
        }
        let k = nearest_index(&bss, (start.0 + s * dir.0, start.1 + s * dir.1));
        if k != serving {
            break k;
        }
    };
    // coordinates along the line: x = projection, y = signed perpendicular
    let coords = |b: (f64, f64)| {
        let v = (b.0 - start.0, b.1 - start.1);
        (v.0 * dir.0 + v.1 * dir.1, dir.0 * v.1 - dir.1 * v.0)
    };
    let (xo, r_o) = coords(bss[serving]);
    let (xt, r_t) = coords(bss[target]);
    let length = xt - xo;
    if !(length > 0.0) {
        return None;
    }
    let geometry = build_geometry(r_o, r_t, length, config.speed, config.t_d).ok()?;
    let origin = (start.0 + xo * dir.0, start.1 + xo * dir.1);
    Some((
        bss,
        Crossing {
            geometry,
            origin,
            dir,
            bs_o: serving,
            bs_t: target,
        },
    ))
}

/// Full-topology simulation on a square of side `region_side` centred on
/// the origin. Topologies without a usable crossing are redrawn and counted.
pub fn simulate_full_topology(
    config: &NetworkConfig,
    region_side: f64,
    n_trials: usize,
    seed: u64,
) -> Result<McSummary> {
    if !(region_side > 0.0) {
        return Err(ModelError::invalid("region_side", "must be positive"));
    }
    if n_trials == 0 {
        return Err(ModelError::invalid("n_trials", "must be at least 1"));
    }
    let channel = config.channel()?;
    let m = sampling_margin(config);
    const MAX_REDRAWS: usize = 1000;
    // step counts differ per topology, so pmfs are pooled on a fixed grid of
    // x/L in 1000 bins
    let bins = 1000usize;
    let results: Vec<Option<(TrialOutcome, usize, f64)>> = par::map_indexed(n_trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let mut redraws = 0;
        loop {
            if redraws > MAX_REDRAWS {
                return None;
            }
            let Some((bss, cr)) = sample_crossing(&mut rng, config, region_side) else {
                redraws += 1;
                continue;
            };
            let g = cr.geometry;
            let rect = Rect {
                x0: -m,
                x1: g.length + m,
                y0: -m,
                y1: m,
            };
            let local = sample_irs_field(&mut rng, config.lambda_r, rect);
            let mut cell = Vec::with_capacity(local.len());
            for p in &local {
                let world = (
                    cr.origin.0 + p.0 * cr.dir.0 - p.1 * cr.dir.1,
                    cr.origin.1 + p.0 * cr.dir.1 + p.1 * cr.dir.0,
                );
                let k = nearest_index(&bss, world);
                cell.push(if k == cr.bs_o {
                    0
                } else if k == cr.bs_t {
                    1
                } else {
                    2
                });
            }
            let field = Field {
                points: local,
                cell,
            };
            let walk = Walk {
                geometry: &g,
                channel,
                config,
            };
            let mut out = run_walk(&walk, &field, t, false);
            // rebin step indices to x/L bins
            let to_bin =
                |k: usize| (((g.x(k as isize) / g.length) * bins as f64) as usize).min(bins - 1);
            out.triggers = out.triggers.iter().map(|k| to_bin(*k)).collect();
            out.execute = out.execute.map(to_bin);
            out.fail = out.fail.map(to_bin);
            out.pingpong = out.pingpong.map(to_bin);
            out.states = [Vec::new(), Vec::new()];
            out.conditions = [Vec::new(), Vec::new(), Vec::new()];
            return Some((out, redraws, g.length));
        }
    });
    let mut acc = Accumulator::new(bins);
    let mut resampled = 0;
    let mut lengths = Vec::with_capacity(n_trials);
    for r in results {
        match r {
            Some((o, redraws, l)) => {
                acc.add(o);
                resampled += redraws;
                lengths.push(l);
            }
            None => resampled += MAX_REDRAWS,
        }
    }
    Ok(acc.finish(seed, resampled, lengths))
}

/// Frequency estimate of the four-state transition matrix at step `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEstimate {
    /// Row-normalised frequencies; rows never visited are left at zero.
    pub freq: IrsTransitionMatrix,
    pub counts: [[u64; 4]; 4],
}

/// Estimates the transition matrix that moves step `i−1` to step `i`.
///
/// Each row is conditioned on its occupancy pattern at steps `i−2, i−1`:
/// empty regions are imposed by deleting the points inside them, and
/// occupied ones by rejection. `n_samples` is split evenly over the rows.
pub fn estimate_transition_probs(
    side: Side,
    frame: &RegionFrame,
    lambda_r: f64,
    n_samples: usize,
    seed: u64,
) -> TransitionEstimate {
    let g = frame.geometry;
    let dd = frame.serving_distance;
    let xs = [g.x(frame.i - 2), g.x(frame.i - 1), g.x(frame.i)];
    let bo = g.original_bs();
    let bt = g.target_bs();
    let in_side = |p: (f64, f64)| {
        let d_o = (p.0 - bo.0).powi(2) + (p.1 - bo.1).powi(2);
        let d_t = (p.0 - bt.0).powi(2) + (p.1 - bt.1).powi(2);
        match side {
            Side::Original => d_o < d_t,
            Side::Target => d_t <= d_o,
        }
    };
    let reach =
        |p: (f64, f64), k: usize| in_side(p) && (p.0 - xs[k]).powi(2) + p.1 * p.1 <= dd * dd;
    let rect = Rect {
        x0: xs[0] - dd,
        x1: xs[2] + dd,
        y0: -dd,
        y1: dd,
    };
    let per_row = n_samples.div_ceil(4);
    let rows: Vec<[u64; 4]> = par::map_indexed(4, |row| {
        let before = row == 2 || row == 3;
        let now = row == 1 || row == 3;
        let mut counts = [0u64; 4];
        let mut rng = trial_rng(seed, row as u64);
        let mut accepted = 0;
        let mut attempts = 0usize;
        while accepted < per_row && attempts < 50 * per_row {
            attempts += 1;
            let mut pts = sample_irs_field(&mut rng, lambda_r, rect);
            if !before {
                pts.retain(|p| !reach(*p, 0));
            }
            if !now {
                pts.retain(|p| !reach(*p, 1));
            }
            if before && !pts.iter().any(|p| reach(*p, 0)) {
                continue;
            }
            if now && !pts.iter().any(|p| reach(*p, 1)) {
                continue;
            }
            accepted += 1;
            let next = pts.iter().any(|p| reach(*p, 2));
            counts[IrsState::from_occupancy(now, next).index()] += 1;
        }
        counts
    });
    let mut est = TransitionEstimate {
        freq: [[0.0; 4]; 4],
        counts: [[0; 4]; 4],
    };
    for (m, c) in rows.iter().enumerate() {
        est.counts[m] = *c;
        let total: u64 = c.iter().sum();
        if total > 0 {
            for nn in 0..4 {
                est.freq[m][nn] = c[nn] as f64 / total as f64;
            }
        }
    }
    est
}

/// Total-variation distance between two nonnegative weight vectors after
/// normalising each to unit mass.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if sa <= 0.0 || sb <= 0.0 {
        return if sa <= 0.0 && sb <= 0.0 { 0.0 } else { 1.0 };
    }
    let n = a.len().max(b.len());
    let mut s = 0.0;
    for k in 0..n {
        let x = a.get(k).copied().unwrap_or(0.0) / sa;
        let y = b.get(k).copied().unwrap_or(0.0) / sb;
        s += (x - y).abs();
    }
    0.5 * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_estimate() {
        let e = McEstimate::from_count(50, 100, 7);
        assert_eq!(e.mean, 0.5);
        let s: Vec<f64> = (0..100).map(|k| if k < 50 { 1.0 } else { 0.0 }).collect();
        let f = McEstimate::from_samples(&s, 7);
        assert!((e.ci95 - f.ci95).abs() < 1e-12);
    }

    #[test]
    fn field_count_matches_intensity() {
        let mut rng = trial_rng(3, 0);
        let rect = Rect {
            x0: 0.0,
            x1: 100.0,
            y0: 0.0,
            y1: 100.0,
        };
        let n: usize = (0..400)
            .map(|_| sample_irs_field(&mut rng, 1e-3, rect).len())
            .sum();
        let mean = n as f64 / 400.0;
        assert!((mean - 10.0).abs() < 0.6, "{mean}");
    }

    #[test]
    fn tv_of_identical_is_zero() {
        assert_eq!(tv_distance(&[1.0, 2.0], &[2.0, 4.0]), 0.0);
        assert!((tv_distance(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
