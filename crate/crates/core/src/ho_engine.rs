//! Handover (HO), handover-failure (HOF) and ping-pong (PP) chains, the
//! per-step probabilities that drive them, and the resulting metrics.
//!
//! Every chain starts in its idle state at step 0 and is advanced as
//! `S(i) = S(i−1)·T(i)` for `i = 1..=I`, so the state stored at step `i`
//! reflects the measurement taken at `x_i`.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::config::NetworkConfig;
use crate::error::{ModelError, Result};
use crate::irs_chain::{propagate, IrsState, IrsStateVector, IrsTrace};
use crate::irs_dist::{
    expect_ratio, AdaptiveOptions, BsRef, Comparison, ConditionalPdfSpec, GainContext, GainTerm,
    PathMode, RatioTest,
};
use crate::par;
use crate::regions::{RegionFrame, Side};
use crate::scenario::ScenarioGeometry;

/// IRS-state weights below this are skipped in the per-step mixtures.
const WEIGHT_FLOOR: f64 = 1e-14;

static HOF_CLAMPS: AtomicUsize = AtomicUsize::new(0);

/// Number of times `p_f > p_h` was clamped while building HOF matrices.
pub fn hof_clamp_count() -> usize {
    HOF_CLAMPS.load(Ordering::Relaxed)
}

fn clamp_hof(p_h: f64, p_f: f64) -> f64 {
    if p_f > p_h {
        if p_f - p_h > 1e-12 {
            HOF_CLAMPS.fetch_add(1, Ordering::Relaxed);
        }
        p_h
    } else {
        p_f
    }
}

pub type Matrix = Vec<Vec<f64>>;

/// Dense `(j+2)×(j+2)` HO matrix over `H₀..H_j, H_c`.
pub fn build_ho_matrix(p_h: f64, j: usize) -> Matrix {
    let n = j + 2;
    let mut t = vec![vec![0.0; n]; n];
    for (q, row) in t.iter_mut().enumerate().take(j) {
        row[0] += 1.0 - p_h;
        row[q + 1] += p_h;
    }
    t[j][j + 1] = 1.0;
    t[j + 1][j + 1] = 1.0;
    t
}

/// Dense `(j+3)×(j+3)` HOF matrix over `F₀..F_j, F_t, F_c`.
pub fn build_hof_matrix(p_h: f64, p_f: f64, j: usize) -> Matrix {
    let p_f = clamp_hof(p_h, p_f);
    let n = j + 3;
    let (ft, fc) = (j + 1, j + 2);
    let mut t = vec![vec![0.0; n]; n];
    t[0][0] = 1.0 - p_h;
    t[0][1] = p_h;
    for (q, row) in t.iter_mut().enumerate().take(j).skip(1) {
        row[0] = 1.0 - p_h;
        row[q + 1] = p_h - p_f;
        row[ft] = p_f;
    }
    t[j][j] = 1.0;
    t[ft][fc] = 1.0;
    t[fc][fc] = 1.0;
    t
}

/// Dense `(u+3)×(u+3)` PP matrix over `PP₀..PP_u, PP_t, PP_c`.
pub fn build_pp_matrix(p_c: f64, p_pp: f64, u: usize) -> Matrix {
    let n = u + 3;
    let (pt, pc) = (u + 1, u + 2);
    let mut t = vec![vec![0.0; n]; n];
    t[0][0] = 1.0 - p_c;
    t[0][1] = p_c;
    for (q, row) in t.iter_mut().enumerate().take(u).skip(1) {
        row[q + 1] = 1.0 - p_pp;
        row[pt] = p_pp;
    }
    t[u][u] = 1.0;
    t[pt][pc] = 1.0;
    t[pc][pc] = 1.0;
    t
}

/// Row vector times dense matrix.
pub fn apply_matrix(s: &[f64], t: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    for (m, &w) in s.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (n, &p) in t[m].iter().enumerate() {
            out[n] += w * p;
        }
    }
    out
}

/// One step of the HO chain without forming the matrix.
pub fn step_ho(s: &[f64], p_h: f64) -> Vec<f64> {
    let j = s.len() - 2;
    let mut out = vec![0.0; s.len()];
    let in_flight: f64 = s[..j].iter().sum();
    out[0] = in_flight * (1.0 - p_h);
    for q in 0..j {
        out[q + 1] += s[q] * p_h;
    }
    out[j + 1] = s[j] + s[j + 1];
    out
}

/// One step of the HOF chain without forming the matrix.
pub fn step_hof(s: &[f64], p_h: f64, p_f: f64) -> Vec<f64> {
    let p_f = clamp_hof(p_h, p_f);
    let j = s.len() - 3;
    let (ft, fc) = (j + 1, j + 2);
    let mut out = vec![0.0; s.len()];
    out[0] = s[..j].iter().sum::<f64>() * (1.0 - p_h);
    out[1] += s[0] * p_h;
    for q in 1..j {
        out[q + 1] += s[q] * (p_h - p_f);
        out[ft] += s[q] * p_f;
    }
    out[j] += s[j];
    out[fc] = s[ft] + s[fc];
    out
}

/// One step of the PP chain without forming the matrix.
pub fn step_pp(s: &[f64], p_c: f64, p_pp: f64) -> Vec<f64> {
    let u = s.len() - 3;
    let (pt, pc) = (u + 1, u + 2);
    let mut out = vec![0.0; s.len()];
    out[0] = s[0] * (1.0 - p_c);
    out[1] += s[0] * p_c;
    for q in 1..u {
        out[q + 1] += s[q] * (1.0 - p_pp);
        out[pt] += s[q] * p_pp;
    }
    out[u] += s[u];
    out[pc] = s[pt] + s[pc];
    out
}

/// The three per-step conditions, each as a gain-ratio test per IRS state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// A3 entering condition, η_HO ≥ γ_HO, on the original side.
    Trigger,
    /// Serving SIR below Q_out, on the original side.
    Failure,
    /// Reverse A3 condition after HO, η_PP > γ_HO, on the target side.
    PingPong,
}

impl Event {
    pub fn side(self) -> Side {
        match self {
            Event::Trigger | Event::Failure => Side::Original,
            Event::PingPong => Side::Target,
        }
    }

    /// The gain-ratio test in IRS state `state`.
    pub fn test(self, state: IrsState, config: &NetworkConfig) -> RatioTest {
        let sc = |bs| GainTerm {
            bs,
            mode: PathMode::Scattered,
        };
        let served = |bs| GainTerm {
            bs,
            mode: if state.serving() {
                PathMode::Beamformed
            } else {
                PathMode::Scattered
            },
        };
        match self {
            Event::Trigger => RatioTest {
                num: sc(BsRef::Target),
                den: served(BsRef::Original),
                threshold: config.gamma_ho,
                cmp: Comparison::AtLeast,
            },
            Event::Failure => RatioTest {
                num: served(BsRef::Original),
                den: sc(BsRef::Target),
                threshold: config.q_out,
                cmp: Comparison::Below,
            },
            Event::PingPong => RatioTest {
                num: sc(BsRef::Original),
                den: served(BsRef::Target),
                threshold: config.gamma_ho,
                cmp: Comparison::Above,
            },
        }
    }
}

/// Per-step evaluation context shared by the three mixtures.
#[derive(Debug, Clone, Copy)]
pub struct StepEvaluator {
    pub geometry: ScenarioGeometry,
    pub channel: ChannelParams,
    pub config: NetworkConfig,
    pub options: AdaptiveOptions,
}

impl StepEvaluator {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            geometry: config.geometry()?,
            channel: config.channel()?,
            config: *config,
            options: AdaptiveOptions::default(),
        })
    }

    pub fn context(&self, i: usize) -> GainContext {
        GainContext {
            step: self.geometry.frame(i as isize),
            bs_o: self.geometry.original_bs(),
            bs_t: self.geometry.target_bs(),
            channel: self.channel,
        }
    }

    /// `P(event | step i, IRS state)`.
    pub fn conditional(&self, event: Event, i: usize, state: IrsState) -> Result<f64> {
        let frame = RegionFrame::new(self.geometry, self.config.serving_distance, i as isize);
        let spec = ConditionalPdfSpec::new(event.side(), state, frame, self.config.lambda_r);
        let test = event.test(state, &self.config);
        Ok(expect_ratio(&spec, &self.context(i), &test, self.options)?.value)
    }

    /// Mixture `Σ_m s_m(i)·P(event | i, I_m)`; unreachable states add nothing.
    pub fn mixture(&self, event: Event, i: usize, weights: &IrsStateVector) -> Result<f64> {
        if self.config.n_elements == 0 || self.config.lambda_r == 0.0 {
            // every state sees the direct paths only
            return self.conditional(event, i, IrsState::NoConnection);
        }
        let mut total = 0.0;
        for state in IrsState::ALL {
            let w = weights[state.index()];
            if w < WEIGHT_FLOOR {
                continue;
            }
            match self.conditional(event, i, state) {
                Ok(p) => total += w * p,
                Err(ModelError::UnreachableState) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(total.clamp(0.0, 1.0))
    }
}

pub fn step_prob_ho(eval: &StepEvaluator, i: usize, original: &IrsStateVector) -> Result<f64> {
    eval.mixture(Event::Trigger, i, original)
}

pub fn step_prob_hof(eval: &StepEvaluator, i: usize, original: &IrsStateVector) -> Result<f64> {
    eval.mixture(Event::Failure, i, original)
}

pub fn step_prob_pp(eval: &StepEvaluator, i: usize, target: &IrsStateVector) -> Result<f64> {
    eval.mixture(Event::PingPong, i, target)
}

/// Per-step probabilities along the whole trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTable {
    pub p_h: Vec<f64>,
    pub p_f: Vec<f64>,
    pub p_pp: Vec<f64>,
}

/// IRS traces of both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsTraces {
    pub original: IrsTrace,
    pub target: IrsTrace,
}

pub fn irs_traces(config: &NetworkConfig) -> Result<IrsTraces> {
    let g = config.geometry()?;
    Ok(IrsTraces {
        original: propagate(Side::Original, &g, config)?,
        target: propagate(Side::Target, &g, config)?,
    })
}

/// Per-step probabilities of one event for every step, in parallel over steps.
pub fn event_probabilities(
    eval: &StepEvaluator,
    traces: &IrsTraces,
    event: Event,
) -> Result<Vec<f64>> {
    let vectors = match event.side() {
        Side::Original => &traces.original.vectors,
        Side::Target => &traces.target.vectors,
    };
    par::map_indexed(vectors.len(), |i| eval.mixture(event, i, &vectors[i]))
        .into_iter()
        .collect()
}

pub fn step_table(eval: &StepEvaluator, traces: &IrsTraces) -> Result<StepTable> {
    Ok(StepTable {
        p_h: event_probabilities(eval, traces, Event::Trigger)?,
        p_f: event_probabilities(eval, traces, Event::Failure)?,
        p_pp: event_probabilities(eval, traces, Event::PingPong)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoMetrics {
    /// Step locations `x_i`, `i = 0..=I`.
    pub x: Vec<f64>,
    pub length: f64,
    /// `P_ht(x_i) = s₁^H(i)`.
    pub p_ht: Vec<f64>,
    /// `P_ho(x_i) = s_j^H(i)`.
    pub p_ho: Vec<f64>,
    /// Probability of failing at step `i`, `s_t^F(i)`.
    pub hof_pmf: Vec<f64>,
    /// Probability of a ping-pong at step `i`, `s_t^PP(i)`.
    pub pp_pmf: Vec<f64>,
    pub p_hof: f64,
    pub p_pp: f64,
    /// `Σ_i P_ht(x_i)·x_i` without normalisation.
    pub e_x_ht_raw: f64,
    /// Trigger location averaged over the trigger pmf.
    pub e_x_ht: Option<f64>,
    pub e_x_ho: Option<f64>,
    pub e_x_hof: Option<f64>,
    pub e_x_pp: Option<f64>,
    pub ttt_states: usize,
    pub sojourn_states: usize,
    pub table: StepTable,
}

impl HoMetrics {
    pub fn trigger_mass(&self) -> f64 {
        self.p_ht.iter().sum()
    }
}

fn weighted_mean(w: &[f64], x: &[f64]) -> Option<f64> {
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        Some(w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / total)
    } else {
        None
    }
}

fn location_given(w: &[f64], x: &[f64], prob: f64) -> Option<f64> {
    if prob > 0.0 {
        Some(w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / prob)
    } else {
        None
    }
}

/// State vectors of the three chains for steps `0..=I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub ho: Vec<Vec<f64>>,
    pub hof: Vec<Vec<f64>>,
    pub pp: Vec<Vec<f64>>,
}

/// Propagates the HO, HOF and PP chains jointly over a step table.
pub fn propagate_chains(config: &NetworkConfig, table: &StepTable) -> Result<ChainTrace> {
    let j = config.ttt_states();
    let u = config.sojourn_states();
    let n = table.p_h.len();
    if table.p_f.len() != n || table.p_pp.len() != n {
        return Err(ModelError::invalid(
            "table",
            "per-step vectors differ in length",
        ));
    }
    let mut s_h = vec![0.0; j + 2];
    let mut s_f = vec![0.0; j + 3];
    let mut s_p = vec![0.0; u + 3];
    s_h[0] = 1.0;
    s_f[0] = 1.0;
    s_p[0] = 1.0;
    let mut trace = ChainTrace {
        ho: Vec::with_capacity(n),
        hof: Vec::with_capacity(n),
        pp: Vec::with_capacity(n),
    };
    trace.ho.push(s_h.clone());
    trace.hof.push(s_f.clone());
    trace.pp.push(s_p.clone());
    for i in 1..n {
        s_h = step_ho(&s_h, table.p_h[i]);
        s_f = step_hof(&s_f, table.p_h[i], table.p_f[i]);
        s_p = step_pp(&s_p, s_h[j], table.p_pp[i]);
        trace.ho.push(s_h.clone());
        trace.hof.push(s_f.clone());
        trace.pp.push(s_p.clone());
    }
    Ok(trace)
}

/// Runs the three chains over a precomputed step table.
pub fn chains_from_table(
    config: &NetworkConfig,
    geometry: &ScenarioGeometry,
    table: StepTable,
) -> Result<HoMetrics> {
    let j = config.ttt_states();
    let u = config.sojourn_states();
    let trace = propagate_chains(config, &table)?;
    let n = table.p_h.len();
    let p_ht: Vec<f64> = (0..n)
        .map(|i| if i == 0 { 0.0 } else { trace.ho[i][1] })
        .collect();
    let p_ho: Vec<f64> = (0..n)
        .map(|i| if i == 0 { 0.0 } else { trace.ho[i][j] })
        .collect();
    let hof_pmf: Vec<f64> = trace.hof.iter().map(|s| s[j + 1]).collect();
    let pp_pmf: Vec<f64> = trace.pp.iter().map(|s| s[u + 1]).collect();
    let x: Vec<f64> = (0..n).map(|i| geometry.x(i as isize)).collect();
    let p_hof = trace.hof[n - 1][j + 2];
    let p_pp = trace.pp[n - 1][u + 2];
    Ok(HoMetrics {
        e_x_ht_raw: p_ht.iter().zip(&x).map(|(a, b)| a * b).sum(),
        e_x_ht: weighted_mean(&p_ht, &x),
        e_x_ho: weighted_mean(&p_ho, &x),
        e_x_hof: location_given(&hof_pmf, &x, p_hof),
        e_x_pp: location_given(&pp_pmf, &x, p_pp),
        x,
        length: geometry.length,
        p_ht,
        p_ho,
        hof_pmf,
        pp_pmf,
        p_hof,
        p_pp,
        ttt_states: j,
        sojourn_states: u,
        table,
    })
}

pub fn run_analysis(config: &NetworkConfig) -> Result<HoMetrics> {
    let eval = StepEvaluator::new(config)?;
    let traces = irs_traces(config)?;
    let table = step_table(&eval, &traces)?;
    chains_from_table(config, &eval.geometry, table)
}
