use std::f64::consts::{PI, TAU};

use irs_handover::ho_engine::{Event, StepEvaluator};
use irs_handover::irs_chain::{propagate, IrsState};
use irs_handover::irs_dist::{
    expect_indicator, expect_ratio, pdf_angle, pdf_distance, AdaptiveOptions, ConditionalPdfSpec,
};
use irs_handover::{ModelError, NetworkConfig, RegionFrame, Side};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup() -> (NetworkConfig, irs_handover::ScenarioGeometry) {
    let cfg = NetworkConfig::default();
    let g = cfg.geometry().unwrap();
    (cfg, g)
}

fn mid_step(g: &irs_handover::ScenarioGeometry) -> isize {
    (g.x_mid / g.delta_x).round() as isize
}

/// Sampler for `(d, φ′)` built from a trapezoid table of the distance
/// density, independent of the library's own CDF.
struct Sampler {
    spec: ConditionalPdfSpec,
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(spec: ConditionalPdfSpec) -> Self {
        let (lo, hi) = spec.support();
        let n = 40_000;
        let grid: Vec<f64> = (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .collect();
        let pdf: Vec<f64> = grid
            .iter()
            .map(|&d| pdf_distance(&spec, d).unwrap())
            .collect();
        let mut cdf = vec![0.0; grid.len()];
        for k in 1..grid.len() {
            cdf[k] = cdf[k - 1] + 0.5 * (pdf[k] + pdf[k - 1]) * (grid[k] - grid[k - 1]);
        }
        let total = *cdf.last().unwrap();
        for c in &mut cdf {
            *c /= total;
        }
        Self { spec, grid, cdf }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.gen();
        let k = self
            .cdf
            .partition_point(|c| *c < u)
            .clamp(1, self.grid.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let d = self.grid[k - 1] + t * (self.grid[k] - self.grid[k - 1]);
        let arcs = self.spec.angle_arcs(d);
        let mut v = rng.gen::<f64>() * arcs.measure();
        for &(a, b) in arcs.pieces() {
            if v <= b - a {
                return (d, a + v);
            }
            v -= b - a;
        }
        (d, arcs.pieces().last().map_or(0.0, |p| p.1))
    }
}

fn sample_state<R: Rng>(
    rng: &mut R,
    state: IrsState,
    lambda_r: f64,
    d_big: f64,
    serving: &Option<Sampler>,
) -> (f64, f64) {
    if state.serving() {
        serving.as_ref().unwrap().sample(rng)
    } else {
        let e: f64 = -rng.gen::<f64>().ln();
        (
            (d_big * d_big + e / (lambda_r * PI)).sqrt(),
            rng.gen_range(0.0..TAU),
        )
    }
}

#[test]
fn keep_connection_interior_law() {
    let (cfg, g) = setup();
    let frame = RegionFrame::new(g, cfg.serving_distance, 200);
    let spec = ConditionalPdfSpec::new(
        Side::Original,
        IrsState::KeepConnection,
        frame,
        cfg.lambda_r,
    );
    let (lam, d_big) = (cfg.lambda_r, cfg.serving_distance);
    for d in [1.0, 17.0, 33.0, 49.9] {
        let expect = 2.0 * PI * lam * d * (-lam * PI * d * d).exp()
            / (1.0 - (-lam * PI * d_big * d_big).exp());
        assert!((pdf_distance(&spec, d).unwrap() / expect - 1.0).abs() < 1e-9);
        assert!((pdf_angle(&spec, d, 2.0).unwrap() - 1.0 / TAU).abs() < 1e-12);
    }
}

#[test]
fn initial_connection_enters_at_the_rim() {
    let (cfg, g) = setup();
    let d_big = cfg.serving_distance;
    for i in [100, 610, 640] {
        let frame = RegionFrame::new(g, d_big, i);
        for side in [Side::Original, Side::Target] {
            let spec =
                ConditionalPdfSpec::new(side, IrsState::InitialConnection, frame, cfg.lambda_r);
            if !spec.is_reachable().unwrap() {
                continue;
            }
            for d in [1.0, 20.0, d_big - g.delta_x - 1e-6] {
                assert_eq!(pdf_distance(&spec, d).unwrap(), 0.0, "{side:?} i={i} d={d}");
            }
        }
    }
}

#[test]
fn departed_side_has_no_initial_connection() {
    let (cfg, g) = setup();
    let past = ((g.x_mid + 1.2 * g.band_half_width(cfg.serving_distance)) / g.delta_x) as isize;
    let frame = RegionFrame::new(g, cfg.serving_distance, past);
    let spec = ConditionalPdfSpec::new(
        Side::Original,
        IrsState::InitialConnection,
        frame,
        cfg.lambda_r,
    );
    assert!(matches!(
        pdf_distance(&spec, 49.9),
        Err(ModelError::UnreachableState)
    ));
}

#[test]
fn no_serving_law_includes_density() {
    let (cfg, g) = setup();
    let frame = RegionFrame::new(g, cfg.serving_distance, 300);
    let spec = ConditionalPdfSpec::new(Side::Original, IrsState::NoConnection, frame, cfg.lambda_r);
    let (lam, dd) = (cfg.lambda_r, cfg.serving_distance);
    let d = 70.0;
    let expect = 2.0 * PI * lam * d * (-lam * PI * (d * d - dd * dd)).exp();
    assert!((pdf_distance(&spec, d).unwrap() / expect - 1.0).abs() < 1e-12);
    assert_eq!(pdf_distance(&spec, 40.0).unwrap(), 0.0);
    assert!((pdf_angle(&spec, d, 5.0).unwrap() - 1.0 / TAU).abs() < 1e-15);
}

#[test]
fn constant_predicates() {
    let (cfg, g) = setup();
    let i = mid_step(&g);
    let frame = RegionFrame::new(g, cfg.serving_distance, i);
    for side in [Side::Original, Side::Target] {
        for state in IrsState::ALL {
            let spec = ConditionalPdfSpec::new(side, state, frame, cfg.lambda_r);
            if state.serving() && !spec.is_reachable().unwrap() {
                continue;
            }
            let one = expect_indicator(&spec, |_, _| true).unwrap();
            assert!((one - 1.0).abs() < 1e-3, "{side:?} {state:?}: {one}");
            assert_eq!(expect_indicator(&spec, |_, _| false).unwrap(), 0.0);
        }
    }
}

#[test]
fn expectation_is_monotone_in_the_predicate() {
    let (cfg, g) = setup();
    let frame = RegionFrame::new(g, cfg.serving_distance, mid_step(&g) + 5);
    let spec = ConditionalPdfSpec::new(
        Side::Target,
        IrsState::InitialConnection,
        frame,
        cfg.lambda_r,
    );
    let narrow = expect_indicator(&spec, |d, p| d > 49.95 && p.cos() > 0.0).unwrap();
    let wide = expect_indicator(&spec, |d, _| d > 49.95).unwrap();
    let wider = expect_indicator(&spec, |d, _| d > 49.9).unwrap();
    assert!(narrow <= wide && wide <= wider);
    assert!(narrow > 0.0 && wider < 1.0);
}

#[test]
fn adaptive_and_tensor_expectations_agree() {
    let (cfg, g) = setup();
    let eval = StepEvaluator::new(&cfg).unwrap();
    let im = mid_step(&g) as usize;
    for (event, i) in [
        (Event::Trigger, im),
        (Event::Trigger, im + 3),
        (Event::PingPong, im - 3),
        (Event::PingPong, im - 12),
    ] {
        let frame = RegionFrame::new(g, cfg.serving_distance, i as isize);
        let ctx = eval.context(i);
        for state in IrsState::ALL {
            let spec = ConditionalPdfSpec::new(event.side(), state, frame, cfg.lambda_r);
            if state.serving() && !spec.is_reachable().unwrap() {
                continue;
            }
            let test = event.test(state, &cfg);
            let adaptive = expect_ratio(&spec, &ctx, &test, AdaptiveOptions::default()).unwrap();
            let tensor = expect_indicator(&spec, |d, p| test.eval(&ctx, d, p)).unwrap();
            assert!(
                (adaptive.value - tensor).abs() < 2e-3,
                "{event:?} i={i} {state:?}: adaptive {} tensor {tensor}",
                adaptive.value
            );
        }
    }
}

/// Mixture probability of `event` at step `i` by sampling the IRS state from
/// the chain vector and `(d, φ′)` from the conditional laws.
fn sampled_step_probability(
    cfg: &NetworkConfig,
    event: Event,
    i: usize,
    n: usize,
    seed: u64,
) -> f64 {
    let g = cfg.geometry().unwrap();
    let eval = StepEvaluator::new(cfg).unwrap();
    let ctx = eval.context(i);
    let weights = propagate(event.side(), &g, cfg).unwrap().vectors[i];
    let frame = RegionFrame::new(g, cfg.serving_distance, i as isize);
    let samplers: Vec<Option<Sampler>> = IrsState::ALL
        .iter()
        .map(|&s| {
            let spec = ConditionalPdfSpec::new(event.side(), s, frame, cfg.lambda_r);
            (s.serving() && weights[s.index()] > 0.0 && spec.is_reachable().unwrap())
                .then(|| Sampler::new(spec))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n {
        let mut u: f64 = rng.gen();
        let mut state = IrsState::NoConnection;
        for s in IrsState::ALL {
            if u < weights[s.index()] {
                state = s;
                break;
            }
            u -= weights[s.index()];
        }
        let (d, p) = sample_state(
            &mut rng,
            state,
            cfg.lambda_r,
            cfg.serving_distance,
            &samplers[state.index()],
        );
        if event.test(state, cfg).eval(&ctx, d, p) {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

#[test]
fn step_probabilities_against_sampled_laws() {
    let (cfg, g) = setup();
    let eval = StepEvaluator::new(&cfg).unwrap();
    let traces = irs_handover::ho_engine::irs_traces(&cfg).unwrap();
    let im = mid_step(&g) as usize;
    let checks = [
        (Event::Trigger, im),
        (Event::Trigger, im + 3),
        (Event::PingPong, im - 3),
        (Event::Failure, im + 3),
    ];
    for (k, (event, i)) in checks.into_iter().enumerate() {
        let w = match event.side() {
            Side::Original => traces.original.vectors[i],
            Side::Target => traces.target.vectors[i],
        };
        let analytic = eval.mixture(event, i, &w).unwrap();
        let sampled = sampled_step_probability(&cfg, event, i, 1_000_000, 50 + k as u64);
        assert!(
            (analytic - sampled).abs() <= 0.01,
            "{event:?} i={i}: {analytic} vs {sampled}"
        );
    }
}
