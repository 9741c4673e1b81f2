//! Batch front end: single analyses, parameter sweeps, analytic-vs-MC
//! validation and (TTT, margin) mining, all writing CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use irs_handover::baseline::{compare, run_baseline};
use irs_handover::ho_engine::{run_analysis, HoMetrics};
use irs_handover::mc_sim::{simulate_matched, tv_distance, McEstimate, McOptions};
use irs_handover::mining::{mine, MineGrid};
use irs_handover::{ModelError, RunConfig};
use thiserror::Error;

pub mod output;
pub mod sweep;

use output::{flag, num, opt, write_csv};
pub use sweep::{SweepAxis, SweepSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    /// 1 for a validation tolerance miss, 2 for anything wrong with the input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Tolerance(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "irs-ho",
    version,
    about = "Handover analysis for IRS-assisted cellular networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration with unit-bearing keys; defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One analytic run: metrics.csv, trigger_pmf.csv, execution_pmf.csv.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Also run the N = 0 baseline and report the ratios.
        #[arg(long)]
        baseline: bool,
    },
    /// Grid over one or two config keys: sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// JSON sweep description.
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        baseline: bool,
    },
    /// Analytic model against the matched-geometry simulator: validate.csv.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Feasible (TTT, margin) settings: mine.csv.
    Mine {
        #[command(flatten)]
        common: Common,
        /// Bound on max(P_hof, P_pp).
        #[arg(long, default_value_t = 1e-3)]
        target: f64,
        /// TTT values in ms, multiples of T_d.
        #[arg(long, value_delimiter = ',')]
        ttt_ms: Vec<f64>,
        /// HO margins in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        margins_db: Vec<f64>,
    },
}

/// Analytic-vs-MC tolerances: (metric, tolerance).
pub const TOLERANCES: [(&str, f64); 5] = [
    ("p_hof", 0.02),
    ("p_pp", 0.02),
    ("p_ho", 0.02),
    ("trigger_pmf_tv", 0.05),
    ("execution_pmf_tv", 0.05),
];

pub fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut rc = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        rc.seed = s;
    }
    if let Some(n) = common.trials {
        rc.n_trials = n;
    }
    Ok(rc)
}

fn out_dir(common: &Common) -> Result<&Path, CliError> {
    fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
    Ok(&common.out)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze { common, baseline } => analyze(common, *baseline, stdout),
        Command::Sweep {
            common,
            sweep,
            baseline,
        } => run_sweep(common, sweep, *baseline, stdout),
        Command::Validate { common } => validate(common, stdout),
        Command::Mine {
            common,
            target,
            ttt_ms,
            margins_db,
        } => run_mine(common, *target, ttt_ms, margins_db, stdout),
    }
}

fn say(stdout: &mut dyn Write, line: String) -> Result<(), CliError> {
    writeln!(stdout, "{line}").map_err(|e| CliError::Input(format!("stdout: {e}")))
}

pub const METRIC_COLUMNS: [&str; 16] = [
    "p_hof",
    "p_pp",
    "p_ho",
    "trigger_mass",
    "e_x_ht_raw",
    "e_x_ht",
    "e_x_ht_over_l",
    "e_x_ho",
    "e_x_hof",
    "e_x_pp",
    "length_m",
    "ttt_states",
    "sojourn_states",
    "hof_ratio",
    "pp_ratio",
    "trigger_location_ratio",
];

/// Metric cells in `METRIC_COLUMNS` order; ratios only with a baseline.
pub fn metric_cells(m: &HoMetrics, base: Option<&HoMetrics>) -> Vec<String> {
    let ratios = base.map(|b| compare(m, b.clone()));
    vec![
        num(m.p_hof),
        num(m.p_pp),
        num(m.p_ho.iter().sum()),
        num(m.trigger_mass()),
        num(m.e_x_ht_raw),
        opt(m.e_x_ht),
        opt(m.e_x_ht.map(|x| x / m.length)),
        opt(m.e_x_ho),
        opt(m.e_x_hof),
        opt(m.e_x_pp),
        num(m.length),
        m.ttt_states.to_string(),
        m.sojourn_states.to_string(),
        opt(ratios.as_ref().and_then(|r| r.hof_ratio)),
        opt(ratios.as_ref().and_then(|r| r.pp_ratio)),
        opt(ratios.as_ref().and_then(|r| r.trigger_location_ratio)),
    ]
}

fn pmf_rows(m: &HoMetrics, p: &[f64]) -> Vec<Vec<String>> {
    p.iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), num(m.x[i]), num(m.x[i] / m.length), num(*v)])
        .collect()
}

fn analyze(common: &Common, baseline: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(common)?.to_network()?;
    let out = out_dir(common)?;
    let m = run_analysis(&cfg)?;
    let base = if baseline {
        Some(run_baseline(&cfg)?)
    } else {
        None
    };
    let mut columns = vec!["run"];
    columns.extend(METRIC_COLUMNS);
    let mut rows = vec![[vec!["irs".to_string()], metric_cells(&m, base.as_ref())].concat()];
    if let Some(b) = &base {
        rows.push([vec!["baseline".to_string()], metric_cells(b, None)].concat());
    }
    write_csv(&out.join("metrics.csv"), "metrics", &columns, &rows)?;
    let pmf_cols = ["i", "x_i", "x_i_over_l", "probability"];
    write_csv(
        &out.join("trigger_pmf.csv"),
        "trigger-pmf",
        &pmf_cols,
        &pmf_rows(&m, &m.p_ht),
    )?;
    write_csv(
        &out.join("execution_pmf.csv"),
        "execution-pmf",
        &pmf_cols,
        &pmf_rows(&m, &m.p_ho),
    )?;

    say(
        stdout,
        format!(
            "crossing length   {:.2} m, {} steps",
            m.length,
            m.x.len() - 1
        ),
    )?;
    say(stdout, format!("P_hof             {:.6}", m.p_hof))?;
    say(stdout, format!("P_pp              {:.6}", m.p_pp))?;
    say(
        stdout,
        format!("P_ho by the end   {:.6}", m.p_ho.iter().sum::<f64>()),
    )?;
    if let Some(x) = m.e_x_ht {
        say(
            stdout,
            format!(
                "E[x_ht]/L         {:.4} (trigger mass {:.4})",
                x / m.length,
                m.trigger_mass()
            ),
        )?;
    }
    if let Some(b) = &base {
        let r = compare(&m, b.clone());
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        say(
            stdout,
            format!(
                "baseline P_hof    {:.6}, ratio {}",
                b.p_hof,
                show(r.hof_ratio)
            ),
        )?;
        say(
            stdout,
            format!(
                "baseline P_pp     {:.6}, ratio {}",
                b.p_pp,
                show(r.pp_ratio)
            ),
        )?;
        say(
            stdout,
            format!("trigger location  ratio {}", show(r.trigger_location_ratio)),
        )?;
    }
    Ok(())
}

fn run_sweep(
    common: &Common,
    path: &Path,
    baseline: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let base = load_config(common)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec = SweepSpec::from_json(&text)?;
    let points = spec.points(&base)?;
    let out = out_dir(common)?;
    let rows = sweep::evaluate(&points, baseline)?;
    let mut columns: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    columns.extend(METRIC_COLUMNS);
    write_csv(&out.join("sweep.csv"), "sweep", &columns, &rows)?;
    say(
        stdout,
        format!(
            "{} grid points written to {}",
            rows.len(),
            out.join("sweep.csv").display()
        ),
    )
}

fn estimate_row(name: &str, analytic: f64, mc: &McEstimate, tol: f64) -> (Vec<String>, bool) {
    let delta = (analytic - mc.mean).abs();
    let pass = delta <= tol;
    (
        vec![
            name.to_string(),
            num(analytic),
            num(mc.mean),
            num(delta),
            num(mc.ci95),
            num(tol),
            flag(delta <= mc.ci95),
            flag(pass),
        ],
        pass,
    )
}

fn tv_row(name: &str, tv: f64, tol: f64) -> (Vec<String>, bool) {
    let pass = tv <= tol;
    (
        vec![
            name.to_string(),
            String::new(),
            String::new(),
            num(tv),
            String::new(),
            num(tol),
            String::new(),
            flag(pass),
        ],
        pass,
    )
}

fn validate(common: &Common, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rc = load_config(common)?;
    let cfg = rc.to_network()?;
    let out = out_dir(common)?;
    let m = run_analysis(&cfg)?;
    let g = cfg.geometry()?;
    let mc = simulate_matched(&cfg, &g, rc.n_trials, rc.seed, McOptions::default())?;
    let tol = |k: usize| TOLERANCES[k].1;
    let results = [
        estimate_row("p_hof", m.p_hof, &mc.p_hof, tol(0)),
        estimate_row("p_pp", m.p_pp, &mc.p_pp, tol(1)),
        estimate_row("p_ho", m.p_ho.iter().sum(), &mc.p_ho, tol(2)),
        tv_row(
            "trigger_pmf_tv",
            tv_distance(&m.p_ht, &mc.trigger_pmf),
            tol(3),
        ),
        tv_row(
            "execution_pmf_tv",
            tv_distance(&m.p_ho, &mc.execution_pmf),
            tol(4),
        ),
    ];
    let columns = [
        "metric",
        "analytic",
        "mc",
        "delta",
        "ci95",
        "tolerance",
        "within_ci",
        "pass",
    ];
    let rows: Vec<Vec<String>> = results.iter().map(|r| r.0.clone()).collect();
    write_csv(&out.join("validate.csv"), "validate", &columns, &rows)?;
    say(stdout, format!("{} trials, seed {}", rc.n_trials, rc.seed))?;
    let mut failed = Vec::new();
    for (row, pass) in &results {
        say(
            stdout,
            format!(
                "{:<18} delta {:<12} tol {:<6} {}",
                row[0],
                row[3],
                row[5],
                if *pass { "PASS" } else { "FAIL" }
            ),
        )?;
        if !pass {
            failed.push(row[0].clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!(
            "outside tolerance: {}",
            failed.join(", ")
        )))
    }
}

fn run_mine(
    common: &Common,
    target: f64,
    ttt_ms: &[f64],
    margins_db: &[f64],
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let rc = load_config(common)?;
    let cfg = rc.to_network()?;
    let defaults = MineGrid::default();
    let grid = MineGrid {
        t_t_ms: if ttt_ms.is_empty() {
            defaults.t_t_ms
        } else {
            ttt_ms.to_vec()
        },
        gamma_ho_db: if margins_db.is_empty() {
            defaults.gamma_ho_db
        } else {
            margins_db.to_vec()
        },
    };
    for &t in &grid.t_t_ms {
        let steps = t / rc.t_d_ms;
        if steps.is_nan() || steps < 0.0 || (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(CliError::Input(format!(
                "ttt-ms value {t} is not a non-negative multiple of T_d = {} ms",
                rc.t_d_ms
            )));
        }
    }
    let out = out_dir(common)?;
    let res = mine(&cfg, &grid, target)?;
    let columns = [
        "t_t_ms",
        "gamma_ho_db",
        "p_hof",
        "p_pp",
        "worst",
        "feasible",
        "best",
    ];
    let rows: Vec<Vec<String>> = res
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            vec![
                num(p.t_t_ms),
                num(p.gamma_ho_db),
                num(p.p_hof),
                num(p.p_pp),
                num(p.worst()),
                flag(p.feasible),
                flag(res.best == Some(k)),
            ]
        })
        .collect();
    write_csv(&out.join("mine.csv"), "mine", &columns, &rows)?;
    let n_feasible = res.feasible().count();
    say(
        stdout,
        format!(
            "{n_feasible} of {} grid points below {target}",
            res.points.len()
        ),
    )?;
    if let Some(b) = res.best.map(|k| res.points[k]) {
        say(
            stdout,
            format!(
                "best: T_t = {} ms, gamma_HO = {} dB, max(P_hof, P_pp) = {:.3e}",
                b.t_t_ms,
                b.gamma_ho_db,
                b.worst()
            ),
        )?;
    }
    Ok(())
}
