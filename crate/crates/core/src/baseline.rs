//! No-IRS reference runs and IRS-to-baseline ratios.
//!
//! The baseline is the ordinary analysis with `N = 0`, so both runs share
//! every line of chain code and differ only in the channel terms.

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::Result;
use crate::ho_engine::{run_analysis, HoMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub metrics: HoMetrics,
    /// `P_hof(IRS) / P_hof(base)`, absent when the baseline is zero.
    pub hof_ratio: Option<f64>,
    pub pp_ratio: Option<f64>,
    /// `E[x^ht](IRS) / E[x^ht](base)`.
    pub trigger_location_ratio: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Baseline run alone.
pub fn run_baseline(config: &NetworkConfig) -> Result<HoMetrics> {
    run_analysis(&config.without_irs())
}

/// Ratios of an IRS run against its baseline.
pub fn compare(irs: &HoMetrics, base: HoMetrics) -> BaselineMetrics {
    BaselineMetrics {
        hof_ratio: ratio(irs.p_hof, base.p_hof),
        pp_ratio: ratio(irs.p_pp, base.p_pp),
        trigger_location_ratio: match (irs.e_x_ht, base.e_x_ht) {
            (Some(a), Some(b)) => ratio(a, b),
            _ => None,
        },
        metrics: base,
    }
}

/// Runs both the IRS configuration and its baseline.
pub fn run_paired(config: &NetworkConfig) -> Result<(HoMetrics, BaselineMetrics)> {
    let irs = run_analysis(config)?;
    let base = run_baseline(config)?;
    let cmp = compare(&irs, base);
    Ok((irs, cmp))
}
