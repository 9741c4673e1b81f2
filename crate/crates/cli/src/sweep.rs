//! Sweep descriptions over `RunConfig` keys.

use std::collections::BTreeSet;

use irs_handover::baseline::run_baseline;
use irs_handover::ho_engine::run_analysis;
use irs_handover::RunConfig;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::{metric_cells, CliError};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// A `RunConfig` key, e.g. `lambda_r_per_km2`.
    pub name: String,
    pub values: Vec<Value>,
}

/// One or two swept keys plus fixed overrides. The grid runs over the
/// first axis in the outer loop.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub fixed: Map<String, Value>,
}

fn config_keys() -> BTreeSet<String> {
    match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

/// Grid point: the swept values in axis order and the resulting config.
pub type SweepPoint = (Vec<Value>, RunConfig);

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("sweep: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(CliError::Input(format!(
                "sweep: expected one or two axes, got {}",
                self.axes.len()
            )));
        }
        let keys = config_keys();
        let mut seen = BTreeSet::new();
        for a in &self.axes {
            if !keys.contains(&a.name) {
                return Err(CliError::Input(format!(
                    "sweep: `{}` is not a config key",
                    a.name
                )));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(CliError::Input(format!(
                    "sweep: `{}` appears twice",
                    a.name
                )));
            }
            if a.values.is_empty() {
                return Err(CliError::Input(format!(
                    "sweep: `{}` has no values",
                    a.name
                )));
            }
        }
        for k in self.fixed.keys() {
            if !keys.contains(k) {
                return Err(CliError::Input(format!(
                    "sweep: fixed key `{k}` is not a config key"
                )));
            }
        }
        Ok(())
    }

    /// Every grid point, each validated as a network config before any run.
    pub fn points(&self, base: &RunConfig) -> Result<Vec<SweepPoint>, CliError> {
        self.validate()?;
        let Value::Object(mut root) =
            serde_json::to_value(base).map_err(|e| CliError::Input(format!("config: {e}")))?
        else {
            return Err(CliError::Input("config: not an object".into()));
        };
        root.extend(self.fixed.clone());
        let second: Vec<Option<&Value>> = match self.axes.get(1) {
            Some(a) => a.values.iter().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for v0 in &self.axes[0].values {
            for v1 in &second {
                let mut obj = root.clone();
                obj.insert(self.axes[0].name.clone(), v0.clone());
                let mut swept = vec![v0.clone()];
                if let (Some(v), Some(a)) = (v1, self.axes.get(1)) {
                    obj.insert(a.name.clone(), (*v).clone());
                    swept.push((*v).clone());
                }
                let rc: RunConfig = serde_json::from_value(Value::Object(obj))
                    .map_err(|e| CliError::Input(format!("sweep point {swept:?}: {e}")))?;
                rc.to_network()
                    .map_err(|e| CliError::Input(format!("sweep point {swept:?}: {e}")))?;
                out.push((swept, rc));
            }
        }
        Ok(out)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs every point in parallel; rows come back in grid order.
pub fn evaluate(points: &[SweepPoint], baseline: bool) -> Result<Vec<Vec<String>>, CliError> {
    points
        .par_iter()
        .map(|(swept, rc)| {
            let cfg = rc.to_network()?;
            let m = run_analysis(&cfg)?;
            let base = if baseline {
                Some(run_baseline(&cfg)?)
            } else {
                None
            };
            let mut row: Vec<String> = swept.iter().map(cell).collect();
            row.extend(metric_cells(&m, base.as_ref()));
            Ok(row)
        })
        .collect()
}
