use crate::error::Result;
use crate::params::{build_toy_params, parse_rational, ToyParams, ToyTSpec};
use crate::restrictions::AcceptabilityWindow;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowCfg {
    pub level: usize,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaseCaseCfg {
    pub w0: usize,
    pub r: usize,
    pub t1: String,
}

fn default_trials() -> u64 {
    10_000
}

/// Experiment configuration as read from a JSON file. Rationals are
/// strings like "1/8".
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub fan_ins: Vec<usize>,
    pub lambda: String,
    pub q: String,
    /// explicit t_1..t_{d-2}; omitted means auto-derived
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<WindowCfg>,
    #[serde(default)]
    pub cond2_threshold: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// path to an approximator circuit in the JSON circuit format
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basecase: Option<BaseCaseCfg>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn toy_params(&self) -> Result<ToyParams> {
        let lambda = parse_rational(&self.lambda)?;
        let q = parse_rational(&self.q)?;
        let t_spec = match &self.t {
            None => ToyTSpec::Auto,
            Some(list) => ToyTSpec::Explicit(
                list.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
            ),
        };
        let windows: BTreeMap<usize, AcceptabilityWindow> = self
            .windows
            .iter()
            .map(|w| (w.level, AcceptabilityWindow::toy(w.lo, w.hi)))
            .collect();
        build_toy_params(
            self.fan_ins.clone(),
            lambda,
            q,
            t_spec,
            windows,
            self.cond2_threshold,
        )
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// The depth-2 single-gate profile used throughout the documentation:
    /// m = 2, lambda = 1/8, q = 1/2, so t_1 = 1/4.
    pub fn toy_d2() -> Self {
        ExperimentConfig {
            fan_ins: vec![2, 2],
            lambda: "1/8".into(),
            q: "1/2".into(),
            t: Some(vec![]),
            windows: vec![],
            cond2_threshold: 0,
            mode: Mode::Exact,
            trials: default_trials(),
            seed: None,
            approximator: None,
            basecase: None,
        }
    }

    /// The depth-3 profile with fan-ins (2,2,2): t_2 = 1/4 and t_1 = 3/4
    /// (the latter keeps q_a inside [0, 1 - lambda] for every star count).
    pub fn toy_d3() -> Self {
        ExperimentConfig {
            fan_ins: vec![2, 2, 2],
            lambda: "1/8".into(),
            q: "1/2".into(),
            t: Some(vec!["3/4".into()]),
            windows: vec![],
            cond2_threshold: 0,
            mode: Mode::Exact,
            trials: default_trials(),
            seed: None,
            approximator: None,
            basecase: None,
        }
    }
}
