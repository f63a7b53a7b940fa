use serde::Serialize;
use serde_json::{json, Map, Value};
use std::time::{SystemTime, UNIX_EPOCH};

/// One named check inside a report. `passed = None` marks an informational
/// entry (asymptotic rates and the like are never asserted at desk scale).
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: Option<bool>,
    pub detail: String,
}

/// A self-describing experiment result: the effective configuration, exact
/// or estimated measurements, and one verdict per checked assertion. The
/// timestamp is the only field excluded from determinism comparisons.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub timestamp: u64,
    pub config: Value,
    pub measurements: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub trial_seeds: Vec<u64>,
}

impl Report {
    pub fn new(experiment: &str, config: Value, seed: u64) -> Self {
        Report {
            experiment: experiment.to_string(),
            seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config,
            measurements: Map::new(),
            verdicts: Vec::new(),
            trial_seeds: Vec::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: impl Into<Value>) {
        self.measurements.insert(key.to_string(), value.into());
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            passed: Some(passed),
            detail: detail.into(),
        });
    }

    pub fn info(&mut self, name: &str, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            passed: None,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed != Some(false))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per verdict, `PASS`/`FAIL`/`INFO`.
    pub fn verdict_lines(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let tag = match v.passed {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            out.push_str(&format!("{tag} {}: {}\n", v.name, v.detail));
        }
        out
    }

    /// Long-format rows for plotting: experiment,kind,name,value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,kind,name,value\n");
        let quote = |s: &str| {
            if s.contains(',') || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        for (k, v) in &self.measurements {
            let rendered = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!(
                "{},measurement,{},{}\n",
                quote(&self.experiment),
                quote(k),
                quote(&rendered)
            ));
        }
        for v in &self.verdicts {
            let val = match v.passed {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "info",
            };
            out.push_str(&format!(
                "{},verdict,{},{}\n",
                quote(&self.experiment),
                quote(&v.name),
                val
            ));
        }
        out
    }

    /// The report body with the timestamp cleared; equal bodies mean equal
    /// runs.
    pub fn deterministic_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["timestamp"] = json!(0);
        v
    }
}
