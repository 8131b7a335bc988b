//! Experiment configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndt_core::ndt::NdtConfig;
use ndt_core::optimizer::OptimizerConfig;
use ndt_core::simulator::GatingParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SUPPORTED_SIZES: [usize; 3] = [20, 50, 100];
pub const LOAD_RANGE: (f64, f64) = (0.4, 7.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Baseline,
    Priority,
    PriorityGating,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Baseline, Policy::Priority, Policy::PriorityGating];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Baseline => "baseline",
            Policy::Priority => "priority",
            Policy::PriorityGating => "priority_gating",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected baseline, priority or priority_gating)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sizes: Vec<usize>,
    pub loads: Vec<f64>,
    pub topologies: usize,
    pub realizations: usize,
    pub slots: usize,
    pub policies: Vec<Policy>,
    /// Contention rounds to evaluate; each sweep runs once per entry.
    pub rounds: Vec<usize>,
    pub rate_std: f64,
    pub ndt: NdtConfig,
    pub optimizer: OptimizerConfig,
    pub gating: GatingParams,
    /// Timed NDT evaluations per instance in the runtime benchmark.
    pub bench_repeats: usize,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sizes: SUPPORTED_SIZES.to_vec(),
            loads: vec![0.4, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            topologies: 10,
            realizations: 10,
            slots: 1000,
            policies: Policy::ALL.to_vec(),
            rounds: vec![1, 3],
            rate_std: 3.0,
            ndt: NdtConfig::default(),
            optimizer: OptimizerConfig::default(),
            gating: GatingParams::default(),
            bench_repeats: 20,
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    /// Parses JSON; errors carry the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let spec: ExperimentSpec = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            HarnessError::config(field, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(HarnessError::config(field, message));
        if self.sizes.is_empty() {
            return bad("sizes", "must list at least one size".into());
        }
        if let Some(s) = self.sizes.iter().find(|s| !SUPPORTED_SIZES.contains(s)) {
            return bad("sizes", format!("{s} is not one of {SUPPORTED_SIZES:?}"));
        }
        if self.loads.is_empty() {
            return bad("loads", "must list at least one load".into());
        }
        let (lo, hi) = LOAD_RANGE;
        if let Some(l) = self.loads.iter().find(|l| !(lo..=hi).contains(*l)) {
            return bad("loads", format!("{l} lies outside [{lo}, {hi}]"));
        }
        for (field, v) in [
            ("topologies", self.topologies),
            ("realizations", self.realizations),
            ("slots", self.slots),
            ("bench_repeats", self.bench_repeats),
        ] {
            if v == 0 {
                return bad(field, "must be at least 1".into());
            }
        }
        if self.policies.is_empty() {
            return bad("policies", "must list at least one policy".into());
        }
        if self.rounds.is_empty() || self.rounds.contains(&0) {
            return bad("rounds", "must be a nonempty list of positive round counts".into());
        }
        if !(self.rate_std >= 0.0 && self.rate_std.is_finite()) {
            return bad("rate_std", format!("must be a finite nonnegative number, got {}", self.rate_std));
        }
        self.ndt.validate().map_err(|e| HarnessError::config("ndt", e.to_string()))?;
        self.optimizer.validate().map_err(|e| HarnessError::config("optimizer", e.to_string()))?;
        if self.gating.window == 0 || !(self.gating.factor > 0.0) {
            return bad("gating", "window must be positive and factor above zero".into());
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys, no whitespace).
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("spec serializes");
        serde_json::to_string(&value).expect("value serializes")
    }
}
