//! Run configuration: one TOML file plus `section.key=value` overrides.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Validation runs before any computation and names the offending field.

use std::path::{Path, PathBuf};

use chainsense_core::inference::{ErrorAverage, EstimatorOptions, FieldGrid, Sampling};
use chainsense_core::protocol::Schedule;
use chainsense_core::scaling::{FitWindows, PowerLaw, TimeBudget};
use chainsense_core::spin::{ChainSpec, ChainTemplate, DEFAULT_MAX_SITES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainConfig,
    pub schedule: ScheduleConfig,
    pub inference: InferenceConfig,
    pub budget: BudgetConfig,
    pub sweep: SweepConfig,
    pub trace: TraceConfig,
    pub rng: RngConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub coupling: f64,
    /// True field, in units of the coupling.
    pub field: f64,
    pub max_sites: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_sites: 5,
            coupling: 1.0,
            field: 0.1,
            max_sites: DEFAULT_MAX_SITES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Explicit intervals; when empty the arithmetic rule below is used.
    pub taus: Vec<f64>,
    pub n_seq: usize,
    pub start: f64,
    pub step: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            taus: Vec::new(),
            n_seq: 5,
            start: 6.0,
            step: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMode {
    DeltaB,
    RootMeanSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Exact,
    Simulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    /// Sequences per dataset.
    pub samples: u64,
    pub repeats: usize,
    pub average: AverageMode,
    pub sampling: SamplingMode,
    pub fold_sign: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            grid_min: -0.2,
            grid_max: 0.2,
            grid_points: 401,
            samples: 1000,
            repeats: 100,
            average: AverageMode::DeltaB,
            sampling: SamplingMode::Exact,
            fold_sign: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub init_ratio: f64,
    pub meas_ratio: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            init_ratio: TimeBudget::DEFAULT_INIT_RATIO,
            meas_ratio: TimeBudget::DEFAULT_MEAS_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub amplitude: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Log-normal multiplicative scatter, e.g. 0.01 for about 1%.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            amplitude: 10.0,
            delta: -1.0,
            alpha: 0.5,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_seq: Vec<usize>,
    pub fields: Vec<f64>,
    /// Target total times `JT`; sample counts are derived per sequence length.
    pub total_times: Vec<f64>,
    /// Fields at which the time exponent is also fitted directly.
    pub alpha_fields: Vec<f64>,
    pub field_window: [f64; 2],
    /// Empty means the full simulated range.
    pub time_window: Vec<f64>,
    pub synthetic: bool,
    pub synthetic_law: SyntheticConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_seq: vec![1, 4, 5, 6, 10],
            fields: (2..=10).map(|k| f64::from(k) * 0.02).collect(),
            total_times: log_spaced(1e6, 1e7, 6),
            alpha_fields: vec![0.1, 0.2],
            field_window: [0.04, 0.2],
            time_window: Vec::new(),
            synthetic: false,
            synthetic_law: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub t_max: f64,
    pub dt: f64,
    /// Also emit one measured trajectory following the schedule.
    pub measured: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            t_max: 60.0,
            dt: 0.1,
            measured: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RngConfig {
    /// Master seed, at most `i64::MAX` (TOML integers are signed).
    pub seed: u64,
}

impl Default for RngConfig {
    fn default() -> Self {
        Self { seed: 20_200_611 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            workers: 0,
        }
    }
}

pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            let x = (a + (b - a) * i as f64 / (points - 1) as f64).exp();
            // keep the values short when written to CSV
            (x * 1e3).round() / 1e3
        })
        .collect()
}

impl RunConfig {
    /// Sweep used to reproduce the time-exponent table: `N = 5`, sequence
    /// lengths 1, 4, 5, 6, 10, nine fields in `[0.04, 0.2]`, one decade of
    /// total time. Estimation runs on `|B|` over `[0, 0.2]` at spacing
    /// `1e-4` so the narrowest posteriors span several grid cells.
    pub fn table1_preset() -> Self {
        let mut c = RunConfig::default();
        c.inference.grid_min = 0.0;
        c.inference.grid_max = 0.2;
        c.inference.grid_points = 2001;
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text, &[])
    }

    /// Parses TOML and applies `section.key=value` overrides (values in TOML
    /// syntax) on top of it.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::config("<file>", e.to_string()))?;
        apply_overrides(&mut table, overrides)?;
        Self::from_table(table)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let text = toml::to_string(self).map_err(|e| CliError::config("<config>", e.to_string()))?;
        Self::from_toml(&text, overrides)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config("<file>", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every downstream precondition; the error names the field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(CliError::config(field, msg));
        if self.chain.n_sites == 0 {
            return bad("chain.n_sites", "must be at least 1");
        }
        if self.chain.n_sites > self.chain.max_sites {
            return bad("chain.n_sites", "exceeds chain.max_sites");
        }
        if !(self.chain.coupling > 0.0 && self.chain.coupling.is_finite()) {
            return bad("chain.coupling", "must be positive");
        }
        if !self.chain.field.is_finite() {
            return bad("chain.field", "must be finite");
        }
        if self.schedule.taus.is_empty() {
            if self.schedule.n_seq == 0 {
                return bad("schedule.n_seq", "must be at least 1");
            }
            if !(self.schedule.start > 0.0) {
                return bad("schedule.start", "must be positive");
            }
            let last = self.schedule.start + self.schedule.step * (self.schedule.n_seq - 1) as f64;
            if !(self.schedule.step.is_finite() && last > 0.0 && self.schedule.start + self.schedule.step.min(0.0) > 0.0) {
                return bad("schedule.step", "every interval must stay positive");
            }
        } else if self.schedule.taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("schedule.taus", "intervals must be positive");
        }
        let i = &self.inference;
        if i.grid_points < 3 {
            return bad("inference.grid_points", "needs at least 3 points");
        }
        if !(i.grid_min.is_finite() && i.grid_max.is_finite() && i.grid_min < i.grid_max) {
            return bad("inference.grid_max", "must exceed inference.grid_min");
        }
        if i.fold_sign && i.grid_min < 0.0 {
            let symmetric = (i.grid_min + i.grid_max).abs() < 1e-12 && i.grid_points % 2 == 1;
            if !symmetric {
                return bad(
                    "inference.fold_sign",
                    "folding needs a nonnegative grid or an odd grid symmetric about zero",
                );
            }
        }
        if i.samples == 0 {
            return bad("inference.samples", "must be at least 1");
        }
        if i.repeats == 0 {
            return bad("inference.repeats", "must be at least 1");
        }
        if !(self.budget.init_ratio > 0.0 && self.budget.init_ratio.is_finite()) {
            return bad("budget.init_ratio", "must be positive");
        }
        if !(self.budget.meas_ratio > 0.0 && self.budget.meas_ratio.is_finite()) {
            return bad("budget.meas_ratio", "must be positive");
        }
        let s = &self.sweep;
        if s.n_seq.is_empty() || s.n_seq.contains(&0) {
            return bad("sweep.n_seq", "needs sequence lengths of at least 1");
        }
        if s.fields.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("sweep.fields", "fields must be positive");
        }
        if s.total_times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("sweep.total_times", "times must be positive");
        }
        if s.alpha_fields.iter().any(|b| !s.fields.iter().any(|f| (f - b).abs() < 1e-12)) {
            return bad("sweep.alpha_fields", "every alpha field must also appear in sweep.fields");
        }
        if !(s.field_window[0] > 0.0 && s.field_window[0] < s.field_window[1]) {
            return bad("sweep.field_window", "needs 0 < min < max");
        }
        if !(s.time_window.is_empty()
            || (s.time_window.len() == 2 && s.time_window[0] > 0.0 && s.time_window[0] < s.time_window[1]))
        {
            return bad("sweep.time_window", "must be empty or [min, max] with 0 < min < max");
        }
        let law = &s.synthetic_law;
        if !(law.amplitude > 0.0 && law.delta.is_finite() && law.alpha.is_finite() && law.noise >= 0.0) {
            return bad("sweep.synthetic_law", "needs amplitude > 0, finite exponents, noise >= 0");
        }
        if self.rng.seed > i64::MAX as u64 {
            return bad("rng.seed", "must not exceed 9223372036854775807");
        }
        if !(self.trace.t_max > 0.0) {
            return bad("trace.t_max", "must be positive");
        }
        if !(self.trace.dt > 0.0) {
            return bad("trace.dt", "must be positive");
        }
        Ok(())
    }

    pub fn template(&self) -> Result<ChainTemplate> {
        ChainTemplate::with_site_limit(self.chain.n_sites, self.chain.coupling, self.chain.max_sites)
            .map_err(|e| CliError::config("chain", e.to_string()))
    }

    pub fn chain_spec(&self) -> Result<ChainSpec> {
        Ok(self.template()?.with_field(self.chain.field))
    }

    pub fn schedule(&self) -> Result<Schedule> {
        self.schedule_for(self.schedule.n_seq)
    }

    /// Schedule of length `n_seq`: the explicit intervals when given (which
    /// must then have that length), otherwise the arithmetic rule.
    pub fn schedule_for(&self, n_seq: usize) -> Result<Schedule> {
        let s = &self.schedule;
        let result = if s.taus.is_empty() {
            Schedule::arithmetic(n_seq, s.start, s.step)
        } else if s.taus.len() == n_seq || n_seq == s.n_seq {
            Schedule::new(s.taus.clone())
        } else {
            return Err(CliError::config(
                "schedule.taus",
                format!("explicit intervals cannot provide a schedule of length {n_seq}"),
            ));
        };
        result.map_err(|e| CliError::config("schedule", e.to_string()))
    }

    pub fn grid(&self) -> Result<FieldGrid> {
        let i = &self.inference;
        FieldGrid::new(i.grid_min, i.grid_max, i.grid_points)
            .map_err(|e| CliError::config("inference.grid_points", e.to_string()))
    }

    pub fn budget(&self, schedule: &Schedule) -> Result<TimeBudget> {
        TimeBudget::new(schedule.mean_interval(), self.budget.init_ratio, self.budget.meas_ratio)
            .map_err(|e| CliError::config("budget", e.to_string()))
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            average: match self.inference.average {
                AverageMode::DeltaB => ErrorAverage::DeltaB,
                AverageMode::RootMeanSquare => ErrorAverage::RootMeanSquare,
            },
            sampling: match self.inference.sampling {
                SamplingMode::Exact => Sampling::Exact,
                SamplingMode::Simulate => Sampling::Simulate,
            },
            fold_sign: self.inference.fold_sign,
        }
    }

    pub fn fit_windows(&self) -> FitWindows {
        FitWindows {
            field: (self.sweep.field_window[0], self.sweep.field_window[1]),
            time: match self.sweep.time_window.as_slice() {
                [lo, hi] => Some((*lo, *hi)),
                _ => None,
            },
        }
    }

    pub fn synthetic_law(&self) -> PowerLaw {
        let l = &self.sweep.synthetic_law;
        PowerLaw {
            amplitude: l.amplitude,
            delta: l.delta,
            alpha: l.alpha,
        }
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration, with the
    /// `output` section (location and worker count) left out.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output = OutputConfig::default();
        let canonical = serde_json::to_string(&content).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(item.as_str(), "override must look like section.key=value"))?;
        let path = path.trim();
        let value = parse_value(raw.trim())
            .ok_or_else(|| CliError::config(path, format!("cannot parse value `{}`", raw.trim())))?;
        let mut keys: Vec<&str> = path.split('.').collect();
        let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::config(path, "empty key"))?;
        let mut node = &mut *table;
        for key in keys {
            node = node
                .entry(key)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| CliError::config(path, format!("`{key}` is not a section")))?;
        }
        node.insert(last.to_string(), value);
    }
    Ok(())
}

fn parse_value(raw: &str) -> Option<toml::Value> {
    let doc: toml::Table = toml::from_str(&format!("v = {raw}"))
        .or_else(|_| toml::from_str(&format!("v = \"{raw}\"")))
        .ok()?;
    doc.get("v").cloned()
}
