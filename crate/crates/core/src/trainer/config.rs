use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::AdamConfig;
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::modulator::qam_grid;

/// Which parts of the transmitter are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Probabilities only; geometry frozen at the QAM grid.
    PsOnly,
    /// Geometry only; symbols uniform.
    GsOnly,
    Joint,
}

impl Mode {
    pub fn trains_distribution(self) -> bool {
        self != Mode::GsOnly
    }

    pub fn trains_geometry(self) -> bool {
        self != Mode::PsOnly
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::PsOnly => "ps_only",
            Mode::GsOnly => "gs_only",
            Mode::Joint => "joint",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ps_only" => Ok(Mode::PsOnly),
            "gs_only" => Ok(Mode::GsOnly),
            "joint" => Ok(Mode::Joint),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// How the gradient of a selected point is spread over the constellation rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionGradient {
    /// Only the transmitted row.
    #[default]
    Hard,
    /// Rows weighted by the relaxed sample.
    Soft,
}

/// Piecewise-constant schedule of `(start_step, value)` stages.
pub type Schedule<T> = Vec<(usize, T)>;

/// Looks up the stage active at `step`.
pub fn schedule_value<T: Copy>(schedule: &[(usize, T)], step: usize) -> T {
    schedule
        .iter()
        .rev()
        .find(|(start, _)| *start <= step)
        .map(|s| s.1)
        .unwrap_or(schedule[0].1)
}

/// Stage starts at 0, ¼, ½ and ¾ of the run.
fn four_stages<T: Copy>(steps_total: usize, values: [T; 4]) -> Schedule<T> {
    (0..4).map(|k| (k * steps_total / 4, values[k])).collect()
}

pub fn default_batch_schedule(steps_total: usize) -> Schedule<usize> {
    four_stages(steps_total, [100, 1000, 5000, 10000])
}

pub fn default_lr_schedule(steps_total: usize) -> Schedule<f64> {
    four_stages(steps_total, [1e-3, 1e-4, 3e-5, 1e-5])
}

fn default_snr_range() -> [f64; 2] {
    [-2.0, 40.0]
}
fn default_tau() -> f64 {
    10.0
}
fn default_steps() -> usize {
    20_000
}
fn default_hidden() -> usize {
    128
}
fn default_jitter() -> f64 {
    0.01
}

/// Full description of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub order: usize,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default = "default_snr_range")]
    pub snr_range_db: [f64; 2],
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub batch_schedule: Schedule<usize>,
    #[serde(default)]
    pub lr_schedule: Schedule<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps_total: usize,
    /// Steps between recorded checkpoints; 0 records only the final step.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default = "default_jitter")]
    pub init_jitter: f64,
    #[serde(default)]
    pub selection_gradient: SelectionGradient,
    #[serde(default)]
    pub adam: Option<AdamConfig>,
}

impl TrainConfig {
    /// Config with the default four-stage schedules filled in.
    pub fn new(mode: Mode, order: usize, steps_total: usize, seed: u64) -> Self {
        Self {
            mode,
            order,
            channel: ChannelModel::Awgn,
            snr_range_db: default_snr_range(),
            tau: default_tau(),
            batch_schedule: default_batch_schedule(steps_total),
            lr_schedule: default_lr_schedule(steps_total),
            seed,
            steps_total,
            checkpoint_every: 0,
            hidden_units: default_hidden(),
            init_jitter: default_jitter(),
            selection_gradient: SelectionGradient::default(),
            adam: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(s)?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Empty schedules become the default four-stage schedules.
    pub fn fill_defaults(&mut self) {
        if self.batch_schedule.is_empty() {
            self.batch_schedule = default_batch_schedule(self.steps_total);
        }
        if self.lr_schedule.is_empty() {
            self.lr_schedule = default_lr_schedule(self.steps_total);
        }
    }

    pub fn adam_config(&self, learning_rate: f64) -> AdamConfig {
        AdamConfig {
            learning_rate,
            ..self.adam.unwrap_or_default()
        }
    }

    pub fn batch_size(&self, step: usize) -> usize {
        schedule_value(&self.batch_schedule, step)
    }

    pub fn learning_rate(&self, step: usize) -> f64 {
        schedule_value(&self.lr_schedule, step)
    }

    /// Rejects invalid settings; warns on non-monotone schedules.
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::config("order", "must be at least 2"));
        }
        if self.mode == Mode::PsOnly && qam_grid(self.order).is_err() {
            return Err(Error::config(
                "order",
                format!("ps_only needs a square QAM order, got {}", self.order),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(
                "tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        let [lo, hi] = self.snr_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config(
                "snr_range_db",
                format!("expected finite [low, high] with low ≤ high, got [{lo}, {hi}]"),
            ));
        }
        if self.steps_total == 0 {
            return Err(Error::config("steps_total", "must be positive"));
        }
        if self.hidden_units == 0 {
            return Err(Error::config("hidden_units", "must be positive"));
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(Error::config("init_jitter", "must be nonnegative"));
        }
        if let ChannelModel::RayleighLmmse { pilots: 0 } = self.channel {
            return Err(Error::config("channel.pilots", "must be at least 1"));
        }
        check_schedule(
            "batch_schedule",
            &self.batch_schedule,
            self.steps_total,
            |&b| b >= 1,
        )?;
        check_schedule("lr_schedule", &self.lr_schedule, self.steps_total, |&lr| {
            lr > 0.0 && lr.is_finite()
        })?;
        if let Some(adam) = &self.adam {
            if !(adam.beta1 > 0.0 && adam.beta1 < 1.0) {
                return Err(Error::config("adam.beta1", "must lie in (0, 1)"));
            }
            if !(adam.beta2 > 0.0 && adam.beta2 < 1.0) {
                return Err(Error::config("adam.beta2", "must lie in (0, 1)"));
            }
            if !(adam.epsilon > 0.0) {
                return Err(Error::config("adam.epsilon", "must be positive"));
            }
        }
        if self.batch_schedule.windows(2).any(|w| w[1].1 < w[0].1) {
            log::warn!("batch_schedule is not ascending");
        }
        if self.lr_schedule.windows(2).any(|w| w[1].1 > w[0].1) {
            log::warn!("lr_schedule is not descending");
        }
        Ok(())
    }
}

fn check_schedule<T>(
    field: &str,
    schedule: &[(usize, T)],
    steps_total: usize,
    valid: impl Fn(&T) -> bool,
) -> Result<()> {
    match schedule.first() {
        None => return Err(Error::config(field, "must not be empty")),
        Some((start, _)) if *start != 0 => {
            return Err(Error::config(field, "first stage must start at step 0"));
        }
        _ => {}
    }
    if schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::config(
            field,
            "stage starts must be strictly increasing",
        ));
    }
    if schedule.iter().any(|(start, _)| *start >= steps_total) {
        return Err(Error::config(field, "stage starts beyond steps_total"));
    }
    if !schedule.iter().all(|(_, v)| valid(v)) {
        return Err(Error::config(field, "stage value out of range"));
    }
    Ok(())
}
