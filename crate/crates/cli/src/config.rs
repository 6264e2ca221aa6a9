//! Experiment configuration read from a TOML file. Unknown keys are
//! rejected so that a typo never silently falls back to a default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use traffic_core::ca_rules::{NshVariant, RulePairParams};
use traffic_core::fcm::SaturationSpec;
use traffic_core::network::{build_road, fcm_cell_length, ModelKind, Road, SignalSchedule};
use traffic_core::Ofn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Fcm,
    Nasch,
    Both,
}

/// Target saturation flow: five values in veh/h, or fitted from a NaSch
/// Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SaturationChoice {
    Fixed([f64; 5]),
    Keyword(SaturationKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturationKeyword {
    Calibrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadConfig {
    pub length_m: f64,
    pub intersection_spacing_m: f64,
    /// Cell length of the stochastic model; the fuzzy model's cell is
    /// scaled from it so both share the free-flow speed.
    pub cell_length_m: f64,
    pub cycle_s: u32,
    pub green_s: u32,
    pub offset_s: u32,
    pub red_first: bool,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            length_m: 3000.0,
            intersection_spacing_m: 750.0,
            cell_length_m: 7.5,
            cycle_s: 60,
            green_s: 30,
            offset_s: 0,
            red_first: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub v_max: i64,
    pub p: f64,
    pub nsh: NshVariant,
    pub saturation_veh_h: SaturationChoice,
    /// Queue length used for the trajectory overlay and the count series.
    pub queue_length: usize,
    /// Queue lengths of the travel-time table.
    pub queue_lengths: Vec<usize>,
    /// Monte Carlo runs for the arterial and the sweep.
    pub runs: usize,
    pub calibration_runs: usize,
    pub bench_runs: usize,
    pub horizon_steps: u64,
    /// Length of the bench phase in which no vehicle leaves the road.
    pub bench_constant_steps: u64,
    pub p_step: f64,
    pub p_max: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub road: RoadConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelChoice::Both,
            v_max: 2,
            p: 0.2,
            nsh: NshVariant::Standard,
            saturation_veh_h: SaturationChoice::Fixed([1440.0, 1503.0, 1575.0, 1638.0, 1800.0]),
            queue_length: 30,
            queue_lengths: vec![10, 30, 50, 70],
            runs: 100,
            calibration_runs: 200,
            bench_runs: 500,
            horizon_steps: 3600,
            bench_constant_steps: 60,
            p_step: 0.1,
            p_max: 0.8,
            seed: 20_240_101,
            output_dir: PathBuf::from("out"),
            road: RoadConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("parsing configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Paper-scale run counts and sweep resolution.
    pub fn full_scale(mut self) -> Self {
        self.runs = 500;
        self.calibration_runs = 500;
        self.bench_runs = 500;
        self.p_step = 0.01;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_max < 1 {
            bail!("v_max must be >= 1, got {}", self.v_max);
        }
        if !(0.0..=1.0).contains(&self.p) {
            bail!("p must lie in [0, 1], got {}", self.p);
        }
        if self.runs == 0 || self.calibration_runs == 0 || self.bench_runs == 0 {
            bail!("run counts must be >= 1");
        }
        if self.horizon_steps == 0 || self.bench_constant_steps == 0 {
            bail!("horizons must be >= 1 step");
        }
        if !(self.p_step > 0.0 && self.p_step <= 1.0) || !(0.0..=1.0).contains(&self.p_max) {
            bail!("p_step must lie in (0, 1] and p_max in [0, 1]");
        }
        if self.queue_lengths.is_empty() {
            bail!("queue_lengths must not be empty");
        }
        if let SaturationChoice::Fixed(s) = &self.saturation_veh_h {
            Ofn::try_from_components(*s).context("saturation_veh_h must be non-decreasing")?;
        }
        SignalSchedule::new(self.road.cycle_s, self.road.green_s, self.road.red_first, self.road.offset_s)?;
        self.road_for(ModelKind::Fcm)?;
        self.road_for(ModelKind::Nasch)?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<SignalSchedule> {
        let r = &self.road;
        Ok(SignalSchedule::new(r.cycle_s, r.green_s, r.red_first, r.offset_s)?)
    }

    pub fn cell_length_for(&self, model: ModelKind) -> f64 {
        match model {
            ModelKind::Nasch => self.road.cell_length_m,
            ModelKind::Fcm => fcm_cell_length(self.road.cell_length_m, self.v_max, self.p),
        }
    }

    pub fn road_for(&self, model: ModelKind) -> Result<Road> {
        let r = &self.road;
        Ok(build_road(r.length_m, r.intersection_spacing_m, self.cell_length_for(model))?)
    }

    pub fn rule_pair(&self) -> Result<RulePairParams> {
        Ok(RulePairParams::r1_r2(self.v_max, 1.0)?)
    }

    /// Fixed saturation target, or `None` when it must be calibrated.
    pub fn fixed_saturation(&self) -> Result<Option<SaturationSpec>> {
        match &self.saturation_veh_h {
            SaturationChoice::Fixed(s) => {
                let s = Ofn::try_from_components(*s)?;
                Ok(Some(SaturationSpec::new(s, self.rule_pair()?)?))
            }
            SaturationChoice::Keyword(SaturationKeyword::Calibrate) => Ok(None),
        }
    }

    /// Deceleration probabilities of the sweep, `0, p_step, ..., <= p_max`.
    pub fn sweep_values(&self) -> Vec<f64> {
        let n = (self.p_max / self.p_step + 1e-9).floor() as usize;
        (0..=n).map(|k| ((k as f64 * self.p_step) * 1e6).round() / 1e6).collect()
    }
}
