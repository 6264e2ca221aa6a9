//! Crisp single-vehicle update rules and the saturation flow they produce.
//!
//! All rules share the core velocity update `min(v + 1, gap, v_max)`:
//!
//! * `R1` keeps a stopped vehicle at rest while its gap is exactly one cell.
//! * `R2` lets the stopped vehicle gain velocity but skips its position update.
//! * `R3` is the deterministic Nagel-Schreckenberg rule.
//! * `NSL` is the randomised NaSch branch (one cell/step slower than `R3`).
//! * `NSH` is the non-randomised NaSch branch; see [`NshVariant`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("invalid vehicle state: v_prev={v_prev}, gap={gap}, v_max={v_max}")]
    InvalidState { v_prev: i64, gap: i64, v_max: i64 },
    #[error("invalid rule pair: {0}")]
    InvalidPair(String),
}

/// Which deterministic rule the non-random NaSch branch uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NshVariant {
    /// Plain deterministic NaSch (`R3` form).
    #[default]
    Standard,
    /// Slow-to-start form identical to `R2`.
    SlowToStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    R1,
    R2,
    R3,
    Nsl,
    Nsh(NshVariant),
}

/// The three rules with a closed-form steady discharge pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeterministicRule {
    R1,
    R2,
    R3,
}

impl DeterministicRule {
    pub const ALL: [DeterministicRule; 3] = [Self::R1, Self::R2, Self::R3];

    pub fn kind(self) -> RuleKind {
        match self {
            Self::R1 => RuleKind::R1,
            Self::R2 => RuleKind::R2,
            Self::R3 => RuleKind::R3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::R1 => "R1",
            Self::R2 => "R2",
            Self::R3 => "R3",
        }
    }
}

/// Result of one rule application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleOutcome {
    pub velocity: i64,
    /// Cells moved this step: 0 or `velocity`.
    pub advance: i64,
}

/// Applies one rule to a single vehicle, validating the input state.
pub fn apply_rule(kind: RuleKind, v_prev: i64, gap: i64, v_max: i64) -> Result<RuleOutcome, RuleError> {
    if v_max < 0 || v_prev < 0 || v_prev > v_max || gap < 0 {
        return Err(RuleError::InvalidState { v_prev, gap, v_max });
    }
    Ok(apply_rule_unchecked(kind, v_prev, gap, v_max))
}

/// Hot-path variant of [`apply_rule`] for engines that maintain valid states.
#[inline]
pub fn apply_rule_unchecked(kind: RuleKind, v_prev: i64, gap: i64, v_max: i64) -> RuleOutcome {
    let v = (v_prev + 1).min(gap).min(v_max);
    let stuck = v_prev == 0 && gap == 1;
    match kind {
        RuleKind::R1 => {
            let velocity = if stuck { 0 } else { v };
            RuleOutcome { velocity, advance: velocity }
        }
        RuleKind::R2 | RuleKind::Nsh(NshVariant::SlowToStart) => RuleOutcome {
            velocity: v,
            advance: if stuck { 0 } else { v },
        },
        RuleKind::R3 | RuleKind::Nsh(NshVariant::Standard) => RuleOutcome { velocity: v, advance: v },
        RuleKind::Nsl => {
            let velocity = (v - 1).max(0);
            RuleOutcome { velocity, advance: velocity }
        }
    }
}

/// Steady gap between discharging vehicles at `v_max` (cells).
///
/// `R2` alternates between two gap widths; the average is returned.
pub fn steady_discharge_gap(rule: DeterministicRule, v_max: i64) -> f64 {
    let v = v_max as f64;
    match rule {
        DeterministicRule::R1 => 2.0 * v,
        DeterministicRule::R2 => 1.5 * v,
        DeterministicRule::R3 => v,
    }
}

/// Saturation flow in vehicles per step: `v_max / (gap + 1)`.
pub fn saturation_per_step(v_max: f64, gap: f64) -> f64 {
    v_max / (gap + 1.0)
}

/// Saturation flow of a deterministic rule in vehicles per hour of green.
pub fn rule_saturation(rule: DeterministicRule, v_max: i64, seconds_per_step: f64) -> f64 {
    let gap = steady_discharge_gap(rule, v_max);
    per_step_to_hourly(saturation_per_step(v_max as f64, gap), seconds_per_step)
}

pub fn per_step_to_hourly(s: f64, seconds_per_step: f64) -> f64 {
    s * 3600.0 / seconds_per_step
}

pub fn hourly_to_per_step(s: f64, seconds_per_step: f64) -> f64 {
    s * seconds_per_step / 3600.0
}

/// Parameters of the low/high saturation rule pair (`RL`, `RH`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RulePairParams {
    pub v_max_low: i64,
    pub v_max_high: i64,
    pub gap_low: f64,
    pub gap_high: f64,
    pub seconds_per_step: f64,
}

impl RulePairParams {
    pub fn new(
        v_max_low: i64,
        v_max_high: i64,
        gap_low: f64,
        gap_high: f64,
        seconds_per_step: f64,
    ) -> Result<Self, RuleError> {
        let p = Self { v_max_low, v_max_high, gap_low, gap_high, seconds_per_step };
        if v_max_low < 1 || v_max_low > v_max_high {
            return Err(RuleError::InvalidPair(format!(
                "need 1 <= v_max_low <= v_max_high, got {v_max_low}, {v_max_high}"
            )));
        }
        if gap_high > gap_low || gap_high < 0.0 {
            return Err(RuleError::InvalidPair(format!(
                "need 0 <= gap_high <= gap_low, got {gap_high}, {gap_low}"
            )));
        }
        if seconds_per_step.is_nan() || seconds_per_step <= 0.0 {
            return Err(RuleError::InvalidPair(format!("seconds_per_step must be positive, got {seconds_per_step}")));
        }
        if p.low_saturation() >= p.high_saturation() {
            return Err(RuleError::InvalidPair("pair spans no saturation interval".into()));
        }
        Ok(p)
    }

    /// `RL = R1`, `RH = R2` with a common maximal velocity.
    pub fn r1_r2(v_max: i64, seconds_per_step: f64) -> Result<Self, RuleError> {
        Self::new(
            v_max,
            v_max,
            steady_discharge_gap(DeterministicRule::R1, v_max),
            steady_discharge_gap(DeterministicRule::R2, v_max),
            seconds_per_step,
        )
    }

    /// `s0` in vehicles per step.
    pub fn low_saturation(&self) -> f64 {
        saturation_per_step(self.v_max_low as f64, self.gap_low)
    }

    /// `s4` in vehicles per step.
    pub fn high_saturation(&self) -> f64 {
        saturation_per_step(self.v_max_high as f64, self.gap_high)
    }

    pub fn low_saturation_hourly(&self) -> f64 {
        per_step_to_hourly(self.low_saturation(), self.seconds_per_step)
    }

    pub fn high_saturation_hourly(&self) -> f64 {
        per_step_to_hourly(self.high_saturation(), self.seconds_per_step)
    }
}
