//! Fuzzy cellular model of a signal-controlled traffic stream.
//!
//! Each vehicle carries a triangular ordered fuzzy position and velocity.
//! Component 0 always evolves under the low-saturation rule `RL` (here `R1`)
//! and component 4 under the high-saturation rule `RH` (`R2`). For the inner
//! components the rule is re-selected every step: a component whose
//! normalised position is at or below its target `alpha` takes `RH`,
//! otherwise `RL`. The targets are chosen so the stream discharges at the
//! fuzzy saturation flow `S`.
//!
//! The velocity update is
//!
//! ```text
//! V = min(V_prev + 1, G, V_max) * A
//! X' = X + V * B
//! ```
//!
//! with the binary masks `A` (R1 start-up hold) and `B` (R2 position skip),
//! and every operation evaluated component by component.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::ca_rules::{hourly_to_per_step, RulePairParams};
use crate::nasch::green_intervals;
use crate::network::{fill_halt_cells, HaltSet, Scenario};
use crate::ofn::{BinaryOp, Ofn, COMPONENTS};

/// Relative slack allowed when checking that a target lies in the support.
const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FcmError {
    #[error("saturation component {component} = {value} veh/step outside [{low}, {high}]")]
    OutOfSupport { component: usize, value: f64, low: f64, high: f64 },
    #[error("rule pair spans no saturation interval")]
    DegeneratePair,
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
}

/// Rule of the low/high pair applied to one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairRule {
    /// `RL`, implemented as `R1`.
    Low,
    /// `RH`, implemented as `R2`.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RuleSelection([PairRule; COMPONENTS]);

impl RuleSelection {
    pub fn rules(&self) -> [PairRule; COMPONENTS] {
        self.0
    }

    pub fn get(&self, m: usize) -> PairRule {
        self.0[m]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryMask([bool; COMPONENTS]);

impl BinaryMask {
    pub fn bits(&self) -> [bool; COMPONENTS] {
        self.0
    }

    /// The mask as a 0/1 tuple for component-wise multiplication.
    pub fn to_ofn(&self) -> Ofn<i64> {
        Ofn::from_components_unchecked(self.0.map(i64::from))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyVehicle {
    pub id: u32,
    pub position: Ofn<i64>,
    pub velocity: Ofn<i64>,
}

impl FuzzyVehicle {
    /// Vehicle at rest with all position components on `cell`.
    pub fn at_rest(id: u32, cell: i64) -> Self {
        Self { id, position: Ofn::from_scalar(cell), velocity: Ofn::from_scalar(0) }
    }
}

/// Fuzzy saturation flow `S` with its rule pair and derived thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationSpec {
    /// Vehicles per hour of green.
    pub s: Ofn<f64>,
    pub rule_pair: RulePairParams,
    pub alpha: [f64; 3],
}

impl SaturationSpec {
    pub fn new(s: Ofn<f64>, rule_pair: RulePairParams) -> Result<Self, FcmError> {
        let alpha = compute_alpha(&s, &rule_pair)?;
        Ok(Self { s, rule_pair, alpha })
    }

    /// Maximal velocity of each component under `rules`.
    pub fn v_max_for(&self, rules: &RuleSelection) -> Ofn<i64> {
        Ofn::from_components_unchecked(rules.0.map(|r| match r {
            PairRule::Low => self.rule_pair.v_max_low,
            PairRule::High => self.rule_pair.v_max_high,
        }))
    }

    pub fn v_max_upper(&self) -> i64 {
        self.rule_pair.v_max_low.max(self.rule_pair.v_max_high)
    }
}

/// Normalised position at which the stream discharges at `s` veh/step.
pub fn alpha_for_saturation(s: f64, pair: &RulePairParams) -> Result<f64, FcmError> {
    let dv = (pair.v_max_high - pair.v_max_low) as f64;
    let dg = pair.gap_high - pair.gap_low;
    let denom = dv - s * dg;
    if denom == 0.0 {
        return Err(FcmError::DegeneratePair);
    }
    Ok((s * (pair.gap_low + 1.0) - pair.v_max_low as f64) / denom)
}

/// Thresholds `alpha(1..3)` for the inner components of `S` (veh/h).
pub fn compute_alpha(s: &Ofn<f64>, pair: &RulePairParams) -> Result<[f64; 3], FcmError> {
    let (low, high) = (pair.low_saturation(), pair.high_saturation());
    if low.is_nan() || high.is_nan() || low >= high {
        return Err(FcmError::DegeneratePair);
    }
    let slack = SUPPORT_EPS * high.abs().max(1.0);
    let mut alpha = [0.0; 3];
    for (k, a) in alpha.iter_mut().enumerate() {
        let m = k + 1;
        let value = hourly_to_per_step(s.component(m), pair.seconds_per_step);
        if value < low - slack || value > high + slack {
            return Err(FcmError::OutOfSupport { component: m, value, low, high });
        }
        *a = alpha_for_saturation(value, pair)?.clamp(0.0, 1.0);
    }
    Ok(alpha)
}

/// Saturation flow (veh/step) reached at normalised position `x`, with the
/// maximal velocity and gap interpolated linearly between the rule pair.
pub fn saturation_of_normalized_position(x: f64, pair: &RulePairParams) -> f64 {
    let v = pair.v_max_low as f64 + x * (pair.v_max_high - pair.v_max_low) as f64;
    let g = pair.gap_low + x * (pair.gap_high - pair.gap_low);
    v / (g + 1.0)
}

/// Per-component rule choice from the vehicle's own normalised position.
pub fn select_rules(position: &Ofn<i64>, alpha: &[f64; 3]) -> RuleSelection {
    let x = position.normalize();
    let mut rules = [PairRule::Low, PairRule::Low, PairRule::Low, PairRule::Low, PairRule::High];
    for m in 1..=3 {
        if x.component(m) <= alpha[m - 1] {
            rules[m] = PairRule::High;
        }
    }
    RuleSelection(rules)
}

/// Free cells ahead: `min(lead gap, signal gap)` per component.
///
/// Without a leader and without an active halt cell ahead the gap equals
/// `v_max`; with only one of them present, that one is used.
pub fn compute_gap(vehicle: &FuzzyVehicle, lead: Option<&FuzzyVehicle>, halts: &HaltSet, v_max: &Ofn<i64>) -> Ofn<i64> {
    let lead_gap = lead.map(|l| l.position - vehicle.position - Ofn::from_scalar(1));
    let x = vehicle.position.components();
    Ofn::from_components_unchecked(std::array::from_fn(|m| {
        let lg = lead_gap.map(|g| g.component(m));
        let sg = halts.next_after(x[m]).map(|h| h - x[m] - 1);
        match (lg, sg) {
            (Some(l), Some(s)) => l.min(s),
            (Some(l), None) => l,
            (None, Some(s)) => s,
            (None, None) => v_max.component(m),
        }
    }))
}

/// Start-up hold mask `A`: 0 where `RL` keeps a stopped vehicle with a
/// one-cell gap at rest.
pub fn velocity_mask(v_prev: &Ofn<i64>, gap: &Ofn<i64>, rules: &RuleSelection) -> BinaryMask {
    BinaryMask(std::array::from_fn(|m| {
        !(rules.0[m] == PairRule::Low && v_prev.component(m) == 0 && gap.component(m) == 1)
    }))
}

/// Position skip mask `B`: 0 where `RH` holds a stopped vehicle in place.
pub fn advance_mask(v_prev: &Ofn<i64>, gap: &Ofn<i64>, rules: &RuleSelection) -> BinaryMask {
    BinaryMask(std::array::from_fn(|m| {
        !(rules.0[m] == PairRule::High && v_prev.component(m) == 0 && gap.component(m) == 1)
    }))
}

pub fn fcm_velocity(v_prev: &Ofn<i64>, gap: &Ofn<i64>, rules: &RuleSelection, v_max: &Ofn<i64>) -> Ofn<i64> {
    let a = velocity_mask(v_prev, gap, rules);
    (*v_prev + Ofn::from_scalar(1))
        .min(gap)
        .min(v_max)
        .apply(BinaryOp::Mul, &a.to_ofn())
}

/// `X + V * B`. The skip condition reads the velocity of the previous step.
pub fn fcm_advance(
    position: &Ofn<i64>,
    v_prev: &Ofn<i64>,
    velocity: &Ofn<i64>,
    gap: &Ofn<i64>,
    rules: &RuleSelection,
) -> Ofn<i64> {
    let b = advance_mask(v_prev, gap, rules);
    *position + *velocity * b.to_ofn()
}

/// Advances every vehicle one step, synchronously from the pre-step
/// configuration. Vehicles must be ordered rear first.
pub fn fcm_step(vehicles: &mut [FuzzyVehicle], halts: &HaltSet, spec: &SaturationSpec) {
    let n = vehicles.len();
    for i in 0..n {
        let lead = if i + 1 < n { Some(vehicles[i + 1]) } else { None };
        let veh = vehicles[i];
        let rules = select_rules(&veh.position, &spec.alpha);
        let v_max = spec.v_max_for(&rules);
        let gap = compute_gap(&veh, lead.as_ref(), halts, &v_max);
        let velocity = fcm_velocity(&veh.velocity, &gap, &rules, &v_max);
        let position = fcm_advance(&veh.position, &veh.velocity, &velocity, &gap, &rules);
        vehicles[i] = FuzzyVehicle { id: veh.id, position, velocity };
    }
}

/// Kind of ordering anomaly among position components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeAnomaly {
    /// An inner component lies outside `[x0, x4]`.
    OutsideEnvelope,
    /// Adjacent components are out of order.
    Unsorted,
    /// `x0 > x4`.
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeEvent {
    pub t: u64,
    pub vehicle_id: u32,
    pub anomaly: EnvelopeAnomaly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzySample {
    pub vehicle_id: u32,
    pub position: Ofn<i64>,
    pub velocity: Ofn<i64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FcmRecordOptions {
    pub trajectories: bool,
    pub check_invariants: bool,
}

/// Observables of a single fuzzy run; series index `t` is the state after
/// `t` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmTrace {
    pub probe: Vec<Option<Ofn<i64>>>,
    /// `n(m)`: vehicles whose component `m` is at or below the threshold.
    pub counts: Vec<[u32; COMPONENTS]>,
    /// Per stop line and component, steps during which a crossing occurred.
    pub crossings: Vec<[Vec<u64>; COMPONENTS]>,
    /// Per component saturation flow at the measured stop line (veh/h).
    pub saturation: Option<[f64; COMPONENTS]>,
    pub trajectories: Option<Vec<Vec<FuzzySample>>>,
    /// Single-component rule applications performed.
    pub basic_ops: u64,
    pub vehicle_steps: u64,
    pub envelope_events: Vec<EnvelopeEvent>,
    pub invariant_violations: Vec<String>,
}

/// Initial fuzzy vehicles: degenerate tuples at rest.
pub fn initial_fuzzy_vehicles(scenario: &Scenario) -> Vec<FuzzyVehicle> {
    scenario
        .initial_cells
        .iter()
        .enumerate()
        .map(|(i, &c)| FuzzyVehicle::at_rest(i as u32, c))
        .collect()
}

/// Per-component crisp validity: order, velocity bounds, velocity within the
/// gap seen in `previous`, no backward moves, and no entry into an active
/// halt cell since `previous`.
pub fn validate_components(
    vehicles: &[FuzzyVehicle],
    previous: &[Ofn<i64>],
    halts: &HaltSet,
    v_max: i64,
) -> Result<(), String> {
    for m in 0..COMPONENTS {
        for w in vehicles.windows(2) {
            if w[0].position.component(m) >= w[1].position.component(m) {
                return Err(format!("component {m}: vehicles {} and {} out of order", w[0].id, w[1].id));
            }
        }
        for (i, (v, old)) in vehicles.iter().zip(previous).enumerate() {
            let (x, s, from) = (v.position.component(m), v.velocity.component(m), old.component(m));
            if s < 0 || s > v_max {
                return Err(format!("component {m}: vehicle {} velocity {s}", v.id));
            }
            let lead_gap = previous.get(i + 1).map(|l| l.component(m) - from - 1);
            let halt_gap = halts.next_after(from).map(|h| h - from - 1);
            if let Some(gap) = lead_gap.into_iter().chain(halt_gap).min() {
                if s > gap {
                    return Err(format!("component {m}: vehicle {} velocity {s} exceeds gap {gap}", v.id));
                }
            }
            if x < from {
                return Err(format!("component {m}: vehicle {} moved backwards", v.id));
            }
            if halts.next_after(from).is_some_and(|h| h <= x) {
                return Err(format!("component {m}: vehicle {} entered an active halt cell moving {from} -> {x}", v.id));
            }
        }
    }
    Ok(())
}

fn envelope_anomalies(v: &FuzzyVehicle) -> impl Iterator<Item = EnvelopeAnomaly> {
    let x = v.position.components();
    let inverted = x[0] > x[4];
    let outside = (1..4).any(|m| x[m] < x[0].min(x[4]) || x[m] > x[0].max(x[4]));
    let unsorted = x.windows(2).any(|w| w[0] > w[1]);
    [
        (inverted, EnvelopeAnomaly::Inverted),
        (outside, EnvelopeAnomaly::OutsideEnvelope),
        (unsorted && !inverted && !outside, EnvelopeAnomaly::Unsorted),
    ]
    .into_iter()
    .filter_map(|(hit, a)| hit.then_some(a))
}

/// Runs the fuzzy model once on `scenario` for `horizon` steps.
pub fn run_fcm(scenario: &Scenario, spec: &SaturationSpec, horizon: u64, record: FcmRecordOptions) -> Result<FcmTrace, FcmError> {
    scenario.validate()?;
    let road = &scenario.road;
    let stops = &road.stop_line_cells;
    let sps = scenario.seconds_per_step;
    let mut vehicles = initial_fuzzy_vehicles(scenario);
    let probe_id = scenario.probe.map(|p| p as u32);
    let mut halts = HaltSet::default();
    let mut previous: Vec<Ofn<i64>> = Vec::with_capacity(vehicles.len());

    let mut trace = FcmTrace {
        probe: Vec::with_capacity(horizon as usize + 1),
        counts: Vec::with_capacity(horizon as usize + 1),
        crossings: vec![Default::default(); stops.len()],
        saturation: None,
        trajectories: record.trajectories.then(Vec::new),
        basic_ops: 0,
        vehicle_steps: 0,
        envelope_events: Vec::new(),
        invariant_violations: Vec::new(),
    };

    let observe = |vehicles: &[FuzzyVehicle], trace: &mut FcmTrace| {
        if let Some(id) = probe_id {
            trace.probe.push(vehicles.iter().find(|v| v.id == id).map(|v| v.position));
        }
        if let Some(th) = scenario.count_threshold {
            trace.counts.push(analysis::fuzzy_vehicle_count(vehicles, th));
        }
        if let Some(traj) = trace.trajectories.as_mut() {
            traj.push(
                vehicles
                    .iter()
                    .map(|v| FuzzySample { vehicle_id: v.id, position: v.position, velocity: v.velocity })
                    .collect(),
            );
        }
    };
    observe(&vehicles, &mut trace);

    for t in 0..horizon {
        fill_halt_cells(road, &scenario.signals, t, sps, &mut halts);
        previous.clear();
        previous.extend(vehicles.iter().map(|v| v.position));

        fcm_step(&mut vehicles, &halts, spec);
        trace.basic_ops += (COMPONENTS * vehicles.len()) as u64;
        trace.vehicle_steps += vehicles.len() as u64;

        for (v, old) in vehicles.iter().zip(&previous) {
            for m in 0..COMPONENTS {
                let (from, to) = (old.component(m), v.position.component(m));
                if from == to {
                    continue;
                }
                let first = stops.partition_point(|&s| s < from);
                for (k, &s) in stops.iter().enumerate().skip(first) {
                    if s >= to {
                        break;
                    }
                    trace.crossings[k][m].push(t);
                }
            }
            for anomaly in envelope_anomalies(v) {
                trace.envelope_events.push(EnvelopeEvent { t: t + 1, vehicle_id: v.id, anomaly });
            }
        }

        if record.check_invariants {
            if let Err(e) = validate_components(&vehicles, &previous, &halts, spec.v_max_upper()) {
                trace.invariant_violations.push(format!("t={}: {e}", t + 1));
            }
        }

        while vehicles
            .last()
            .is_some_and(|v| v.position.components().iter().all(|&x| x > road.cell_count))
        {
            vehicles.pop();
        }
        observe(&vehicles, &mut trace);
    }

    if let Some(k) = scenario.measured_stop_line {
        let greens = green_intervals(&scenario.signals[k], horizon, sps);
        let mut sat = [0.0; COMPONENTS];
        let mut ok = true;
        for (m, s) in sat.iter_mut().enumerate() {
            match analysis::measure_saturation_flow(&trace.crossings[k][m], &greens, sps) {
                Ok(v) => *s = v,
                Err(_) => ok = false,
            }
        }
        trace.saturation = ok.then_some(sat);
    }
    Ok(trace)
}
