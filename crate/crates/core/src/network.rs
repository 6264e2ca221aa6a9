//! Single-lane road geometry, fixed-time signals and scenario setup.
//!
//! Cells are numbered from 1. A stop line is the last cell a queued vehicle
//! may occupy; the halt cell of an intersection is the cell just past its
//! stop line, so a vehicle has crossed the stop line iff its cell index is
//! greater than the stop-line index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("queues of {queue} vehicles do not fit: {reason}")]
    Overflow { queue: usize, reason: String },
    #[error("invalid road: {0}")]
    InvalidRoad(String),
    #[error("invalid signal schedule: {0}")]
    InvalidSchedule(String),
}

/// Which grid an arterial is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fcm,
    Nasch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub cell_count: i64,
    pub cell_length_m: f64,
    pub stop_line_cells: Vec<i64>,
}

impl Road {
    pub fn new(cell_count: i64, cell_length_m: f64, stop_line_cells: Vec<i64>) -> Result<Self, NetworkError> {
        if cell_count < 1 || cell_length_m.is_nan() || cell_length_m <= 0.0 {
            return Err(NetworkError::InvalidRoad(format!(
                "cell_count={cell_count}, cell_length_m={cell_length_m}"
            )));
        }
        if !stop_line_cells.windows(2).all(|w| w[0] < w[1]) {
            return Err(NetworkError::InvalidRoad("stop lines must be strictly increasing".into()));
        }
        if stop_line_cells.iter().any(|&s| s < 1 || s > cell_count) {
            return Err(NetworkError::InvalidRoad("stop line outside the road".into()));
        }
        Ok(Self { cell_count, cell_length_m, stop_line_cells })
    }

    pub fn halt_cells(&self) -> Vec<i64> {
        self.stop_line_cells.iter().map(|s| s + 1).collect()
    }

    pub fn stop_line_meters(&self) -> Vec<f64> {
        self.stop_line_cells.iter().map(|&s| self.meters(s)).collect()
    }

    pub fn meters(&self, cell: i64) -> f64 {
        cell as f64 * self.cell_length_m
    }

    pub fn last_stop_line(&self) -> Option<i64> {
        self.stop_line_cells.last().copied()
    }
}

/// Road of `length_m` with an intersection every `spacing_m` meters.
pub fn build_road(length_m: f64, spacing_m: f64, cell_length_m: f64) -> Result<Road, NetworkError> {
    if spacing_m.is_nan() || length_m.is_nan() || spacing_m <= 0.0 || length_m <= 0.0 {
        return Err(NetworkError::InvalidRoad(format!("length_m={length_m}, spacing_m={spacing_m}")));
    }
    let cell_count = (length_m / cell_length_m - 1e-9).ceil() as i64;
    let stops = (1..)
        .map(|k| k as f64 * spacing_m)
        .take_while(|&m| m < length_m - 1e-9)
        .map(|m| (m / cell_length_m).round() as i64)
        .collect();
    Road::new(cell_count, cell_length_m, stops)
}

/// Cell length equalising free-flow speed with a NaSch grid of `base_cell_m`.
pub fn fcm_cell_length(base_cell_m: f64, v_max: i64, p: f64) -> f64 {
    base_cell_m * (v_max as f64 - p) / v_max as f64
}

/// The 3 km one-way arterial with intersections every 750 m.
pub fn build_arterial(model: ModelKind) -> Road {
    let cell = match model {
        ModelKind::Fcm => fcm_cell_length(7.5, 2, 0.2),
        ModelKind::Nasch => 7.5,
    };
    build_road(3000.0, 750.0, cell).expect("arterial geometry is valid")
}

/// Fixed-time signal plan; yellow counts as green.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSchedule {
    pub cycle_s: u32,
    pub green_s: u32,
    pub red_first: bool,
    pub offset_s: u32,
}

impl SignalSchedule {
    pub fn new(cycle_s: u32, green_s: u32, red_first: bool, offset_s: u32) -> Result<Self, NetworkError> {
        if green_s == 0 || green_s >= cycle_s {
            return Err(NetworkError::InvalidSchedule(format!(
                "need 0 < green_s < cycle_s, got green {green_s}, cycle {cycle_s}"
            )));
        }
        Ok(Self { cycle_s, green_s, red_first, offset_s })
    }

    /// Red at time `t` seconds.
    pub fn is_red_at(&self, t_s: f64) -> bool {
        let phase = (t_s + self.offset_s as f64).rem_euclid(self.cycle_s as f64);
        let red = (self.cycle_s - self.green_s) as f64;
        if self.red_first {
            phase < red
        } else {
            phase >= self.green_s as f64
        }
    }
}

/// Signal control of one intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Fixed(SignalSchedule),
    AlwaysGreen,
    /// Red for the first `steps` steps, green afterwards.
    RedThenGreen { steps: u64 },
}

impl Signal {
    pub fn is_red(&self, t: u64, seconds_per_step: f64) -> bool {
        match self {
            Signal::Fixed(s) => s.is_red_at(t as f64 * seconds_per_step),
            Signal::AlwaysGreen => false,
            Signal::RedThenGreen { steps } => t < *steps,
        }
    }
}

/// Sorted set of currently active halt cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HaltSet(Vec<i64>);

impl HaltSet {
    pub fn new(mut cells: Vec<i64>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self(cells)
    }

    pub fn cells(&self) -> &[i64] {
        &self.0
    }

    pub fn contains(&self, cell: i64) -> bool {
        self.0.binary_search(&cell).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Nearest active halt cell strictly ahead of `cell`.
    #[inline]
    pub fn next_after(&self, cell: i64) -> Option<i64> {
        let i = self.0.partition_point(|&h| h <= cell);
        self.0.get(i).copied()
    }

    pub(crate) fn clear(&mut self) {
        self.0.clear();
    }

    pub(crate) fn push_sorted(&mut self, cell: i64) {
        debug_assert!(self.0.last().is_none_or(|&l| l < cell));
        self.0.push(cell);
    }
}

/// Halt cells active at step `t`.
pub fn halt_cells_at(road: &Road, signals: &[Signal], t: u64, seconds_per_step: f64) -> HaltSet {
    let mut set = HaltSet::default();
    fill_halt_cells(road, signals, t, seconds_per_step, &mut set);
    set
}

pub(crate) fn fill_halt_cells(road: &Road, signals: &[Signal], t: u64, seconds_per_step: f64, out: &mut HaltSet) {
    out.clear();
    for (stop, signal) in road.stop_line_cells.iter().zip(signals) {
        if signal.is_red(t, seconds_per_step) {
            out.push_sorted(stop + 1);
        }
    }
}

/// Packs `q` stopped vehicles behind every stop line and adds the probe at
/// cell 1. Returns positions in ascending order (probe first).
pub fn init_queues(road: &Road, q: usize) -> Result<Vec<i64>, NetworkError> {
    let qi = q as i64;
    let mut prev_stop = 1;
    for &stop in &road.stop_line_cells {
        let tail = stop - qi + 1;
        if q > 0 && tail <= prev_stop {
            return Err(NetworkError::Overflow {
                queue: q,
                reason: format!("queue ending at cell {stop} would reach cell {prev_stop}"),
            });
        }
        prev_stop = stop;
    }
    let mut cells = vec![1];
    for &stop in &road.stop_line_cells {
        cells.extend(stop - qi + 1..=stop);
    }
    Ok(cells)
}

/// Everything needed to start a run of either engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub road: Road,
    /// One signal per stop line.
    pub signals: Vec<Signal>,
    pub seconds_per_step: f64,
    /// Initial cells in ascending order.
    pub initial_cells: Vec<i64>,
    /// Index into `initial_cells` of the tracked vehicle.
    pub probe: Option<usize>,
    /// Vehicles at or below this cell are counted each step.
    pub count_threshold: Option<i64>,
    /// Stop line (index into `road.stop_line_cells`) whose crossings during
    /// green yield the saturation sample.
    pub measured_stop_line: Option<usize>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.signals.len() != self.road.stop_line_cells.len() {
            return Err(NetworkError::InvalidRoad(format!(
                "{} signals for {} stop lines",
                self.signals.len(),
                self.road.stop_line_cells.len()
            )));
        }
        if !self.initial_cells.windows(2).all(|w| w[0] < w[1]) {
            return Err(NetworkError::InvalidRoad("initial cells must be strictly increasing".into()));
        }
        if self.initial_cells.first().is_some_and(|&c| c < 1) {
            return Err(NetworkError::InvalidRoad("cells are numbered from 1".into()));
        }
        if self.probe.is_some_and(|p| p >= self.initial_cells.len()) {
            return Err(NetworkError::InvalidRoad("probe index out of range".into()));
        }
        if self.measured_stop_line.is_some_and(|k| k >= self.road.stop_line_cells.len()) {
            return Err(NetworkError::InvalidRoad("measured stop line out of range".into()));
        }
        Ok(())
    }

    pub fn vehicle_count(&self) -> usize {
        self.initial_cells.len()
    }

    /// Arterial: `q` vehicles queued at each intersection, probe at cell 1,
    /// identical fixed-time plan everywhere.
    pub fn arterial(road: Road, schedule: SignalSchedule, q: usize) -> Result<Self, NetworkError> {
        let initial_cells = init_queues(&road, q)?;
        let signals = vec![Signal::Fixed(schedule); road.stop_line_cells.len()];
        let count_threshold = road.last_stop_line();
        let s = Self {
            road,
            signals,
            seconds_per_step: 1.0,
            initial_cells,
            probe: Some(0),
            count_threshold,
            measured_stop_line: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Single intersection fed by a standing queue of `queue` vehicles that
    /// ends at the stop line, with free road of `downstream_cells` behind it.
    pub fn discharge(queue: usize, downstream_cells: i64, signal: Signal, cell_length_m: f64) -> Result<Self, NetworkError> {
        let stop = queue as i64 + 1;
        let road = Road::new(stop + downstream_cells, cell_length_m, vec![stop])?;
        let s = Self {
            initial_cells: (2..=stop).collect(),
            road,
            signals: vec![signal],
            seconds_per_step: 1.0,
            probe: None,
            count_threshold: None,
            measured_stop_line: Some(0),
        };
        s.validate()?;
        Ok(s)
    }

    /// Discharge scenario whose queue cannot empty within `horizon` steps.
    pub fn saturated_discharge(horizon: u64, v_max: i64, signal: Signal) -> Self {
        // a discharging queue releases at most v_max/(v_max+1) vehicles per step
        let demand = (horizon as f64 * v_max as f64 / (v_max as f64 + 1.0)).ceil() as usize;
        Self::discharge(demand + 16, 4 * v_max + 8, signal, 7.5).expect("valid discharge geometry")
    }
}
