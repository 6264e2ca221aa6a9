//! The experiment commands. Each one computes everything in memory and
//! returns its reports and files; writing to disk is left to the caller.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use traffic_core::analysis::{
    count_band_excess, count_quantile_series, crisp_travel_times, envelope_coverage, estimate_saturation_fuzzy,
    fuzzy_travel_time, histogram, percentile_summary, quantile, PercentileSummary,
};
use traffic_core::ca_rules::{rule_saturation, saturation_per_step, steady_discharge_gap, DeterministicRule};
use traffic_core::fcm::{compute_alpha, run_fcm, EnvelopeAnomaly, FcmRecordOptions, FcmTrace, SaturationSpec};
use traffic_core::nasch::{
    monte_carlo, monte_carlo_serial, saturation_samples, sweep_p, MonteCarloConfig, NaschParams, RecordOptions, RunTrace,
};
use traffic_core::network::{ModelKind, Scenario, Signal};
use traffic_core::Ofn;

use crate::config::{ExperimentConfig, ModelChoice};
use crate::output::{json, CsvTable};

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Self { name: name.to_string(), contents }
    }
}

fn nasch_params(config: &ExperimentConfig) -> NaschParams {
    NaschParams { v_max: config.v_max, p: config.p, nsh: config.nsh }
}

/// Saturation per rule for the configured maximal velocity.
pub fn table1(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let mut table = CsvTable::new("table1", &["rule", "gap_cells", "veh_per_step", "veh_per_hour"]);
    for rule in DeterministicRule::ALL {
        let gap = steady_discharge_gap(rule, config.v_max);
        let per_step = saturation_per_step(config.v_max as f64, gap);
        table.row(&[
            rule.name().to_string(),
            gap.to_string(),
            round(per_step, 4).to_string(),
            round(rule_saturation(rule, config.v_max, 1.0), 2).to_string(),
        ])?;
    }
    Ok(vec![Artifact::new("table1.csv", table.finish()?)])
}

fn round(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// A single intersection fed by a queue that never empties, green for the
/// whole horizon.
pub fn discharge_scenario(config: &ExperimentConfig) -> Scenario {
    Scenario::saturated_discharge(config.horizon_steps, config.v_max, Signal::AlwaysGreen)
}

/// Saturation percentiles for every deceleration probability of the sweep.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let rows = sweep_p(
        &discharge_scenario(config),
        &nasch_params(config),
        &config.sweep_values(),
        config.runs,
        config.horizon_steps,
        config.seed,
    )?;
    let mut table = CsvTable::new("sweep", &["p", "pct5_veh_h", "median_veh_h", "pct95_veh_h", "spread_veh_h"]);
    for r in &rows {
        table.row([r.p, r.pct5, r.median, r.pct95, r.spread].map(|x| x.to_string()))?;
    }
    Ok(vec![Artifact::new("sweep.csv", table.finish()?)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    #[serde(rename = "S")]
    pub s: [f64; 5],
    pub alpha: [f64; 3],
    pub p: f64,
    pub runs: usize,
    pub horizon_steps: u64,
    pub percentiles: PercentileSummary,
    pub clamped_samples: usize,
}

impl CalibrationReport {
    pub fn spec(&self, config: &ExperimentConfig) -> Result<SaturationSpec> {
        Ok(SaturationSpec::new(Ofn::try_from_components(self.s)?, config.rule_pair()?)?)
    }
}

/// Fits the fuzzy saturation target to a NaSch Monte Carlo population.
pub fn calibrate(config: &ExperimentConfig) -> Result<(CalibrationReport, Vec<Artifact>)> {
    let mc = MonteCarloConfig {
        runs: config.calibration_runs,
        horizon_steps: config.horizon_steps,
        deceleration_probability: config.p,
        master_seed: config.seed,
    };
    let traces = monte_carlo(&discharge_scenario(config), &nasch_params(config), &mc, RecordOptions::default())?;
    let samples = saturation_samples(&traces);
    let pair = config.rule_pair()?;
    let fit = estimate_saturation_fuzzy(&samples, &pair)?;
    let alpha = compute_alpha(&fit.s, &pair)?;
    let report = CalibrationReport {
        s: fit.s.components(),
        alpha,
        p: config.p,
        runs: config.calibration_runs,
        horizon_steps: config.horizon_steps,
        percentiles: percentile_summary(&samples)?,
        clamped_samples: fit.clamped,
    };

    let (low, high) = (pair.low_saturation_hourly(), pair.high_saturation_hourly());
    let mut hist = CsvTable::new("saturation_histogram", &["low_veh_h", "high_veh_h", "count"]);
    for b in histogram(&samples, low, high, HISTOGRAM_BINS) {
        hist.row(&[b.low.to_string(), b.high.to_string(), b.count.to_string()])?;
    }
    let mut raw = CsvTable::new("saturation_samples", &["run", "veh_h"]);
    for (k, s) in samples.iter().enumerate() {
        raw.row(&[k.to_string(), s.to_string()])?;
    }
    let artifacts = vec![
        Artifact::new("calibration.json", json(&report)?),
        Artifact::new("saturation_histogram.csv", hist.finish()?),
        Artifact::new("saturation_samples.csv", raw.finish()?),
    ];
    Ok((report, artifacts))
}

/// Saturation target from the configuration, calibrating when asked to.
pub fn saturation_spec(config: &ExperimentConfig) -> Result<SaturationSpec> {
    match config.fixed_saturation()? {
        Some(spec) => Ok(spec),
        None => calibrate(config)?.0.spec(config),
    }
}

/// Results for one queue length on the arterial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueResult {
    pub queue_length: usize,
    pub initial_count: usize,
    /// Travel time of the probe to the last stop line, per component (s).
    pub theta_s: Option<[f64; 5]>,
    pub nasch_travel_time_s: Option<PercentileSummary>,
    /// NaSch runs whose probe never reached the last stop line.
    pub nasch_unfinished_runs: usize,
    pub envelope_coverage: Option<f64>,
    /// Largest distance of the NaSch median count outside the widened
    /// fuzzy count band.
    pub count_band_excess: Option<f64>,
    pub envelope_events: usize,
    /// Vehicles and steps with `x0 > x4`.
    pub inverted_envelopes: usize,
    pub invariant_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArterialReport {
    pub cycle_s: u32,
    pub green_s: u32,
    pub runs: usize,
    pub horizon_steps: u64,
    #[serde(rename = "S")]
    pub s: [f64; 5],
    pub alpha: [f64; 3],
    pub queues: Vec<QueueResult>,
}

/// Twenty bins put 18 veh/h per bin across the R1/R2 interval.
pub const HISTOGRAM_BINS: usize = 20;

/// Slack of the count band, in vehicles.
pub const COUNT_SLACK: f64 = 2.0;

struct QueueRun {
    result: QueueResult,
    fcm: Option<FcmTrace>,
    nasch: Vec<RunTrace>,
}

fn run_queue(config: &ExperimentConfig, spec: &SaturationSpec, q: usize) -> Result<QueueRun> {
    let schedule = config.schedule()?;
    let fcm_road = config.road_for(ModelKind::Fcm)?;
    let nasch_road = config.road_for(ModelKind::Nasch)?;
    let fcm_stop = fcm_road.last_stop_line().context("arterial has no stop line")?;
    let nasch_stop = nasch_road.last_stop_line().context("arterial has no stop line")?;
    let fcm_scenario = Scenario::arterial(fcm_road, schedule, q)?;
    let nasch_scenario = Scenario::arterial(nasch_road, schedule, q)?;
    let want_fcm = config.model != ModelChoice::Nasch;
    let want_nasch = config.model != ModelChoice::Fcm;

    let fcm = if want_fcm {
        let record = FcmRecordOptions { trajectories: false, check_invariants: true };
        Some(run_fcm(&fcm_scenario, spec, config.horizon_steps, record)?)
    } else {
        None
    };
    let nasch = if want_nasch {
        let mc = MonteCarloConfig {
            runs: config.runs,
            horizon_steps: config.horizon_steps,
            deceleration_probability: config.p,
            master_seed: config.seed,
        };
        let record = RecordOptions { trajectories: false, check_invariants: true };
        monte_carlo(&nasch_scenario, &nasch_params(config), &mc, record)?
    } else {
        Vec::new()
    };

    let times = crisp_travel_times(&nasch, nasch_stop, 1.0);
    let nasch_violations: usize = nasch.iter().map(|t| t.invariant_violations.len()).sum();
    let mut result = QueueResult {
        queue_length: q,
        initial_count: fcm_scenario.vehicle_count(),
        theta_s: None,
        nasch_travel_time_s: if times.is_empty() { None } else { Some(percentile_summary(&times)?) },
        nasch_unfinished_runs: nasch.len() - times.len(),
        envelope_coverage: None,
        count_band_excess: None,
        envelope_events: 0,
        inverted_envelopes: 0,
        invariant_violations: nasch_violations,
    };
    if let Some(f) = &fcm {
        result.theta_s = fuzzy_travel_time(f, fcm_stop, 1.0).ok().map(|t| t.components());
        result.envelope_events = f.envelope_events.len();
        result.inverted_envelopes =
            f.envelope_events.iter().filter(|e| e.anomaly == EnvelopeAnomaly::Inverted).count();
        result.invariant_violations += f.invariant_violations.len();
        for v in f.invariant_violations.iter().take(5) {
            log::warn!("q = {q}: {v}");
        }
        if !nasch.is_empty() {
            let probes: Vec<Vec<Option<i64>>> = nasch.iter().map(|t| t.probe_cells.clone()).collect();
            let fcm_cell = config.cell_length_for(ModelKind::Fcm);
            result.envelope_coverage =
                Some(envelope_coverage(&f.probe, fcm_cell, &probes, config.cell_length_for(ModelKind::Nasch)));
            let median = count_quantile_series(&nasch, 0.5)?;
            result.count_band_excess = Some(count_band_excess(&f.counts, &median, COUNT_SLACK));
        }
    }
    Ok(QueueRun { result, fcm, nasch })
}

/// Runs both models on the arterial for every configured queue length.
pub fn arterial(config: &ExperimentConfig) -> Result<(ArterialReport, Vec<Artifact>)> {
    let spec = saturation_spec(config)?;
    let mut queues = config.queue_lengths.clone();
    if !queues.contains(&config.queue_length) {
        queues.push(config.queue_length);
    }
    queues.sort_unstable();

    let mut results = Vec::new();
    let mut travel = CsvTable::new(
        "travel_time",
        &[
            "queue_length",
            "theta0_s",
            "theta1_s",
            "theta2_s",
            "theta3_s",
            "theta4_s",
            "nasch_pct5_s",
            "nasch_median_s",
            "nasch_pct95_s",
            "envelope_coverage",
        ],
    );
    let mut counts = CsvTable::new(
        "vehicle_counts",
        &["queue_length", "t_s", "n0", "n1", "n2", "n3", "n4", "nasch_pct5", "nasch_median", "nasch_pct95"],
    );
    let mut overlay = None;
    for &q in &queues {
        let run = run_queue(config, &spec, q)?;
        let r = &run.result;
        let theta = r.theta_s.map(|t| t.map(|x| x.to_string())).unwrap_or_default();
        let nasch = r.nasch_travel_time_s.map(|s| [s.pct5, s.median, s.pct95].map(|x| x.to_string())).unwrap_or_default();
        let mut row = theta.to_vec();
        row.resize(5, String::new());
        let mut nasch = nasch.to_vec();
        nasch.resize(3, String::new());
        let mut line = vec![q.to_string()];
        line.extend(row);
        line.extend(nasch);
        line.push(r.envelope_coverage.map(|c| c.to_string()).unwrap_or_default());
        travel.row(&line)?;

        let quantiles = if run.nasch.is_empty() {
            None
        } else {
            Some([0.05, 0.5, 0.95].map(|p| count_quantile_series(&run.nasch, p)).into_iter().collect::<Result<Vec<_>, _>>()?)
        };
        for t in 0..=config.horizon_steps as usize {
            let mut line = vec![q.to_string(), t.to_string()];
            match &run.fcm {
                Some(f) => line.extend(f.counts[t].iter().map(|n| n.to_string())),
                None => line.extend(std::iter::repeat_n(String::new(), 5)),
            }
            match &quantiles {
                Some(qs) => line.extend(qs.iter().map(|s| s[t].to_string())),
                None => line.extend(std::iter::repeat_n(String::new(), 3)),
            }
            counts.row(&line)?;
        }
        if q == config.queue_length {
            overlay = Some(overlay_tables(config, &run)?);
        }
        results.push(run.result);
    }

    let schedule = config.schedule()?;
    let report = ArterialReport {
        cycle_s: schedule.cycle_s,
        green_s: schedule.green_s,
        runs: config.runs,
        horizon_steps: config.horizon_steps,
        s: spec.s.components(),
        alpha: spec.alpha,
        queues: results,
    };
    let (overlay, runs) = overlay.expect("the overlay queue length is always simulated");
    Ok((
        report.clone(),
        vec![
            Artifact::new("arterial_summary.json", json(&report)?),
            Artifact::new("travel_time.csv", travel.finish()?),
            Artifact::new("vehicle_counts.csv", counts.finish()?),
            Artifact::new("probe_overlay.csv", overlay),
            Artifact::new("probe_runs.csv", runs),
        ],
    ))
}

/// Probe positions in meters: the fuzzy components and the NaSch percentile
/// band per step, and every NaSch run in long format.
fn overlay_tables(config: &ExperimentConfig, run: &QueueRun) -> Result<(String, String)> {
    let fcm_cell = config.cell_length_for(ModelKind::Fcm);
    let nasch_cell = config.cell_length_for(ModelKind::Nasch);
    let mut overlay = CsvTable::new(
        "probe_overlay",
        &["t_s", "x0_m", "x1_m", "x2_m", "x3_m", "x4_m", "nasch_pct5_m", "nasch_median_m", "nasch_pct95_m"],
    );
    for t in 0..=config.horizon_steps as usize {
        let mut line = vec![t.to_string()];
        match run.fcm.as_ref().and_then(|f| f.probe[t]) {
            Some(x) => line.extend(x.components().iter().map(|&c| (c as f64 * fcm_cell).to_string())),
            None => line.extend(std::iter::repeat_n(String::new(), 5)),
        }
        let cells: Vec<f64> =
            run.nasch.iter().filter_map(|r| r.probe_cells[t]).map(|c| c as f64 * nasch_cell).collect();
        if cells.is_empty() {
            line.extend(std::iter::repeat_n(String::new(), 3));
        } else {
            for q in [0.05, 0.5, 0.95] {
                line.push(quantile(&cells, q)?.to_string());
            }
        }
        overlay.row(&line)?;
    }
    let mut runs = CsvTable::new("probe_runs", &["run", "t_s", "x_m"]);
    for r in &run.nasch {
        for (t, c) in r.probe_cells.iter().enumerate() {
            if let Some(c) = c {
                runs.row(&[r.run_id.to_string(), t.to_string(), (*c as f64 * nasch_cell).to_string()])?;
            }
        }
    }
    Ok((overlay.finish()?, runs.finish()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Steps of the phase in which every vehicle stays on the road.
    pub constant_steps: u64,
    pub vehicles: usize,
    pub fcm: u64,
    pub fcm_expected: u64,
    pub nasch_mc: u64,
    pub nasch_mc_expected: u64,
    /// Totals over the whole horizon, where vehicles may leave.
    pub fcm_full_horizon: u64,
    pub nasch_mc_full_horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub fcm_wall_s: f64,
    pub nasch_mc_wall_s: f64,
    pub ratio: f64,
    pub runs: usize,
    pub horizon_steps: u64,
    pub queue_length: usize,
    pub fcm_repeats: usize,
    pub op_counts: OpCounts,
}

/// Wall time and rule applications of one fuzzy run against a serial NaSch
/// Monte Carlo on the same arterial.
pub fn bench(config: &ExperimentConfig) -> Result<(BenchReport, Vec<Artifact>)> {
    let spec = saturation_spec(config)?;
    let schedule = config.schedule()?;
    let fcm_scenario = Scenario::arterial(config.road_for(ModelKind::Fcm)?, schedule, config.queue_length)?;
    let nasch_scenario = Scenario::arterial(config.road_for(ModelKind::Nasch)?, schedule, config.queue_length)?;
    let params = nasch_params(config);
    let mc = |horizon| MonteCarloConfig {
        runs: config.bench_runs,
        horizon_steps: horizon,
        deceleration_probability: config.p,
        master_seed: config.seed,
    };

    // constant-N phase
    let tc = config.bench_constant_steps;
    let n = fcm_scenario.vehicle_count();
    let fcm_short = run_fcm(&fcm_scenario, &spec, tc, FcmRecordOptions::default())?;
    let nasch_short = monte_carlo_serial(&nasch_scenario, &params, &mc(tc), RecordOptions::default())?;
    if fcm_short.vehicle_steps != tc * n as u64
        || nasch_short.iter().any(|t| t.vehicle_steps != tc * nasch_scenario.vehicle_count() as u64)
    {
        bail!("vehicles left the road within bench_constant_steps = {tc}; shorten it");
    }

    // full horizon, timed; the fuzzy run is repeated to get a stable mean
    let horizon = config.horizon_steps;
    let mut repeats = 0usize;
    let start = Instant::now();
    let mut fcm_full = None;
    while repeats < 3 || start.elapsed().as_secs_f64() < 0.25 {
        fcm_full = Some(run_fcm(&fcm_scenario, &spec, horizon, FcmRecordOptions::default())?);
        repeats += 1;
    }
    let fcm_wall = start.elapsed().as_secs_f64() / repeats as f64;
    let start = Instant::now();
    let nasch_full = monte_carlo_serial(&nasch_scenario, &params, &mc(horizon), RecordOptions::default())?;
    let nasch_wall = start.elapsed().as_secs_f64();

    let report = BenchReport {
        fcm_wall_s: fcm_wall,
        nasch_mc_wall_s: nasch_wall,
        ratio: nasch_wall / fcm_wall,
        runs: config.bench_runs,
        horizon_steps: horizon,
        queue_length: config.queue_length,
        fcm_repeats: repeats,
        op_counts: OpCounts {
            constant_steps: tc,
            vehicles: n,
            fcm: fcm_short.basic_ops,
            fcm_expected: 5 * tc * n as u64,
            nasch_mc: nasch_short.iter().map(|t| t.basic_ops).sum(),
            nasch_mc_expected: config.bench_runs as u64 * tc * n as u64,
            fcm_full_horizon: fcm_full.expect("at least one repeat").basic_ops,
            nasch_mc_full_horizon: nasch_full.iter().map(|t| t.basic_ops).sum(),
        },
    };
    Ok((report.clone(), vec![Artifact::new("bench.json", json(&report)?)]))
}
