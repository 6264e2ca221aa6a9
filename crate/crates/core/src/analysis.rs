//! Traffic metrics, sample statistics and calibration helpers.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ca_rules::RulePairParams;
use crate::fcm::{FcmTrace, FuzzyVehicle};
use crate::nasch::RunTrace;
use crate::ofn::{Ofn, COMPONENTS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no green time in the measurement window")]
    NoGreenTime,
    #[error("statistic of an empty sample set")]
    EmptySamples,
    #[error("quantile level {0} outside [0, 1]")]
    InvalidLevel(f64),
    #[error("threshold never crossed in components {0:?}")]
    NeverCrossed(Vec<usize>),
    #[error("vehicle {0} is not tracked by the trace")]
    UntrackedVehicle(usize),
}

/// Crossings during green scaled to vehicles per hour of green.
///
/// `crossing_steps` are the steps during which a vehicle crossed the line;
/// `green` lists the green steps as half-open ranges.
pub fn measure_saturation_flow(crossing_steps: &[u64], green: &[Range<u64>], seconds_per_step: f64) -> Result<f64, AnalysisError> {
    let green_steps: u64 = green.iter().map(|r| r.end.saturating_sub(r.start)).sum();
    if green_steps == 0 {
        return Err(AnalysisError::NoGreenTime);
    }
    let crossings = crossing_steps
        .iter()
        .filter(|t| green.iter().any(|r| r.contains(t)))
        .count();
    Ok(crossings as f64 * 3600.0 / (green_steps as f64 * seconds_per_step))
}

/// Non-empty sorted sample population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet(Vec<f64>);

impl SampleSet {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, AnalysisError> {
        if samples.is_empty() {
            return Err(AnalysisError::EmptySamples);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self(samples))
    }

    pub fn sorted(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Linear interpolation between order statistics at rank `q (n - 1)`
    /// (zero-based).
    pub fn quantile(&self, q: f64) -> Result<f64, AnalysisError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(AnalysisError::InvalidLevel(q));
        }
        let xs = &self.0;
        let rank = q * (xs.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        Ok(xs[lo] + (rank - lo as f64) * (xs[hi] - xs[lo]))
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

pub fn quantile(samples: &[f64], q: f64) -> Result<f64, AnalysisError> {
    SampleSet::new(samples.to_vec())?.quantile(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileSummary {
    pub pct5: f64,
    pub median: f64,
    pub pct95: f64,
}

pub fn percentile_summary(samples: &[f64]) -> Result<PercentileSummary, AnalysisError> {
    let set = SampleSet::new(samples.to_vec())?;
    Ok(PercentileSummary {
        pct5: set.quantile(0.05)?,
        median: set.quantile(0.5)?,
        pct95: set.quantile(0.95)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    /// Vehicles per hour of green.
    pub s: Ofn<f64>,
    /// Samples pulled back into the rule pair's support.
    pub clamped: usize,
}

/// Fits `S = (s0, pct5, median, pct95, s4)` to a saturation-flow population.
/// The endpoints come from the rule pair; samples outside its support are
/// clamped with a warning.
pub fn estimate_saturation_fuzzy(samples: &[f64], pair: &RulePairParams) -> Result<SaturationFit, AnalysisError> {
    let (low, high) = (pair.low_saturation_hourly(), pair.high_saturation_hourly());
    let mut clamped = 0;
    let values: Vec<f64> = samples
        .iter()
        .map(|&s| {
            let c = s.clamp(low, high);
            if c != s {
                clamped += 1;
            }
            c
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} saturation samples outside [{low}, {high}] veh/h were clamped");
    }
    let stats = percentile_summary(&values)?;
    let s = Ofn::new(low, stats.pct5, stats.median, stats.pct95, high).expect("clamped percentiles are ordered");
    Ok(SaturationFit { s, clamped })
}

/// `n(m)`: vehicles whose component `m` is at or below `threshold_cell`.
pub fn fuzzy_vehicle_count(vehicles: &[FuzzyVehicle], threshold_cell: i64) -> [u32; COMPONENTS] {
    let mut n = [0u32; COMPONENTS];
    for v in vehicles {
        for (m, c) in n.iter_mut().enumerate() {
            if v.position.component(m) <= threshold_cell {
                *c += 1;
            }
        }
    }
    n
}

/// `theta(m)`: first time the probe's component `m` is past `threshold_cell`,
/// in seconds. A probe that has left the road counts as past.
pub fn fuzzy_travel_time(trace: &FcmTrace, threshold_cell: i64, seconds_per_step: f64) -> Result<Ofn<f64>, AnalysisError> {
    if trace.probe.is_empty() {
        return Err(AnalysisError::UntrackedVehicle(0));
    }
    let mut theta = [0.0; COMPONENTS];
    let mut missing = Vec::new();
    for (m, th) in theta.iter_mut().enumerate() {
        let hit = trace
            .probe
            .iter()
            .position(|x| x.is_none_or(|x| x.component(m) > threshold_cell));
        match hit {
            Some(t) => *th = t as f64 * seconds_per_step,
            None => missing.push(m),
        }
    }
    if !missing.is_empty() {
        return Err(AnalysisError::NeverCrossed(missing));
    }
    Ok(Ofn::from_components_unchecked(theta))
}

/// Travel times of the NaSch probe over all runs (seconds); runs whose
/// probe never crossed are skipped.
pub fn crisp_travel_times(traces: &[RunTrace], threshold_cell: i64, seconds_per_step: f64) -> Vec<f64> {
    traces
        .iter()
        .filter_map(|t| t.probe_crossing_time(threshold_cell))
        .map(|t| t as f64 * seconds_per_step)
        .collect()
}

/// Fraction of `(run, step)` pairs whose NaSch probe lies within the FCM
/// envelope `[x0 - 1 cell, x4 + 1 cell]`, everything compared in meters.
/// Steps where either probe has left the road are skipped.
pub fn envelope_coverage(
    fcm_probe: &[Option<Ofn<i64>>],
    fcm_cell_m: f64,
    nasch_probes: &[Vec<Option<i64>>],
    nasch_cell_m: f64,
) -> f64 {
    let mut inside = 0usize;
    let mut total = 0usize;
    for run in nasch_probes {
        for (f, n) in fcm_probe.iter().zip(run) {
            let (Some(f), Some(n)) = (f, n) else { continue };
            let lo = f.component(0) as f64 * fcm_cell_m - fcm_cell_m;
            let hi = f.component(4) as f64 * fcm_cell_m + fcm_cell_m;
            let x = *n as f64 * nasch_cell_m;
            total += 1;
            if (lo..=hi).contains(&x) {
                inside += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Fixed-width histogram over `[low, high)`; samples outside fall into the
/// edge bins.
pub fn histogram(samples: &[f64], low: f64, high: f64, bins: usize) -> Vec<HistogramBin> {
    let width = (high - low) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin { low: low + k as f64 * width, high: low + (k + 1) as f64 * width, count: 0 })
        .collect();
    for &s in samples {
        let k = ((s - low) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        out[k].count += 1;
    }
    out
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Per-step quantile `q` of the crisp runs' counts. Every run must cover
/// the same number of steps.
pub fn count_quantile_series(traces: &[RunTrace], q: f64) -> Result<Vec<f64>, AnalysisError> {
    let steps = traces.first().ok_or(AnalysisError::EmptySamples)?.counts.len();
    (0..steps)
        .map(|t| {
            let column: Vec<f64> = traces.iter().map(|r| r.counts[t] as f64).collect();
            quantile(&column, q)
        })
        .collect()
}

/// Largest distance by which `crisp` leaves the band `[n(4) - slack,
/// n(0) + slack]` of the fuzzy counts, over all common steps.
pub fn count_band_excess(fuzzy: &[[u32; COMPONENTS]], crisp: &[f64], slack: f64) -> f64 {
    fuzzy
        .iter()
        .zip(crisp)
        .map(|(n, &c)| {
            let low = n[COMPONENTS - 1] as f64 - slack;
            let high = n[0] as f64 + slack;
            (low - c).max(c - high).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn count_band_excess_measures_distance_outside() {
        let fuzzy = [[10, 9, 8, 7, 6], [10, 9, 8, 7, 6]];
        assert_eq!(count_band_excess(&fuzzy, &[8.0, 12.0], 2.0), 0.0);
        assert_eq!(count_band_excess(&fuzzy, &[3.0, 13.5], 2.0), 1.5);
        assert_eq!(count_band_excess(&fuzzy, &[1.0], 2.0), 3.0);
    }

    #[test]
    fn saturation_arithmetic() {
        let crossings: Vec<u64> = (0..15).map(|k| 2 * k).collect();
        assert_eq!(measure_saturation_flow(&crossings, std::slice::from_ref(&(0..30)), 1.0).unwrap(), 1800.0);
        assert_eq!(measure_saturation_flow(&[], std::slice::from_ref(&(0..30)), 1.0).unwrap(), 0.0);
        assert_eq!(measure_saturation_flow(&[1, 2], &[], 1.0), Err(AnalysisError::NoGreenTime));
        // crossings outside green are ignored
        assert_eq!(measure_saturation_flow(&[5, 40], std::slice::from_ref(&(0..10)), 1.0).unwrap(), 360.0);
    }

    #[test]
    fn fragmentation_does_not_change_the_rate() {
        let crossings: Vec<u64> = (0..3600).filter(|t| t % 3 == 0).collect();
        let whole = measure_saturation_flow(&crossings, std::slice::from_ref(&(0..3600)), 1.0).unwrap();
        let parts: Vec<Range<u64>> = (0..60).map(|k| k * 60..(k + 1) * 60).collect();
        let split = measure_saturation_flow(&crossings, &parts, 1.0).unwrap();
        assert_eq!(whole, split);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&hundred, 0.05).unwrap() - 5.95).abs() < 1e-12);
        assert_eq!(quantile(&[4.0, -1.0, 9.0], 0.0).unwrap(), -1.0);
        assert_eq!(quantile(&[], 0.5), Err(AnalysisError::EmptySamples));
        assert!(quantile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn saturation_fit_examples() {
        let pair = RulePairParams::r1_r2(2, 1.0).unwrap();
        let fit = estimate_saturation_fuzzy(&[1575.0; 10], &pair).unwrap();
        assert_eq!(fit.s.components(), [1440.0, 1575.0, 1575.0, 1575.0, 1800.0]);
        assert_eq!(fit.clamped, 0);

        let fit = estimate_saturation_fuzzy(&[1900.0, 1700.0, 1600.0], &pair).unwrap();
        assert_eq!(fit.clamped, 1);
        assert!(fit.s.components().iter().all(|&c| c <= 1800.0));
        assert!(estimate_saturation_fuzzy(&[], &pair).is_err());
    }

    #[test]
    fn vehicle_count_example() {
        let vs = vec![
            FuzzyVehicle { id: 0, position: Ofn::from_components_unchecked([330, 331, 333, 334, 336]), velocity: Ofn::from_scalar(0) },
            FuzzyVehicle::at_rest(1, 10),
        ];
        assert_eq!(fuzzy_vehicle_count(&vs, 333), [2, 2, 2, 1, 1]);
        assert_eq!(fuzzy_vehicle_count(&[], 333), [0; 5]);
    }

    #[test]
    fn travel_time_of_already_past_probe() {
        let past = Some(Ofn::from_scalar(400));
        let trace = FcmTrace {
            probe: vec![Some(Ofn::from_scalar(1)), past, past],
            counts: vec![],
            crossings: vec![],
            saturation: None,
            trajectories: None,
            basic_ops: 0,
            vehicle_steps: 0,
            envelope_events: vec![],
            invariant_violations: vec![],
        };
        assert_eq!(fuzzy_travel_time(&trace, 333, 1.0).unwrap(), Ofn::from_scalar(1.0));
        let stuck = FcmTrace { probe: vec![Some(Ofn::from_scalar(1)); 3], ..trace };
        assert_eq!(fuzzy_travel_time(&stuck, 333, 1.0), Err(AnalysisError::NeverCrossed(vec![0, 1, 2, 3, 4])));
    }

    #[test]
    fn coverage_of_own_lower_bound_is_total() {
        let fcm: Vec<Option<Ofn<i64>>> = (0..50)
            .map(|t| Some(Ofn::from_components_unchecked([t, t + 1, t + 2, t + 3, 2 * t])))
            .collect();
        let own: Vec<Option<i64>> = fcm.iter().map(|x| x.map(|x| x.component(0))).collect();
        assert_eq!(envelope_coverage(&fcm, 6.75, &[own], 6.75), 1.0);
        let far: Vec<Option<i64>> = (0..50).map(|t| Some(t * 3 + 100)).collect();
        assert!(envelope_coverage(&fcm, 6.75, &[far], 6.75) < 0.1);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[1440.0, 1457.9, 1458.0, 1799.0, 1900.0, 1000.0], 1440.0, 1800.0, 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h[0].count, 3);
        assert_eq!(h[1].count, 1);
        assert_eq!(h[19].count, 2);
        assert!((h[0].high - 1458.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[1.0, 1.0, 2.0, 2.0]) - 0.894_427_190_999_915_9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quantile_monotone_and_bounded(xs in prop::collection::vec(-1e3..1e3f64, 1..60), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let set = SampleSet::new(xs.clone()).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let (qa, qb) = (set.quantile(lo).unwrap(), set.quantile(hi).unwrap());
            prop_assert!(qa <= qb + 1e-9);
            prop_assert!(qa >= set.sorted()[0] && qb <= *set.sorted().last().unwrap());
        }

        #[test]
        fn fitted_saturation_is_monotone(xs in prop::collection::vec(1300.0..1900.0f64, 1..80)) {
            let pair = RulePairParams::r1_r2(2, 1.0).unwrap();
            let fit = estimate_saturation_fuzzy(&xs, &pair).unwrap();
            prop_assert!(fit.s.is_monotone());
        }
    }
}
