//! Residual analysis: flags samples whose observed flow departs from the
//! observer's prediction, turns the flag count over a trailing window into a
//! leak index, and raises a latched alarm once the index has stayed above the
//! trip level for long enough.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::{FeatureMatrix, TelemetryRecord};
use crate::models::RegressorModel;
use crate::simulate::DEFAULT_ONSET;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Absolute residual above which a sample is flagged (flow units).
    pub threshold: f64,
    /// Trailing samples counted into the leak index.
    pub window: usize,
    pub index_trip: f64,
    /// The alarm fires once the consecutive-trip counter exceeds this.
    pub persistence: usize,
    /// Leak onset ordinal assumed when converting alarm ordinals to minutes.
    pub onset_index: usize,
    pub cadence_minutes: f64,
    /// Samples after onset that are not counted as detection time.
    pub accounting_offset: usize,
}

impl DetectorConfig {
    pub const DEFAULT_MARGIN: f64 = 0.01;

    /// Defaults with threshold `mae + 0.01`.
    pub fn for_mae(mae: f64) -> Self {
        Self {
            threshold: mae + Self::DEFAULT_MARGIN,
            window: 30,
            index_trip: 0.99,
            persistence: 3,
            onset_index: DEFAULT_ONSET,
            cadence_minutes: 2.0,
            accounting_offset: 2,
        }
    }

    /// The 20-sample window used by the original detection script.
    pub fn appendix(mae: f64) -> Self {
        Self { window: 20, ..Self::for_mae(mae) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!("threshold {} must be positive", self.threshold)));
        }
        if self.window < 1 || self.persistence < 1 {
            return Err(Error::InvalidParameter("window and persistence must be at least 1".into()));
        }
        if !(self.index_trip > 0.0 && self.index_trip < 1.0) {
            return Err(Error::InvalidParameter(format!("index trip {} outside (0, 1)", self.index_trip)));
        }
        if !(self.cadence_minutes > 0.0) {
            return Err(Error::InvalidParameter("cadence must be positive".into()));
        }
        Ok(())
    }

    pub fn minutes_to_detect(&self, ordinal: usize) -> f64 {
        ordinal.saturating_sub(self.onset_index + self.accounting_offset) as f64 * self.cadence_minutes
    }
}

/// `exp(−1/(1 + a²))`: strictly increasing from e⁻¹ at `a = 0` towards 1.
pub fn leak_index(a: f64) -> f64 {
    (-1.0 / (1.0 + a * a)).exp()
}

/// `|observed − predicted|` as a percentage of `observed`.
pub fn estimate_leak_size(observed: f64, predicted: f64) -> Result<f64> {
    if observed == 0.0 || !observed.is_finite() {
        return Err(Error::Undefined(format!("leak size relative to observed flow {observed}")));
    }
    Ok((observed - predicted).abs() * 100.0 / observed)
}

/// Leak size from both channels: the inlet excess plus the outlet shortfall,
/// as a percentage of the observed outlet flow.
pub fn estimate_leak_size_two_channel(dev_inlet: f64, dev_outlet: f64, observed_outlet: f64) -> Result<f64> {
    if observed_outlet == 0.0 || !observed_outlet.is_finite() {
        return Err(Error::Undefined(format!("leak size relative to observed flow {observed_outlet}")));
    }
    Ok((dev_inlet.abs() + dev_outlet.abs()) * 100.0 / observed_outlet)
}

/// Fractional leak position `dev_outlet / (dev_outlet + dev_inlet)`.
pub fn localize(dev_inlet: f64, dev_outlet: f64) -> Result<f64> {
    if !(dev_inlet >= 0.0 && dev_outlet >= 0.0) {
        return Err(Error::InvalidParameter("flow deviations must be non-negative".into()));
    }
    if dev_inlet + dev_outlet == 0.0 {
        return Err(Error::Undefined("localization with zero deviation on both channels".into()));
    }
    Ok(dev_outlet / (dev_outlet + dev_inlet))
}

/// One monitored sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub ordinal: usize,
    pub observed: f64,
    pub predicted: f64,
    pub inlet_pressure: f64,
    pub outlet_pressure: f64,
    /// Observed and predicted inlet flow, when that channel is monitored.
    pub inlet: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    /// Ordinal of the highest leak index in the tripped episode.
    pub ordinal: usize,
    /// Ordinal at which the persistence rule fired.
    pub alarm_ordinal: usize,
    pub minutes_to_detect: f64,
    pub leak_index: f64,
    /// Estimated leak as a percentage of flow.
    pub leak_percent: f64,
    pub inlet_pressure: f64,
    pub outlet_pressure: f64,
    pub location: Option<f64>,
}

impl AlarmEvent {
    fn at(best: &Sample, index: f64, alarm_ordinal: usize, cfg: &DetectorConfig) -> Self {
        let dev_out = (best.observed - best.predicted).abs();
        let (leak_percent, location) = match best.inlet {
            Some((obs_in, pred_in)) => {
                let dev_in = (obs_in - pred_in).abs();
                (
                    estimate_leak_size_two_channel(dev_in, dev_out, best.observed).unwrap_or(f64::NAN),
                    localize(dev_in, dev_out).ok(),
                )
            }
            None => (estimate_leak_size(best.observed, best.predicted).unwrap_or(f64::NAN), None),
        };
        Self {
            ordinal: best.ordinal,
            alarm_ordinal,
            minutes_to_detect: cfg.minutes_to_detect(best.ordinal),
            leak_index: index,
            leak_percent,
            inlet_pressure: best.inlet_pressure,
            outlet_pressure: best.outlet_pressure,
            location,
        }
    }

    /// Plain-text alarm block.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "leak index: {:.4}", self.leak_index);
        let _ = writeln!(s, "percentage leak: {:.2}", self.leak_percent);
        let _ = writeln!(s, "inlet pressure: {:.2}", self.inlet_pressure);
        let _ = writeln!(s, "outlet pressure: {:.2}", self.outlet_pressure);
        let _ = writeln!(s, "minutes to detect: {}", self.minutes_to_detect);
        let _ = writeln!(s, "ordinal: {}", self.ordinal);
        let _ = writeln!(s, "alarm ordinal: {}", self.alarm_ordinal);
        match self.location {
            Some(l) => {
                let _ = writeln!(s, "estimated location: {l:.4}");
            }
            None => s.push_str("estimated location: unavailable\n"),
        }
        s
    }
}

/// Per-sample detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub ordinal: usize,
    pub residual: f64,
    pub flag: bool,
    pub index: f64,
    pub counter: usize,
}

/// Streaming detector state. Copy it to checkpoint; replaying the same
/// samples from a copy reproduces the same records and alarm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    flags: VecDeque<bool>,
    exceedances: usize,
    index: f64,
    counter: usize,
    best: Option<(f64, Sample)>,
    alarm: Option<AlarmEvent>,
    skipped: usize,
    processed: usize,
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

impl DetectorState {
    pub fn new() -> Self {
        Self {
            flags: VecDeque::new(),
            exceedances: 0,
            index: leak_index(1.0),
            counter: 0,
            best: None,
            alarm: None,
            skipped: 0,
            processed: 0,
        }
    }

    /// Flags among the most recent `window` samples.
    pub fn exceedances(&self) -> usize {
        self.exceedances
    }
    pub fn buffered(&self) -> usize {
        self.flags.len()
    }
    pub fn index(&self) -> f64 {
        self.index
    }
    pub fn counter(&self) -> usize {
        self.counter
    }
    pub fn best(&self) -> Option<(f64, usize)> {
        self.best.map(|(i, s)| (i, s.ordinal))
    }
    pub fn alarm(&self) -> Option<&AlarmEvent> {
        self.alarm.as_ref()
    }
    pub fn skipped(&self) -> usize {
        self.skipped
    }
    pub fn processed(&self) -> usize {
        self.processed
    }

    /// Clears the latch and all history.
    pub fn reset(&mut self) {
        *self = Self::new();
    }

    /// Advances by one sample. The index uses the flags of the preceding
    /// `window` samples plus one; the current flag then enters the window.
    /// Returns `None` for a skipped (non-finite) sample.
    pub fn step(&mut self, sample: &Sample, cfg: &DetectorConfig) -> Option<(StepRecord, Option<AlarmEvent>)> {
        if !(sample.observed.is_finite() && sample.predicted.is_finite()) {
            self.skipped += 1;
            return None;
        }
        self.processed += 1;
        let residual = sample.observed - sample.predicted;
        let flag = residual.abs() > cfg.threshold;
        self.index = leak_index(self.exceedances as f64 + 1.0);
        while self.flags.len() >= cfg.window {
            if self.flags.pop_front() == Some(true) {
                self.exceedances -= 1;
            }
        }
        self.flags.push_back(flag);
        self.exceedances += usize::from(flag);

        let mut fired = None;
        if self.index > cfg.index_trip {
            self.counter += 1;
            if self.best.is_none_or(|(b, _)| self.index > b) {
                self.best = Some((self.index, *sample));
            }
            if self.counter > cfg.persistence && self.alarm.is_none() {
                let (bi, bs) = self.best.expect("set while tripped");
                let ev = AlarmEvent::at(&bs, bi, sample.ordinal, cfg);
                self.alarm = Some(ev.clone());
                fired = Some(ev);
            }
        } else {
            self.counter = 0;
            self.best = None;
        }
        let rec = StepRecord { ordinal: sample.ordinal, residual, flag, index: self.index, counter: self.counter };
        Some((rec, fired))
    }
}

/// An outlet-flow observer and, optionally, an inlet-flow observer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverPair {
    pub outlet: RegressorModel,
    pub inlet: Option<RegressorModel>,
}

impl ObserverPair {
    pub fn outlet_only(outlet: RegressorModel) -> Self {
        Self { outlet, inlet: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub log: Vec<StepRecord>,
    pub alarm: Option<AlarmEvent>,
    pub skipped: usize,
}

impl DetectionRun {
    pub fn render_log(&self) -> String {
        let mut s = String::from("ordinal,residual,flag,index,counter\n");
        for r in &self.log {
            let _ = writeln!(s, "{},{:.6},{},{:.6},{}", r.ordinal, r.residual, u8::from(r.flag), r.index, r.counter);
        }
        s
    }

    pub fn flagged(&self) -> usize {
        self.log.iter().filter(|r| r.flag).count()
    }
}

/// Builds detector samples for a stream from the observers' predictions.
pub fn samples_for(stream: &[TelemetryRecord], observers: &ObserverPair) -> Result<Vec<Sample>> {
    let x = FeatureMatrix::from_records(stream);
    let pred_out = observers.outlet.predict(&x)?;
    let pred_in = match &observers.inlet {
        Some(m) if stream.iter().all(|r| r.inlet_flowrate.is_some()) => Some(m.predict(&x)?),
        _ => None,
    };
    Ok(stream
        .iter()
        .enumerate()
        .map(|(i, r)| Sample {
            ordinal: r.index,
            observed: r.flowrate,
            predicted: pred_out[i],
            inlet_pressure: r.inlet_pressure,
            outlet_pressure: r.outlet_pressure,
            inlet: pred_in.as_ref().map(|p| (r.inlet_flowrate.unwrap_or(f64::NAN), p[i])),
        })
        .collect())
}

/// Runs a fresh detector over `samples`. The log covers every sample; at
/// most one alarm is raised.
pub fn run_samples(samples: &[Sample], cfg: &DetectorConfig) -> Result<DetectionRun> {
    cfg.validate()?;
    if samples.len() < cfg.window {
        return Err(Error::InsufficientData(format!(
            "stream of {} samples is shorter than the {}-sample window",
            samples.len(),
            cfg.window
        )));
    }
    let mut state = DetectorState::new();
    let mut log = Vec::with_capacity(samples.len());
    let mut alarm = None;
    for s in samples {
        if let Some((rec, fired)) = state.step(s, cfg) {
            log.push(rec);
            if fired.is_some() {
                alarm = fired;
            }
        }
    }
    Ok(DetectionRun { log, alarm, skipped: state.skipped() })
}

pub fn run_detection(stream: &[TelemetryRecord], observers: &ObserverPair, cfg: &DetectorConfig) -> Result<DetectionRun> {
    cfg.validate()?;
    if stream.len() < cfg.window {
        return Err(Error::InsufficientData(format!(
            "stream of {} samples is shorter than the {}-sample window",
            stream.len(),
            cfg.window
        )));
    }
    run_samples(&samples_for(stream, observers)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ordinal: usize, residual: f64) -> Sample {
        Sample { ordinal, observed: 8.0 + residual, predicted: 8.0, inlet_pressure: 1317.6, outlet_pressure: 1270.0, inlet: None }
    }

    #[test]
    fn index_values() {
        assert!((leak_index(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((leak_index(10.0) - 0.990148).abs() < 1e-6);
        assert!(leak_index(9.0) < 0.99 && leak_index(10.0) > 0.99);
        assert!(leak_index(1e9) < 1.0 + 1e-15);
    }

    #[test]
    fn quiet_stream_never_trips() {
        let cfg = DetectorConfig::for_mae(0.0);
        let samples: Vec<_> = (0..500).map(|i| sample(i, 0.005)).collect();
        let run = run_samples(&samples, &cfg).unwrap();
        assert!(run.alarm.is_none());
        assert!(run.log.iter().all(|r| r.counter == 0));
    }

    #[test]
    fn full_exceedance_alarms_twelve_after_onset() {
        let cfg = DetectorConfig::for_mae(0.0);
        let samples: Vec<_> = (0..100).map(|i| sample(i, if i >= 30 { 1.0 } else { 0.0 })).collect();
        let run = run_samples(&samples, &cfg).unwrap();
        let a = run.alarm.unwrap();
        assert_eq!(a.alarm_ordinal, 42);
        assert_eq!(a.ordinal, 42);
        assert_eq!(a.minutes_to_detect, 20.0);
        assert!((a.leak_percent - 100.0 / 9.0).abs() < 1e-9);
        assert!(a.location.is_none());
    }

    #[test]
    fn appendix_accounting() {
        let cfg = DetectorConfig::for_mae(0.0);
        assert_eq!(cfg.minutes_to_detect(40), 16.0);
        assert_eq!(cfg.minutes_to_detect(31), 0.0);
    }

    #[test]
    fn alarm_latches() {
        let cfg = DetectorConfig::for_mae(0.0);
        let mut st = DetectorState::new();
        let mut alarms = 0;
        for i in 0..300 {
            if let Some((_, Some(_))) = st.step(&sample(i, 1.0), &cfg) {
                alarms += 1;
            }
        }
        assert_eq!(alarms, 1);
        st.reset();
        assert!(st.alarm().is_none());
    }

    #[test]
    fn non_finite_samples_are_skipped() {
        let cfg = DetectorConfig::for_mae(0.0);
        let mut st = DetectorState::new();
        assert!(st.step(&Sample { observed: f64::NAN, ..sample(0, 0.0) }, &cfg).is_none());
        assert_eq!(st.skipped(), 1);
        assert_eq!(st.processed(), 0);
    }

    #[test]
    fn short_stream_rejected() {
        let cfg = DetectorConfig::for_mae(0.0);
        let samples: Vec<_> = (0..10).map(|i| sample(i, 0.0)).collect();
        assert!(matches!(run_samples(&samples, &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn sizing_and_localization() {
        assert_eq!(estimate_leak_size(8.0, 8.0).unwrap(), 0.0);
        assert!((estimate_leak_size(9.0, 8.1).unwrap() - 10.0).abs() < 1e-12);
        assert!(estimate_leak_size(0.0, 1.0).is_err());
        assert_eq!(localize(1.0, 1.0).unwrap(), 0.5);
        assert!((localize(1.0, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(localize(0.0, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig { threshold: 0.0, ..DetectorConfig::for_mae(0.0) }.validate().is_err());
        assert!(DetectorConfig { index_trip: 1.0, ..DetectorConfig::for_mae(0.0) }.validate().is_err());
        assert_eq!(DetectorConfig::appendix(0.02).window, 20);
    }
}
