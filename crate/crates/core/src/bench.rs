//! Sensitivity, accuracy, reliability and robustness benchmarking over
//! injected leak sweeps, with text, CSV and key-value report renderings.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::TelemetryRecord;
use crate::detect::{run_detection, DetectorConfig, ObserverPair};
use crate::models::Metrics;
use crate::rng::derive_seed;
use crate::simulate::{add_noise, inject_leak, synth_stream, LeakScenario, NoiseModel, OperatingProfile, PipelineSpec};
use crate::{Error, Result};

pub const DEFAULT_SIZES: [f64; 4] = [0.001, 0.01, 0.05, 0.1];
pub const DEFAULT_LOCATIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Leak fractions; 0 is allowed as a no-leak control row.
    pub sizes: Vec<f64>,
    pub locations: Vec<f64>,
    pub master_seed: u64,
    pub budget_minutes: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            locations: DEFAULT_LOCATIONS.to_vec(),
            master_seed: 12,
            budget_minutes: 240.0,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.locations.is_empty() {
            return Err(Error::InvalidParameter("sweep sizes and locations must be non-empty".into()));
        }
        for &q in &self.sizes {
            if !(0.0..=0.5).contains(&q) {
                return Err(Error::InvalidParameter(format!("sweep size {q} outside [0, 0.5]")));
            }
        }
        for &l in &self.locations {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::InvalidParameter(format!("sweep location {l} outside (0, 1)")));
            }
        }
        if !(self.budget_minutes > 0.0) {
            return Err(Error::InvalidParameter("time budget must be positive".into()));
        }
        Ok(())
    }

    pub fn cell_seed(&self, size_index: usize, location_index: usize) -> u64 {
        derive_seed(self.master_seed, &[size_index as u64, location_index as u64])
    }

    /// Samples needed so that any alarm inside the budget can be observed.
    pub fn stream_len(&self, det: &DetectorConfig) -> usize {
        let budget_samples = (self.budget_minutes / det.cadence_minutes).ceil() as usize;
        det.onset_index + det.accounting_offset + budget_samples + 1
    }
}

/// Generates the no-leak base stream for a sweep.
pub fn base_stream(
    spec: &PipelineSpec,
    profile: &OperatingProfile,
    noise: &NoiseModel,
    grid: &SweepGrid,
    det: &DetectorConfig,
) -> Result<Vec<TelemetryRecord>> {
    synth_stream(spec, grid.stream_len(det), profile, noise, derive_seed(grid.master_seed, &[u64::MAX]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CellOutcome {
    Detected { minutes: f64, ordinal: usize, leak_percent: f64, location: Option<f64> },
    NotDetected,
    /// The alarm fired before any leak was present: a false alarm, not a detection.
    PreOnsetAlarm { alarm_ordinal: usize },
    Infeasible { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub size: f64,
    pub location: f64,
    pub seed: u64,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn minutes(&self) -> Option<f64> {
        match self.outcome {
            CellOutcome::Detected { minutes, .. } => Some(minutes),
            _ => None,
        }
    }
}

/// All cells of one model's sweep, size-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFragment {
    pub model: String,
    pub grid: SweepGrid,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: f64,
    pub total: usize,
    pub detected: usize,
    pub infeasible: usize,
    pub pre_onset_alarms: usize,
    /// Mean over detected cells only.
    pub mean_minutes: Option<f64>,
    /// Mean over feasible cells with misses counted at the budget.
    pub censored_mean_minutes: Option<f64>,
    /// Mean `|estimate − truth|/truth` in percent over detected cells.
    pub localization_error: Option<f64>,
    /// Mean `|estimated % − true %|` in percentage points.
    pub size_error: Option<f64>,
}

impl SizeSummary {
    pub fn coverage(&self) -> f64 {
        let feasible = self.total - self.infeasible;
        if feasible == 0 {
            0.0
        } else {
            self.detected as f64 / feasible as f64
        }
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SweepFragment {
    pub fn summaries(&self) -> Vec<SizeSummary> {
        self.grid.sizes.iter().map(|&q| self.summary_for(q)).collect()
    }

    fn summary_for(&self, size: f64) -> SizeSummary {
        let cells: Vec<&CellResult> = self.cells.iter().filter(|c| c.size == size).collect();
        let mut minutes = Vec::new();
        let mut censored = Vec::new();
        let mut loc_err = Vec::new();
        let mut size_err = Vec::new();
        let mut infeasible = 0;
        let mut pre_onset = 0;
        for c in &cells {
            match &c.outcome {
                CellOutcome::Detected { minutes: m, leak_percent, location, .. } => {
                    minutes.push(*m);
                    censored.push(*m);
                    if let Some(l) = location {
                        loc_err.push((l - c.location).abs() / c.location * 100.0);
                    }
                    if size > 0.0 {
                        size_err.push((leak_percent - size * 100.0).abs());
                    }
                }
                CellOutcome::NotDetected => censored.push(self.grid.budget_minutes),
                CellOutcome::PreOnsetAlarm { .. } => {
                    censored.push(self.grid.budget_minutes);
                    pre_onset += 1;
                }
                CellOutcome::Infeasible { .. } => infeasible += 1,
            }
        }
        SizeSummary {
            size,
            total: cells.len(),
            detected: minutes.len(),
            infeasible,
            pre_onset_alarms: pre_onset,
            mean_minutes: mean(&minutes),
            censored_mean_minutes: mean(&censored),
            localization_error: if size > 0.0 { mean(&loc_err) } else { None },
            size_error: mean(&size_err),
        }
    }

    /// Smallest size with a detection, and the lowest location detected at it.
    pub fn min_detectable(&self) -> Option<(f64, f64)> {
        self.cells
            .iter()
            .filter(|c| c.size > 0.0 && c.minutes().is_some())
            .map(|c| (c.size, c.location))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
    }

    /// Censored mean minutes over all leak sizes (the control row excluded).
    pub fn overall_censored_mean(&self) -> Option<f64> {
        let v: Vec<f64> =
            self.summaries().iter().filter(|s| s.size > 0.0).filter_map(|s| s.censored_mean_minutes).collect();
        mean(&v)
    }

    pub fn overall_coverage(&self) -> f64 {
        let s: Vec<SizeSummary> = self.summaries().into_iter().filter(|s| s.size > 0.0).collect();
        let det: usize = s.iter().map(|x| x.detected).sum();
        let feas: usize = s.iter().map(|x| x.total - x.infeasible).sum();
        if feas == 0 {
            0.0
        } else {
            det as f64 / feas as f64
        }
    }

    /// Cells whose alarm fired before the leak was present.
    pub fn pre_onset_alarms(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c.outcome, CellOutcome::PreOnsetAlarm { .. })).count()
    }

    pub fn mean_localization_error(&self) -> Option<f64> {
        let v: Vec<f64> = self.summaries().iter().filter_map(|s| s.localization_error).collect();
        mean(&v)
    }

    pub fn mean_size_error(&self) -> Option<f64> {
        let v: Vec<f64> = self.summaries().iter().filter_map(|s| s.size_error).collect();
        mean(&v)
    }
}

/// Injects every (size, location) cell into `base`, runs detection and
/// records the outcome. When `perturb` is given, each injected stream gets
/// fresh measurement noise drawn from the cell seed.
pub fn run_sweep(
    label: &str,
    observers: &ObserverPair,
    grid: &SweepGrid,
    spec: &PipelineSpec,
    base: &[TelemetryRecord],
    det: &DetectorConfig,
    perturb: Option<&NoiseModel>,
) -> Result<SweepFragment> {
    grid.validate()?;
    det.validate()?;
    if base.len() < det.window {
        return Err(Error::InsufficientData(format!(
            "base stream of {} samples is shorter than the {}-sample window",
            base.len(),
            det.window
        )));
    }
    let jobs: Vec<(usize, usize)> =
        (0..grid.sizes.len()).flat_map(|i| (0..grid.locations.len()).map(move |j| (i, j))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<CellResult> {
            let (size, location) = (grid.sizes[i], grid.locations[j]);
            let seed = grid.cell_seed(i, j);
            let scenario = if size == 0.0 {
                LeakScenario::no_leak()
            } else {
                LeakScenario::new(size, location, det.onset_index)?
            };
            let injected = match inject_leak(base, spec, &scenario) {
                Ok(s) => s,
                Err(Error::Infeasible { ordinal, reason }) => {
                    let reason = format!("ordinal {ordinal}: {reason}");
                    return Ok(CellResult { size, location, seed, outcome: CellOutcome::Infeasible { reason } });
                }
                Err(e) => return Err(e),
            };
            let stream = match perturb {
                Some(n) => add_noise(&injected, n, seed)?,
                None => injected,
            };
            let run = run_detection(&stream, observers, det)?;
            let outcome = match run.alarm {
                Some(a) if a.alarm_ordinal < det.onset_index || size == 0.0 => {
                    CellOutcome::PreOnsetAlarm { alarm_ordinal: a.alarm_ordinal }
                }
                Some(a) if a.minutes_to_detect <= grid.budget_minutes => CellOutcome::Detected {
                    minutes: a.minutes_to_detect,
                    ordinal: a.ordinal,
                    leak_percent: a.leak_percent,
                    location: a.location,
                },
                _ => CellOutcome::NotDetected,
            };
            Ok(CellResult { size, location, seed, outcome })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepFragment { model: label.to_string(), grid: grid.clone(), cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalseAlarmSummary {
    pub streams: usize,
    pub samples: usize,
    pub alarms: usize,
    pub flagged: usize,
}

impl FalseAlarmSummary {
    pub fn rate(&self) -> f64 {
        if self.streams == 0 {
            0.0
        } else {
            self.alarms as f64 / self.streams as f64
        }
    }
}

/// Runs the detector over `streams` independently seeded clean streams.
#[allow(clippy::too_many_arguments)]
pub fn false_alarm_check(
    observers: &ObserverPair,
    det: &DetectorConfig,
    spec: &PipelineSpec,
    profile: &OperatingProfile,
    noise: &NoiseModel,
    streams: usize,
    samples: usize,
    seed: u64,
) -> Result<FalseAlarmSummary> {
    let runs = (0..streams)
        .into_par_iter()
        .map(|k| -> Result<(bool, usize)> {
            let s = synth_stream(spec, samples, profile, noise, derive_seed(seed, &[k as u64]))?;
            let r = run_detection(&s, observers, det)?;
            Ok((r.alarm.is_some(), r.flagged()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FalseAlarmSummary {
        streams,
        samples,
        alarms: runs.iter().filter(|r| r.0).count(),
        flagged: runs.iter().map(|r| r.1).sum(),
    })
}

/// Relative increase of the overall censored mean time-to-detect from the
/// clean sweep to the noisy one.
pub fn robustness_degradation(clean: &SweepFragment, noisy: &SweepFragment) -> Option<f64> {
    let (a, b) = (clean.overall_censored_mean()?, noisy.overall_censored_mean()?);
    (a > 0.0).then(|| (b - a) / a)
}

/// Literature comparison values for the transient-model baseline. Never
/// recomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttmRow {
    pub size: f64,
    pub minutes: f64,
    pub localization_error: Option<f64>,
}

const RTTM: [RttmRow; 4] = [
    RttmRow { size: 0.001, minutes: 173.0, localization_error: None },
    RttmRow { size: 0.01, minutes: 100.0, localization_error: Some(10.0) },
    RttmRow { size: 0.05, minutes: 36.0, localization_error: Some(8.0) },
    RttmRow { size: 0.1, minutes: 32.0, localization_error: Some(7.0) },
];

pub fn rttm_reference() -> &'static [RttmRow] {
    &RTTM
}

fn rttm_for(size: f64) -> Option<&'static RttmRow> {
    RTTM.iter().find(|r| r.size == size)
}

/// Everything the report knows about one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub sweep: SweepFragment,
    pub noisy_sweep: Option<SweepFragment>,
    pub false_alarms: Option<FalseAlarmSummary>,
    pub metrics: Option<Metrics>,
}

impl ModelEntry {
    pub fn robustness(&self) -> Option<f64> {
        robustness_degradation(&self.sweep, self.noisy_sweep.as_ref()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub label: String,
    pub sensitivity: usize,
    pub accuracy: usize,
    pub robustness: usize,
    pub reliability: usize,
    pub total: usize,
}

/// Competition ranking (1, 1, 3, …) of keys compared lexicographically;
/// lower is better and missing values rank last.
fn competition_ranks(keys: &[Vec<f64>]) -> Vec<usize> {
    let cmp = |a: &Vec<f64>, b: &Vec<f64>| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    keys.iter().map(|k| 1 + keys.iter().filter(|o| cmp(o, k).is_lt()).count()).collect()
}

fn or_inf(v: Option<f64>) -> f64 {
    v.filter(|x| x.is_finite()).unwrap_or(f64::INFINITY)
}

/// Ranks models on the four SARR metrics; ties share the lower rank.
pub fn sarr_rank(entries: &[ModelEntry]) -> Result<Vec<RankRow>> {
    if entries.len() < 2 {
        return Err(Error::InsufficientData("ranking needs at least two models".into()));
    }
    let sens: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| vec![or_inf(e.sweep.min_detectable().map(|m| m.0)), or_inf(e.sweep.overall_censored_mean())])
        .collect();
    let acc: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| vec![or_inf(e.sweep.mean_localization_error()), or_inf(e.sweep.mean_size_error())])
        .collect();
    let rob: Vec<Vec<f64>> = entries.iter().map(|e| vec![or_inf(e.robustness())]).collect();
    let rel: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| {
            vec![
                or_inf(e.false_alarms.map(|f| f.rate())),
                e.sweep.pre_onset_alarms() as f64,
                -e.sweep.overall_coverage(),
            ]
        })
        .collect();
    let (s, a, r, l) = (competition_ranks(&sens), competition_ranks(&acc), competition_ranks(&rob), competition_ranks(&rel));
    Ok(entries
        .iter()
        .enumerate()
        .map(|(i, e)| RankRow {
            label: e.label.clone(),
            sensitivity: s[i],
            accuracy: a[i],
            robustness: r[i],
            reliability: l[i],
            total: s[i] + a[i] + r[i] + l[i],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub entries: Vec<ModelEntry>,
    pub ranks: Option<Vec<RankRow>>,
}

fn pct(size: f64) -> String {
    format!("{}", size * 100.0)
}

fn opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "N/A".into(),
    }
}

impl BenchmarkReport {
    /// Assembles a report; ranks are computed when two or more models exist.
    pub fn new(entries: Vec<ModelEntry>) -> Self {
        let ranks = sarr_rank(&entries).ok();
        Self { entries, ranks }
    }

    fn sizes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for e in &self.entries {
            for &q in &e.sweep.grid.sizes {
                if !v.contains(&q) {
                    v.push(q);
                }
            }
        }
        v.sort_by(f64::total_cmp);
        v
    }

    fn summary(&self, e: &ModelEntry, q: f64) -> Option<SizeSummary> {
        e.sweep.summaries().into_iter().find(|s| s.size == q)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let sizes = self.sizes();
        let table = |s: &mut String, title: &str, cell: &dyn Fn(&ModelEntry, f64) -> String, rttm: &dyn Fn(f64) -> String| {
            let _ = writeln!(s, "{title}");
            let _ = write!(s, "{:<14}", "Leak Size (%)");
            for e in &self.entries {
                let _ = write!(s, "{:>12}", e.label);
            }
            let _ = writeln!(s, "{:>12}", "RTTM");
            for &q in &sizes {
                let _ = write!(s, "{:<14}", pct(q));
                for e in &self.entries {
                    let _ = write!(s, "{:>12}", cell(e, q));
                }
                let _ = writeln!(s, "{:>12}", rttm(q));
            }
            s.push('\n');
        };
        let rttm_min = |q: f64| rttm_for(q).map_or("-".into(), |r| format!("{:.0}", r.minutes));
        let rttm_loc = |q: f64| match rttm_for(q) {
            Some(r) => opt(r.localization_error, 0),
            None => "-".into(),
        };
        table(
            &mut s,
            "Average time to detection (minutes; N/A = not detected within budget)",
            &|e, q| self.summary(e, q).map_or("-".into(), |x| opt(x.mean_minutes, 1)),
            &rttm_min,
        );
        table(
            &mut s,
            "Detection coverage (%)",
            &|e, q| self.summary(e, q).map_or("-".into(), |x| format!("{:.0}", x.coverage() * 100.0)),
            &|_| "-".into(),
        );
        table(
            &mut s,
            "Censored mean time to detection (misses counted at budget)",
            &|e, q| self.summary(e, q).map_or("-".into(), |x| opt(x.censored_mean_minutes, 1)),
            &|_| "-".into(),
        );
        table(
            &mut s,
            "Average localization error (%)",
            &|e, q| self.summary(e, q).map_or("-".into(), |x| opt(x.localization_error, 1)),
            &rttm_loc,
        );
        table(
            &mut s,
            "Average size error (percentage points)",
            &|e, q| self.summary(e, q).map_or("-".into(), |x| opt(x.size_error, 2)),
            &|_| "-".into(),
        );
        let _ = writeln!(s, "Minimum detectable leak");
        for e in &self.entries {
            match e.sweep.min_detectable() {
                Some((q, l)) => {
                    let _ = writeln!(s, "{:<8} size {}% at location {}", e.label, pct(q), l);
                }
                None => {
                    let _ = writeln!(s, "{:<8} none", e.label);
                }
            }
        }
        s.push('\n');
        if self.entries.iter().any(|e| e.false_alarms.is_some() || e.noisy_sweep.is_some()) {
            let _ = writeln!(s, "Reliability and robustness");
            for e in &self.entries {
                let fa = e.false_alarms.map_or("-".into(), |f| format!("{}/{} streams", f.alarms, f.streams));
                let rob = opt(e.robustness().map(|r| r * 100.0), 1);
                let _ = writeln!(
                    s,
                    "{:<8} false alarms {fa}; pre-onset sweep alarms {}; noise-doubling slowdown {rob}%",
                    e.label,
                    e.sweep.pre_onset_alarms()
                );
            }
            s.push('\n');
        }
        if let Some(ranks) = &self.ranks {
            let _ = writeln!(s, "SARR ranking (lower is better)");
            let _ = writeln!(
                s,
                "{:<10}{:>12}{:>10}{:>12}{:>13}{:>9}",
                "Model", "Sensitivity", "Accuracy", "Robustness", "Reliability", "Total"
            );
            for r in ranks {
                let _ = writeln!(
                    s,
                    "{:<10}{:>12}{:>10}{:>12}{:>13}{:>9}",
                    r.label, r.sensitivity, r.accuracy, r.robustness, r.reliability, r.total
                );
            }
        }
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = String::from(
            "model,size_pct,cells,detected,infeasible,pre_onset_alarms,mean_minutes,censored_mean_minutes,localization_error_pct,size_error_pts\n",
        );
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for e in &self.entries {
            for x in e.sweep.summaries() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    e.label,
                    pct(x.size),
                    x.total,
                    x.detected,
                    x.infeasible,
                    x.pre_onset_alarms,
                    f(x.mean_minutes),
                    f(x.censored_mean_minutes),
                    f(x.localization_error),
                    f(x.size_error)
                );
            }
        }
        for r in rttm_reference() {
            let _ = writeln!(s, "RTTM,{},,,,{:.6},,{},", pct(r.size), r.minutes, f(r.localization_error));
        }
        s
    }

    /// `key=value` lines for scripted checks.
    pub fn render_kv(&self) -> String {
        let mut s = String::new();
        let f = |v: Option<f64>| v.map_or("na".to_string(), |x| format!("{x:.6}"));
        for e in &self.entries {
            let m = &e.label;
            for x in e.sweep.summaries() {
                let q = pct(x.size);
                let _ = writeln!(s, "{m}.size.{q}.detected={}", x.detected);
                let _ = writeln!(s, "{m}.size.{q}.cells={}", x.total);
                let _ = writeln!(s, "{m}.size.{q}.mean_minutes={}", f(x.mean_minutes));
                let _ = writeln!(s, "{m}.size.{q}.censored_mean_minutes={}", f(x.censored_mean_minutes));
                let _ = writeln!(s, "{m}.size.{q}.localization_error={}", f(x.localization_error));
            }
            if let Some(fa) = e.false_alarms {
                let _ = writeln!(s, "{m}.false_alarms={}", fa.alarms);
            }
            let _ = writeln!(s, "{m}.pre_onset_alarms={}", e.sweep.pre_onset_alarms());
            let _ = writeln!(s, "{m}.min_detectable={}", f(e.sweep.min_detectable().map(|x| x.0)));
        }
        if let Some(ranks) = &self.ranks {
            for r in ranks {
                let _ = writeln!(s, "{}.sarr_total={}", r.label, r.total);
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(size: f64, location: f64, outcome: CellOutcome) -> CellResult {
        CellResult { size, location, seed: 0, outcome }
    }

    fn det(minutes: f64, location: f64) -> CellOutcome {
        CellOutcome::Detected { minutes, ordinal: 0, leak_percent: 1.0, location: Some(location) }
    }

    fn fragment(label: &str, cells: Vec<CellResult>) -> SweepFragment {
        SweepFragment {
            model: label.into(),
            grid: SweepGrid { sizes: vec![0.01, 0.05], locations: vec![0.5, 0.25], ..Default::default() },
            cells,
        }
    }

    fn entry(label: &str, scale: f64) -> ModelEntry {
        let sweep = fragment(
            label,
            vec![
                cell(0.01, 0.5, det(20.0 * scale, 0.55)),
                cell(0.01, 0.25, CellOutcome::NotDetected),
                cell(0.05, 0.5, det(10.0 * scale, 0.5)),
                cell(0.05, 0.25, CellOutcome::Infeasible { reason: "x".into() }),
            ],
        );
        ModelEntry { label: label.into(), sweep, noisy_sweep: None, false_alarms: None, metrics: None }
    }

    #[test]
    fn summaries_account_for_every_cell() {
        let e = entry("A", 1.0);
        let s = e.sweep.summaries();
        assert_eq!(s[0].total, 2);
        assert_eq!(s[0].detected, 1);
        assert_eq!(s[0].mean_minutes, Some(20.0));
        assert_eq!(s[0].censored_mean_minutes, Some(130.0));
        assert!((s[0].localization_error.unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(s[1].infeasible, 1);
        assert_eq!(s[1].coverage(), 1.0);
        assert_eq!(e.sweep.min_detectable(), Some((0.01, 0.5)));
    }

    #[test]
    fn identical_models_share_ranks() {
        let r = sarr_rank(&[entry("A", 1.0), entry("B", 1.0)]).unwrap();
        assert_eq!(r[0].total, r[1].total);
        assert_eq!(r[0].sensitivity, 1);
        assert_eq!(r[1].sensitivity, 1);
    }

    #[test]
    fn competition_ranking() {
        assert_eq!(competition_ranks(&[vec![1.0], vec![1.0], vec![0.5], vec![2.0]]), [2, 2, 1, 4]);
    }

    #[test]
    fn rttm_constants() {
        assert_eq!(rttm_reference()[0].minutes, 173.0);
        assert_eq!(rttm_reference()[3].localization_error, Some(7.0));
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid { sizes: vec![], ..Default::default() }.validate().is_err());
        assert!(SweepGrid { locations: vec![1.0], ..Default::default() }.validate().is_err());
        assert!(SweepGrid::default().validate().is_ok());
        let det = DetectorConfig::for_mae(0.01);
        assert_eq!(SweepGrid::default().stream_len(&det), 153);
    }

    #[test]
    fn rendering_is_stable() {
        let rep = BenchmarkReport::new(vec![entry("A", 1.0), entry("B", 2.0)]);
        assert_eq!(rep.render_text(), rep.render_text());
        assert!(rep.render_text().contains("N/A") || rep.render_text().contains("20.0"));
        assert!(rep.render_csv().lines().count() > 4);
        assert!(rep.render_kv().contains("A.size.1.detected=1"));
    }
}
