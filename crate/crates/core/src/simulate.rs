//! Synthetic pipeline telemetry and leak injection through the general flow
//! equation `Q = c·√(P_in² − P_out²)`.
//!
//! A leak of fraction `q` at fractional position `l` is modelled as two
//! segments in series: upstream of the leak the line carries `(1 + q)·Q`,
//! downstream it carries the metered outlet flow `Q`. The pair is equivalent
//! to one segment with constant `c·F_l`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::TelemetryRecord;
use crate::rng::derived_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub length_miles: f64,
    pub diameter_in: f64,
    pub roughness_in: f64,
    /// mmscm per psia.
    pub flow_constant: f64,
    pub sampling_interval_min: f64,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self { length_miles: 6.84, diameter_in: 21.0, roughness_in: 0.002, flow_constant: 0.0244, sampling_interval_min: 2.0 }
    }
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length_miles),
            ("diameter", self.diameter_in),
            ("roughness", self.roughness_in),
            ("flow_constant", self.flow_constant),
            ("sampling_interval", self.sampling_interval_min),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("pipeline {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Steady outlet pressure for inlet pressure `p_in` and flow `q`.
    pub fn outlet_pressure(&self, p_in: f64, q: f64) -> Option<f64> {
        let r = p_in * p_in - (q / self.flow_constant).powi(2);
        (r >= 0.0).then(|| r.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakScenario {
    pub q_ld: f64,
    pub l_ld: f64,
    pub onset_index: usize,
}

pub const DEFAULT_ONSET: usize = 30;

impl LeakScenario {
    pub fn new(q_ld: f64, l_ld: f64, onset_index: usize) -> Result<Self> {
        if !(0.0..=0.5).contains(&q_ld) {
            return Err(Error::InvalidParameter(format!("leak size {q_ld} outside [0, 0.5]")));
        }
        if !(l_ld > 0.0 && l_ld < 1.0) {
            return Err(Error::InvalidParameter(format!("leak location {l_ld} outside (0, 1)")));
        }
        if onset_index < 1 {
            return Err(Error::InvalidParameter("onset index must be at least 1".into()));
        }
        Ok(Self { q_ld, l_ld, onset_index })
    }

    pub fn no_leak() -> Self {
        Self { q_ld: 0.0, l_ld: 0.5, onset_index: DEFAULT_ONSET }
    }
}

fn check_leak_args(q_ld: f64, l_ld: f64) -> Result<()> {
    if !(q_ld >= 0.0 && l_ld >= 0.0) {
        return Err(Error::InvalidParameter(format!("leak size {q_ld} and location {l_ld} must be non-negative")));
    }
    if q_ld > 0.5 || l_ld > 1.0 {
        return Err(Error::InvalidParameter(format!("leak size {q_ld} or location {l_ld} out of range")));
    }
    Ok(())
}

/// Unrounded leak correction factor `(1 + l·(q² + 2q))^(-1/2)`.
pub fn leak_factor_exact(q_ld: f64, l_ld: f64) -> Result<f64> {
    check_leak_args(q_ld, l_ld)?;
    Ok((1.0 + l_ld * (q_ld * q_ld + 2.0 * q_ld)).powf(-0.5))
}

/// Leak correction factor rounded to four decimals.
pub fn leak_factor(q_ld: f64, l_ld: f64) -> Result<f64> {
    Ok((leak_factor_exact(q_ld, l_ld)? * 1e4).round() / 1e4)
}

/// Replaces outlet pressure from `onset_index` on with the leaking-line value
/// and adds the leak flow to the inlet flow channel when present. Earlier
/// records get the baseline outlet pressure (the `P2` column, or the outlet
/// pressure itself when the stream has no baseline).
pub fn inject_leak(stream: &[TelemetryRecord], spec: &PipelineSpec, scenario: &LeakScenario) -> Result<Vec<TelemetryRecord>> {
    spec.validate()?;
    if scenario.q_ld == 0.0 || scenario.l_ld == 0.0 {
        return Ok(stream.to_vec());
    }
    let fl = leak_factor(scenario.q_ld, scenario.l_ld)?;
    let c = spec.flow_constant * fl;
    stream
        .iter()
        .map(|r| {
            let mut out = r.clone();
            let baseline = r.reference_outlet_pressure.unwrap_or(r.outlet_pressure);
            out.reference_outlet_pressure = Some(baseline);
            if r.index < scenario.onset_index {
                out.outlet_pressure = baseline;
                return Ok(out);
            }
            let radicand = r.inlet_pressure.powi(2) - (r.flowrate / c).powi(2);
            if !(radicand >= 0.0) {
                return Err(Error::Infeasible {
                    ordinal: r.index,
                    reason: format!(
                        "leak q={} l={} needs negative squared outlet pressure {radicand:.3}",
                        scenario.q_ld, scenario.l_ld
                    ),
                });
            }
            out.outlet_pressure = radicand.sqrt();
            if let Some(qin) = r.inlet_flowrate {
                out.inlet_flowrate = Some(qin + scenario.q_ld * r.flowrate);
            }
            Ok(out)
        })
        .collect()
}

/// Field telemetry standard deviations (inlet P, inlet T, outlet P, outlet T,
/// outlet flow, inlet flow), the scale reference for measurement noise.
pub const TABLE_STDDEVS: NoiseModel = NoiseModel {
    inlet_pressure: 11.40,
    inlet_temperature: 6.25,
    outlet_pressure: 24.16,
    outlet_temperature: 2.35,
    flowrate: 1.64,
    inlet_flowrate: 3.26,
    spike_rate: 0.0,
    spike_amplitude: 0.0,
};

/// Measurement noise: independent zero-mean Gaussian noise per channel
/// (stddevs), plus rare single-sample spikes on the two flow meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub inlet_pressure: f64,
    pub inlet_temperature: f64,
    pub outlet_pressure: f64,
    pub outlet_temperature: f64,
    pub flowrate: f64,
    pub inlet_flowrate: f64,
    /// Probability that a flow reading is a spike.
    pub spike_rate: f64,
    /// Stddev of the spike offset.
    pub spike_amplitude: f64,
}

/// Default Gaussian noise as a fraction of [`TABLE_STDDEVS`].
pub const DEFAULT_NOISE_FRACTION: f64 = 0.0012;

impl Default for NoiseModel {
    fn default() -> Self {
        Self { spike_rate: 0.0004, spike_amplitude: 0.6, ..TABLE_STDDEVS.scaled(DEFAULT_NOISE_FRACTION) }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        TABLE_STDDEVS.scaled(0.0)
    }

    /// Multiplies every stddev and the spike amplitude by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            inlet_pressure: self.inlet_pressure * k,
            inlet_temperature: self.inlet_temperature * k,
            outlet_pressure: self.outlet_pressure * k,
            outlet_temperature: self.outlet_temperature * k,
            flowrate: self.flowrate * k,
            inlet_flowrate: self.inlet_flowrate * k,
            spike_rate: self.spike_rate,
            spike_amplitude: self.spike_amplitude * k,
        }
    }

    fn channels(&self) -> [f64; 6] {
        [
            self.inlet_pressure,
            self.inlet_temperature,
            self.outlet_pressure,
            self.outlet_temperature,
            self.flowrate,
            self.inlet_flowrate,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let mut all = self.channels().to_vec();
        all.push(self.spike_amplitude);
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidParameter("noise stddevs must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.spike_rate) {
            return Err(Error::InvalidParameter(format!("spike rate {} outside [0, 1]", self.spike_rate)));
        }
        Ok(())
    }

    /// Draws one offset per channel, in channel order.
    fn draw<R: Rng>(&self, rng: &mut R) -> [f64; 6] {
        let mut e = [0.0; 6];
        for (k, s) in self.channels().into_iter().enumerate() {
            if s > 0.0 {
                e[k] = Normal::new(0.0, s).expect("validated stddev").sample(rng);
            }
        }
        if self.spike_rate > 0.0 && self.spike_amplitude > 0.0 {
            let spike = Normal::new(0.0, self.spike_amplitude).expect("validated amplitude");
            for k in [4, 5] {
                if rng.random::<f64>() < self.spike_rate {
                    e[k] += spike.sample(rng);
                }
            }
        }
        e
    }
}

/// Shape of the underlying (noise-free) operating conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingProfile {
    pub inlet_pressure: f64,
    /// Stationary stddev and lag-1 correlation of the inlet pressure jitter.
    pub inlet_jitter: f64,
    pub inlet_jitter_corr: f64,
    /// Target mean flow; the generated series is recentred onto it.
    pub flow_mean: f64,
    pub flow_min: f64,
    pub flow_max: f64,
    /// Demand follows straight lines between uniform random knots, clamped to
    /// `[flow_min, flow_max]`; knot spacing is uniform in this range (samples).
    pub knot_spacing: (usize, usize),
    /// Expected number of short demand transients per sample.
    pub transient_rate: f64,
    pub transient_amplitude: f64,
    pub transient_duration: (usize, usize),
    /// Fraction of a flow change the line-pack-damped flow seen by the
    /// pressures absorbs per sample (1 = no lag).
    pub line_pack_response: f64,
    pub inlet_temperature: f64,
    pub diurnal_amplitude: f64,
    pub diurnal_period: f64,
    pub inlet_temperature_wander: f64,
    pub outlet_temperature: f64,
    pub outlet_temperature_coupling: f64,
    pub outlet_temperature_wander: f64,
    /// Lag-1 correlation of the temperature wander processes.
    pub wander_corr: f64,
}

impl Default for OperatingProfile {
    fn default() -> Self {
        Self {
            inlet_pressure: 1317.60,
            inlet_jitter: 0.01,
            inlet_jitter_corr: 0.99,
            flow_mean: 8.54,
            flow_min: 5.0,
            flow_max: 12.0,
            knot_spacing: (60, 240),
            transient_rate: 1.0 / 400.0,
            transient_amplitude: 1.0,
            transient_duration: (2, 5),
            line_pack_response: 1.0,
            inlet_temperature: 90.71,
            diurnal_amplitude: 5.0,
            diurnal_period: 720.0,
            inlet_temperature_wander: 2.0,
            outlet_temperature: 83.56,
            outlet_temperature_coupling: 0.35,
            outlet_temperature_wander: 0.8,
            wander_corr: 0.99,
        }
    }
}

impl OperatingProfile {
    /// Every condition held fixed at the given flow.
    pub fn constant(flow: f64) -> Self {
        Self {
            inlet_jitter: 0.0,
            flow_mean: flow,
            flow_min: flow,
            flow_max: flow,
            transient_rate: 0.0,
            line_pack_response: 1.0,
            diurnal_amplitude: 0.0,
            inlet_temperature_wander: 0.0,
            outlet_temperature_wander: 0.0,
            ..Self::default()
        }
    }
}

fn recentre(v: &mut [f64], target: f64) {
    if v.is_empty() {
        return;
    }
    let shift = target - v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x += shift);
}

fn ar1<R: Rng>(rng: &mut R, n: usize, std: f64, corr: f64) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let innov = Normal::new(0.0, std * (1.0 - corr * corr).sqrt()).expect("finite stddev");
    let mut x = Normal::new(0.0, std).expect("finite stddev").sample(rng);
    (0..n)
        .map(|_| {
            let out = x;
            x = corr * x + innov.sample(rng);
            out
        })
        .collect()
}

const KNOT_OVERSHOOT: f64 = 0.15;

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let w = hi - lo;
    let t = (v - lo).rem_euclid(2.0 * w);
    lo + if t > w { 2.0 * w - t } else { t }
}

fn demand<R: Rng>(rng: &mut R, n: usize, p: &OperatingProfile) -> Vec<f64> {
    let (lo, hi) = (p.flow_min.min(p.flow_max), p.flow_max.max(p.flow_min));
    // Knots overshoot the range and the series is folded back at the limits,
    // so every long stream covers the edges densely without flat plateaus.
    let m = KNOT_OVERSHOOT * (hi - lo);
    let draw = |rng: &mut R| if hi > lo { rng.random_range(lo - m..=hi + m) } else { lo };
    let mut q = Vec::with_capacity(n);
    let mut level = draw(rng);
    while q.len() < n {
        let span = rng.random_range(p.knot_spacing.0.max(1)..=p.knot_spacing.1.max(p.knot_spacing.0.max(1)));
        let next = draw(rng);
        for k in 0..span {
            q.push(level + (next - level) * k as f64 / span as f64);
        }
        level = next;
    }
    q.truncate(n);
    recentre(&mut q, p.flow_mean);
    if p.transient_rate > 0.0 {
        let amp = Normal::new(0.0, p.transient_amplitude).expect("finite amplitude");
        let mut t = 0;
        while t < n {
            if rng.random::<f64>() < p.transient_rate {
                let d = rng.random_range(p.transient_duration.0.max(1)..=p.transient_duration.1.max(1));
                let a = amp.sample(rng);
                for v in q.iter_mut().skip(t).take(d) {
                    *v += a;
                }
                t += d;
            }
            t += 1;
        }
    }
    q.iter_mut().for_each(|v| *v = reflect(*v, lo, hi));
    q
}

/// Generates `duration` samples of no-leak telemetry. The `P2` baseline
/// column equals the measured outlet pressure and the inlet flow channel is
/// populated. Deterministic in `seed`.
pub fn synth_stream(
    spec: &PipelineSpec,
    duration: usize,
    profile: &OperatingProfile,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<TelemetryRecord>> {
    spec.validate()?;
    if duration < 1 {
        return Err(Error::InvalidParameter("duration must be at least one sample".into()));
    }
    noise.validate()?;
    let n = duration;
    let mut rng_q = derived_rng(seed, &[0]);
    let mut rng_p = derived_rng(seed, &[1]);
    let mut rng_t = derived_rng(seed, &[2]);
    let mut rng_n = derived_rng(seed, &[3]);

    let q = demand(&mut rng_q, n, profile);
    let mut pin = ar1(&mut rng_p, n, profile.inlet_jitter, profile.inlet_jitter_corr);
    recentre(&mut pin, 0.0);
    pin.iter_mut().for_each(|v| *v += profile.inlet_pressure);

    let phase = rng_t.random_range(0.0..std::f64::consts::TAU);
    let w_in = ar1(&mut rng_t, n, profile.inlet_temperature_wander, profile.wander_corr);
    let w_out = ar1(&mut rng_t, n, profile.outlet_temperature_wander, profile.wander_corr);
    let mut tin: Vec<f64> = (0..n)
        .map(|t| {
            profile.diurnal_amplitude * (std::f64::consts::TAU * t as f64 / profile.diurnal_period + phase).sin() + w_in[t]
        })
        .collect();
    let mut tout: Vec<f64> = tin.iter().zip(&w_out).map(|(a, b)| profile.outlet_temperature_coupling * a + b).collect();
    recentre(&mut tin, profile.inlet_temperature);
    recentre(&mut tout, profile.outlet_temperature);

    let mut out = Vec::with_capacity(n);
    let alpha = profile.line_pack_response.clamp(1e-6, 1.0);
    let mut q_eff = q[0];
    for t in 0..n {
        q_eff += alpha * (q[t] - q_eff);
        let pout = spec.outlet_pressure(pin[t], q_eff).ok_or_else(|| Error::Infeasible {
            ordinal: t,
            reason: format!("flow {q_eff:.3} exceeds line capacity at inlet pressure {:.2}", pin[t]),
        })?;
        let e = noise.draw(&mut rng_n);
        let measured_pout = pout + e[2];
        out.push(TelemetryRecord {
            index: t,
            inlet_pressure: pin[t] + e[0],
            inlet_temperature: tin[t] + e[1],
            outlet_pressure: measured_pout,
            outlet_temperature: tout[t] + e[3],
            flowrate: q[t] + e[4],
            inlet_flowrate: Some(q_eff + e[5]),
            reference_outlet_pressure: Some(measured_pout),
        });
    }
    Ok(out)
}

/// Adds independent measurement noise to every channel of an existing
/// stream. The `P2` baseline is left untouched.
pub fn add_noise(stream: &[TelemetryRecord], noise: &NoiseModel, seed: u64) -> Result<Vec<TelemetryRecord>> {
    noise.validate()?;
    let mut rng = derived_rng(seed, &[4]);
    Ok(stream
        .iter()
        .map(|r| {
            let e = noise.draw(&mut rng);
            let mut o = r.clone();
            o.inlet_pressure += e[0];
            o.inlet_temperature += e[1];
            o.outlet_pressure += e[2];
            o.outlet_temperature += e[3];
            o.flowrate += e[4];
            o.inlet_flowrate = o.inlet_flowrate.map(|v| v + e[5]);
            o
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub flow_constant: f64,
    /// Fit R² (`None` when the flow has no variance).
    pub r2: Option<f64>,
    pub n_used: usize,
}

/// Least-squares fit through the origin of flow against `√(P_in² − P_out²)`.
pub fn calibrate_flow_constant(stream: &[TelemetryRecord]) -> Result<Calibration> {
    let pts: Vec<(f64, f64)> = stream
        .iter()
        .filter(|r| r.inlet_pressure > r.outlet_pressure)
        .map(|r| ((r.inlet_pressure.powi(2) - r.outlet_pressure.powi(2)).sqrt(), r.flowrate))
        .collect();
    if pts.is_empty() {
        return Err(Error::InsufficientData("no record has inlet pressure above outlet pressure".into()));
    }
    if pts.len() < 100 {
        return Err(Error::InsufficientData(format!("calibration needs 100 records with P_in > P_out, got {}", pts.len())));
    }
    let sxy: f64 = pts.iter().map(|(s, q)| s * q).sum();
    let sxx: f64 = pts.iter().map(|(s, _)| s * s).sum();
    let c = sxy / sxx;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|(_, q)| (q - mean).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|(s, q)| (q - c * s).powi(2)).sum();
    let r2 = (ss_tot > 1e-20 * pts.len() as f64 * mean * mean).then(|| 1.0 - ss_res / ss_tot);
    Ok(Calibration { flow_constant: c, r2, n_used: pts.len() })
}
