//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines always reach the terminal.
//! The process exits 0 after reporting unless `PIPELEAK_ACCEPTANCE_STRICT`
//! is set, in which case any FAIL makes it exit 1.

mod support;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use pipeleak::bench::{
    base_stream, false_alarm_check, run_sweep, BenchmarkReport, CellOutcome, FalseAlarmSummary, ModelEntry,
    SweepFragment, SweepGrid,
};
use pipeleak::dataio::{write_telemetry, FlowChannel, TelemetryRecord};
use pipeleak::detect::{leak_index, localize, run_samples, samples_for, DetectorConfig, ObserverPair, Sample};
use pipeleak::gasprops::{gas_viscosity, GasState};
use pipeleak::models::{
    train_observer, BoostingParams, Family, ForestParams, Hyperparams, KernelKind, MaxFeatures, MlpParams,
    RegressorModel, SvrParams, TrainConfig,
};
use pipeleak::rng::rng_from_seed;
use pipeleak::simulate::{
    inject_leak, leak_factor, synth_stream, LeakScenario, NoiseModel, OperatingProfile, PipelineSpec, DEFAULT_ONSET,
};
use rand::Rng;
use support::*;

const SEED: u64 = 12;
const TRAIN_SAMPLES: usize = 21_000;
const CLEAN_STREAMS: usize = 20;
const CLEAN_SAMPLES: usize = 5_000;

// Criterion 1
const Z_BAND: (f64, f64) = (0.70, 0.74);
const MU_BAND: (f64, f64) = (0.015, 0.025);
const MEAN_PRESSURE: f64 = 1317.60;
const MEAN_TEMPERATURE_F: f64 = 90.71;
const MEAN_SG: f64 = 0.63;
// Criterion 2
const SVR_TOL: f64 = 1e-4;
const GRADIENT_TOL: f64 = 1e-4;
const FUZZ_STEPS: usize = 100_000;
// Criterion 3: within a factor of ten of the best reported RMSE and MAE.
const R2_MIN: f64 = 0.99;
const RMSE_BAND: (f64, f64) = (0.0072, 0.72);
const MAE_BAND: (f64, f64) = (0.0034, 0.34);
// Criterion 5
const ONE_PERCENT_MINUTES: f64 = 120.0;
const TEN_PERCENT_MINUTES: f64 = 40.0;
const TENTH_PERCENT_MINUTES: f64 = 240.0;
// Criterion 6
const MIN_DELAY: usize = 12;
// Criterion 7
const ORACLE_TOL: f64 = 1e-6;
const MEAN_OUTLET_PRESSURE: f64 = 1269.96;
const OUTLET_TOL: f64 = 1.0;
// Criterion 8
const LOCALIZATION_MAX: f64 = 25.0;

const LIMIT_1: Duration = Duration::from_secs(1);
const LIMIT_2: Duration = Duration::from_secs(120);
const LIMIT_3: Duration = Duration::from_secs(600);
const LIMIT_4: Duration = Duration::from_secs(120);
const LIMIT_5: Duration = Duration::from_secs(300);
const LIMIT_6: Duration = Duration::from_secs(1);
const LIMIT_7: Duration = Duration::from_secs(1);
const LIMIT_8: Duration = Duration::from_secs(300);
const LIMIT_9: Duration = Duration::from_secs(60);
const LIMIT_10: Duration = Duration::from_secs(600);

const FAMILIES: [Family; 5] =
    [Family::DecisionTree, Family::RandomForest, Family::GradientBoosting, Family::Svr, Family::Mlp];

/// Tuning grids small enough for every family to train inside the
/// criterion 3 time limit on one core. The decision tree keeps its full grid.
fn acceptance_grid(family: Family) -> Vec<Hyperparams> {
    match family {
        Family::DecisionTree => family.default_grid(),
        Family::RandomForest => [10, 50, 100]
            .map(|n| {
                Hyperparams::RandomForest(ForestParams {
                    n_estimators: n,
                    max_features: MaxFeatures::All,
                    ..Default::default()
                })
            })
            .to_vec(),
        Family::GradientBoosting => [50, 200, 500]
            .map(|n| {
                Hyperparams::GradientBoosting(BoostingParams { learning_rate: 0.1, n_estimators: n, ..Default::default() })
            })
            .to_vec(),
        Family::Svr => [1.0, 10.0]
            .map(|c| Hyperparams::Svr(SvrParams { c, kernel: KernelKind::Rbf, epsilon: 0.01, ..Default::default() }))
            .to_vec(),
        Family::Mlp => [5, 10, 20]
            .map(|units| Hyperparams::Mlp(MlpParams { hidden: vec![units], alpha: 0.01, ..Default::default() }))
            .to_vec(),
    }
}

/// The inlet observer reuses the tuned outlet cell.
fn inlet_config(outlet: &RegressorModel) -> TrainConfig {
    TrainConfig {
        channel: FlowChannel::Inlet,
        grid: vec![outlet.hyperparams.clone()],
        folds: 2,
        ..TrainConfig::new(outlet.family)
    }
}

struct Verdicts {
    lines: Vec<(bool, String)>,
}

impl Verdicts {
    fn record(&mut self, id: usize, name: &str, pass: bool, elapsed: Duration, limit: Duration, summary: String, detail: String) {
        let within = elapsed <= limit;
        let pass = pass && within;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let timing = format!("{:.1} s of {} s{}", elapsed.as_secs_f64(), limit.as_secs(), if within { "" } else { " (over limit)" });
        println!("{verdict} {id:>2} {name}: {summary} [{timing}]");
        for l in detail.lines() {
            println!("        {l}");
        }
        self.lines.push((pass, name.to_string()));
    }
}

struct Trained {
    family: Family,
    pair: ObserverPair,
}

struct Bench {
    report: BenchmarkReport,
    sweep_time: Duration,
    false_alarm_time: Duration,
}

fn sweep_grid() -> SweepGrid {
    SweepGrid { master_seed: SEED, ..SweepGrid::default() }
}

fn benchmark(models: &[Trained]) -> Bench {
    let spec = PipelineSpec::default();
    let profile = OperatingProfile::default();
    let noise = NoiseModel::default();
    let grid = sweep_grid();
    let (mut sweep_time, mut false_alarm_time) = (Duration::ZERO, Duration::ZERO);
    let mut entries = Vec::new();
    for m in models {
        let det = DetectorConfig::for_mae(m.pair.outlet.mae());
        let label = m.family.label();
        let t = Instant::now();
        let base = base_stream(&spec, &profile, &NoiseModel::none(), &grid, &det).unwrap();
        let sweep = run_sweep(label, &m.pair, &grid, &spec, &base, &det, None).unwrap();
        sweep_time += t.elapsed();
        let noisy = run_sweep(label, &m.pair, &grid, &spec, &base, &det, Some(&noise.scaled(2.0))).unwrap();
        let t = Instant::now();
        let fa = false_alarm_check(&m.pair, &det, &spec, &profile, &noise, CLEAN_STREAMS, CLEAN_SAMPLES, SEED).unwrap();
        false_alarm_time += t.elapsed();
        entries.push(ModelEntry {
            label: label.to_string(),
            sweep,
            noisy_sweep: Some(noisy),
            false_alarms: Some(fa),
            metrics: Some(m.pair.outlet.metadata.metrics),
        });
    }
    Bench { report: BenchmarkReport::new(entries), sweep_time, false_alarm_time }
}

fn cell_minutes(sweep: &SweepFragment, size: f64, location: f64) -> Option<f64> {
    sweep.cells.iter().find(|c| c.size == size && c.location == location).and_then(|c| c.minutes())
}

fn show(m: Option<f64>) -> String {
    m.map_or_else(|| "none".to_string(), |v| format!("{v}"))
}

fn criterion_1(v: &mut Verdicts) {
    let t = Instant::now();
    let state = GasState::from_field_units(MEAN_PRESSURE, MEAN_TEMPERATURE_F, MEAN_SG).unwrap();
    let mu = gas_viscosity(&state).unwrap();
    let elapsed = t.elapsed();
    let z_ok = (Z_BAND.0..=Z_BAND.1).contains(&state.z);
    let mu_ok = (MU_BAND.0..=MU_BAND.1).contains(&mu);
    v.record(
        1,
        "correlation fidelity",
        z_ok && mu_ok,
        elapsed,
        LIMIT_1,
        format!(
            "z {:.4} (band {}..{}) {}, viscosity {:.5} cp (band {}..{}) {}",
            state.z,
            Z_BAND.0,
            Z_BAND.1,
            if z_ok { "in" } else { "out" },
            mu,
            MU_BAND.0,
            MU_BAND.1,
            if mu_ok { "in" } else { "out" }
        ),
        String::new(),
    );
}

fn criterion_2(v: &mut Verdicts) {
    let t = Instant::now();
    let svr_gap = SVR_CASES.iter().map(|&(k, n, s)| svr_oracle_gap(k, n, s)).fold(0.0, f64::max);
    let grad_gap = mlp_gradient_gap();
    let (mismatches, steps) = window_recount_mismatches(FUZZ_STEPS);
    let elapsed = t.elapsed();
    v.record(
        2,
        "oracle equivalence",
        svr_gap < SVR_TOL && grad_gap < GRADIENT_TOL && mismatches == 0 && steps >= FUZZ_STEPS,
        elapsed,
        LIMIT_2,
        format!(
            "SVR vs QP max gap {svr_gap:.2e} (< {SVR_TOL:e}), MLP gradient rel gap {grad_gap:.2e} (< {GRADIENT_TOL:e}), \
             window recount {mismatches} mismatches in {steps} steps"
        ),
        String::new(),
    );
}

fn criterion_3(v: &mut Verdicts, stream: &[TelemetryRecord]) -> Vec<RegressorModel> {
    let t = Instant::now();
    let mut models = Vec::new();
    let mut detail = String::new();
    let mut pass = true;
    for family in FAMILIES {
        let cfg = TrainConfig { grid: acceptance_grid(family), seed: SEED, ..TrainConfig::new(family) };
        let ft = Instant::now();
        let m = train_observer(stream, &cfg).unwrap();
        let mm = m.metadata.metrics;
        let ok = mm.r2_test >= R2_MIN
            && (RMSE_BAND.0..=RMSE_BAND.1).contains(&mm.rmse)
            && (MAE_BAND.0..=MAE_BAND.1).contains(&mm.mae);
        pass &= ok;
        let _ = writeln!(
            detail,
            "{:<4} {} R2 test {:.5} RMSE {:.4} MAE {:.4} ({:.1} s, best {})",
            family.label(),
            if ok { "ok  " } else { "FAIL" },
            mm.r2_test,
            mm.rmse,
            mm.mae,
            ft.elapsed().as_secs_f64(),
            m.hyperparams.describe()
        );
        models.push(m);
    }
    v.record(
        3,
        "regressor quality",
        pass,
        t.elapsed(),
        LIMIT_3,
        format!("test R2 >= {R2_MIN}, RMSE in {:?}, MAE in {:?} for every family", RMSE_BAND, MAE_BAND),
        detail,
    );
    models
}

fn false_alarms(entry: &ModelEntry) -> FalseAlarmSummary {
    entry.false_alarms.expect("benchmark always runs the clean streams")
}

fn criterion_4(v: &mut Verdicts, bench: &Bench) {
    let mut detail = String::new();
    let mut total = 0;
    for e in &bench.report.entries {
        let fa = false_alarms(e);
        total += fa.alarms;
        let _ = writeln!(detail, "{:<4} {}/{} streams alarmed, {} samples flagged", e.label, fa.alarms, fa.streams, fa.flagged);
    }
    v.record(
        4,
        "reliability",
        total == 0,
        bench.false_alarm_time,
        LIMIT_4,
        format!("{total} false alarms over {CLEAN_STREAMS} clean streams x {CLEAN_SAMPLES} samples per family"),
        detail,
    );
}

fn criterion_5(v: &mut Verdicts, bench: &Bench, models: &[Trained]) {
    let mut detail = String::new();
    let mut pass = true;
    for (e, m) in bench.report.entries.iter().zip(models) {
        // The 0.1% references are sweep-row means, so any detected location counts.
        let tenth = e.sweep.summaries().iter().find(|s| s.size == 0.001).and_then(|s| s.mean_minutes);
        let one = cell_minutes(&e.sweep, 0.01, 0.5);
        let ten = cell_minutes(&e.sweep, 0.1, 0.5);
        let one_ok = one.is_some_and(|x| x <= ONE_PERCENT_MINUTES);
        let ten_ok = ten.is_some_and(|x| x <= TEN_PERCENT_MINUTES);
        let tenth_ok = !m.family.is_tree_based() || tenth.is_some_and(|x| x <= TENTH_PERCENT_MINUTES);
        pass &= one_ok && ten_ok && tenth_ok;
        let _ = writeln!(
            detail,
            "{:<4} {} 0.1% row mean: {} min, 1%: {} min, 10%: {} min",
            e.label,
            if one_ok && ten_ok && tenth_ok { "ok  " } else { "FAIL" },
            show(tenth),
            show(one),
            show(ten)
        );
    }
    v.record(
        5,
        "sensitivity",
        pass,
        bench.sweep_time,
        LIMIT_5,
        format!(
            "at location 0.5: 1% <= {ONE_PERCENT_MINUTES} min and 10% <= {TEN_PERCENT_MINUTES} min for every family, \
             0.1% sweep row mean <= {TENTH_PERCENT_MINUTES} min for tree families"
        ),
        detail,
    );
}

fn residual_samples(residuals: &[f64]) -> Vec<Sample> {
    residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| Sample {
            ordinal: i,
            observed: 8.0 + r,
            predicted: 8.0,
            inlet_pressure: MEAN_PRESSURE,
            outlet_pressure: MEAN_OUTLET_PRESSURE,
            inlet: None,
        })
        .collect()
}

fn criterion_6(v: &mut Verdicts) {
    let t = Instant::now();
    let cfg = DetectorConfig::for_mae(0.0);
    let onset = cfg.onset_index;
    let saturated: Vec<f64> = (0..onset + 60).map(|i| if i < onset { 0.0 } else { 1.0 }).collect();
    let first = run_samples(&residual_samples(&saturated), &cfg).unwrap().alarm.map(|a| a.alarm_ordinal);

    let mut rng = rng_from_seed(SEED);
    let mut earliest_gap = usize::MAX;
    let streams = 2_000;
    for _ in 0..streams {
        let start = rng.random_range(0..100usize);
        let p = rng.random_range(0.3..1.0);
        let r: Vec<f64> = (0..start + 80).map(|i| if i >= start && rng.random_bool(p) { 1.0 } else { 0.0 }).collect();
        let run = run_samples(&residual_samples(&r), &cfg).unwrap();
        if let (Some(a), Some(f)) = (run.alarm, run.log.iter().find(|s| s.flag)) {
            earliest_gap = earliest_gap.min(a.alarm_ordinal - f.ordinal);
        }
    }
    let elapsed = t.elapsed();
    v.record(
        6,
        "detection-delay lower bound",
        first == Some(onset + MIN_DELAY) && earliest_gap >= MIN_DELAY,
        elapsed,
        LIMIT_6,
        format!(
            "saturated residuals from onset {onset} alarm at {} (expected {}), shortest first-flag-to-alarm gap over \
             {streams} fuzzed streams {earliest_gap}",
            first.map_or_else(|| "none".into(), |a| a.to_string()),
            onset + MIN_DELAY
        ),
        String::new(),
    );
}

fn criterion_7(v: &mut Verdicts) {
    let t = Instant::now();
    let (exact_gap, rounding_gap) = leak_factor_gaps();
    let spec = PipelineSpec::default();
    let profile = OperatingProfile::constant(OperatingProfile::default().flow_mean);
    let stream = synth_stream(&spec, 500, &profile, &NoiseModel::none(), SEED).unwrap();
    let (q, l) = (1e-5, 0.5);
    let unity = leak_factor(q, l).unwrap();
    let injected = inject_leak(&stream, &spec, &LeakScenario::new(q, l, DEFAULT_ONSET).unwrap()).unwrap();
    let mean_outlet = injected.iter().map(|r| r.outlet_pressure).sum::<f64>() / injected.len() as f64;
    let elapsed = t.elapsed();
    let pressure_ok = unity == 1.0 && (mean_outlet - MEAN_OUTLET_PRESSURE).abs() <= OUTLET_TOL;
    v.record(
        7,
        "leak-model consistency",
        exact_gap <= ORACLE_TOL && pressure_ok,
        elapsed,
        LIMIT_7,
        format!(
            "two-segment oracle max gap {exact_gap:.2e} (<= {ORACLE_TOL:e}, rounding adds <= {rounding_gap:.1e}), \
             mean outlet with factor {unity} {mean_outlet:.3} psia vs {MEAN_OUTLET_PRESSURE} +/- {OUTLET_TOL}"
        ),
        String::new(),
    );
}

fn criterion_8(v: &mut Verdicts, bench: &Bench) {
    let t = Instant::now();
    let symmetric = [1e-9, 0.003, 0.5, 7.0, 1e6].iter().all(|&d| localize(d, d).unwrap() == 0.5);
    let mut detail = String::new();
    let mut pass = symmetric;
    for e in &bench.report.entries {
        let errors: Vec<f64> = e
            .sweep
            .cells
            .iter()
            .filter(|c| c.size == 0.05 || c.size == 0.1)
            .filter_map(|c| match c.outcome {
                CellOutcome::Detected { location: Some(est), .. } => Some((est - c.location).abs() / c.location * 100.0),
                _ => None,
            })
            .collect();
        let cells = e.sweep.cells.iter().filter(|c| c.size == 0.05 || c.size == 0.1).count();
        let mean = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
        let ok = mean.is_some_and(|m| m <= LOCALIZATION_MAX);
        pass &= ok;
        let _ = writeln!(
            detail,
            "{:<4} {} mean error {} over {}/{} localized cells",
            e.label,
            if ok { "ok  " } else { "FAIL" },
            mean.map_or_else(|| "n/a".into(), |m| format!("{m:.2}%")),
            errors.len(),
            cells
        );
    }
    v.record(
        8,
        "localization",
        pass,
        bench.sweep_time + t.elapsed(),
        LIMIT_8,
        format!(
            "mean relative localization error at 5% and 10% <= {LOCALIZATION_MAX}% per family, symmetric deviations \
             give 0.5: {symmetric}"
        ),
        detail,
    );
}

fn criterion_9(v: &mut Verdicts, bench: &Bench, models: &[Trained]) {
    let t = Instant::now();
    let index_ok = (0..=4000).map(|i| leak_index(i as f64 * 0.01)).collect::<Vec<_>>().windows(2).all(|w| w[1] > w[0]);

    let mut detail = String::new();
    let mut time_ok = true;
    for e in &bench.report.entries {
        let means: Vec<Option<f64>> = e.sweep.summaries().iter().map(|s| s.censored_mean_minutes).collect();
        let ok = means.iter().all(Option::is_some) && means.windows(2).all(|w| w[1] <= w[0]);
        time_ok &= ok;
        let _ = writeln!(
            detail,
            "{:<4} {} censored mean minutes by size {}",
            e.label,
            if ok { "ok  " } else { "FAIL" },
            means.iter().map(|m| show(m.map(|x| (x * 100.0).round() / 100.0))).collect::<Vec<_>>().join(" / ")
        );
    }

    let spec = PipelineSpec::default();
    let stream =
        synth_stream(&spec, CLEAN_SAMPLES, &OperatingProfile::default(), &NoiseModel::default(), SEED + 1).unwrap();
    let samples = samples_for(&stream, &ObserverPair::outlet_only(models[0].pair.outlet.clone())).unwrap();
    let counts: Vec<usize> = (0..40)
        .map(|k| {
            let cfg = DetectorConfig { threshold: 0.001 + 0.001 * k as f64, ..DetectorConfig::for_mae(0.0) };
            run_samples(&samples, &cfg).unwrap().flagged()
        })
        .collect();
    let threshold_ok = counts.windows(2).all(|w| w[1] <= w[0]);
    let _ = writeln!(detail, "flag counts for thresholds 0.001..0.040: {} .. {}", counts[0], counts[counts.len() - 1]);
    v.record(
        9,
        "monotonicity",
        index_ok && time_ok && threshold_ok,
        t.elapsed(),
        LIMIT_9,
        format!(
            "leak index strictly increasing: {index_ok}, time-to-detect non-increasing in size: {time_ok}, flag \
             counts non-increasing in threshold: {threshold_ok}"
        ),
        detail,
    );
}

fn stream_bytes(seed: u64) -> Vec<u8> {
    let s = synth_stream(
        &PipelineSpec::default(),
        TRAIN_SAMPLES,
        &OperatingProfile::default(),
        &NoiseModel::default(),
        seed,
    )
    .unwrap();
    let mut out = Vec::new();
    write_telemetry(&mut out, &s).unwrap();
    out
}

fn report_bytes(r: &BenchmarkReport) -> String {
    [r.render_text(), r.render_csv(), r.render_kv(), r.to_json().unwrap()].concat()
}

fn criterion_10(
    v: &mut Verdicts,
    stream: &[TelemetryRecord],
    outlet: &[RegressorModel],
    models: &[Trained],
    bench: &Bench,
) {
    let t = Instant::now();
    let streams_ok = stream_bytes(SEED) == stream_bytes(SEED);
    let dt_cfg = TrainConfig { grid: acceptance_grid(Family::DecisionTree), seed: SEED, ..TrainConfig::new(Family::DecisionTree) };
    let dt_again = train_observer(stream, &dt_cfg).unwrap();
    let mut models_ok = dt_again.to_json().unwrap() == outlet[0].to_json().unwrap();
    for m in models {
        let outlet = &m.pair.outlet;
        let again = train_observer(stream, &inlet_config(outlet)).unwrap();
        models_ok &= Some(again.to_json().unwrap()) == m.pair.inlet.as_ref().map(|i| i.to_json().unwrap());
    }
    let report_ok = report_bytes(&benchmark(models).report) == report_bytes(&bench.report);
    v.record(
        10,
        "reproducibility",
        streams_ok && models_ok && report_ok,
        t.elapsed(),
        LIMIT_10,
        format!("streams identical: {streams_ok}, models identical: {models_ok}, reports identical: {report_ok}"),
        String::new(),
    );
}

fn main() {
    let mut v = Verdicts { lines: Vec::new() };
    println!("acceptance suite (seed {SEED})");

    criterion_1(&mut v);
    criterion_2(&mut v);

    let stream =
        synth_stream(&PipelineSpec::default(), TRAIN_SAMPLES, &OperatingProfile::default(), &NoiseModel::default(), SEED)
            .unwrap();
    let outlet = criterion_3(&mut v, &stream);
    let models: Vec<Trained> = outlet
        .iter()
        .map(|o| Trained {
            family: o.family,
            pair: ObserverPair { outlet: o.clone(), inlet: Some(train_observer(&stream, &inlet_config(o)).unwrap()) },
        })
        .collect();
    let bench = benchmark(&models);

    criterion_4(&mut v, &bench);
    criterion_5(&mut v, &bench, &models);
    criterion_6(&mut v);
    criterion_7(&mut v);
    criterion_8(&mut v, &bench);
    criterion_9(&mut v, &bench, &models);
    criterion_10(&mut v, &stream, &outlet, &models, &bench);

    let failed: Vec<&str> = v.lines.iter().filter(|(p, _)| !p).map(|(_, n)| n.as_str()).collect();
    println!("{} of {} criteria passed", v.lines.len() - failed.len(), v.lines.len());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        if std::env::var_os("PIPELEAK_ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
