//! Command-line front end. Exit codes: 0 success or no leak, 1 usage or
//! configuration error, 2 leak detected, 3 data error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{base_stream, false_alarm_check, run_sweep, BenchmarkReport, ModelEntry, SweepGrid};
use crate::dataio::{read_telemetry_file, write_telemetry, write_telemetry_file, FlowChannel, TelemetryRecord};
use crate::detect::{run_detection, DetectorConfig, ObserverPair};
use crate::models::{train_observer, Family, RegressorModel, TrainConfig};
use crate::simulate::{inject_leak, synth_stream, LeakScenario, NoiseModel, OperatingProfile, PipelineSpec, DEFAULT_ONSET};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_LEAK: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pipeleak", version, about = "Gas pipeline leak detection with regression flow observers")]
pub struct Cli {
    /// Master seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 12)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Suppress the config echo.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Tune and fit a flow observer on a telemetry CSV.
    Train(TrainArgs),
    /// Generate a synthetic telemetry stream, optionally with a leak.
    Simulate(SimulateArgs),
    /// Run the leak detector over a telemetry CSV.
    Detect(DetectArgs),
    /// Sweep injected leaks over sizes and locations for one or more models.
    Bench(BenchArgs),
    /// Render saved benchmark reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelArg {
    Outlet,
    Inlet,
}

impl From<ChannelArg> for FlowChannel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Outlet => FlowChannel::Outlet,
            ChannelArg::Inlet => FlowChannel::Inlet,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ChannelArg::Outlet)]
    pub channel: ChannelArg,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Restrict tuning to these grid cells (zero-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub cells: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Inject into this stream instead of generating one.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 21000)]
    pub samples: usize,
    /// Leak size as a fraction of flow.
    #[arg(long)]
    pub leak_size: Option<f64>,
    /// Leak position as a fraction of line length from the inlet.
    #[arg(long, default_value_t = 0.5)]
    pub leak_location: f64,
    #[arg(long, default_value_t = DEFAULT_ONSET)]
    pub onset: usize,
    /// Multiplier on the default measurement noise (0 = noiseless).
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectorArgs {
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub persistence: Option<usize>,
    #[arg(long)]
    pub onset: Option<usize>,
    /// Start from the 20-sample window preset.
    #[arg(long)]
    pub appendix: bool,
}

impl DetectorArgs {
    fn config(&self, mae: f64) -> DetectorConfig {
        let mut c = if self.appendix { DetectorConfig::appendix(mae) } else { DetectorConfig::for_mae(mae) };
        if let Some(w) = self.window {
            c.window = w;
        }
        if let Some(t) = self.threshold {
            c.threshold = t;
        }
        if let Some(p) = self.persistence {
            c.persistence = p;
        }
        if let Some(o) = self.onset {
            c.onset_index = o;
        }
        c
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Outlet-flow observer.
    #[arg(long)]
    pub model: PathBuf,
    /// Inlet-flow observer; enables two-channel sizing and localization.
    #[arg(long)]
    pub inlet_model: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Write the per-sample detection log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Outlet-flow observers, one per benchmarked model.
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    /// Inlet-flow observers, paired with `--model` by position.
    #[arg(long)]
    pub inlet_model: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub locations: Option<Vec<f64>>,
    #[arg(long, default_value_t = 240.0)]
    pub budget: f64,
    /// Clean streams for the false-alarm check (0 disables it).
    #[arg(long, default_value_t = 20)]
    pub clean_streams: usize,
    #[arg(long, default_value_t = 5000)]
    pub clean_samples: usize,
    /// Skip the doubled-noise sweep used for robustness.
    #[arg(long)]
    pub no_robustness: bool,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Save the report as JSON for `report`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Csv,
    Kv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Saved reports to merge, in order.
    #[arg(required = true)]
    pub fragments: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if !cli.quiet {
        eprintln!("config: {}", serde_json::to_string(cli)?);
    }
    match cli.jobs {
        Some(0) => return Err(Error::InvalidParameter("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, cli.seed),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Detect(a) => cmd_detect(a),
        Command::Bench(a) => cmd_bench(a, cli.seed),
        Command::Report(a) => cmd_report(a),
    }
}

fn load_records(path: &Path) -> Result<Vec<TelemetryRecord>> {
    let loaded = read_telemetry_file(path)?;
    if !loaded.rejects.is_empty() {
        eprintln!("{} of {} rows rejected", loaded.rejects.len(), loaded.total_rows);
        for r in loaded.rejects.iter().take(10) {
            eprintln!("  {r}");
        }
    }
    Ok(loaded.records)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, seed: u64) -> Result<i32> {
    let records = load_records(&a.data)?;
    let mut cfg = TrainConfig::new(a.family);
    cfg.channel = a.channel.into();
    cfg.seed = seed;
    cfg.test_fraction = a.test_fraction;
    cfg.folds = a.folds;
    if !a.cells.is_empty() {
        let full = cfg.grid.clone();
        cfg.grid = a
            .cells
            .iter()
            .map(|&i| {
                full.get(i).cloned().ok_or_else(|| {
                    Error::InvalidParameter(format!("grid cell {i} out of range (grid has {})", full.len()))
                })
            })
            .collect::<Result<_>>()?;
    }
    let model = train_observer(&records, &cfg)?;
    model.save(&a.out)?;
    let m = model.metadata.metrics;
    println!("{:<6}{:>10}{:>10}{:>12}{:>12}{:>12}", "Model", "RMSE", "MAE", "R2 train", "R2 test", "R2 CV");
    println!(
        "{:<6}{:>10.4}{:>10.4}{:>12.6}{:>12.6}{:>12.6}",
        model.family.label(),
        m.rmse,
        m.mae,
        m.r2_train,
        m.r2_test,
        m.r2_cv
    );
    println!("best: {}", model.hyperparams.describe());
    println!("saved: {}", a.out.display());
    Ok(EXIT_OK)
}

pub fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<i32> {
    let spec = PipelineSpec::default();
    let stream = match &a.data {
        Some(p) => load_records(p)?,
        None => {
            if !(a.noise_scale >= 0.0) {
                return Err(Error::InvalidParameter("--noise-scale must be non-negative".into()));
            }
            let noise = NoiseModel::default().scaled(a.noise_scale);
            synth_stream(&spec, a.samples, &OperatingProfile::default(), &noise, seed)?
        }
    };
    let stream = match a.leak_size {
        Some(q) => inject_leak(&stream, &spec, &LeakScenario::new(q, a.leak_location, a.onset)?)?,
        None => stream,
    };
    match &a.out {
        Some(p) => {
            write_telemetry_file(p, &stream)?;
            eprintln!("wrote {} records to {}", stream.len(), p.display());
        }
        None => write_telemetry(std::io::stdout().lock(), &stream)?,
    }
    Ok(EXIT_OK)
}

fn load_pair(model: &Path, inlet: Option<&Path>) -> Result<ObserverPair> {
    let outlet = RegressorModel::load(model)?;
    if outlet.channel != FlowChannel::Outlet {
        return Err(Error::InvalidParameter(format!("{} is not an outlet-flow observer", model.display())));
    }
    let inlet = match inlet {
        Some(p) => {
            let m = RegressorModel::load(p)?;
            if m.channel != FlowChannel::Inlet {
                return Err(Error::InvalidParameter(format!("{} is not an inlet-flow observer", p.display())));
            }
            Some(m)
        }
        None => None,
    };
    Ok(ObserverPair { outlet, inlet })
}

pub fn cmd_detect(a: &DetectArgs) -> Result<i32> {
    let pair = load_pair(&a.model, a.inlet_model.as_deref())?;
    let cfg = a.detector.config(pair.outlet.mae());
    let stream = load_records(&a.data)?;
    let run = run_detection(&stream, &pair, &cfg)?;
    if let Some(p) = &a.log {
        fs::write(p, run.render_log())?;
    }
    eprintln!(
        "threshold {:.6}, window {}, persistence {}, samples {}, skipped {}, flagged {}",
        cfg.threshold,
        cfg.window,
        cfg.persistence,
        run.log.len(),
        run.skipped,
        run.flagged()
    );
    match &run.alarm {
        Some(ev) => {
            println!("LEAK");
            print!("{}", ev.render());
            Ok(EXIT_LEAK)
        }
        None => {
            println!("NO LEAK");
            Ok(EXIT_OK)
        }
    }
}

pub fn cmd_bench(a: &BenchArgs, seed: u64) -> Result<i32> {
    if !a.inlet_model.is_empty() && a.inlet_model.len() != a.model.len() {
        return Err(Error::InvalidParameter("give one --inlet-model per --model, or none".into()));
    }
    let mut grid = SweepGrid { master_seed: seed, budget_minutes: a.budget, ..SweepGrid::default() };
    if let Some(s) = &a.sizes {
        grid.sizes = s.clone();
    }
    if let Some(l) = &a.locations {
        grid.locations = l.clone();
    }
    grid.validate()?;
    let spec = PipelineSpec::default();
    let profile = OperatingProfile::default();
    let noise = NoiseModel::default();
    let mut entries = Vec::new();
    for (k, path) in a.model.iter().enumerate() {
        let pair = load_pair(path, a.inlet_model.get(k).map(PathBuf::as_path))?;
        let det = a.detector.config(pair.outlet.mae());
        let base = base_stream(&spec, &profile, &NoiseModel::none(), &grid, &det)?;
        let label = pair.outlet.family.label().to_string();
        let sweep = run_sweep(&label, &pair, &grid, &spec, &base, &det, None)?;
        let noisy_sweep = if a.no_robustness {
            None
        } else {
            Some(run_sweep(&label, &pair, &grid, &spec, &base, &det, Some(&noise.scaled(2.0)))?)
        };
        let false_alarms = if a.clean_streams > 0 {
            Some(false_alarm_check(&pair, &det, &spec, &profile, &noise, a.clean_streams, a.clean_samples, seed)?)
        } else {
            None
        };
        entries.push(ModelEntry {
            label,
            sweep,
            noisy_sweep,
            false_alarms,
            metrics: Some(pair.outlet.metadata.metrics),
        });
    }
    let report = BenchmarkReport::new(entries);
    if let Some(p) = &a.out {
        fs::write(p, report.to_json()?)?;
    }
    write_output(None, &render(&report, a.format)?)?;
    Ok(EXIT_OK)
}

fn render(report: &BenchmarkReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => report.render_text(),
        Format::Csv => report.render_csv(),
        Format::Kv => report.render_kv(),
        Format::Json => report.to_json()?,
    })
}

pub fn cmd_report(a: &ReportArgs) -> Result<i32> {
    let mut entries = Vec::new();
    for p in &a.fragments {
        let r: BenchmarkReport = serde_json::from_str(&fs::read_to_string(p)?)?;
        entries.extend(r.entries);
    }
    let report = BenchmarkReport::new(entries);
    write_output(a.out.as_deref(), &render(&report, a.format)?)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("pipeleak").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(code(&[]), EXIT_USAGE);
        assert_eq!(code(&["train", "--data", "x.csv"]), EXIT_USAGE);
        assert_eq!(code(&["train", "--data", "x.csv", "--family", "knn", "--out", "m.json"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(code(&["--help"]), EXIT_OK);
    }

    #[test]
    fn missing_data_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.json");
        let c = code(&[
            "-q",
            "train",
            "--data",
            dir.path().join("absent.csv").to_str().unwrap(),
            "--family",
            "dt",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(c, EXIT_DATA);
        assert!(!out.exists());
    }

    #[test]
    fn detector_overrides() {
        let a = DetectorArgs { window: Some(20), threshold: None, persistence: Some(4), onset: None, appendix: false };
        let c = a.config(0.02);
        assert_eq!(c.window, 20);
        assert_eq!(c.persistence, 4);
        assert!((c.threshold - 0.03).abs() < 1e-12);
    }
}
