//! Command-line front end: synthesize benchmark scenes, train and quantize
//! the classifier, sweep ROC curves, filter event files, and print the
//! hardware cost model.
//!
//! Every command takes an optional JSON config plus flag overrides (flags
//! win) and echoes the effective config next to its outputs, so any artifact
//! can be regenerated from the files it sits beside.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use evdenoise_core::baseline::{roc_by_tau, default_tau_grid, BaselineFilter, SaeConfig};
use evdenoise_core::ebbi::{extract_sequence, EbbiStack, WindowMode};
use evdenoise_core::event::{
    merge_streams, read_events_auto, write_events, EventStream, FileFormat,
};
use evdenoise_core::hw::{
    energy_breakdown, energy_per_event_nj, latency_cycles, memory_bits, power_total_mw,
    throughput_meps, CostTable, CycleAccounting, FilterKind, PipelineConfig, PipelineMode,
    PowerSpec, ReadAccounting, SnnfHwParams,
};
use evdenoise_core::metrics::roc_from_scores;
use evdenoise_core::snn::{load_network, save_network, score_sequence, QuantizedFcsnn};
use evdenoise_core::synth::{
    gen_leak_noise, gen_moving_edge, gen_shot_noise, EdgeOrientation, LeakNoiseConfig,
    MovingEdgeConfig, ShotNoiseConfig, PRNG_ALGORITHM,
};
use evdenoise_core::trainer::{
    build_dataset, quantize, save_float_network, sweep_threshold, train_with_log,
    training_log_csv, ReplayConfig, TrainConfig,
};
use evdenoise_core::ebbi::BankConfig;
use evdenoise_core::{Label, SensorGeometry};

#[derive(Parser)]
#[command(name = "evdenoise", version, about = "Event-stream denoising toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic scene (moving edge + sensor noise).
    Synth(SynthArgs),
    /// Merge two event files into one time-ordered file.
    Mix(MixArgs),
    /// Train on a labeled file, quantize, and write the model.
    Train(TrainArgs),
    /// Sweep a filter's threshold over a labeled file into a ROC report.
    Eval(EvalArgs),
    /// Apply a trained model and drop noise-classified events.
    Filter(FilterArgs),
    /// Print the latency / throughput / memory / energy model.
    Hwreport(HwreportArgs),
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Mix(a) => cmd_mix(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Hwreport(a) => cmd_hwreport(a),
    }
}

/// Load the JSON config if given, else defaults; flag overrides are applied
/// by the caller afterwards.
fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a, T: Serialize> {
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    prng: Option<&'a str>,
    params: &'a T,
}

/// Write the effective config beside an output file as `<stem>.config.json`.
fn echo_config<T: Serialize>(command: &str, uses_rng: bool, params: &T, near: &Path) -> Result<()> {
    let echo = ConfigEcho {
        command,
        prng: uses_rng.then_some(PRNG_ALGORITHM),
        params,
    };
    let mut path = near.to_path_buf();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.set_file_name(format!("{stem}.config.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&echo)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn format_for(path: &Path, flag: &Option<String>) -> Result<FileFormat> {
    let pick = |s: &str| match s {
        "csv" => Ok(FileFormat::Csv),
        "packed" => Ok(FileFormat::Packed),
        other => bail!("unknown format {other:?} (expected csv or packed)"),
    };
    match flag.as_deref() {
        Some("auto") | None => Ok(
            if path.extension().is_some_and(|e| e == "evd") {
                FileFormat::Packed
            } else {
                FileFormat::Csv
            },
        ),
        Some(s) => pick(s),
    }
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args)]
struct SynthArgs {
    /// JSON config with the fields of the effective config echo.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output event file (.evd = packed, anything else = CSV).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    width: Option<u16>,
    #[arg(long)]
    height: Option<u16>,
    #[arg(long)]
    duration_us: Option<u64>,
    /// Per-pixel shot-noise rate in Hz; 0 disables noise.
    #[arg(long)]
    shot_rate: Option<f64>,
    /// Mean per-pixel leak-noise rate in Hz; 0 disables.
    #[arg(long)]
    leak_rate: Option<f64>,
    /// Log-normal spread of per-pixel leak rates.
    #[arg(long)]
    leak_dispersion: Option<f64>,
    /// Edge sweep speed in px/s; 0 disables the edge.
    #[arg(long)]
    edge_speed: Option<f64>,
    /// vertical (sweeps along x) or horizontal (sweeps along y).
    #[arg(long)]
    edge_orientation: Option<String>,
    /// Mean events emitted per pixel crossing.
    #[arg(long)]
    events_per_crossing: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthConfig {
    width: u16,
    height: u16,
    duration_us: u64,
    shot_rate_hz: f64,
    leak_rate_hz: f64,
    leak_dispersion: f64,
    edge_speed: f64,
    edge_orientation: String,
    events_per_crossing: f64,
    seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // One edge crossing the full frame, noise count-matched 1:1.
        Self {
            width: 346,
            height: 260,
            duration_us: 6_000_000,
            shot_rate_hz: 0.4666,
            leak_rate_hz: 0.0,
            leak_dispersion: 0.5,
            edge_speed: 57.7,
            edge_orientation: "vertical".into(),
            events_per_crossing: 2.8,
            seed: 1,
        }
    }
}

fn parse_orientation(s: &str) -> Result<EdgeOrientation> {
    match s {
        "vertical" => Ok(EdgeOrientation::Vertical),
        "horizontal" => Ok(EdgeOrientation::Horizontal),
        other => bail!("unknown orientation {other:?} (expected vertical or horizontal)"),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = load_config(&args.config)?;
    if let Some(v) = args.width {
        cfg.width = v;
    }
    if let Some(v) = args.height {
        cfg.height = v;
    }
    if let Some(v) = args.duration_us {
        cfg.duration_us = v;
    }
    if let Some(v) = args.shot_rate {
        cfg.shot_rate_hz = v;
    }
    if let Some(v) = args.leak_rate {
        cfg.leak_rate_hz = v;
    }
    if let Some(v) = args.leak_dispersion {
        cfg.leak_dispersion = v;
    }
    if let Some(v) = args.edge_speed {
        cfg.edge_speed = v;
    }
    if let Some(v) = &args.edge_orientation {
        cfg.edge_orientation = v.clone();
    }
    if let Some(v) = args.events_per_crossing {
        cfg.events_per_crossing = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }

    let geometry = SensorGeometry::new(cfg.width, cfg.height)?;
    let mut stream = EventStream::empty(geometry);
    if cfg.edge_speed > 0.0 {
        let edge = gen_moving_edge(
            geometry,
            cfg.duration_us,
            &MovingEdgeConfig {
                speed: cfg.edge_speed,
                orientation: parse_orientation(&cfg.edge_orientation)?,
                events_per_crossing: cfg.events_per_crossing,
                seed: cfg.seed,
            },
        )?;
        stream = merge_streams(&stream, &edge)?;
    }
    if cfg.shot_rate_hz > 0.0 {
        let shot = gen_shot_noise(
            geometry,
            cfg.duration_us,
            &ShotNoiseConfig {
                rate_hz: cfg.shot_rate_hz,
                seed: cfg.seed.wrapping_add(1),
            },
        )?;
        stream = merge_streams(&stream, &shot)?;
    }
    if cfg.leak_rate_hz > 0.0 {
        let leak = gen_leak_noise(
            geometry,
            cfg.duration_us,
            &LeakNoiseConfig {
                mean_rate_hz: cfg.leak_rate_hz,
                dispersion: cfg.leak_dispersion,
                seed: cfg.seed.wrapping_add(2),
            },
        )?;
        stream = merge_streams(&stream, &leak)?;
    }

    let format = format_for(&args.out, &args.format)?;
    write_events(&args.out, &stream, format)?;
    echo_config("synth", true, &cfg, &args.out)?;
    let signal = stream.iter().filter(|e| e.label == Label::Signal).count();
    println!(
        "wrote {} events ({} signal, {} noise) to {}",
        stream.len(),
        signal,
        stream.len() - signal,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// mix

#[derive(Args)]
struct MixArgs {
    /// First input event file.
    a: PathBuf,
    /// Second input event file.
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Serialize)]
struct MixEcho {
    a: String,
    b: String,
}

fn cmd_mix(args: MixArgs) -> Result<()> {
    let a = read_events_auto(&args.a).with_context(|| format!("reading {}", args.a.display()))?;
    let b = read_events_auto(&args.b).with_context(|| format!("reading {}", args.b.display()))?;
    let merged = merge_streams(&a, &b)?;
    let format = format_for(&args.out, &args.format)?;
    write_events(&args.out, &merged, format)?;
    echo_config(
        "mix",
        false,
        &MixEcho {
            a: args.a.display().to_string(),
            b: args.b.display().to_string(),
        },
        &args.out,
    )?;
    println!("wrote {} events to {}", merged.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled input event file.
    #[arg(long)]
    input: PathBuf,
    /// Output quantized model.
    #[arg(long)]
    model_out: PathBuf,
    /// Also write the float checkpoint here.
    #[arg(long)]
    float_out: Option<PathBuf>,
    /// Write a per-epoch loss/AUC CSV here.
    #[arg(long)]
    log_out: Option<PathBuf>,
    #[arg(long)]
    n_ebbi: Option<usize>,
    #[arg(long)]
    t_e_us: Option<u64>,
    /// Use a count window of this many events instead of a time window.
    #[arg(long)]
    n_e: Option<u64>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    n_hidden: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Keep every k-th training sample (1 = all).
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainCmdConfig {
    n_ebbi: usize,
    t_e_us: u64,
    n_e: Option<u64>,
    patch: usize,
    n_hidden: usize,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    surrogate_slope: f64,
    train_fraction: f64,
    stride: usize,
    seed: u64,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            n_ebbi: 2,
            t_e_us: 25_000,
            n_e: None,
            patch: 5,
            n_hidden: 30,
            learning_rate: 0.5,
            epochs: 8,
            batch_size: 32,
            surrogate_slope: 1.0,
            train_fraction: 0.8,
            stride: 1,
            seed: 1,
        }
    }
}

impl TrainCmdConfig {
    fn window(&self) -> WindowMode {
        match self.n_e {
            Some(n_e) => WindowMode::FixedCount { n_e },
            None => WindowMode::FixedTime { t_e_us: self.t_e_us },
        }
    }

    fn replay(&self) -> ReplayConfig {
        ReplayConfig {
            n_ebbi: self.n_ebbi,
            window: self.window(),
            patch: self.patch,
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg: TrainCmdConfig = load_config(&args.config)?;
    if let Some(v) = args.n_ebbi {
        cfg.n_ebbi = v;
    }
    if let Some(v) = args.t_e_us {
        cfg.t_e_us = v;
    }
    if args.n_e.is_some() {
        cfg.n_e = args.n_e;
    }
    if let Some(v) = args.patch {
        cfg.patch = v;
    }
    if let Some(v) = args.n_hidden {
        cfg.n_hidden = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.train_fraction {
        cfg.train_fraction = v;
    }
    if let Some(v) = args.stride {
        cfg.stride = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if cfg.stride == 0 {
        bail!("stride must be at least 1");
    }

    let stream = read_events_auto(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let ds = build_dataset(&stream, &cfg.replay(), cfg.train_fraction)?;
    let train_set: Vec<_> = ds.train.iter().step_by(cfg.stride).cloned().collect();
    println!(
        "{} train samples ({} after stride {}), {} test samples",
        ds.train.len(),
        train_set.len(),
        cfg.stride,
        ds.test.len()
    );

    let train_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        surrogate_slope: cfg.surrogate_slope,
        train_fraction: cfg.train_fraction,
        n_hidden: cfg.n_hidden,
        seed: cfg.seed,
    };
    let log_test = args.log_out.as_ref().map(|_| ds.test.as_slice());
    let (float_net, log) = train_with_log(&train_set, log_test, &train_cfg)?;
    let quantized = quantize(&float_net)?;

    save_network(&quantized, &args.model_out)?;
    echo_config("train", true, &cfg, &args.model_out)?;
    if let Some(path) = &args.float_out {
        save_float_network(&float_net, path)?;
    }
    if let Some(path) = &args.log_out {
        std::fs::write(path, training_log_csv(&log))?;
    }

    let curve = sweep_threshold(&quantized, &ds.test)?;
    println!("test auc = {:.4}", curve.auc);
    println!("model written to {}", args.model_out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labeled input event file.
    #[arg(long)]
    input: PathBuf,
    /// Report directory (roc.csv, report.json, config.json).
    #[arg(long)]
    out_dir: PathBuf,
    /// snnf, baf, stcf, or onf.
    #[arg(long)]
    filter: Option<String>,
    /// Trained model, required for snnf.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Neighbor count threshold for stcf.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    tau_points: Option<usize>,
    #[arg(long)]
    n_ebbi: Option<usize>,
    #[arg(long)]
    t_e_us: Option<u64>,
    #[arg(long)]
    patch: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalConfig {
    filter: String,
    k: u32,
    tau_points: usize,
    n_ebbi: usize,
    t_e_us: u64,
    patch: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            filter: "snnf".into(),
            k: 4,
            tau_points: 33,
            n_ebbi: 2,
            t_e_us: 25_000,
            patch: 5,
        }
    }
}

#[derive(Serialize)]
struct EvalReport<'a> {
    filter: &'a str,
    auc: f64,
    n_events: usize,
    n_signal: usize,
    n_noise: usize,
    /// What the roc.csv threshold column means for this filter.
    threshold_kind: &'a str,
    params: &'a EvalConfig,
}

/// Replay the stream and score every event with the model, mirroring the
/// write-then-extract order used in training.
fn score_stream(
    net: &QuantizedFcsnn,
    stream: &EventStream,
    n_ebbi: usize,
    window: WindowMode,
    patch: usize,
) -> Result<Vec<i32>> {
    let mut stack = EbbiStack::new(stream.geometry(), n_ebbi, window)?;
    let mut scores = Vec::with_capacity(stream.len());
    for e in stream.iter() {
        stack.process_event(e)?;
        let seq = extract_sequence(&stack, e, patch)?;
        scores.push(score_sequence(net, &seq)?);
    }
    Ok(scores)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut cfg: EvalConfig = load_config(&args.config)?;
    if let Some(v) = &args.filter {
        cfg.filter = v.clone();
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.tau_points {
        cfg.tau_points = v;
    }
    if let Some(v) = args.n_ebbi {
        cfg.n_ebbi = v;
    }
    if let Some(v) = args.t_e_us {
        cfg.t_e_us = v;
    }
    if let Some(v) = args.patch {
        cfg.patch = v;
    }

    let stream = read_events_auto(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    if !stream.is_fully_labeled() {
        bail!("eval needs a fully labeled file (every event signal or noise)");
    }

    let (curve, threshold_kind) = match cfg.filter.as_str() {
        "snnf" => {
            let model = args
                .model
                .as_ref()
                .context("--model is required for --filter snnf")?;
            let net = load_network(model)?;
            let scores = score_stream(
                &net,
                &stream,
                cfg.n_ebbi,
                WindowMode::FixedTime { t_e_us: cfg.t_e_us },
                cfg.patch,
            )?;
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64).collect();
            let labels: Vec<Label> = stream.iter().map(|e| e.label).collect();
            (roc_from_scores(&scores, &labels)?, "theta (score)")
        }
        name => {
            let filter = match name {
                "baf" => BaselineFilter::Baf,
                "stcf" => BaselineFilter::Stcf { k: cfg.k },
                "onf" => BaselineFilter::Onf,
                other => bail!("unknown filter {other:?} (expected snnf, baf, stcf, onf)"),
            };
            let taus = default_tau_grid(cfg.tau_points);
            (
                roc_by_tau(filter, &stream, &taus, SaeConfig::default())?,
                "tau (us)",
            )
        }
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    std::fs::write(args.out_dir.join("roc.csv"), curve.to_csv())?;
    let n_signal = stream.iter().filter(|e| e.label == Label::Signal).count();
    let report = EvalReport {
        filter: &cfg.filter,
        auc: curve.auc,
        n_events: stream.len(),
        n_signal,
        n_noise: stream.len() - n_signal,
        threshold_kind,
        params: &cfg,
    };
    std::fs::write(
        args.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    echo_config("eval", false, &cfg, &args.out_dir.join("config.json"))?;
    println!("{} auc = {:.4}", cfg.filter, curve.auc);
    println!("report written to {}", args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// filter

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    format: Option<String>,
    /// Decision threshold: events scoring >= theta are kept.
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<i32>,
    #[arg(long)]
    n_ebbi: Option<usize>,
    #[arg(long)]
    t_e_us: Option<u64>,
    #[arg(long)]
    patch: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FilterConfig {
    theta: i32,
    n_ebbi: usize,
    t_e_us: u64,
    patch: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            theta: 0,
            n_ebbi: 2,
            t_e_us: 25_000,
            patch: 5,
        }
    }
}

fn cmd_filter(args: FilterArgs) -> Result<()> {
    let mut cfg: FilterConfig = load_config(&args.config)?;
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.n_ebbi {
        cfg.n_ebbi = v;
    }
    if let Some(v) = args.t_e_us {
        cfg.t_e_us = v;
    }
    if let Some(v) = args.patch {
        cfg.patch = v;
    }

    let stream = read_events_auto(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let net = load_network(&args.model)?;
    let scores = score_stream(
        &net,
        &stream,
        cfg.n_ebbi,
        WindowMode::FixedTime { t_e_us: cfg.t_e_us },
        cfg.patch,
    )?;
    let kept: Vec<_> = stream
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s >= cfg.theta)
        .map(|(e, _)| e.clone())
        .collect();
    let n_kept = kept.len();
    let filtered = EventStream::new(stream.geometry(), kept)?;
    let format = format_for(&args.out, &args.format)?;
    write_events(&args.out, &filtered, format)?;
    echo_config("filter", false, &cfg, &args.out)?;
    println!(
        "kept {} of {} events ({} dropped) -> {}",
        n_kept,
        stream.len(),
        stream.len() - n_kept,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// hwreport

#[derive(Args)]
struct HwreportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV with one row per geometry.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    clock_mhz: Option<f64>,
    #[arg(long)]
    n_ebbi: Option<usize>,
    /// serial or pipelined.
    #[arg(long)]
    mode: Option<String>,
    /// Extra WxH geometry rows (repeatable), e.g. --geometry 128x128.
    #[arg(long = "geometry")]
    geometries: Vec<String>,
    #[arg(long)]
    word_bits: Option<usize>,
    #[arg(long)]
    event_rate_meps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HwConfig {
    clock_mhz: f64,
    n_ebbi: usize,
    mode: String,
    /// Serial cycles per event: "latency" or "latency_plus_one".
    accounting: String,
    n_hidden: usize,
    patch: usize,
    n_banks: usize,
    word_bits: usize,
    /// "per_bank_cycle" (one read per bank per fetch cycle) or "per_plane".
    read_accounting: String,
    dynamic_power_mw: f64,
    leakage_mw: f64,
    event_rate_meps: f64,
    geometries: Vec<[u16; 2]>,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            clock_mhz: 400.0,
            n_ebbi: 2,
            mode: "serial".into(),
            accounting: "latency".into(),
            n_hidden: 30,
            patch: 5,
            n_banks: 5,
            word_bits: 4,
            read_accounting: "per_bank_cycle".into(),
            dynamic_power_mw: 65.24,
            leakage_mw: 0.012,
            event_rate_meps: 1.0,
            geometries: vec![[240, 180], [346, 260], [640, 480], [1280, 960]],
        }
    }
}

#[derive(Serialize)]
struct GeometryRow {
    width: u16,
    height: u16,
    memory_bits: u64,
    memory_bytes: u64,
    snnf_pj: f64,
    baf_pj: f64,
    stcf_pj: f64,
    onf_pj: f64,
}

#[derive(Serialize)]
struct HwReport<'a> {
    latency_cycles: u32,
    cycles_per_event: u32,
    throughput_meps: f64,
    energy_per_event_nj: f64,
    power_total_mw: f64,
    geometries: Vec<GeometryRow>,
    params: &'a HwConfig,
}

fn cmd_hwreport(args: HwreportArgs) -> Result<()> {
    let mut cfg: HwConfig = load_config(&args.config)?;
    if let Some(v) = args.clock_mhz {
        cfg.clock_mhz = v;
    }
    if let Some(v) = args.n_ebbi {
        cfg.n_ebbi = v;
    }
    if let Some(v) = &args.mode {
        cfg.mode = v.clone();
    }
    if let Some(v) = args.word_bits {
        cfg.word_bits = v;
    }
    if let Some(v) = args.event_rate_meps {
        cfg.event_rate_meps = v;
    }
    for g in &args.geometries {
        let (w, h) = g
            .split_once('x')
            .with_context(|| format!("geometry {g:?} is not WxH"))?;
        cfg.geometries.push([w.parse()?, h.parse()?]);
    }

    let mode = match cfg.mode.as_str() {
        "serial" => PipelineMode::Serial,
        "pipelined" => PipelineMode::Pipelined,
        other => bail!("unknown mode {other:?} (expected serial or pipelined)"),
    };
    let accounting = match cfg.accounting.as_str() {
        "latency" => CycleAccounting::Latency,
        "latency_plus_one" => CycleAccounting::LatencyPlusOne,
        other => bail!("unknown accounting {other:?}"),
    };
    let read_accounting = match cfg.read_accounting.as_str() {
        "per_bank_cycle" => ReadAccounting::PerBankCycle,
        "per_plane" => ReadAccounting::PerPlane,
        other => bail!("unknown read accounting {other:?}"),
    };

    let pipe = PipelineConfig {
        n_ebbi: cfg.n_ebbi,
        mode,
        serial_accounting: accounting,
    };
    let latency = latency_cycles(&pipe);
    let energy_cycles = match accounting {
        CycleAccounting::Latency => latency,
        CycleAccounting::LatencyPlusOne => latency + 1,
    };
    let clock_hz = cfg.clock_mhz * 1e6;
    let spec = PowerSpec {
        dynamic_power_mw: cfg.dynamic_power_mw,
        clock_hz,
        leakage_mw: cfg.leakage_mw,
    };
    let costs = CostTable::default();
    let snnf_params = SnnfHwParams {
        patch: cfg.patch,
        n_ebbi: cfg.n_ebbi,
        n_hidden: cfg.n_hidden,
        bank: BankConfig {
            n_banks: cfg.n_banks,
            word_bits: cfg.word_bits,
        },
        read_accounting,
    };

    let geometries = cfg
        .geometries
        .iter()
        .map(|&[w, h]| -> Result<GeometryRow> {
            let g = SensorGeometry::new(w, h)?;
            let bits = memory_bits(g, cfg.n_ebbi);
            let per = |kind| energy_breakdown(kind, g, &snnf_params, &costs).total_pj;
            Ok(GeometryRow {
                width: w,
                height: h,
                memory_bits: bits,
                memory_bytes: bits / 8,
                snnf_pj: per(FilterKind::Snnf),
                baf_pj: per(FilterKind::Baf),
                stcf_pj: per(FilterKind::Stcf),
                onf_pj: per(FilterKind::Onf),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = HwReport {
        latency_cycles: latency,
        cycles_per_event: energy_cycles,
        throughput_meps: throughput_meps(&pipe, clock_hz),
        energy_per_event_nj: energy_per_event_nj(&spec, energy_cycles),
        power_total_mw: power_total_mw(&spec, energy_cycles, cfg.event_rate_meps * 1e6),
        geometries,
        params: &cfg,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(csv) = &args.csv {
        let mut text =
            String::from("width,height,memory_bits,memory_bytes,snnf_pj,baf_pj,stcf_pj,onf_pj\n");
        for r in &report.geometries {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.width,
                r.height,
                r.memory_bits,
                r.memory_bytes,
                r.snnf_pj,
                r.baf_pj,
                r.stcf_pj,
                r.onf_pj
            ));
        }
        std::fs::write(csv, text)?;
    }
    echo_config("hwreport", false, &cfg, &args.out)?;
    println!(
        "latency {} cycles, throughput {:.2} Meps, energy {:.3} nJ/event",
        report.latency_cycles, report.throughput_meps, report.energy_per_event_nj
    );
    println!("report written to {}", args.out.display());
    Ok(())
}
