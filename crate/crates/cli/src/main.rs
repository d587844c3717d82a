mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use crane_guide::eval::{evaluate_sweep, Thresholds};
use crane_guide::guidance::GuidanceReport;
use crane_guide::par::Execution;
use crane_guide::pipeline::process_and_annotate;
use crane_guide::synth::sweep;
use crane_guide::wire::{
    run_host, run_module_daemon, DaemonConfig, DirectorySource, FrameEncoding, FrameError, HostConfig,
    SynthSource,
};
use crane_guide::Image;

use config::Config;

static STOP: AtomicBool = AtomicBool::new(false);

/// Landing-corner guidance for crane loads: single frames, synthetic
/// scenes, module daemon, host aggregator and accuracy sweeps.
#[derive(Debug, Parser)]
#[command(name = "craneguide", version)]
struct Cli {
    /// Settings file (key = value with [canny], [hough], [line], [laser],
    /// [scene], [wire] sections).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline on one image.
    Process(ProcessArgs),
    /// Render synthetic frames and their ground truth.
    Scene(SceneArgs),
    /// Process frames and stream them to a host.
    Module(ModuleArgs),
    /// Receive module streams and store frames and the guidance log.
    Host(HostArgs),
    /// Score the pipeline on a synthetic distance sweep.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct ProcessArgs {
    /// Input image (PNG, PGM or PPM).
    #[arg(long)]
    input: PathBuf,
    /// Annotated output image.
    #[arg(long)]
    output: PathBuf,
    /// Where to write the one-line JSON report; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Comma-separated camera heights in metres.
    #[arg(long, default_value = "1,2,3,4,5")]
    distances: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ModuleArgs {
    /// Host to connect to [default: from config, else 127.0.0.1].
    #[arg(long)]
    host: Option<String>,
    /// Host port [default: from config, else 7420].
    #[arg(long, env = "GLG_PORT")]
    port: Option<u16>,
    /// Module slot, 0 to 2.
    #[arg(long, default_value_t = 0)]
    module_id: u8,
    /// Directory of frames, sent in file-name order.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    source: Option<PathBuf>,
    /// Send this many rendered frames instead of reading a directory.
    #[arg(long)]
    synth: Option<usize>,
    /// Distances cycled through by --synth.
    #[arg(long, default_value = "1,2,3,4,5")]
    distances: String,
    /// Seed for --synth.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame rate ceiling; 0 for none.
    #[arg(long)]
    fps: Option<f64>,
    /// Frame encoding on the wire: png or raw.
    #[arg(long)]
    encoding: Option<FrameEncoding>,
    #[arg(long)]
    queue_depth: Option<usize>,
    #[arg(long)]
    retry_attempts: Option<u32>,
    #[arg(long)]
    retry_delay_ms: Option<u64>,
}

#[derive(Debug, Args)]
struct HostArgs {
    /// Address to listen on.
    #[arg(long, default_value = "0.0.0.0")]
    listen: String,
    /// Listen port [default: from config, else 7420].
    #[arg(long, env = "GLG_PORT")]
    port: Option<u16>,
    /// Output directory for frames and guidance.log.
    #[arg(long)]
    out: PathBuf,
    /// Concurrent module connections, 1 to 3.
    #[arg(long)]
    slots: Option<usize>,
    /// Exit after this many frame packets.
    #[arg(long)]
    exit_after: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Comma-separated camera heights in metres.
    #[arg(long, default_value = "1,2,3,4,5")]
    distances: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames rendered per distance.
    #[arg(long, default_value_t = 1)]
    seeds_per_distance: usize,
    /// Table output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pixels added to the laser-offset corner budget.
    #[arg(long, default_value_t = 3.0)]
    corner_slack: f64,
    /// Largest laser centroid error, pixels.
    #[arg(long, default_value_t = 1.0)]
    laser_tol: f64,
    /// Largest diagonal angle error, degrees.
    #[arg(long, default_value_t = 2.0)]
    theta_tol: f64,
    /// Smallest fraction of frames with a full result.
    #[arg(long, default_value_t = 0.95)]
    min_full: f64,
    /// Evaluate frames one at a time.
    #[arg(long)]
    sequential: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn parse_distances(s: &str) -> Result<Vec<f64>, Failure> {
    let parsed: Result<Vec<f64>, _> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<f64>() {
            Ok(d) if d.is_finite() && d > 0.0 => Ok(d),
            _ => Err(anyhow!("bad distance `{t}`")),
        })
        .collect();
    match parsed {
        Ok(v) if v.is_empty() => Err(usage(anyhow!("distance list is empty"))),
        Ok(v) => Ok(v),
        Err(e) => Err(usage(e)),
    }
}

fn write_report(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_process(cfg: &Config, a: &ProcessArgs) -> Result<(), Failure> {
    let img = Image::open(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?
        .to_rgb8();
    let (result, annotated) = process_and_annotate(&img, &cfg.pipeline)?;
    annotated
        .save(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    let line = GuidanceReport::from_result(&result).to_json_line() + "\n";
    write_report(a.report.as_deref(), &line)?;
    Ok(())
}

fn cmd_scene(cfg: &Config, a: &SceneArgs) -> Result<(), Failure> {
    let distances = parse_distances(&a.distances)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let frames = sweep(&cfg.sweep, &distances, a.seed, Execution::Parallel)?;
    for (i, f) in frames.iter().enumerate() {
        let stem = a.out.join(format!("scene_{i:03}"));
        f.image.save(stem.with_extension("png"))?;
        let json = serde_json::to_string_pretty(&f.truth)? + "\n";
        std::fs::write(stem.with_extension("json"), json)?;
    }
    log::info!("wrote {} scenes to {}", frames.len(), a.out.display());
    Ok(())
}

fn cmd_module(cfg: &Config, a: &ModuleArgs) -> Result<(), Failure> {
    let w = &cfg.wire;
    let host = a.host.clone().unwrap_or_else(|| w.host.clone());
    let port = a.port.unwrap_or(w.port);
    let fps = a.fps.map_or(w.fps(), |f| (f > 0.0).then_some(f));
    let dcfg = DaemonConfig {
        host: format!("{host}:{port}"),
        module_id: a.module_id,
        fps_cap: fps,
        encoding: a.encoding.unwrap_or(w.encoding),
        queue_depth: a.queue_depth.unwrap_or(w.queue_depth),
        retry_attempts: a.retry_attempts.unwrap_or(w.retry_attempts),
        retry_delay: a.retry_delay_ms.map_or(w.retry_delay(), std::time::Duration::from_millis),
        params: cfg.pipeline,
    };
    dcfg.validate().map_err(usage)?;
    let source: Box<dyn Iterator<Item = Result<Image, FrameError>>> = match (&a.source, a.synth) {
        (Some(dir), _) => Box::new(
            DirectorySource::open(dir).with_context(|| format!("reading {}", dir.display()))?,
        ),
        (None, Some(n)) => Box::new(SynthSource::new(cfg.sweep, parse_distances(&a.distances)?, a.seed, n)),
        (None, None) => return Err(usage(anyhow!("need --source or --synth"))),
    };
    let stats = run_module_daemon(source, &dcfg, &STOP)?;
    println!(
        "module {}: processed {}, sent {}, dropped {}, skipped {}",
        a.module_id, stats.frames_processed, stats.packets_sent, stats.packets_dropped, stats.frames_skipped
    );
    Ok(())
}

fn cmd_host(cfg: &Config, a: &HostArgs) -> Result<(), Failure> {
    let hcfg = HostConfig {
        listen: format!("{}:{}", a.listen, a.port.unwrap_or(cfg.wire.port)),
        out_dir: a.out.clone(),
        slots: a.slots.unwrap_or(cfg.wire.slots),
        exit_after: a.exit_after,
        ..HostConfig::default()
    };
    if !(1..=3).contains(&hcfg.slots) {
        return Err(usage(anyhow!("--slots must be 1..=3")));
    }
    let summary = run_host(hcfg, &STOP)?;
    println!("{summary}");
    Ok(())
}

fn cmd_eval(cfg: &Config, a: &EvalArgs) -> Result<(), Failure> {
    let distances = parse_distances(&a.distances)?;
    if a.seeds_per_distance == 0 {
        return Err(usage(anyhow!("--seeds-per-distance must be positive")));
    }
    let thresholds = Thresholds {
        corner_slack_px: a.corner_slack,
        laser_max_px: a.laser_tol,
        theta_max_deg: a.theta_tol,
        min_full_fraction: a.min_full,
    };
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let report = evaluate_sweep(
        &cfg.sweep,
        &cfg.pipeline,
        &distances,
        a.seeds_per_distance,
        a.seed,
        thresholds,
        exec,
    )?;
    write_report(a.out.as_deref(), &report.to_table())?;
    let violations = report.violations();
    if violations.is_empty() {
        eprintln!("eval: {} frames, all thresholds met", report.frames.len());
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("eval: thresholds violated: {}", violations.join("; "))))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(usage)?,
        None => Config::default(),
    };
    match &cli.cmd {
        Command::Process(a) => cmd_process(&cfg, a),
        Command::Scene(a) => cmd_scene(&cfg, a),
        Command::Module(a) => cmd_module(&cfg, a),
        Command::Host(a) => cmd_host(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if matches!(cli.cmd, Command::Module(_) | Command::Host(_)) {
        if let Err(e) = ctrlc::set_handler(|| STOP.store(true, Ordering::Relaxed)) {
            log::warn!("no signal handler: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
