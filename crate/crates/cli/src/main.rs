//! `lorapdr`: airtime, load scaling, collision simulation, mock network
//! server, experiment orchestration and analysis from the command line.

mod analyze;
mod config;
mod experiment;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use lorapdr::airtime::{symbol_time, time_on_air, RadioConfig};
use lorapdr::netserver::{serve, PacketStore};
use lorapdr::scaling::{
    channel_load, derive_equivalent, devices_per_thousand, success_bounds, success_exact_periodic, TrafficProfile,
};
use lorapdr::simulator::{CollisionModel, Phase};

#[derive(Debug, Parser)]
#[command(name = "lorapdr", version, about, args_override_self = true)]
struct Cli {
    /// Read `key = value` defaults for the subcommand from a file; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time on air of one LoRa frame.
    Airtime(AirtimeArgs),
    /// Size a load-equivalent experiment for a real deployment.
    Scale(ScaleArgs),
    /// Run the collision simulator and report delivery ratios.
    Simulate(simulate::SimulateArgs),
    /// Serve packet queries from a base-station log.
    Serve(ServeArgs),
    /// Turn devices on, collect packets, count, turn devices off.
    RunExperiment(experiment::ExperimentArgs),
    /// SF7/SF8 bound curve and experiment points as plain text.
    Analyze(analyze::AnalyzeArgs),
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
struct AirtimeArgs {
    #[arg(long, default_value_t = 7)]
    sf: u8,
    /// Bandwidth in Hz.
    #[arg(long, default_value_t = 125_000.0)]
    bw: f64,
    /// Payload length in bytes.
    #[arg(long)]
    payload: usize,
    /// Coding rate denominator: 5 for 4/5 up to 8 for 4/8.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(5..=8))]
    cr: u8,
    #[arg(long, default_value_t = 8)]
    preamble: u16,
    #[arg(long)]
    implicit_header: bool,
    #[arg(long)]
    no_crc: bool,
    /// Low data rate optimisation: on, off or auto (symbol time above 16 ms).
    #[arg(long, default_value = "auto")]
    ldro: String,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
struct ScaleArgs {
    #[arg(long)]
    real_n: u64,
    /// Real transmit period in seconds.
    #[arg(long)]
    real_period: f64,
    /// Real packet airtime in seconds.
    #[arg(long)]
    real_airtime: f64,
    #[arg(long)]
    exp_period: f64,
    #[arg(long)]
    exp_airtime: f64,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:4700")]
    bind: String,
    #[arg(long)]
    token: String,
    /// Append-only packet log, replayed at startup and tailed afterwards.
    #[arg(long)]
    log: PathBuf,
}

pub(crate) fn parse_model(s: &str) -> Result<CollisionModel, String> {
    match s {
        "any" | "any-overlap" => Ok(CollisionModel::AnyOverlap),
        "window" | "full-overlay" => Ok(CollisionModel::VulnerabilityWindow(1.0)),
        _ => {
            let f = s
                .strip_prefix("window:")
                .ok_or_else(|| format!("unknown model {s:?} (any, window, window:<factor>)"))?;
            let f: f64 = f.parse().map_err(|_| format!("bad window factor {f:?}"))?;
            if !(f > 0.0 && f <= 2.0) {
                return Err(format!("window factor must be in (0, 2], got {f}"));
            }
            Ok(CollisionModel::VulnerabilityWindow(f))
        }
    }
}

pub(crate) fn parse_phase(s: &str) -> Result<Phase, String> {
    match s {
        "per-period" => Ok(Phase::PerPeriod),
        "random" => Ok(Phase::Random),
        _ => Err(format!("unknown phase {s:?} (per-period, random)")),
    }
}

/// Vulnerability window factor of a model: 2 for any overlap.
pub(crate) fn window_factor(model: CollisionModel) -> f64 {
    match model {
        CollisionModel::AnyOverlap => 2.0,
        CollisionModel::VulnerabilityWindow(f) => f,
    }
}

fn airtime(a: AirtimeArgs) -> Result<()> {
    let mut cfg = RadioConfig::new(a.sf, a.bw)?
        .with_coding_rate(a.cr - 4)?
        .with_preamble(a.preamble)?
        .with_explicit_header(!a.implicit_header)
        .with_crc(!a.no_crc);
    cfg = match a.ldro.as_str() {
        "auto" => cfg,
        "on" => cfg.with_low_data_rate_optimize(true),
        "off" => cfg.with_low_data_rate_optimize(false),
        other => anyhow::bail!("--ldro must be on, off or auto, got {other:?}"),
    };
    let toa = time_on_air(&cfg, a.payload)?;
    println!("symbol_time = {}", symbol_time(&cfg));
    println!("payload_symbols = {}", cfg.payload_symbols(a.payload)?);
    println!("low_data_rate_optimize = {}", cfg.low_data_rate_optimize());
    println!("time_on_air = {toa}");
    Ok(())
}

fn scale(a: ScaleArgs) -> Result<()> {
    let real = TrafficProfile::new(a.real_n, a.real_period, a.real_airtime)?;
    let exp = derive_equivalent(&real, a.exp_period, a.exp_airtime)?;
    let load = channel_load(&real);
    let bounds = success_bounds(load);
    println!("load = {}", load.value());
    println!("N_e = {}", exp.num_devices());
    println!("experiment_load = {}", channel_load(&exp).value());
    println!("per_1000 = {}", devices_per_thousand(&exp, &real));
    println!("lower_bound = {:.6}", bounds.lower);
    println!("upper_bound = {:.6}", bounds.upper);
    if let Ok(p) = success_exact_periodic(&exp) {
        println!("experiment_exact_periodic = {p:.6}");
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let (store, report) =
        PacketStore::open_log(&a.log).with_context(|| format!("opening log {}", a.log.display()))?;
    for (line, err) in &report.malformed {
        println!("skipped log line {line}: {err}");
    }
    let handle = serve(a.bind.as_str(), &a.token, Arc::new(store))?;
    println!("listening on {}", handle.local_addr());
    println!("replayed {} records ({} duplicates)", report.ingested, report.duplicates);
    handle.join();
    Ok(())
}

fn run() -> Result<()> {
    let args = config::expand(std::env::args_os().collect(), &Cli::command())?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Airtime(a) => airtime(a),
        Command::Scale(a) => scale(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Serve(a) => serve_cmd(a),
        Command::RunExperiment(a) => experiment::run(a),
        Command::Analyze(a) => analyze::run(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
