use std::fs;
use std::io;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use lorapdr::analysis::pdr_aggregate;
use lorapdr::controller::{
    load_roster, render_report, render_timestamps, run_experiment, AutoConfirm, ExperimentSettings,
    InteractiveOperator, LogFileSink, Operator, Recording, ScriptedOperator, SimFleet, SimTestbed, Testbed, WallClock,
};
use lorapdr::netserver::NetClient;
use lorapdr::simulator::{CollisionModel, Phase};

use crate::{parse_model, parse_phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TestbedKind {
    /// Real devices; time is the system clock.
    Wall,
    /// Simulated fleet appending to `--sim-log`.
    Sim,
}

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct ExperimentArgs {
    /// Experiment table; the device id is the first comma-separated field.
    #[arg(long)]
    roster: PathBuf,
    /// `id,eui` table.
    #[arg(long)]
    mapping: PathBuf,
    /// Experiment length in seconds.
    #[arg(long)]
    duration: f64,
    /// Network server address.
    #[arg(long)]
    server: String,
    #[arg(long)]
    token: String,
    /// `sim` to confirm every prompt, or a reply script to replay.
    /// Without it prompts are read from the terminal.
    #[arg(long, value_name = "sim|SCRIPT")]
    auto_operator: Option<String>,
    /// Defaults to `sim` with `--auto-operator sim`, `wall` otherwise.
    #[arg(long, value_enum)]
    testbed: Option<TestbedKind>,
    /// Log file the simulated gateway appends to; the server must tail it.
    #[arg(long)]
    sim_log: Option<PathBuf>,
    /// Single word used in the report header.
    #[arg(long, default_value = "experiment")]
    name: String,
    /// Device transmit period in seconds.
    #[arg(long, default_value_t = 7.0)]
    period: f64,
    /// Simulated packet airtime in seconds.
    #[arg(long, default_value_t = 0.11729)]
    airtime: f64,
    #[arg(long, default_value_t = 7)]
    sf: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "any", value_parser = parse_model)]
    model: CollisionModel,
    #[arg(long, default_value = "per-period", value_parser = parse_phase)]
    phase: Phase,
    /// Simulated seconds per operator prompt.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Per-device radio settings: `id=sf,period,airtime[,phase]`; a phase
    /// value pins the device to a fixed offset.
    #[arg(long = "override", value_name = "SPEC")]
    overrides: Vec<String>,
    /// Simulated device that never transmits.
    #[arg(long)]
    dead: Vec<String>,
    /// `responder:trigger`: responder stays silent until trigger is switched off.
    #[arg(long)]
    dormant: Vec<String>,
    /// Listening time after turn-on, in seconds (default 3 periods).
    #[arg(long)]
    probe_window: Option<f64>,
    /// Listening time after each shutdown, in seconds (default 3 periods).
    #[arg(long)]
    recheck_window: Option<f64>,
    /// Report file; printed to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-packet timestamp file.
    #[arg(long)]
    timestamps: Option<PathBuf>,
    /// Save the operator replies as a replayable script.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

fn parse_override(spec: &str) -> Result<(String, (u8, f64, f64, Option<Phase>))> {
    let (id, rest) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override {spec:?}: expected id=sf,period,airtime[,phase]"))?;
    let fields: Vec<&str> = rest.split(',').map(str::trim).collect();
    let bad = || anyhow!("override {spec:?}: expected id=sf,period,airtime[,phase]");
    let (sf, period, airtime, phase) = match fields.as_slice() {
        [sf, p, t] => (sf, p, t, None),
        [sf, p, t, ph] => (sf, p, t, Some(ph)),
        _ => return Err(bad()),
    };
    let phase = match phase {
        Some(p) => Some(Phase::Fixed(p.parse().map_err(|_| bad())?)),
        None => None,
    };
    Ok((
        id.trim().to_string(),
        (
            sf.parse().map_err(|_| bad())?,
            period.parse().map_err(|_| bad())?,
            airtime.parse().map_err(|_| bad())?,
            phase,
        ),
    ))
}

fn fleet(a: &ExperimentArgs) -> Result<SimFleet> {
    let mut fleet = SimFleet::new(a.sf, a.period, a.airtime, a.seed);
    fleet.model = a.model;
    fleet.phase = a.phase;
    fleet.step = a.step;
    for spec in &a.overrides {
        let (id, (sf, period, airtime, phase)) = parse_override(spec)?;
        fleet.overrides.insert(id, (sf, period, airtime, phase.unwrap_or(a.phase)));
    }
    fleet.dead.extend(a.dead.iter().cloned());
    for pair in &a.dormant {
        let (responder, trigger) = pair
            .split_once(':')
            .ok_or_else(|| anyhow!("--dormant {pair:?}: expected responder:trigger"))?;
        fleet.dormant.insert(responder.to_string(), trigger.to_string());
    }
    Ok(fleet)
}

pub fn run(a: ExperimentArgs) -> Result<()> {
    if !(a.duration > 0.0) {
        bail!("--duration must be positive");
    }
    if a.name.is_empty() || a.name.contains(char::is_whitespace) {
        bail!("--name must be a single word");
    }
    let matrix = load_roster(&a.roster, &a.mapping)?;
    let mut settings = ExperimentSettings::new(a.name.clone(), a.duration, a.period);
    if let Some(w) = a.probe_window {
        settings.probe_window = w;
    }
    if let Some(w) = a.recheck_window {
        settings.recheck_window = w;
    }

    let mut auto = AutoConfirm;
    let mut scripted;
    let stdin = io::stdin();
    let mut interactive;
    let inner: &mut dyn Operator = match a.auto_operator.as_deref() {
        Some("sim") => &mut auto,
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading script {path}"))?;
            scripted = ScriptedOperator::parse(&text)?;
            &mut scripted
        }
        None => {
            interactive = InteractiveOperator::new(stdin.lock(), io::stdout());
            &mut interactive
        }
    };
    let mut operator = Recording::new(inner);

    let kind = a.testbed.unwrap_or(match a.auto_operator.as_deref() {
        Some("sim") => TestbedKind::Sim,
        _ => TestbedKind::Wall,
    });
    let mut wall = WallClock;
    let mut sim;
    let testbed: &mut dyn Testbed = match kind {
        TestbedKind::Wall => &mut wall,
        TestbedKind::Sim => {
            let log = a.sim_log.as_ref().context("a simulated testbed needs --sim-log")?;
            let sink = LogFileSink::append(log).with_context(|| format!("opening {}", log.display()))?;
            sim = SimTestbed::new(&matrix, &fleet(&a)?, sink)?;
            &mut sim
        }
    };

    let mut source = NetClient::connect(a.server.as_str(), &a.token)?;
    let out = run_experiment(&matrix, &settings, &mut operator, testbed, &mut source)?;

    let report = render_report(&out.meta, &out.reports, &out.failures, &out.shutdown.late);
    match &a.out {
        Some(path) => {
            fs::write(path, &report).with_context(|| format!("writing {}", path.display()))?;
            match pdr_aggregate(&out.reports) {
                Ok(s) => println!(
                    "network PDR = {:.6} over {} devices (mean per device {:.6})",
                    s.network, s.devices, s.per_device_mean
                ),
                Err(e) => println!("{e}"),
            }
        }
        None => print!("{report}"),
    }
    if let Some(path) = &a.timestamps {
        fs::write(path, render_timestamps(&out.packets)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.transcript {
        fs::write(path, operator.transcript_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
