use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use lorapdr::scaling::{window_success, TrafficProfile};
use lorapdr::simulator::{export_packet_log, run as simulate, write_event_log, write_packet_log, CollisionModel, DeviceSpec, Phase};
use lorapdr::DevEui;

use crate::{parse_model, parse_phase, window_factor};

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// Devices on the primary spreading factor.
    #[arg(long)]
    devices: u64,
    /// Transmit period in seconds.
    #[arg(long)]
    period: f64,
    /// Packet airtime in seconds.
    #[arg(long)]
    airtime: f64,
    #[arg(long, default_value_t = 7)]
    sf: u8,
    /// Additional devices on SF8 (same period).
    #[arg(long, default_value_t = 0)]
    sf8_devices: u64,
    /// Airtime of the SF8 devices in seconds.
    #[arg(long)]
    sf8_airtime: Option<f64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: f64,
    /// any, window or window:<factor>.
    #[arg(long, default_value = "any", value_parser = parse_model)]
    model: CollisionModel,
    /// per-period or random.
    #[arg(long, default_value = "per-period", value_parser = parse_phase)]
    phase: Phase,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write delivered packets as a base-station log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write every transmission with its outcome.
    #[arg(long)]
    events: Option<PathBuf>,
}

struct Group {
    sf: u8,
    devices: u64,
    airtime: f64,
}

pub fn run(a: SimulateArgs) -> Result<()> {
    let mut groups = vec![Group {
        sf: a.sf,
        devices: a.devices,
        airtime: a.airtime,
    }];
    if a.sf8_devices > 0 {
        let airtime = a.sf8_airtime.context("--sf8-devices needs --sf8-airtime")?;
        anyhow::ensure!(a.sf != 8, "--sf8-devices needs the primary group on another SF");
        groups.push(Group {
            sf: 8,
            devices: a.sf8_devices,
            airtime,
        });
    }

    let mut specs = Vec::new();
    for g in &groups {
        for _ in 0..g.devices {
            let n = specs.len() as u64 + 1;
            specs.push(
                DeviceSpec::new(format!("n{n}"), DevEui::new(n), g.sf, a.period, g.airtime).with_phase(a.phase),
            );
        }
    }
    let result = simulate(&specs, a.duration, a.model, a.seed)?;

    println!("seed = {}", a.seed);
    let mut expected_weighted = Some(0.0);
    for g in &groups {
        let outcomes: Vec<_> = result.devices.iter().filter(|d| d.sf == g.sf).collect();
        let sent: u64 = outcomes.iter().map(|d| d.sent).sum();
        let delivered: u64 = outcomes.iter().map(|d| d.delivered).sum();
        let expected = TrafficProfile::new(g.devices, a.period, g.airtime)
            .ok()
            .and_then(|p| window_success(&p, window_factor(a.model)).ok());
        expected_weighted = expected_weighted.zip(expected).map(|(acc, e)| acc + e * sent as f64);
        let pdr = if sent > 0 { delivered as f64 / sent as f64 } else { f64::NAN };
        print!("sf{} devices = {} sent = {sent} delivered = {delivered} pdr = {pdr:.6}", g.sf, g.devices);
        match expected {
            Some(e) => println!(" expected = {e:.6}"),
            None => println!(),
        }
    }
    println!("sent = {}", result.sent());
    println!("delivered = {}", result.delivered());
    if let Some(pdr) = result.pdr() {
        match expected_weighted.map(|w| w / result.sent() as f64) {
            Some(e) => {
                let se = result.binomial_stderr(e);
                println!("PDR = {pdr:.6} expected = {e:.6} stderr = {se:.6} z = {:+.2}", (pdr - e) / se);
            }
            None => println!("PDR = {pdr:.6}"),
        }
    }

    if let Some(path) = &a.log {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_packet_log(&export_packet_log(&result), BufWriter::new(file))?;
    }
    if let Some(path) = &a.events {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_event_log(&result.events, BufWriter::new(file))?;
    }
    Ok(())
}
