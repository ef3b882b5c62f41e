use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use lorapdr::airtime::{time_on_air, RadioConfig};
use lorapdr::analysis::{bounds_curve, equivalent_airtime, network_bounds, pdr_aggregate, scale_mix, SfMixConfig};
use lorapdr::controller::parse_report;
use lorapdr::simulator::{run as simulate, CollisionModel, DeviceSpec};
use lorapdr::DevEui;

use crate::parse_model;

#[derive(Debug, clap::Args)]
#[command(args_override_self = true)]
pub struct AnalyzeArgs {
    /// Real-system device count swept from all-SF7 to all-SF8.
    #[arg(long, default_value_t = 8835)]
    total: u64,
    /// Real transmit period in seconds.
    #[arg(long, default_value_t = 600.0)]
    period: f64,
    /// SF7 airtime in seconds.
    #[arg(long, default_value_t = 0.04122)]
    t7: f64,
    /// SF8 airtime in seconds; defaults to the SF8 time on air of `--payload`.
    #[arg(long, conflicts_with = "t8_double")]
    t8: Option<f64>,
    /// Use exactly twice the SF7 airtime for SF8.
    #[arg(long)]
    t8_double: bool,
    /// Payload bytes used to derive the SF8 airtime.
    #[arg(long, default_value_t = 10)]
    payload: usize,
    /// Curve sampling step in devices.
    #[arg(long, default_value_t = 1)]
    step: u64,
    /// Size of the all-SF7 experiment; sets the experiment-to-real ratio.
    #[arg(long, default_value_t = 36)]
    exp_devices: u64,
    /// Experiment mix `n7,n8`, optionally `n7,n8=REPORT` to take the
    /// empirical PDR from a controller report.
    #[arg(long)]
    point: Vec<String>,
    /// Simulate mixes given without a report.
    #[arg(long)]
    simulate: bool,
    /// Experiment transmit period in seconds.
    #[arg(long, default_value_t = 7.0)]
    exp_period: f64,
    /// Simulated experiment periods per point.
    #[arg(long, default_value_t = 10_000)]
    periods: u64,
    #[arg(long, default_value = "any", value_parser = parse_model)]
    model: CollisionModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit the curve and print only the experiment points.
    #[arg(long)]
    points_only: bool,
}

struct Point {
    n7: u64,
    n8: u64,
    report: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<Point> {
    let (mix, report) = match s.split_once('=') {
        Some((m, r)) => (m, Some(PathBuf::from(r.trim()))),
        None => (s, None),
    };
    let (a, b) = mix
        .split_once(',')
        .ok_or_else(|| anyhow!("--point {s:?}: expected n7,n8[=REPORT]"))?;
    Ok(Point {
        n7: a.trim().parse().with_context(|| format!("--point {s:?}"))?,
        n8: b.trim().parse().with_context(|| format!("--point {s:?}"))?,
        report,
    })
}

fn simulated_pdr(a: &AnalyzeArgs, p: &Point, t7e: f64, t8e: f64, index: u64) -> Result<f64> {
    let mut specs = Vec::new();
    for (sf, count, airtime) in [(7u8, p.n7, t7e), (8, p.n8, t8e)] {
        for _ in 0..count {
            let n = specs.len() as u64 + 1;
            specs.push(DeviceSpec::new(format!("n{n}"), DevEui::new(n), sf, a.exp_period, airtime));
        }
    }
    let r = simulate(&specs, a.periods as f64 * a.exp_period, a.model, a.seed + index)?;
    r.pdr().context("simulation sent no packets")
}

pub fn run(a: AnalyzeArgs) -> Result<()> {
    let t8 = match (a.t8, a.t8_double) {
        (Some(t), _) => t,
        (None, true) => 2.0 * a.t7,
        (None, false) => time_on_air(&RadioConfig::new(8, 125_000.0)?, a.payload)?,
    };
    if a.exp_devices == 0 {
        bail!("--exp-devices must be positive");
    }

    if !a.points_only {
        let curve = bounds_curve(a.total, a.period, a.t7, t8, a.step)?;
        println!("# total {} period {} t7 {} t8 {}", a.total, a.period, a.t7, t8);
        print!("{}", curve.to_text());
        if let Some(best) = curve.best_lower() {
            println!("# best lower bound at n_moved {} ({:.6})", best.n_moved, best.lower);
        }
    }

    if a.point.is_empty() {
        return Ok(());
    }
    let ratio = a.total as f64 / a.exp_devices as f64;
    let t7e = equivalent_airtime(a.t7, a.period, a.exp_period, ratio);
    let t8e = equivalent_airtime(t8, a.period, a.exp_period, ratio);
    println!("# points n_moved lower upper empirical (experiment n7 n8, real n7 n8)");
    for (i, spec) in a.point.iter().enumerate() {
        let p = parse_point(spec)?;
        let (r7, r8) = scale_mix(p.n7, p.n8, ratio)?;
        let band = network_bounds(&SfMixConfig::new(r7, r8, a.period, a.t7, t8)?);
        let empirical = match (&p.report, a.simulate) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let parsed = parse_report(&text).with_context(|| format!("parsing {}", path.display()))?;
                Some(pdr_aggregate(&parsed.reports)?.network)
            }
            (None, true) => Some(simulated_pdr(&a, &p, t7e, t8e, i as u64)?),
            (None, false) => None,
        };
        let tail = format!("# {} {} -> {} {}", p.n7, p.n8, r7, r8);
        match empirical {
            Some(e) => println!("{} {:.6} {:.6} {:.6} {tail}", r8, band.lower, band.upper, e),
            None => println!("{} {:.6} {:.6} {tail}", r8, band.lower, band.upper),
        }
    }
    Ok(())
}
