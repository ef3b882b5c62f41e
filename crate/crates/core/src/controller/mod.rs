//! Experiment orchestration.
//!
//! An experiment walks through three phases: the operator switches the
//! devices on one by one, the controller waits out the experiment window
//! and then queries the network server device by device, and finally the
//! devices are switched off in priority order. Per-device delivered and
//! sent counts come from frame-counter gaps in the collected packets.

mod counts;
mod experiment;
mod operator;
mod report;
mod roster;
mod testbed;

use std::io;

use thiserror::Error;

pub use counts::{compute_counts, counts_from_fcnts};
pub use experiment::{
    build_reports, collect, run_experiment, turn_off_sequence, turn_on_sequence, Collected, ExperimentOutcome,
    ExperimentSettings, Priority, ShutdownEntry, ShutdownLog,
};
pub use operator::{Action, AutoConfirm, InteractiveOperator, Operator, Recording, Reply, ScriptedOperator};
pub use report::{
    parse_report, render_report, render_timestamps, write_output, DeviceReport, ExperimentMeta, Flag, LateResponder,
    ParsedReport, ReportParseError,
};
pub use roster::{load_roster, parse_roster, DeviceMatrix, RosterEntry, RosterError};
pub use testbed::{LogFileSink, PacketSink, SimFleet, SimTestbed, Testbed, WallClock};

use crate::netserver::NetServerError;
use crate::simulator::SimError;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Roster(#[from] RosterError),
    #[error("network server unreachable: {0}")]
    Connectivity(#[source] NetServerError),
    #[error("operator: {0}")]
    Operator(String),
    #[error("invalid window [{start}, {end}]")]
    Window { start: f64, end: f64 },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
