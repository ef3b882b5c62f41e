use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::operator::Action;
use super::roster::DeviceMatrix;
use super::ControllerError;
use crate::netserver::{PacketRecord, PacketStore};
use crate::simulator::{packet_records, CollisionModel, DeviceSpec, Phase, Simulation, TransmissionEvent};

/// The physical side of an experiment: a clock, and devices that react to
/// confirmed operator actions.
pub trait Testbed {
    fn now(&self) -> f64;
    fn wait_until(&mut self, ts: f64) -> Result<(), ControllerError>;
    /// Called after the operator confirmed `action`.
    fn apply(&mut self, action: &Action) -> Result<(), ControllerError>;
    /// Called after every prompt, confirmed or not.
    fn settle(&mut self) -> Result<(), ControllerError> {
        Ok(())
    }
}

/// Real hardware: time is the system clock, devices are toggled by hand.
#[derive(Debug, Default, Clone, Copy)]
pub struct WallClock;

impl Testbed for WallClock {
    fn now(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }

    fn wait_until(&mut self, ts: f64) -> Result<(), ControllerError> {
        let left = ts - self.now();
        if left > 0.0 {
            thread::sleep(Duration::from_secs_f64(left));
        }
        Ok(())
    }

    fn apply(&mut self, _: &Action) -> Result<(), ControllerError> {
        Ok(())
    }
}

/// Destination for packets the simulated gateway received.
pub trait PacketSink {
    fn deliver(&mut self, records: &[PacketRecord]) -> io::Result<()>;
}

/// Appends base-station log lines to a file a network server tails.
pub struct LogFileSink {
    file: BufWriter<File>,
}

impl LogFileSink {
    pub fn append(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            file: BufWriter::new(file),
        })
    }
}

impl PacketSink for LogFileSink {
    fn deliver(&mut self, records: &[PacketRecord]) -> io::Result<()> {
        for r in records {
            writeln!(self.file, "{r}")?;
        }
        self.file.flush()
    }
}

impl PacketSink for Arc<PacketStore> {
    fn deliver(&mut self, records: &[PacketRecord]) -> io::Result<()> {
        self.ingest(records);
        Ok(())
    }
}

impl PacketSink for Vec<PacketRecord> {
    fn deliver(&mut self, records: &[PacketRecord]) -> io::Result<()> {
        self.extend_from_slice(records);
        Ok(())
    }
}

/// Radio parameters for the simulated fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFleet {
    pub sf: u8,
    pub period: f64,
    pub airtime: f64,
    pub phase: Phase,
    pub model: CollisionModel,
    pub seed: u64,
    /// Simulated seconds each operator prompt takes.
    pub step: f64,
    /// Per-device overrides of (sf, period, airtime, phase).
    pub overrides: HashMap<String, (u8, f64, f64, Phase)>,
    /// Devices that never transmit, whatever the operator does.
    pub dead: HashSet<String>,
    /// `responder -> trigger`: the responder stays silent after being turned
    /// on until the trigger device is turned off.
    pub dormant: HashMap<String, String>,
}

impl SimFleet {
    pub fn new(sf: u8, period: f64, airtime: f64, seed: u64) -> Self {
        Self {
            sf,
            period,
            airtime,
            phase: Phase::PerPeriod,
            model: CollisionModel::AnyOverlap,
            seed,
            step: 1.0,
            overrides: HashMap::new(),
            dead: HashSet::new(),
            dormant: HashMap::new(),
        }
    }
}

/// Simulated radio environment driven by operator actions. Packets become
/// visible to the sink as the clock passes their receive time.
pub struct SimTestbed<S> {
    sim: Simulation,
    sink: S,
    step: f64,
    dead: HashSet<String>,
    dormant: HashMap<String, String>,
    powered: HashSet<String>,
    history: Vec<TransmissionEvent>,
}

impl<S: PacketSink> SimTestbed<S> {
    pub fn new(matrix: &DeviceMatrix, fleet: &SimFleet, sink: S) -> Result<Self, ControllerError> {
        let specs: Vec<DeviceSpec> = matrix
            .entries()
            .iter()
            .map(|e| {
                let (sf, period, airtime, phase) = fleet
                    .overrides
                    .get(&e.device_id)
                    .copied()
                    .unwrap_or((fleet.sf, fleet.period, fleet.airtime, fleet.phase));
                DeviceSpec::new(e.device_id.clone(), e.dev_eui, sf, period, airtime).with_phase(phase)
            })
            .collect();
        let mut sim = Simulation::new(specs, fleet.model, fleet.seed)?;
        for e in matrix.entries() {
            sim.switch_off(&e.device_id, 0.0)?;
        }
        Ok(Self {
            sim,
            sink,
            step: fleet.step,
            dead: fleet.dead.clone(),
            dormant: fleet.dormant.clone(),
            powered: HashSet::new(),
            history: Vec::new(),
        })
    }

    /// Every transmission whose outcome is already known.
    pub fn history(&self) -> &[TransmissionEvent] {
        &self.history
    }

    /// (delivered, sent) for a device over receive times in `[from, to]`.
    pub fn ground_truth(&self, device_id: &str, from: f64, to: f64) -> (u64, u64) {
        self.history
            .iter()
            .filter(|e| e.device_id == device_id && e.end >= from && e.end <= to)
            .fold((0, 0), |(d, s), e| (d + u64::from(e.delivered), s + 1))
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }
}

impl<S: PacketSink> Testbed for SimTestbed<S> {
    fn now(&self) -> f64 {
        self.sim.now()
    }

    fn wait_until(&mut self, ts: f64) -> Result<(), ControllerError> {
        let finished = self.sim.advance_until(ts);
        self.sink.deliver(&packet_records(&finished))?;
        self.history.extend(finished);
        Ok(())
    }

    fn apply(&mut self, action: &Action) -> Result<(), ControllerError> {
        let now = self.sim.now();
        match action {
            Action::TurnOn(id) => {
                self.powered.insert(id.clone());
                if !self.dead.contains(id) && !self.dormant.contains_key(id) {
                    self.sim.switch_on(id, now)?;
                }
            }
            Action::TurnOff(id) => {
                self.powered.remove(id);
                self.sim.switch_off(id, now)?;
                let woken: Vec<String> = self
                    .dormant
                    .iter()
                    .filter(|(_, trigger)| *trigger == id)
                    .map(|(responder, _)| responder.clone())
                    .collect();
                for responder in woken {
                    self.dormant.remove(&responder);
                    if self.powered.contains(&responder) && !self.dead.contains(&responder) {
                        self.sim.switch_on(&responder, now)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn settle(&mut self) -> Result<(), ControllerError> {
        let next = self.sim.now() + self.step;
        self.wait_until(next)
    }
}
