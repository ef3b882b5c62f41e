//! Seeded discrete-event simulation of periodic LoRa uplinks.
//!
//! Every device owns a slot grid of length `period` anchored at time zero and
//! transmits at most once per slot. Transmissions on the same spreading
//! factor interfere according to a [`CollisionModel`]; different spreading
//! factors never interact and neither packet survives a collision.
//!
//! Randomness is drawn from a ChaCha stream keyed by the run seed and the
//! device EUI, indexed by slot number, so a device's timeline does not
//! depend on which other devices share the run.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet, VecDeque};
use std::io::{self, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::eui::DevEui;
use crate::netserver::PacketRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no devices to simulate")]
    NoDevices,
    #[error("duration must be positive, got {0}")]
    Duration(f64),
    #[error("device {id}: {reason}")]
    Device { id: String, reason: String },
    #[error("duplicate device id {0}")]
    DuplicateId(String),
    #[error("duplicate dev_eui {0}")]
    DuplicateEui(DevEui),
    #[error("vulnerability factor must lie in (0, 2], got {0}")]
    Factor(f64),
    #[error("unknown device {0}")]
    UnknownDevice(String),
}

/// Where in its period a device transmits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// Fixed offset in `[0, period)`; every period repeats exactly.
    Fixed(f64),
    /// One uniform offset drawn per run.
    Random,
    /// A fresh uniform offset in every period.
    PerPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionModel {
    /// Lost iff any same-SF transmission overlaps it in time.
    AnyOverlap,
    /// Lost iff another same-SF transmission starts within
    /// `[end - factor * airtime, end)`.
    VulnerabilityWindow(f64),
}

impl CollisionModel {
    fn validate(self) -> Result<Self, SimError> {
        match self {
            CollisionModel::VulnerabilityWindow(f) if !(f > 0.0 && f <= 2.0) => Err(SimError::Factor(f)),
            m => Ok(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub device_id: String,
    pub dev_eui: DevEui,
    pub sf: u8,
    pub period: f64,
    pub airtime: f64,
    pub phase: Phase,
    pub active_from: f64,
    pub active_until: f64,
}

impl DeviceSpec {
    /// Always-on device with a per-period random phase.
    pub fn new(device_id: impl Into<String>, dev_eui: DevEui, sf: u8, period: f64, airtime: f64) -> Self {
        Self {
            device_id: device_id.into(),
            dev_eui,
            sf,
            period,
            airtime,
            phase: Phase::PerPeriod,
            active_from: 0.0,
            active_until: f64::INFINITY,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn active_between(mut self, from: f64, until: f64) -> Self {
        self.active_from = from;
        self.active_until = until;
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        let fail = |reason: String| {
            Err(SimError::Device {
                id: self.device_id.clone(),
                reason,
            })
        };
        if !(7..=12).contains(&self.sf) {
            return fail(format!("spreading factor {} outside 7..=12", self.sf));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return fail(format!("period {} must be positive", self.period));
        }
        if !(self.airtime > 0.0 && self.airtime < self.period) {
            return fail(format!("airtime {} must lie in (0, period)", self.airtime));
        }
        if let Phase::Fixed(p) = self.phase {
            if !(0.0..self.period).contains(&p) {
                return fail(format!("phase {p} outside [0, period)"));
            }
        }
        if !(self.active_from >= 0.0 && self.active_from < self.active_until) {
            return fail(format!(
                "active window [{}, {}) is empty or negative",
                self.active_from, self.active_until
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionEvent {
    pub device_id: String,
    pub dev_eui: DevEui,
    pub fcnt: u32,
    pub start: f64,
    pub end: f64,
    pub sf: u8,
    pub delivered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceOutcome {
    pub device_id: String,
    pub dev_eui: DevEui,
    pub sf: u8,
    pub sent: u64,
    pub delivered: u64,
}

impl DeviceOutcome {
    pub fn pdr(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.delivered as f64 / self.sent as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// In input order.
    pub devices: Vec<DeviceOutcome>,
    /// Ordered by (start, device_id).
    pub events: Vec<TransmissionEvent>,
}

impl SimResult {
    pub fn sent(&self) -> u64 {
        self.devices.iter().map(|d| d.sent).sum()
    }

    pub fn delivered(&self) -> u64 {
        self.devices.iter().map(|d| d.delivered).sum()
    }

    /// Pooled delivery ratio over all attempts.
    pub fn pdr(&self) -> Option<f64> {
        let sent = self.sent();
        (sent > 0).then(|| self.delivered() as f64 / sent as f64)
    }

    /// Binomial standard error of [`SimResult::pdr`] around probability `p`.
    pub fn binomial_stderr(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.sent() as f64).sqrt()
    }
}

/// Runs `devices` for `duration` seconds. Transmissions must start inside
/// the device's active window and finish by `duration`.
pub fn run(devices: &[DeviceSpec], duration: f64, model: CollisionModel, seed: u64) -> Result<SimResult, SimError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SimError::Duration(duration));
    }
    let mut sim = Simulation::build(devices.to_vec(), model, seed, duration)?;
    sim.advance_until(f64::INFINITY);
    let mut outcomes: Vec<DeviceOutcome> = sim
        .devices
        .iter()
        .map(|d| DeviceOutcome {
            device_id: d.spec.device_id.clone(),
            dev_eui: d.spec.dev_eui,
            sf: d.spec.sf,
            sent: 0,
            delivered: 0,
        })
        .collect();
    for tx in &sim.txs {
        outcomes[tx.device].sent += 1;
        outcomes[tx.device].delivered += u64::from(!tx.collided);
    }
    let mut events = sim.take_all_events();
    events.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.device_id.cmp(&b.device_id)));
    Ok(SimResult {
        devices: outcomes,
        events,
    })
}

/// One record per delivered event, ordered by receive time (= event end).
pub fn export_packet_log(result: &SimResult) -> Vec<PacketRecord> {
    packet_records(&result.events)
}

pub fn packet_records(events: &[TransmissionEvent]) -> Vec<PacketRecord> {
    let mut delivered: Vec<&TransmissionEvent> = events.iter().filter(|e| e.delivered).collect();
    delivered.sort_by(|a, b| a.end.total_cmp(&b.end).then_with(|| a.device_id.cmp(&b.device_id)));
    delivered
        .into_iter()
        .map(|e| PacketRecord {
            dev_eui: e.dev_eui,
            fcnt: e.fcnt,
            received_ts: e.end,
            sf: e.sf,
        })
        .collect()
}

pub fn write_packet_log<W: Write>(records: &[PacketRecord], mut out: W) -> io::Result<()> {
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

/// Full event log, one tab-separated line per attempt, with exact
/// round-trip float formatting.
pub fn write_event_log<W: Write>(events: &[TransmissionEvent], mut out: W) -> io::Result<()> {
    for e in events {
        writeln!(
            out,
            "{}\t{}\t{}\t{:?}\t{:?}\t{}\t{}",
            e.device_id,
            e.dev_eui,
            e.fcnt,
            e.start,
            e.end,
            e.sf,
            if e.delivered { "ok" } else { "lost" }
        )?;
    }
    Ok(())
}

const RANDOM_PHASE_WORD: u128 = 1 << 66;

#[derive(Debug)]
struct DeviceState {
    spec: DeviceSpec,
    /// Rank of `device_id` in lexicographic order, for tie-breaking.
    rank: usize,
    rng: ChaCha8Rng,
    fixed_offset: Option<f64>,
    next_slot: u64,
    next_fcnt: u32,
    last_end: f64,
    /// Invalidates queued starts after an on/off toggle.
    epoch: u64,
}

impl DeviceState {
    fn uniform(&mut self, word: u128) -> f64 {
        self.rng.set_word_pos(word);
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn offset(&mut self, slot: u64) -> f64 {
        match self.spec.phase {
            Phase::Fixed(p) => p,
            Phase::Random => *self.fixed_offset.get_or_insert_with(|| {
                self.rng.set_word_pos(RANDOM_PHASE_WORD);
                (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * self.spec.period
            }),
            Phase::PerPeriod => self.uniform(u128::from(slot) * 2) * self.spec.period,
        }
    }

    /// Start time of the next transmission at or after `not_before`.
    fn next_start(&mut self, not_before: f64) -> f64 {
        let period = self.spec.period;
        let mut slot = self.next_slot.max((not_before / period).floor().max(0.0) as u64);
        loop {
            let start = (slot as f64 * period + self.offset(slot)).max(self.last_end);
            if start >= not_before {
                self.next_slot = slot + 1;
                return start;
            }
            slot += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    End(usize),
    Start { device: usize, epoch: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    rank: usize,
    kind: Kind,
}

impl Scheduled {
    fn class(&self) -> u8 {
        match self.kind {
            Kind::End(_) => 0,
            Kind::Start { .. } => 1,
        }
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Ends before starts at equal time, so touching packets do not collide.
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class().cmp(&other.class()))
            .then(self.rank.cmp(&other.rank))
            .then_with(|| match (self.kind, other.kind) {
                (Kind::End(a), Kind::End(b)) => a.cmp(&b),
                _ => Ordering::Equal,
            })
    }
}

#[derive(Debug, Default)]
struct Channel {
    on_air: Vec<usize>,
    recent_starts: VecDeque<(f64, usize)>,
}

#[derive(Debug)]
struct Tx {
    device: usize,
    fcnt: u32,
    start: f64,
    end: f64,
    collided: bool,
}

/// Incrementally advanced simulation whose devices can be switched on and
/// off between steps. [`run`] is a single full-length step.
#[derive(Debug)]
pub struct Simulation {
    devices: Vec<DeviceState>,
    model: CollisionModel,
    queue: BinaryHeap<Reverse<Scheduled>>,
    channels: BTreeMap<u8, Channel>,
    txs: Vec<Tx>,
    finished: Vec<usize>,
    reported: usize,
    horizon: f64,
    now: f64,
    max_airtime: f64,
}

impl Simulation {
    pub fn new(devices: Vec<DeviceSpec>, model: CollisionModel, seed: u64) -> Result<Self, SimError> {
        Self::build(devices, model, seed, f64::INFINITY)
    }

    fn build(devices: Vec<DeviceSpec>, model: CollisionModel, seed: u64, horizon: f64) -> Result<Self, SimError> {
        let model = model.validate()?;
        if devices.is_empty() {
            return Err(SimError::NoDevices);
        }
        let mut ids = HashSet::new();
        let mut euis = HashSet::new();
        for d in &devices {
            d.validate()?;
            if !ids.insert(d.device_id.as_str()) {
                return Err(SimError::DuplicateId(d.device_id.clone()));
            }
            if !euis.insert(d.dev_eui) {
                return Err(SimError::DuplicateEui(d.dev_eui));
            }
        }
        let mut order: Vec<usize> = (0..devices.len()).collect();
        order.sort_by(|&a, &b| devices[a].device_id.cmp(&devices[b].device_id));
        let mut ranks = vec![0; devices.len()];
        for (rank, &idx) in order.iter().enumerate() {
            ranks[idx] = rank;
        }
        let max_airtime = devices.iter().map(|d| d.airtime).fold(0.0, f64::max);
        let devices = devices
            .into_iter()
            .zip(ranks)
            .map(|(spec, rank)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(spec.dev_eui.as_u64());
                DeviceState {
                    spec,
                    rank,
                    rng,
                    fixed_offset: None,
                    next_slot: 0,
                    next_fcnt: 0,
                    last_end: f64::NEG_INFINITY,
                    epoch: 0,
                }
            })
            .collect();
        let mut sim = Self {
            devices,
            model,
            queue: BinaryHeap::new(),
            channels: BTreeMap::new(),
            txs: Vec::new(),
            finished: Vec::new(),
            reported: 0,
            horizon,
            now: 0.0,
            max_airtime,
        };
        for idx in 0..sim.devices.len() {
            let from = sim.devices[idx].spec.active_from;
            sim.schedule_from(idx, from);
        }
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn device_specs(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.devices.iter().map(|d| &d.spec)
    }

    fn index_of(&self, device_id: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.spec.device_id == device_id)
    }

    fn schedule_from(&mut self, idx: usize, not_before: f64) {
        let dev = &mut self.devices[idx];
        let start = dev.next_start(not_before);
        if start < dev.spec.active_until && start + dev.spec.airtime <= self.horizon {
            self.queue.push(Reverse(Scheduled {
                time: start,
                rank: dev.rank,
                kind: Kind::Start {
                    device: idx,
                    epoch: dev.epoch,
                },
            }));
        }
    }

    /// Powers a device on at `at` (no earlier than the current time). Its
    /// frame counter restarts from zero, as after a power cycle.
    pub fn switch_on(&mut self, device_id: &str, at: f64) -> Result<(), SimError> {
        let idx = self
            .index_of(device_id)
            .ok_or_else(|| SimError::UnknownDevice(device_id.to_string()))?;
        let at = at.max(self.now);
        let dev = &mut self.devices[idx];
        dev.epoch += 1;
        dev.next_fcnt = 0;
        dev.spec.active_from = at;
        dev.spec.active_until = f64::INFINITY;
        self.schedule_from(idx, at);
        Ok(())
    }

    /// Stops new transmissions from `at` on; a packet already on air completes.
    pub fn switch_off(&mut self, device_id: &str, at: f64) -> Result<(), SimError> {
        let idx = self
            .index_of(device_id)
            .ok_or_else(|| SimError::UnknownDevice(device_id.to_string()))?;
        let at = at.max(self.now);
        let dev = &mut self.devices[idx];
        dev.spec.active_until = dev.spec.active_until.min(at);
        if dev.spec.active_from >= dev.spec.active_until {
            dev.epoch += 1;
        }
        Ok(())
    }

    /// Processes every scheduled event up to and including `until` and
    /// returns the transmissions whose fate became known, ordered by end time.
    pub fn advance_until(&mut self, until: f64) -> Vec<TransmissionEvent> {
        while let Some(Reverse(next)) = self.queue.peek().copied() {
            if next.time > until {
                break;
            }
            self.queue.pop();
            self.now = next.time;
            match next.kind {
                Kind::Start { device, epoch } => self.on_start(device, epoch, next.time),
                Kind::End(tx) => self.on_end(tx),
            }
        }
        if until.is_finite() {
            self.now = self.now.max(until);
        }
        let fresh = self.finished[self.reported..].to_vec();
        self.reported = self.finished.len();
        fresh.into_iter().map(|tx| self.event(tx)).collect()
    }

    fn take_all_events(&self) -> Vec<TransmissionEvent> {
        (0..self.txs.len()).map(|tx| self.event(tx)).collect()
    }

    fn event(&self, tx: usize) -> TransmissionEvent {
        let t = &self.txs[tx];
        let spec = &self.devices[t.device].spec;
        TransmissionEvent {
            device_id: spec.device_id.clone(),
            dev_eui: spec.dev_eui,
            fcnt: t.fcnt,
            start: t.start,
            end: t.end,
            sf: spec.sf,
            delivered: !t.collided,
        }
    }

    fn on_start(&mut self, device: usize, epoch: u64, time: f64) {
        let dev = &mut self.devices[device];
        if epoch != dev.epoch || time >= dev.spec.active_until {
            return;
        }
        let fcnt = dev.next_fcnt;
        dev.next_fcnt = dev.next_fcnt.wrapping_add(1);
        let end = time + dev.spec.airtime;
        dev.last_end = end;
        let sf = dev.spec.sf;
        let rank = dev.rank;

        let tx = self.txs.len();
        self.txs.push(Tx {
            device,
            fcnt,
            start: time,
            end,
            collided: false,
        });
        let channel = self.channels.entry(sf).or_default();
        match self.model {
            CollisionModel::AnyOverlap => {
                if !channel.on_air.is_empty() {
                    for &other in &channel.on_air {
                        self.txs[other].collided = true;
                    }
                    self.txs[tx].collided = true;
                }
            }
            CollisionModel::VulnerabilityWindow(factor) => {
                let keep_after = time - factor * self.max_airtime;
                while channel.recent_starts.front().is_some_and(|&(s, _)| s < keep_after) {
                    channel.recent_starts.pop_front();
                }
                channel.recent_starts.push_back((time, tx));
            }
        }
        channel.on_air.push(tx);
        self.queue.push(Reverse(Scheduled {
            time: end,
            rank,
            kind: Kind::End(tx),
        }));
        self.schedule_from(device, end);
    }

    fn on_end(&mut self, tx: usize) {
        let device = self.txs[tx].device;
        let sf = self.devices[device].spec.sf;
        let airtime = self.devices[device].spec.airtime;
        let end = self.txs[tx].end;
        let channel = self.channels.get_mut(&sf).expect("channel exists for transmitting SF");
        channel.on_air.retain(|&t| t != tx);
        if let CollisionModel::VulnerabilityWindow(factor) = self.model {
            let window_start = end - factor * airtime;
            let hit = channel
                .recent_starts
                .iter()
                .any(|&(s, other)| other != tx && s >= window_start && s < end);
            self.txs[tx].collided = hit;
        }
        self.finished.push(tx);
    }
}
