use std::collections::VecDeque;

use super::counts::compute_counts;
use super::operator::{Action, Operator, Reply};
use super::report::{DeviceReport, ExperimentMeta, Flag, LateResponder};
use super::roster::{DeviceMatrix, RosterEntry};
use super::testbed::Testbed;
use super::ControllerError;
use crate::netserver::{PacketRecord, PacketSource};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub name: String,
    /// Experiment length in seconds.
    pub duration: f64,
    /// Listening time after the turn-on sequence used to detect dead devices.
    pub probe_window: f64,
    /// Listening time after each shutdown used to detect late responders.
    pub recheck_window: f64,
}

impl ExperimentSettings {
    /// Windows default to three transmit periods.
    pub fn new(name: impl Into<String>, duration: f64, device_period: f64) -> Self {
        Self {
            name: name.into(),
            duration,
            probe_window: 3.0 * device_period,
            recheck_window: 3.0 * device_period,
        }
    }
}

fn prompt_and_apply<O: Operator + ?Sized, T: Testbed + ?Sized>(
    operator: &mut O,
    testbed: &mut T,
    action: Action,
) -> Result<Reply, ControllerError> {
    let reply = operator.prompt(&action)?;
    if reply == Reply::Confirmed {
        testbed.apply(&action)?;
    }
    testbed.settle()?;
    Ok(reply)
}

/// Asks for every device to be switched on, in matrix order, then listens
/// for `probe_window` seconds. Devices heard from nothing are returned as
/// failed, in matrix order.
pub fn turn_on_sequence<O, T, S>(
    matrix: &DeviceMatrix,
    operator: &mut O,
    testbed: &mut T,
    source: &mut S,
    probe_window: f64,
) -> Result<Vec<String>, ControllerError>
where
    O: Operator + ?Sized,
    T: Testbed + ?Sized,
    S: PacketSource + ?Sized,
{
    for entry in matrix.entries() {
        prompt_and_apply(operator, testbed, Action::TurnOn(entry.device_id.clone()))?;
    }
    let from = testbed.now();
    let to = from + probe_window;
    testbed.wait_until(to)?;
    let mut failed = Vec::new();
    for entry in matrix.entries() {
        let packets = source
            .query(entry.dev_eui, from, to)
            .map_err(ControllerError::Connectivity)?;
        if packets.is_empty() {
            failed.push(entry.device_id.clone());
        }
    }
    Ok(failed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    pub entry: RosterEntry,
    pub packets: Result<Vec<PacketRecord>, String>,
}

/// One query per device over the closed window `[start, end]`. A failed
/// query is kept as an error for that device only.
pub fn collect<S: PacketSource + ?Sized>(
    matrix: &DeviceMatrix,
    start: f64,
    end: f64,
    source: &mut S,
) -> Result<Vec<Collected>, ControllerError> {
    if !(end > start) {
        return Err(ControllerError::Window { start, end });
    }
    Ok(matrix
        .entries()
        .iter()
        .map(|entry| Collected {
            entry: entry.clone(),
            packets: source
                .query(entry.dev_eui, start, end)
                .map_err(|e| e.to_string()),
        })
        .collect())
}

pub fn build_reports(collected: &[Collected], failures: &[String]) -> Vec<DeviceReport> {
    collected
        .iter()
        .map(|c| {
            let mut report = match &c.packets {
                Ok(packets) => {
                    let (delivered, sent) = compute_counts(packets);
                    DeviceReport::new(c.entry.device_id.clone(), delivered, sent)
                }
                Err(reason) => {
                    let mut r = DeviceReport::new(c.entry.device_id.clone(), 0, 0);
                    r.flag(Flag::QueryFailed(reason.clone()));
                    r
                }
            };
            if failures.contains(&c.entry.device_id) {
                report.flag(Flag::TurnOnFailed);
            }
            report
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Priority {
    High,
    Middle,
    Low,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShutdownEntry {
    pub device_id: String,
    pub priority: Priority,
    pub confirmed: bool,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShutdownLog {
    pub entries: Vec<ShutdownEntry>,
    pub late: Vec<LateResponder>,
}

struct Pending {
    entry: RosterEntry,
    requeued: bool,
}

/// Three-queue shutdown.
///
/// High: devices that delivered during the experiment, in matrix order.
/// Middle: silent devices that start transmitting after some shutdown,
/// in the order they were noticed. Low: everything still silent.
/// After each confirmed high or middle shutdown the remaining silent
/// devices are polled for `recheck_window` seconds. A skipped prompt
/// sends the device to the back of its queue once; a second skip records
/// it as unconfirmed.
pub fn turn_off_sequence<O, T, S>(
    matrix: &DeviceMatrix,
    reports: &mut [DeviceReport],
    operator: &mut O,
    testbed: &mut T,
    source: &mut S,
    recheck_window: f64,
) -> Result<ShutdownLog, ControllerError>
where
    O: Operator + ?Sized,
    T: Testbed + ?Sized,
    S: PacketSource + ?Sized,
{
    let delivered = |id: &str| {
        reports
            .iter()
            .find(|r| r.device_id == id)
            .is_some_and(|r| r.delivered > 0)
    };
    let (high, mut silent): (Vec<RosterEntry>, Vec<RosterEntry>) = matrix
        .entries()
        .iter()
        .cloned()
        .partition(|e| delivered(&e.device_id));

    let mut log = ShutdownLog::default();
    let mut queue: VecDeque<Pending> = high
        .into_iter()
        .map(|entry| Pending { entry, requeued: false })
        .collect();
    let mut middle: VecDeque<Pending> = VecDeque::new();

    for priority in [Priority::High, Priority::Middle, Priority::Low] {
        match priority {
            Priority::High => {}
            Priority::Middle => queue = std::mem::take(&mut middle),
            Priority::Low => {
                queue = silent
                    .drain(..)
                    .map(|entry| Pending { entry, requeued: false })
                    .collect()
            }
        }
        while let Some(mut item) = queue.pop_front() {
            let id = item.entry.device_id.clone();
            match prompt_and_apply(operator, testbed, Action::TurnOff(id.clone()))? {
                Reply::Confirmed => {
                    log.entries.push(ShutdownEntry {
                        device_id: id.clone(),
                        priority,
                        confirmed: true,
                        at: testbed.now(),
                    });
                    if priority == Priority::Low || silent.is_empty() {
                        continue;
                    }
                    let from = testbed.now();
                    let to = from + recheck_window;
                    testbed.wait_until(to)?;
                    let mut still_silent = Vec::with_capacity(silent.len());
                    for entry in silent.drain(..) {
                        let heard = !source
                            .query(entry.dev_eui, from, to)
                            .map_err(ControllerError::Connectivity)?
                            .is_empty();
                        if heard {
                            if let Some(r) = reports.iter_mut().find(|r| r.device_id == entry.device_id) {
                                r.flag(Flag::RespondedAfterShutdownOf(id.clone()));
                            }
                            log.late.push(LateResponder {
                                device_id: entry.device_id.clone(),
                                after: id.clone(),
                            });
                            let pending = Pending { entry, requeued: false };
                            if priority == Priority::Middle {
                                queue.push_back(pending);
                            } else {
                                middle.push_back(pending);
                            }
                        } else {
                            still_silent.push(entry);
                        }
                    }
                    silent = still_silent;
                }
                Reply::Skipped if !item.requeued => {
                    item.requeued = true;
                    queue.push_back(item);
                }
                Reply::Skipped => {
                    if let Some(r) = reports.iter_mut().find(|r| r.device_id == id) {
                        r.flag(Flag::TurnOffUnconfirmed);
                    }
                    log.entries.push(ShutdownEntry {
                        device_id: id,
                        priority,
                        confirmed: false,
                        at: testbed.now(),
                    });
                }
            }
        }
    }

    for r in reports.iter_mut() {
        let late = log.late.iter().any(|l| l.device_id == r.device_id);
        if r.delivered == 0 && !late {
            r.flag(Flag::NeverResponded);
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub meta: ExperimentMeta,
    pub failures: Vec<String>,
    pub reports: Vec<DeviceReport>,
    pub shutdown: ShutdownLog,
    /// Every packet collected during the experiment window.
    pub packets: Vec<PacketRecord>,
}

/// Turn on, run for `settings.duration`, collect, count, turn off.
pub fn run_experiment<O, T, S>(
    matrix: &DeviceMatrix,
    settings: &ExperimentSettings,
    operator: &mut O,
    testbed: &mut T,
    source: &mut S,
) -> Result<ExperimentOutcome, ControllerError>
where
    O: Operator + ?Sized,
    T: Testbed + ?Sized,
    S: PacketSource + ?Sized,
{
    if !(settings.duration > 0.0) {
        return Err(ControllerError::Window {
            start: 0.0,
            end: settings.duration,
        });
    }
    let failures = turn_on_sequence(matrix, operator, testbed, source, settings.probe_window)?;

    let start = testbed.now();
    let end = start + settings.duration;
    testbed.wait_until(end)?;

    let collected = collect(matrix, start, end, source)?;
    let mut reports = build_reports(&collected, &failures);
    let packets = collected
        .iter()
        .filter_map(|c| c.packets.as_ref().ok())
        .flatten()
        .copied()
        .collect();

    let shutdown = turn_off_sequence(matrix, &mut reports, operator, testbed, source, settings.recheck_window)?;

    Ok(ExperimentOutcome {
        meta: ExperimentMeta {
            name: settings.name.clone(),
            start,
            end,
        },
        failures,
        reports,
        shutdown,
        packets,
    })
}
