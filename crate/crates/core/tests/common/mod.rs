//! Fixtures and checkers shared by the integration test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lorapdr::controller::{
    run_experiment, Action, ControllerError, DeviceMatrix, ExperimentOutcome, ExperimentSettings, Flag, LogFileSink,
    Operator, Priority, Reply, RosterEntry, SimFleet, SimTestbed,
};
use lorapdr::netserver::{serve, Message, NetClient, PacketEntry, PacketRecord, PacketStore};
use lorapdr::simulator::{Phase, TransmissionEvent};
use lorapdr::DevEui;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const TOKEN: &str = "e2e-token";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Runs an auto-confirmed experiment where the simulated fleet appends to a
/// packet log that an in-process server tails, and the controller queries
/// that server over TCP.
pub fn run_pipeline(
    matrix: &DeviceMatrix,
    fleet: &SimFleet,
    settings: &ExperimentSettings,
    dir: &Path,
) -> (ExperimentOutcome, Vec<TransmissionEvent>) {
    let log = dir.join("packets.log");
    let (store, _) = PacketStore::open_log(&log).unwrap();
    let server = serve("127.0.0.1:0", TOKEN, Arc::new(store)).unwrap();
    let mut client = NetClient::connect(server.local_addr(), TOKEN).unwrap();
    let sink = LogFileSink::append(&log).unwrap();
    let mut testbed = SimTestbed::new(matrix, fleet, sink).unwrap();
    let mut op = lorapdr::controller::AutoConfirm;
    let out = run_experiment(matrix, settings, &mut op, &mut testbed, &mut client).unwrap();
    (out, testbed.history().to_vec())
}

/// Simulator events of one device received within `[from, to]`.
pub fn truth<'a>(history: &'a [TransmissionEvent], id: &str, from: f64, to: f64) -> Vec<&'a TransmissionEvent> {
    history
        .iter()
        .filter(|e| e.device_id == id && e.end >= from && e.end <= to)
        .collect()
}

/// Five devices on fixed phases whose first and last packets inside the
/// experiment window are delivered, with collisions in between.
pub fn handmade_fleet() -> SimFleet {
    let mut fleet = SimFleet::new(7, 10.0, 0.5, 0);
    let o = &mut fleet.overrides;
    o.insert("d1".into(), (7, 10.0, 0.5, Phase::Fixed(3.75)));
    o.insert("d2".into(), (7, 11.0, 0.5, Phase::Fixed(0.5)));
    o.insert("d3".into(), (7, 12.0, 0.5, Phase::Fixed(5.0)));
    o.insert("d4".into(), (8, 10.0, 0.9, Phase::Fixed(0.25)));
    o.insert("d5".into(), (8, 13.0, 0.9, Phase::Fixed(3.0)));
    fleet
}

pub fn handmade_settings() -> ExperimentSettings {
    ExperimentSettings::new("e2e", 400.0, 13.0)
}

/// Checks the report against ground truth. Returns the number of losses
/// seen, or a description of the first mismatch.
pub fn check_exact_counts(out: &ExperimentOutcome, history: &[TransmissionEvent]) -> Result<u64, String> {
    let (start, end) = (out.meta.start, out.meta.end);
    let mut lost = 0;
    for r in &out.reports {
        let window = truth(history, &r.device_id, start, end);
        match (window.first(), window.last()) {
            (Some(a), Some(b)) if a.delivered && b.delivered => {}
            _ => return Err(format!("{}: boundary packet lost, fixture invalid", r.device_id)),
        }
        let delivered = window.iter().filter(|e| e.delivered).count() as u64;
        let sent = window.len() as u64;
        if (r.delivered, r.sent) != (delivered, sent) {
            return Err(format!(
                "{}: report ({}, {}) vs truth ({delivered}, {sent})",
                r.device_id, r.delivered, r.sent
            ));
        }
        lost += sent - delivered;
    }
    Ok(lost)
}

/// Replies from a fixed pattern, confirming once it runs out.
pub struct Pattern(pub std::vec::IntoIter<bool>);

impl Operator for Pattern {
    fn prompt(&mut self, _: &Action) -> Result<Reply, ControllerError> {
        Ok(match self.0.next() {
            Some(false) => Reply::Skipped,
            _ => Reply::Confirmed,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Behaviour {
    Active,
    Dead,
    /// Silent until the device at this index is switched off.
    Dormant(usize),
}

pub fn arb_fleet() -> impl Strategy<Value = Vec<Behaviour>> {
    (3usize..12).prop_flat_map(|n| {
        (0..n)
            .map(|i| {
                if i == 0 {
                    prop_oneof![Just(Behaviour::Active), Just(Behaviour::Dead)].boxed()
                } else {
                    prop_oneof![
                        3 => Just(Behaviour::Active),
                        1 => Just(Behaviour::Dead),
                        2 => (0..i).prop_map(Behaviour::Dormant),
                    ]
                    .boxed()
                }
            })
            .collect::<Vec<_>>()
    })
}

pub fn arb_shutdown_case() -> impl Strategy<Value = (Vec<Behaviour>, Vec<bool>, u64)> {
    (
        arb_fleet(),
        prop::collection::vec(prop::bool::weighted(0.8), 0..40),
        any::<u64>(),
    )
}

/// Runs one experiment with the given response pattern and checks the
/// shutdown ordering invariants.
pub fn check_shutdown_order(behaviour: &[Behaviour], replies: Vec<bool>, seed: u64) -> Result<(), TestCaseError> {
    const PERIOD: f64 = 10.0;
    let entries: Vec<RosterEntry> = (0..behaviour.len())
        .map(|i| RosterEntry {
            device_id: format!("d{i}"),
            dev_eui: DevEui::new(0x100 + i as u64),
        })
        .collect();
    let matrix = DeviceMatrix::new(entries).unwrap();
    let mut fleet = SimFleet::new(7, PERIOD, 0.05, seed);
    for (i, b) in behaviour.iter().enumerate() {
        match b {
            Behaviour::Active => {}
            Behaviour::Dead => {
                fleet.dead.insert(format!("d{i}"));
            }
            Behaviour::Dormant(t) => {
                fleet.dormant.insert(format!("d{i}"), format!("d{t}"));
            }
        }
    }
    let store = Arc::new(PacketStore::new());
    let mut testbed = SimTestbed::new(&matrix, &fleet, Arc::clone(&store)).unwrap();
    let mut source: &PacketStore = &store;
    let mut op = Pattern(replies.into_iter());
    let settings = ExperimentSettings::new("p", 60.0, PERIOD);
    let out = run_experiment(&matrix, &settings, &mut op, &mut testbed, &mut source).unwrap();
    let log = &out.shutdown.entries;

    let mut ids: Vec<&str> = log.iter().map(|e| e.device_id.as_str()).collect();
    ids.sort();
    let mut all: Vec<&str> = matrix.entries().iter().map(|e| e.device_id.as_str()).collect();
    all.sort();
    prop_assert_eq!(ids, all, "shutdown log is not a roster permutation");

    prop_assert!(
        log.windows(2).all(|w| w[0].priority <= w[1].priority),
        "priorities out of order"
    );

    for (pos, e) in log.iter().enumerate() {
        let report = out.reports.iter().find(|r| r.device_id == e.device_id).unwrap();
        prop_assert_eq!(e.priority == Priority::High, report.delivered > 0);
        if e.priority == Priority::Middle {
            let named_earlier = log[..pos]
                .iter()
                .any(|prev| prev.confirmed && report.has(&Flag::RespondedAfterShutdownOf(prev.device_id.clone())));
            prop_assert!(named_earlier, "{} has no earlier trigger", e.device_id);
        }
    }
    for late in &out.shutdown.late {
        let entry = log.iter().find(|e| e.device_id == late.device_id).unwrap();
        prop_assert_eq!(entry.priority, Priority::Middle);
    }
    for (i, b) in behaviour.iter().enumerate() {
        if matches!(b, Behaviour::Dead) {
            let id = format!("d{i}");
            prop_assert!(out.failures.contains(&id));
            let entry = log.iter().find(|e| e.device_id == id).unwrap();
            prop_assert_eq!(entry.priority, Priority::Low);
        }
    }
    Ok(())
}

/// Reference answer for a windowed query: filter, dedupe by (ts, fcnt), sort.
pub fn linear_scan(records: &[PacketRecord], eui: DevEui, from: f64, to: f64) -> Vec<PacketRecord> {
    let mut seen: Vec<PacketRecord> = Vec::new();
    for r in records {
        if r.dev_eui == eui
            && r.received_ts >= from
            && r.received_ts <= to
            && !seen.iter().any(|s| s.received_ts == r.received_ts && s.fcnt == r.fcnt)
        {
            seen.push(*r);
        }
    }
    seen.sort_by(|a, b| a.received_ts.total_cmp(&b.received_ts).then(a.fcnt.cmp(&b.fcnt)));
    seen
}

/// `n` pseudo-random records over five devices and 1000 seconds.
pub fn random_records(n: usize, seed: u64) -> Vec<PacketRecord> {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| PacketRecord {
            dev_eui: DevEui::new(1 + rng.next_u64() % 5),
            fcnt: rng.next_u32() % 300,
            received_ts: f64::from(rng.next_u32() % 100_000) / 100.0,
            sf: 7 + (rng.next_u32() % 2) as u8,
        })
        .collect()
}

/// Compares `client` answers with [`linear_scan`] on `queries` random windows.
pub fn check_queries_against_scan(
    client: &mut NetClient,
    records: &[PacketRecord],
    queries: usize,
    seed: u64,
) -> Result<(), String> {
    use lorapdr::netserver::PacketSource;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..queries {
        let eui = DevEui::new(1 + rng.next_u64() % 6);
        let a = f64::from(rng.next_u32() % 100_000) / 100.0;
        let b = f64::from(rng.next_u32() % 100_000) / 100.0;
        let (from, to) = if a <= b { (a, b) } else { (b, a) };
        let got = client.query(eui, from, to).map_err(|e| e.to_string())?;
        if got != linear_scan(records, eui, from, to) {
            return Err(format!("mismatch for {eui} [{from}, {to}]"));
        }
    }
    Ok(())
}

pub fn arb_message() -> impl Strategy<Value = Message> {
    let eui = any::<u64>().prop_map(DevEui::new);
    let text = "[ -~]{0,24}";
    let finite = any::<f64>().prop_filter("finite", |v| v.is_finite());
    let entry = (any::<u32>(), finite.clone(), 7u8..=12).prop_map(|(fcnt, ts, sf)| PacketEntry { fcnt, ts, sf });
    prop_oneof![
        text.prop_map(|token| Message::Auth { token }),
        Just(Message::AuthOk),
        text.prop_map(|reason| Message::AuthFail { reason }),
        (eui.clone(), finite.clone(), finite).prop_map(|(dev_eui, from, to)| Message::Query { dev_eui, from, to }),
        (eui, prop::collection::vec(entry, 0..8)).prop_map(|(dev_eui, packets)| Message::Packets { dev_eui, packets }),
        text.prop_map(|reason| Message::Error { reason }),
    ]
}

pub fn check_round_trip(msg: &Message) -> Result<(), TestCaseError> {
    let line = msg.to_line();
    prop_assert!(line.ends_with('\n'));
    prop_assert_eq!(line.matches('\n').count(), 1);
    prop_assert_eq!(&Message::from_line(&line).unwrap(), msg);
    Ok(())
}
