//! Experiment orchestration against a simulated fleet.

use std::collections::HashSet;
use std::sync::Arc;

use lorapdr::controller::{
    load_roster, parse_report, render_report, run_experiment, Action, AutoConfirm, ControllerError, DeviceMatrix,
    ExperimentSettings, Flag, Operator, Priority, Recording, Reply, ScriptedOperator, SimFleet, SimTestbed,
};
use lorapdr::netserver::PacketStore;
use proptest::prelude::*;

mod common;

const PERIOD: f64 = 10.0;
const AIRTIME: f64 = 0.05;

fn roster41() -> DeviceMatrix {
    load_roster(&common::fixture("experiment_41.csv"), &common::fixture("mapping.csv")).unwrap()
}

/// Skips the first prompt for each listed action, confirms everything else.
struct SkipOnce(Vec<Action>);

impl Operator for SkipOnce {
    fn prompt(&mut self, action: &Action) -> Result<Reply, ControllerError> {
        match self.0.iter().position(|a| a == action) {
            Some(i) => {
                self.0.remove(i);
                Ok(Reply::Skipped)
            }
            None => Ok(Reply::Confirmed),
        }
    }
}

fn settings() -> ExperimentSettings {
    ExperimentSettings::new("t", 120.0, PERIOD)
}

#[test]
fn roster_fixture_loads_in_table_order() {
    let m = roster41();
    assert_eq!(m.len(), 41);
    assert_eq!(m.entries()[0].device_id, "d1");
    assert_eq!(m.entries()[40].device_id, "d41");
    assert_eq!(m.eui_of("d41"), Some("70B3D57ED0000029".parse().unwrap()));
    assert_eq!(m.eui_of("d42"), None);
}

#[test]
fn turn_on_failures_and_late_responder() {
    let matrix = roster41();
    let mut fleet = SimFleet::new(7, PERIOD, AIRTIME, 11);
    fleet.dead.insert("d5".into());
    fleet.dormant.insert("d7".into(), "d3".into());
    let store = Arc::new(PacketStore::new());
    let mut testbed = SimTestbed::new(&matrix, &fleet, Arc::clone(&store)).unwrap();
    let mut operator = Recording::new(SkipOnce(vec![Action::TurnOn("d2".into())]));
    let mut source: &PacketStore = &store;

    let out = run_experiment(&matrix, &settings(), &mut operator, &mut testbed, &mut source).unwrap();

    assert_eq!(out.failures, ["d2", "d5", "d7"]);
    let report = |id: &str| out.reports.iter().find(|r| r.device_id == id).unwrap();
    for id in ["d2", "d5", "d7"] {
        assert!(report(id).has(&Flag::TurnOnFailed), "{id}");
        assert_eq!((report(id).delivered, report(id).sent), (0, 0));
    }
    assert!(report("d7").has(&Flag::RespondedAfterShutdownOf("d3".into())));
    assert!(!report("d7").has(&Flag::NeverResponded));
    assert!(report("d2").has(&Flag::NeverResponded));
    assert!(report("d5").has(&Flag::NeverResponded));
    assert_eq!(out.shutdown.late.len(), 1);
    assert_eq!(out.shutdown.late[0].device_id, "d7");
    assert_eq!(out.shutdown.late[0].after, "d3");

    let d7 = out.shutdown.entries.iter().find(|e| e.device_id == "d7").unwrap();
    assert_eq!(d7.priority, Priority::Middle);
    let lows: HashSet<&str> = out
        .shutdown
        .entries
        .iter()
        .filter(|e| e.priority == Priority::Low)
        .map(|e| e.device_id.as_str())
        .collect();
    assert_eq!(lows, HashSet::from(["d2", "d5"]));

    let text = render_report(&out.meta, &out.reports, &out.failures, &out.shutdown.late);
    assert!(text.contains("# turn-on-failed d2\n# turn-on-failed d5\n# turn-on-failed d7\n"));
    assert!(text.ends_with("# late-responder d7 after d3\n"));
    let parsed = parse_report(&text).unwrap();
    assert_eq!(parsed.failures, out.failures);
    assert_eq!(parsed.late, out.shutdown.late);

    // 41 turn-on prompts (one skipped) then 41 turn-off prompts
    assert_eq!(operator.transcript().len(), 82);
}

#[test]
fn scripted_confirmations_match_automatic_mode() {
    let matrix = roster41();
    let fleet = SimFleet::new(7, 7.0, 0.11729, 1);
    let run = |op: &mut dyn Operator| {
        let store = Arc::new(PacketStore::new());
        let mut testbed = SimTestbed::new(&matrix, &fleet, Arc::clone(&store)).unwrap();
        let mut source: &PacketStore = &store;
        run_experiment(&matrix, &ExperimentSettings::new("e", 700.0, 7.0), op, &mut testbed, &mut source).unwrap()
    };
    let auto = run(&mut AutoConfirm);
    let script = "turn ON confirm\n".repeat(41) + &"turn OFF y\n".repeat(41);
    let mut scripted = ScriptedOperator::parse(&script).unwrap();
    let scripted_out = run(&mut scripted);
    assert_eq!(auto, scripted_out);
    assert!(auto.reports.iter().all(|r| r.sent > 0 && r.delivered <= r.sent));
    assert!(scripted.prompt(&Action::TurnOn("d1".into())).is_err());
}

#[test]
fn short_script_aborts() {
    let matrix = roster41();
    let fleet = SimFleet::new(7, PERIOD, AIRTIME, 3);
    let store = Arc::new(PacketStore::new());
    let mut testbed = SimTestbed::new(&matrix, &fleet, Arc::clone(&store)).unwrap();
    let mut source: &PacketStore = &store;
    let mut op = ScriptedOperator::parse("y\ny\n").unwrap();
    let err = run_experiment(&matrix, &settings(), &mut op, &mut testbed, &mut source).unwrap_err();
    assert!(matches!(err, ControllerError::Operator(_)));
}

#[test]
fn twice_skipped_shutdown_is_recorded_unconfirmed() {
    let matrix = roster41();
    let fleet = SimFleet::new(7, PERIOD, AIRTIME, 5);
    let store = Arc::new(PacketStore::new());
    let mut testbed = SimTestbed::new(&matrix, &fleet, Arc::clone(&store)).unwrap();
    let mut source: &PacketStore = &store;
    let off = Action::TurnOff("d1".into());
    let mut op = SkipOnce(vec![off.clone(), off]);
    let out = run_experiment(&matrix, &settings(), &mut op, &mut testbed, &mut source).unwrap();
    let d1 = out.shutdown.entries.iter().find(|e| e.device_id == "d1").unwrap();
    assert!(!d1.confirmed);
    assert_eq!(out.shutdown.entries.last().unwrap().device_id, "d1");
    assert!(out.reports[0].has(&Flag::TurnOffUnconfirmed));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shutdown_order_respects_priorities((behaviour, replies, seed) in common::arb_shutdown_case()) {
        common::check_shutdown_order(&behaviour, replies, seed)?;
    }
}
