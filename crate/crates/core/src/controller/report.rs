use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::netserver::PacketRecord;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Flag {
    TurnOnFailed,
    RespondedAfterShutdownOf(String),
    NeverResponded,
    QueryFailed(String),
    TurnOffUnconfirmed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceReport {
    pub device_id: String,
    pub delivered: u64,
    pub sent: u64,
    pub flags: Vec<Flag>,
}

impl DeviceReport {
    pub fn new(device_id: impl Into<String>, delivered: u64, sent: u64) -> Self {
        Self {
            device_id: device_id.into(),
            delivered,
            sent,
            flags: Vec::new(),
        }
    }

    pub fn flag(&mut self, flag: Flag) {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    pub fn has(&self, flag: &Flag) -> bool {
        self.flags.contains(flag)
    }

    pub fn pdr(&self) -> Option<f64> {
        (self.sent > 0).then(|| self.delivered as f64 / self.sent as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMeta {
    pub name: String,
    pub start: f64,
    pub end: f64,
}

impl ExperimentMeta {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LateResponder {
    pub device_id: String,
    pub after: String,
}

/// Main report: header, turn-on failures, one body line per device, then
/// late responders.
pub fn render_report(
    meta: &ExperimentMeta,
    reports: &[DeviceReport],
    failures: &[String],
    late: &[LateResponder],
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# experiment {} start {} end {} duration {}",
        meta.name,
        meta.start,
        meta.end,
        meta.duration()
    );
    for id in failures {
        let _ = writeln!(out, "# turn-on-failed {id}");
    }
    for r in reports {
        let _ = writeln!(out, "{} {} {}", r.device_id, r.delivered, r.sent);
    }
    for l in late {
        let _ = writeln!(out, "# late-responder {} after {}", l.device_id, l.after);
    }
    out
}

/// `<dev_eui> <fcnt> <ts>` per packet, ascending by timestamp.
pub fn render_timestamps(packets: &[PacketRecord]) -> String {
    let mut sorted: Vec<&PacketRecord> = packets.iter().collect();
    sorted.sort_by(|a, b| {
        a.received_ts
            .total_cmp(&b.received_ts)
            .then(a.dev_eui.cmp(&b.dev_eui))
            .then(a.fcnt.cmp(&b.fcnt))
    });
    let mut out = String::new();
    for p in sorted {
        let _ = writeln!(out, "{} {} {:.6}", p.dev_eui, p.fcnt, p.received_ts);
    }
    out
}

pub fn write_output(
    report_path: &Path,
    timestamps_path: &Path,
    meta: &ExperimentMeta,
    reports: &[DeviceReport],
    failures: &[String],
    late: &[LateResponder],
    packets: &[PacketRecord],
) -> io::Result<()> {
    fs::write(report_path, render_report(meta, reports, failures, late))?;
    fs::write(timestamps_path, render_timestamps(packets))
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("report line {line}: {reason}")]
pub struct ReportParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub meta: Option<ExperimentMeta>,
    pub reports: Vec<DeviceReport>,
    pub failures: Vec<String>,
    pub late: Vec<LateResponder>,
}

pub fn parse_report(text: &str) -> Result<ParsedReport, ReportParseError> {
    let mut parsed = ParsedReport {
        meta: None,
        reports: Vec::new(),
        failures: Vec::new(),
        late: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: &str| ReportParseError {
            line,
            reason: reason.to_string(),
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            match words.as_slice() {
                ["experiment", name, "start", s, "end", e, "duration", _] => {
                    let start = s.parse().map_err(|_| err("bad start"))?;
                    let end = e.parse().map_err(|_| err("bad end"))?;
                    parsed.meta = Some(ExperimentMeta {
                        name: name.to_string(),
                        start,
                        end,
                    });
                }
                ["turn-on-failed", id] => parsed.failures.push(id.to_string()),
                ["late-responder", id, "after", other] => parsed.late.push(LateResponder {
                    device_id: id.to_string(),
                    after: other.to_string(),
                }),
                _ => {}
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let [id, delivered, sent] = fields.as_slice() else {
            return Err(err("expected `<id> <delivered> <sent>`"));
        };
        let delivered: u64 = delivered.parse().map_err(|_| err("bad delivered count"))?;
        let sent: u64 = sent.parse().map_err(|_| err("bad sent count"))?;
        if delivered > sent {
            return Err(err("delivered exceeds sent"));
        }
        parsed.reports.push(DeviceReport::new(*id, delivered, sent));
    }
    for r in &mut parsed.reports {
        if parsed.failures.contains(&r.device_id) {
            r.flag(Flag::TurnOnFailed);
        }
        let triggers: Vec<String> = parsed
            .late
            .iter()
            .filter(|l| l.device_id == r.device_id)
            .map(|l| l.after.clone())
            .collect();
        for after in triggers {
            r.flag(Flag::RespondedAfterShutdownOf(after));
        }
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eui::DevEui;

    fn meta() -> ExperimentMeta {
        ExperimentMeta {
            name: "lab".into(),
            start: 10.0,
            end: 70.5,
        }
    }

    #[test]
    fn body_line_layout() {
        let text = render_report(&meta(), &[DeviceReport::new("d1", 3, 4)], &[], &[]);
        assert_eq!(text, "# experiment lab start 10 end 70.5 duration 60.5\nd1 3 4\n");
    }

    #[test]
    fn failed_device_listed_in_header_and_body() {
        let text = render_report(
            &meta(),
            &[DeviceReport::new("d1", 3, 4), DeviceReport::new("d2", 0, 0)],
            &["d2".into()],
            &[LateResponder {
                device_id: "d2".into(),
                after: "d1".into(),
            }],
        );
        assert_eq!(
            text,
            "# experiment lab start 10 end 70.5 duration 60.5\n# turn-on-failed d2\nd1 3 4\nd2 0 0\n# late-responder d2 after d1\n"
        );
        let parsed = parse_report(&text).unwrap();
        assert_eq!(parsed.meta, Some(meta()));
        assert_eq!(parsed.reports.len(), 2);
        assert!(parsed.reports[1].has(&Flag::TurnOnFailed));
        assert!(parsed.reports[1].has(&Flag::RespondedAfterShutdownOf("d1".into())));
    }

    #[test]
    fn parse_rejects_bad_body() {
        assert!(parse_report("d1 3\n").is_err());
        assert!(parse_report("d1 5 4\n").is_err());
        assert!(parse_report("d1 x 4\n").is_err());
    }

    #[test]
    fn timestamps_sorted() {
        let p = |eui, fcnt, ts| PacketRecord {
            dev_eui: DevEui::new(eui),
            fcnt,
            received_ts: ts,
            sf: 7,
        };
        let text = render_timestamps(&[p(2, 0, 5.0), p(1, 1, 3.25)]);
        assert_eq!(text, "0000000000000001 1 3.250000\n0000000000000002 0 5.000000\n");
    }
}
