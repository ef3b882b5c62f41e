use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::eui::DevEui;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RosterError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("{table} line {line}: {reason}")]
    Malformed {
        table: &'static str,
        line: usize,
        reason: String,
    },
    #[error("unmapped id {0}")]
    Unmapped(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("duplicate EUI {0}")]
    DuplicateEui(DevEui),
    #[error("experiment table lists no devices")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub device_id: String,
    pub dev_eui: DevEui,
}

/// Ordered id/EUI pairs of the devices taking part in an experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceMatrix {
    entries: Vec<RosterEntry>,
}

impl DeviceMatrix {
    pub fn new(entries: Vec<RosterEntry>) -> Result<Self, RosterError> {
        if entries.is_empty() {
            return Err(RosterError::Empty);
        }
        let mut ids = HashSet::new();
        let mut euis = HashSet::new();
        for e in &entries {
            if !ids.insert(e.device_id.as_str()) {
                return Err(RosterError::DuplicateId(e.device_id.clone()));
            }
            if !euis.insert(e.dev_eui) {
                return Err(RosterError::DuplicateEui(e.dev_eui));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eui_of(&self, device_id: &str) -> Option<DevEui> {
        self.entries.iter().find(|e| e.device_id == device_id).map(|e| e.dev_eui)
    }

    pub fn id_of(&self, dev_eui: DevEui) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.dev_eui == dev_eui)
            .map(|e| e.device_id.as_str())
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Builds the matrix from the experiment table (device id in the first
/// comma-separated field) and the `id,eui` mapping table.
pub fn parse_roster(experiment: &str, mapping: &str) -> Result<DeviceMatrix, RosterError> {
    let mut map = HashMap::new();
    let mut seen_euis = HashSet::new();
    for (line, text) in data_lines(mapping) {
        let mut fields = text.split(',').map(str::trim);
        let (Some(id), Some(eui), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(RosterError::Malformed {
                table: "mapping",
                line,
                reason: "expected `id,eui`".into(),
            });
        };
        if id.is_empty() {
            return Err(RosterError::Malformed {
                table: "mapping",
                line,
                reason: "empty id".into(),
            });
        }
        let eui: DevEui = eui.parse().map_err(|e: crate::eui::EuiParseError| RosterError::Malformed {
            table: "mapping",
            line,
            reason: e.to_string(),
        })?;
        if !seen_euis.insert(eui) {
            return Err(RosterError::DuplicateEui(eui));
        }
        if map.insert(id.to_string(), eui).is_some() {
            return Err(RosterError::DuplicateId(id.to_string()));
        }
    }

    let mut entries = Vec::new();
    for (line, text) in data_lines(experiment) {
        let id = text.split(',').next().unwrap_or_default().trim();
        if id.is_empty() {
            return Err(RosterError::Malformed {
                table: "experiment",
                line,
                reason: "empty id".into(),
            });
        }
        let dev_eui = *map.get(id).ok_or_else(|| RosterError::Unmapped(id.to_string()))?;
        entries.push(RosterEntry {
            device_id: id.to_string(),
            dev_eui,
        });
    }
    DeviceMatrix::new(entries)
}

pub fn load_roster(experiment: &Path, mapping: &Path) -> Result<DeviceMatrix, RosterError> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|e| RosterError::Read {
            path: p.display().to_string(),
            reason: e.to_string(),
        })
    };
    parse_roster(&read(experiment)?, &read(mapping)?)
}
