use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::eui::DevEui;

/// One uplink as the base station logged it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub dev_eui: DevEui,
    pub fcnt: u32,
    pub received_ts: f64,
    pub sf: u8,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordParseError {
    #[error("expected 4 tab-separated fields, got {0}")]
    FieldCount(usize),
    #[error("bad timestamp {0:?}")]
    Timestamp(String),
    #[error(transparent)]
    Eui(#[from] crate::eui::EuiParseError),
    #[error("bad frame counter {0:?}")]
    Fcnt(String),
    #[error("bad spreading factor {0:?}")]
    SpreadingFactor(String),
}

impl FromStr for PacketRecord {
    type Err = RecordParseError;

    /// Parses `ts<TAB>dev_eui<TAB>fcnt<TAB>sf`.
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        if fields.len() != 4 {
            return Err(RecordParseError::FieldCount(fields.len()));
        }
        let received_ts: f64 = fields[0]
            .parse()
            .ok()
            .filter(|ts: &f64| ts.is_finite())
            .ok_or_else(|| RecordParseError::Timestamp(fields[0].to_string()))?;
        let dev_eui = fields[1].parse()?;
        let fcnt = fields[2]
            .parse()
            .map_err(|_| RecordParseError::Fcnt(fields[2].to_string()))?;
        let sf = fields[3]
            .parse()
            .ok()
            .filter(|sf| (7..=12).contains(sf))
            .ok_or_else(|| RecordParseError::SpreadingFactor(fields[3].to_string()))?;
        Ok(Self {
            dev_eui,
            fcnt,
            received_ts,
            sf,
        })
    }
}

impl fmt::Display for PacketRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.9}\t{}\t{}\t{}",
            self.received_ts, self.dev_eui, self.fcnt, self.sf
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let r = PacketRecord {
            dev_eui: DevEui::new(0xA1),
            fcnt: 3,
            received_ts: 12.5,
            sf: 7,
        };
        let line = r.to_string();
        assert_eq!(line, "12.500000000\t00000000000000A1\t3\t7");
        assert_eq!(line.parse::<PacketRecord>().unwrap(), r);
    }

    #[test]
    fn malformed_lines() {
        assert_eq!(
            "1.0\t00000000000000A1\t3".parse::<PacketRecord>(),
            Err(RecordParseError::FieldCount(3))
        );
        assert!("x\t00000000000000A1\t3\t7".parse::<PacketRecord>().is_err());
        assert!("inf\t00000000000000A1\t3\t7".parse::<PacketRecord>().is_err());
        assert!("1.0\tA1\t3\t7".parse::<PacketRecord>().is_err());
        assert!("1.0\t00000000000000A1\t-3\t7".parse::<PacketRecord>().is_err());
        assert!("1.0\t00000000000000A1\t3\t13".parse::<PacketRecord>().is_err());
    }
}
