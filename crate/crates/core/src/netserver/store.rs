use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::{PoisonError, RwLock};

use super::record::{PacketRecord, RecordParseError};
use crate::eui::DevEui;

/// Outcome of feeding lines to the store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub ingested: usize,
    pub duplicates: usize,
    /// 1-based line number within the batch and the parse failure.
    pub malformed: Vec<(usize, RecordParseError)>,
}

impl IngestReport {
    fn merge(&mut self, other: IngestReport) {
        self.ingested += other.ingested;
        self.duplicates += other.duplicates;
        self.malformed.extend(other.malformed);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stored {
    ts: f64,
    fcnt: u32,
    sf: u8,
}

impl Stored {
    fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        self.ts.total_cmp(&other.ts).then(self.fcnt.cmp(&other.fcnt))
    }
}

#[derive(Debug)]
struct LogTail {
    path: PathBuf,
    offset: u64,
}

#[derive(Debug, Default)]
struct Inner {
    devices: HashMap<DevEui, Vec<Stored>>,
    total: usize,
    tail: Option<LogTail>,
}

impl Inner {
    /// Returns false when an identical (fcnt, ts) entry already exists.
    fn insert(&mut self, record: &PacketRecord) -> bool {
        let entry = Stored {
            ts: record.received_ts,
            fcnt: record.fcnt,
            sf: record.sf,
        };
        let list = self.devices.entry(record.dev_eui).or_default();
        match list.binary_search_by(|probe| probe.cmp_key(&entry)) {
            Ok(_) => false,
            Err(pos) => {
                list.insert(pos, entry);
                self.total += 1;
                true
            }
        }
    }

    fn ingest_lines<R: BufRead>(&mut self, reader: R) -> io::Result<IngestReport> {
        let mut report = IngestReport::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match line.parse::<PacketRecord>() {
                Ok(record) if self.insert(&record) => report.ingested += 1,
                Ok(_) => report.duplicates += 1,
                Err(e) => report.malformed.push((idx + 1, e)),
            }
        }
        Ok(report)
    }
}

/// In-memory packet store keyed by device, with an optional append-only
/// backing log that is replayed on open and tailed by [`PacketStore::refresh`].
///
/// Writers (ingest, refresh) take the write lock; queries share the read lock.
#[derive(Debug, Default)]
pub struct PacketStore {
    inner: RwLock<Inner>,
}

impl PacketStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replays `path` (created if missing) and remembers it for tailing.
    pub fn open_log(path: impl AsRef<Path>) -> io::Result<(Self, IngestReport)> {
        let path = path.as_ref().to_path_buf();
        if !path.exists() {
            File::create(&path)?;
        }
        let store = Self {
            inner: RwLock::new(Inner {
                tail: Some(LogTail { path, offset: 0 }),
                ..Inner::default()
            }),
        };
        let report = store.refresh()?;
        Ok((store, report))
    }

    pub fn ingest<'a, I>(&self, records: I) -> usize
    where
        I: IntoIterator<Item = &'a PacketRecord>,
    {
        let mut inner = self.inner.write().unwrap_or_else(PoisonError::into_inner);
        records.into_iter().filter(|r| inner.insert(r)).count()
    }

    pub fn ingest_lines<R: BufRead>(&self, reader: R) -> io::Result<IngestReport> {
        self.inner
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .ingest_lines(reader)
    }

    /// Picks up complete lines appended to the backing log since the last
    /// call. A trailing partial line is left for the next refresh.
    pub fn refresh(&self) -> io::Result<IngestReport> {
        let mut inner = self.inner.write().unwrap_or_else(PoisonError::into_inner);
        let Some(tail) = inner.tail.as_ref() else {
            return Ok(IngestReport::default());
        };
        let mut file = File::open(&tail.path)?;
        let offset = tail.offset;
        file.seek(SeekFrom::Start(offset))?;
        let mut buf = Vec::new();
        BufReader::new(file).read_to_end(&mut buf)?;
        let complete = match buf.iter().rposition(|&b| b == b'\n') {
            Some(last) => last + 1,
            None => return Ok(IngestReport::default()),
        };
        let mut report = IngestReport::default();
        report.merge(inner.ingest_lines(&buf[..complete])?);
        if let Some(tail) = inner.tail.as_mut() {
            tail.offset = offset + complete as u64;
        }
        Ok(report)
    }

    /// Records for `dev_eui` with `from <= ts <= to`, ascending by
    /// timestamp then frame counter. Unknown devices yield an empty list.
    pub fn query(&self, dev_eui: DevEui, from: f64, to: f64) -> Vec<PacketRecord> {
        let inner = self.inner.read().unwrap_or_else(PoisonError::into_inner);
        let Some(list) = inner.devices.get(&dev_eui) else {
            return Vec::new();
        };
        let lo = list.partition_point(|s| s.ts < from);
        let hi = list.partition_point(|s| s.ts <= to);
        list[lo..hi.max(lo)]
            .iter()
            .map(|s| PacketRecord {
                dev_eui,
                fcnt: s.fcnt,
                received_ts: s.ts,
                sf: s.sf,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap_or_else(PoisonError::into_inner).total
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn rec(eui: u64, fcnt: u32, ts: f64) -> PacketRecord {
        PacketRecord {
            dev_eui: DevEui::new(eui),
            fcnt,
            received_ts: ts,
            sf: 7,
        }
    }

    #[test]
    fn empty_ingest() {
        let store = PacketStore::new();
        assert_eq!(store.ingest(&[]), 0);
        let report = store.ingest_lines("".as_bytes()).unwrap();
        assert_eq!(report, IngestReport::default());
        assert!(store.is_empty());
    }

    #[test]
    fn duplicates_are_idempotent() {
        let store = PacketStore::new();
        let batch = [rec(1, 0, 1.0), rec(1, 1, 2.0), rec(2, 0, 1.5)];
        assert_eq!(store.ingest(&batch), 3);
        assert_eq!(store.ingest(&batch), 0);
        assert_eq!(store.len(), 3);
    }

    #[test]
    fn malformed_lines_counted() {
        let store = PacketStore::new();
        let text = "1.000000000\t0000000000000001\t0\t7\ngarbage\n# comment\n\n2.0\t0000000000000001\t1\t7\n";
        let report = store.ingest_lines(text.as_bytes()).unwrap();
        assert_eq!(report.ingested, 2);
        assert_eq!(report.malformed.len(), 1);
        assert_eq!(report.malformed[0].0, 2);
    }

    #[test]
    fn windowed_query() {
        let store = PacketStore::new();
        store.ingest(&[
            rec(1, 4, 50.0),
            rec(1, 0, 5.0),
            rec(1, 1, 10.0),
            rec(1, 2, 20.0),
            rec(1, 3, 30.0),
            rec(2, 0, 15.0),
        ]);
        let got: Vec<u32> = store
            .query(DevEui::new(1), 10.0, 30.0)
            .iter()
            .map(|r| r.fcnt)
            .collect();
        assert_eq!(got, vec![1, 2, 3]);
        assert!(store.query(DevEui::new(9), 0.0, 100.0).is_empty());
        assert!(store.query(DevEui::new(1), 31.0, 49.0).is_empty());
    }

    #[test]
    fn tails_log_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bs.log");
        std::fs::write(&path, format!("{}\n", rec(1, 0, 1.0))).unwrap();
        let (store, report) = PacketStore::open_log(&path).unwrap();
        assert_eq!(report.ingested, 1);

        let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
        write!(f, "{}\n{}", rec(1, 1, 2.0), "3.0\t0000000000000001\t2").unwrap();
        f.flush().unwrap();
        assert_eq!(store.refresh().unwrap().ingested, 1);
        writeln!(f, "\t7").unwrap();
        assert_eq!(store.refresh().unwrap().ingested, 1);
        assert_eq!(store.refresh().unwrap().ingested, 0);
        assert_eq!(store.len(), 3);
    }
}
