//! NMC side: site table, liveness tracking and the append-only alarm log.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::protocol::{AlarmFlags, NmcFrame, Reject};

pub const DEFAULT_OFFLINE_TIMEOUT_MS: u64 = 35_000;
pub const SWEEP_INTERVAL_MS: u64 = 1_000;

/// Alarm channels reported as raise/clear transitions.
pub const CHANNELS: [(u8, &str); 5] = [
    (AlarmFlags::TEMP_ALERT, "TEMP_ALERT"),
    (AlarmFlags::TEMP_DANGER, "TEMP_DANGER"),
    (AlarmFlags::SMOKE, "SMOKE"),
    (AlarmFlags::DOOR, "DOOR"),
    (AlarmFlags::WATER, "WATER"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Raise(&'static str),
    Clear(&'static str),
    SiteDown,
    SiteUp,
    CrcReject,
    SeqReject,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Raise(ch) => write!(f, "{ch}_RAISE"),
            EventKind::Clear(ch) => write!(f, "{ch}_CLEAR"),
            EventKind::SiteDown => f.write_str("SITE_DOWN"),
            EventKind::SiteUp => f.write_str("SITE_UP"),
            EventKind::CrcReject => f.write_str("CRC_REJECT"),
            EventKind::SeqReject => f.write_str("SEQ_REJECT"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlarmLogRecord {
    pub ts_ms: u64,
    /// `None` when the octets could not be attributed to a site.
    pub site_id: Option<u16>,
    pub kind: EventKind,
    pub flags: Option<AlarmFlags>,
    pub temp_tenths: Option<i16>,
    pub detail: String,
}

impl fmt::Display for AlarmLogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ts={} site=", self.ts_ms)?;
        match self.site_id {
            Some(id) => write!(f, "{id}")?,
            None => f.write_str("-")?,
        }
        write!(f, " event={} flags=", self.kind)?;
        match self.flags {
            Some(flags) => write!(f, "{flags:02x}")?,
            None => f.write_str("-")?,
        }
        f.write_str(" temp=")?;
        match self.temp_tenths {
            Some(t) => write!(f, "{t}"),
            None => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteState {
    pub site_id: u16,
    pub last_seq: u32,
    pub last_frame_time_ms: u64,
    /// Status flags of the last accepted frame, heartbeat marker removed.
    pub flags: AlarmFlags,
    pub temp_tenths: i16,
    pub online: bool,
}

impl fmt::Display for SiteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "site={} online={} seq={} last={} flags={:02x} temp={}",
            self.site_id, self.online, self.last_seq, self.last_frame_time_ms, self.flags, self.temp_tenths
        )
    }
}

/// Site table plus the journal of accepted frames it was folded from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NmcState {
    sites: BTreeMap<u16, SiteState>,
    offline_timeout_ms: u64,
    accepted: Vec<(u64, NmcFrame)>,
    keep_journal: bool,
}

impl Default for NmcState {
    fn default() -> Self {
        Self::new(DEFAULT_OFFLINE_TIMEOUT_MS)
    }
}

impl NmcState {
    pub fn new(offline_timeout_ms: u64) -> Self {
        Self {
            sites: BTreeMap::new(),
            offline_timeout_ms,
            accepted: Vec::new(),
            keep_journal: true,
        }
    }

    /// Stops recording accepted frames (long-running servers).
    pub fn without_journal(mut self) -> Self {
        self.keep_journal = false;
        self.accepted.clear();
        self
    }

    pub fn offline_timeout_ms(&self) -> u64 {
        self.offline_timeout_ms
    }

    pub fn sites(&self) -> &BTreeMap<u16, SiteState> {
        &self.sites
    }

    pub fn site(&self, id: u16) -> Option<&SiteState> {
        self.sites.get(&id)
    }

    /// Accepted frames with their arrival times, in acceptance order.
    pub fn accepted(&self) -> &[(u64, NmcFrame)] {
        &self.accepted
    }

    /// Decodes and applies one 22-octet frame.
    pub fn ingest(&mut self, raw: &[u8], now_ms: u64) -> Vec<AlarmLogRecord> {
        match NmcFrame::decode(raw) {
            Ok(frame) => self.ingest_frame(frame, now_ms),
            Err(reject) => vec![reject_record(reject, raw, now_ms)],
        }
    }

    pub fn ingest_frame(&mut self, frame: NmcFrame, now_ms: u64) -> Vec<AlarmLogRecord> {
        let status = frame.flags.status();
        let mut records = Vec::new();
        let record = |kind: EventKind, detail: String| AlarmLogRecord {
            ts_ms: now_ms,
            site_id: Some(frame.site_id),
            kind,
            flags: Some(status),
            temp_tenths: Some(frame.temp_tenths),
            detail,
        };

        let previous = match self.sites.get(&frame.site_id) {
            Some(site) if frame.seq <= site.last_seq => {
                return vec![record(
                    EventKind::SeqReject,
                    format!("seq {} <= last accepted {}", frame.seq, site.last_seq),
                )];
            }
            Some(site) => {
                if !site.online {
                    records.push(record(EventKind::SiteUp, "link restored".into()));
                }
                site.flags
            }
            None => {
                records.push(record(EventKind::SiteUp, "first frame".into()));
                AlarmFlags::default()
            }
        };

        for (bit, name) in CHANNELS {
            match (previous.contains(bit), status.contains(bit)) {
                (false, true) => records.push(record(EventKind::Raise(name), String::new())),
                (true, false) => records.push(record(EventKind::Clear(name), String::new())),
                _ => {}
            }
        }

        self.apply(frame, now_ms);
        records
    }

    fn apply(&mut self, frame: NmcFrame, now_ms: u64) {
        self.sites.insert(
            frame.site_id,
            SiteState {
                site_id: frame.site_id,
                last_seq: frame.seq,
                last_frame_time_ms: now_ms,
                flags: frame.flags.status(),
                temp_tenths: frame.temp_tenths,
                online: true,
            },
        );
        if self.keep_journal {
            self.accepted.push((now_ms, frame));
        }
    }

    /// Marks sites silent for longer than the timeout as offline. Each site
    /// logs SITE_DOWN once per outage.
    pub fn heartbeat_sweep(&mut self, now_ms: u64) -> Vec<AlarmLogRecord> {
        let timeout = self.offline_timeout_ms;
        self.sites
            .values_mut()
            .filter(|site| site.online && now_ms.saturating_sub(site.last_frame_time_ms) > timeout)
            .map(|site| {
                site.online = false;
                AlarmLogRecord {
                    ts_ms: now_ms,
                    site_id: Some(site.site_id),
                    kind: EventKind::SiteDown,
                    flags: Some(site.flags),
                    temp_tenths: Some(site.temp_tenths),
                    detail: format!("silent since {}", site.last_frame_time_ms),
                }
            })
            .collect()
    }

    /// Re-folds the accepted-frame journal into a fresh table.
    pub fn replay(offline_timeout_ms: u64, accepted: &[(u64, NmcFrame)]) -> Self {
        let mut state = Self::new(offline_timeout_ms);
        for &(arrival, frame) in accepted {
            state.apply(frame, arrival);
        }
        state
    }

    /// Site table, one line per site in id order.
    pub fn dump(&self) -> String {
        self.sites.values().map(|s| format!("{s}\n")).collect()
    }
}

fn reject_record(reject: Reject, raw: &[u8], now_ms: u64) -> AlarmLogRecord {
    AlarmLogRecord {
        ts_ms: now_ms,
        site_id: None,
        kind: EventKind::CrcReject,
        flags: None,
        temp_tenths: None,
        detail: format!("{reject} ({} octets)", raw.len()),
    }
}

/// Record for a candidate the stream reader rejected.
pub fn reject_event(reject: Reject, now_ms: u64) -> AlarmLogRecord {
    reject_record(reject, &[], now_ms)
}

/// Pure form of [`NmcState::ingest`].
pub fn nmc_ingest(state: &NmcState, raw: &[u8], now_ms: u64) -> (Vec<AlarmLogRecord>, NmcState) {
    let mut next = state.clone();
    let events = next.ingest(raw, now_ms);
    (events, next)
}

/// Line-oriented append-only sink for [`AlarmLogRecord`]s.
pub struct AlarmLog {
    out: Box<dyn Write + Send>,
}

impl AlarmLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let file: File = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { out: Box::new(BufWriter::new(file)) })
    }

    pub fn to_writer(out: impl Write + Send + 'static) -> Self {
        Self { out: Box::new(out) }
    }

    pub fn append(&mut self, records: &[AlarmLogRecord]) -> io::Result<()> {
        for r in records {
            writeln!(self.out, "{r}")?;
        }
        self.out.flush()
    }
}

impl fmt::Debug for AlarmLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlarmLog").finish_non_exhaustive()
    }
}
