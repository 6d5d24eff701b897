use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub t_ms: u64,
    pub entity: &'static str,
    pub transition: String,
}

impl TraceRecord {
    pub fn new(t_ms: u64, entity: &'static str, transition: impl Into<String>) -> Self {
        Self { t_ms, entity, transition: transition.into() }
    }
}

/// Time-ordered transition log of one run plus a terminal summary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Summary lines emitted after the records, stamped with the end time.
    pub summary: Vec<TraceRecord>,
}

impl Trace {
    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    /// Records of `entity` whose transition starts with `prefix`.
    pub fn find<'a>(&'a self, entity: &'a str, prefix: &'a str) -> impl Iterator<Item = &'a TraceRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.entity == entity && r.transition.starts_with(prefix))
    }

    pub fn first(&self, entity: &str, prefix: &str) -> Option<u64> {
        self.find(entity, prefix).next().map(|r| r.t_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Plain,
    Tsv,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown trace format {0:?} (expected plain or tsv)")]
pub struct UnknownFormat(pub String);

impl FromStr for TraceFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(TraceFormat::Plain),
            "tsv" => Ok(TraceFormat::Tsv),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

pub const PLAIN_HEADER: &str = "# t entity transition";
pub const TSV_HEADER: &str = "t_ms\tentity\ttransition";

pub fn emit_trace(trace: &Trace, format: TraceFormat) -> String {
    let mut out = String::new();
    let header = match format {
        TraceFormat::Plain => PLAIN_HEADER,
        TraceFormat::Tsv => TSV_HEADER,
    };
    out.push_str(header);
    out.push('\n');
    for r in trace.records.iter().chain(&trace.summary) {
        // writing into a String cannot fail
        let _ = match format {
            TraceFormat::Plain => writeln!(out, "t={} {} {}", r.t_ms, r.entity, r.transition),
            TraceFormat::Tsv => writeln!(out, "{}\t{}\t{}", r.t_ms, r.entity, r.transition),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        let trace = Trace {
            records: vec![TraceRecord::new(5030, "firmware", "door=ACTIVE")],
            summary: vec![],
        };
        assert_eq!(emit_trace(&trace, TraceFormat::Plain), "# t entity transition\nt=5030 firmware door=ACTIVE\n");
        assert_eq!(emit_trace(&trace, TraceFormat::Tsv), "t_ms\tentity\ttransition\n5030\tfirmware\tdoor=ACTIVE\n");
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(emit_trace(&Trace::default(), TraceFormat::Plain), "# t entity transition\n");
        assert_eq!(emit_trace(&Trace::default(), TraceFormat::Tsv), "t_ms\tentity\ttransition\n");
    }

    #[test]
    fn parse_format() {
        assert_eq!("tsv".parse::<TraceFormat>(), Ok(TraceFormat::Tsv));
        assert_eq!("json".parse::<TraceFormat>(), Err(UnknownFormat("json".into())));
    }
}
