//! Parser for mote sensor logs in the Intel Berkeley lab layout:
//!
//! ```text
//! date time epoch moteid temperature humidity light voltage
//! 2004-03-01 00:00:07 123 7 19.5 38.2 45.0 2.68
//! ```
//!
//! Fields are space separated, or comma separated when the line contains a
//! comma (then empty fields are kept). Trailing channels may be absent.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::NaiveDateTime;

pub use twinfuse_core::resample::{resample, Grid, ResamplePolicy};
use twinfuse_core::SensorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Temperature,
    Humidity,
    Light,
    Voltage,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::Temperature,
        Channel::Humidity,
        Channel::Light,
        Channel::Voltage,
    ];

    fn column(self) -> usize {
        match self {
            Channel::Temperature => 4,
            Channel::Humidity => 5,
            Channel::Light => 6,
            Channel::Voltage => 7,
        }
    }

    pub fn kind(self) -> SensorKind {
        match self {
            Channel::Temperature => SensorKind::Temperature,
            Channel::Humidity => SensorKind::Humidity,
            Channel::Light => SensorKind::Light,
            Channel::Voltage => SensorKind::Voltage,
        }
    }
}

impl FromStr for Channel {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temperature" => Ok(Channel::Temperature),
            "humidity" => Ok(Channel::Humidity),
            "light" => Ok(Channel::Light),
            "voltage" => Ok(Channel::Voltage),
            other => Err(IngestError::UnknownChannel(other.to_owned())),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("no parseable rows ({skipped} malformed rows skipped)")]
    EmptyInput { skipped: usize },
    #[error("unknown channel {0:?} (expected temperature, humidity, light or voltage)")]
    UnknownChannel(String),
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

/// One parsed log row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: f64,
    pub mote_id: u32,
    pub channels: [Option<f64>; 4],
}

impl RawRecord {
    pub fn channel(&self, channel: Channel) -> Option<f64> {
        self.channels[channel.column() - 4]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    /// Strictly increasing `(seconds, value)` pairs for the selected mote and channel.
    pub pairs: Vec<(f64, f64)>,
    pub parsed_rows: usize,
    pub skipped_rows: usize,
}

fn parse_value(field: Option<&&str>) -> Result<Option<f64>, ()> {
    match field.map(|f| f.trim()) {
        None | Some("") => Ok(None),
        Some(f) if f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("na") => Ok(None),
        Some(f) => f.parse::<f64>().map(Some).map_err(|_| ()),
    }
}

/// Parse one line; `None` for malformed rows.
pub fn parse_record(line: &str) -> Option<RawRecord> {
    let fields: Vec<&str> = if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    };
    if fields.len() < 4 {
        return None;
    }
    let stamp = format!("{} {}", fields[0], fields[1]);
    let dt = NaiveDateTime::parse_from_str(&stamp, "%Y-%m-%d %H:%M:%S%.f").ok()?;
    let utc = dt.and_utc();
    let timestamp = utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9;
    fields[2].parse::<u64>().ok()?;
    let mote_id = fields[3].parse::<u32>().ok()?;
    let mut channels = [None; 4];
    for (i, slot) in channels.iter_mut().enumerate() {
        *slot = parse_value(fields.get(4 + i)).ok()?;
    }
    if channels.iter().all(Option::is_none) || !timestamp.is_finite() {
        return None;
    }
    Some(RawRecord {
        timestamp,
        mote_id,
        channels,
    })
}

/// Extract one mote's channel as time-sorted pairs. Malformed rows are
/// counted and skipped; for duplicate timestamps the later row wins.
pub fn parse_log(reader: impl BufRead, mote_id: u32, channel: Channel) -> Result<ParsedLog, IngestError> {
    let mut parsed_rows = 0;
    let mut skipped_rows = 0;
    let mut pairs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(record) = parse_record(&line) else {
            skipped_rows += 1;
            continue;
        };
        parsed_rows += 1;
        if record.mote_id == mote_id {
            if let Some(v) = record.channel(channel) {
                pairs.push((record.timestamp, v));
            }
        }
    }
    if parsed_rows == 0 {
        return Err(IngestError::EmptyInput { skipped: skipped_rows });
    }
    // stable: equal timestamps keep file order, so the last one survives dedup
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut deduped: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for p in pairs {
        match deduped.last_mut() {
            Some(last) if last.0 == p.0 => *last = p,
            _ => deduped.push(p),
        }
    }
    Ok(ParsedLog {
        pairs: deduped,
        parsed_rows,
        skipped_rows,
    })
}
