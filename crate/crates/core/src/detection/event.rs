//! Time-tagged photon events and their CSV form.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Port};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// 794 nm photon, stored in the thulium memory.
    Signal794,
    /// 1535 nm photon, stored in the erbium memory.
    Idler1535,
    /// Down-sampled TDC start (clock ANDed with a herald detection).
    Clock,
}

/// Time-bin slot of a photon. `Central` is the interfering slot behind an unbalanced
/// analyzer interferometer; `Superposed` marks a photon whose bin is not yet resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bin {
    Early,
    Central,
    Late,
    Superposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Pair,
    Dark,
    /// Recalled by a secondary echo of an imperfect comb.
    SpuriousEcho,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryOutcome {
    Transmitted,
    /// Recalled by echo `k` of the memory's echo list (0 is the primary echo).
    Recalled(usize),
    Lost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotonEvent {
    pub channel: Channel,
    pub time_ps: i64,
    pub cycle: u64,
    pub pair_id: Option<u64>,
    pub bin: Bin,
    pub origin: Origin,
    pub memory_outcome: Option<MemoryOutcome>,
    /// Analyzer output port the photon left through, once resolved.
    pub port: Option<Port>,
    /// Two-photon state shared with the partner photon.
    pub joint_state: Option<Arc<DensityMatrix>>,
}

impl PhotonEvent {
    pub fn is_lost(&self) -> bool {
        self.memory_outcome == Some(MemoryOutcome::Lost)
    }

    pub fn dark(channel: Channel, time_ps: i64, cycle: u64, port: Option<Port>) -> Self {
        Self {
            channel,
            time_ps,
            cycle,
            pair_id: None,
            bin: Bin::Superposed,
            origin: Origin::Dark,
            memory_outcome: None,
            port,
            joint_state: None,
        }
    }
}

macro_rules! token_enum {
    ($ty:ty, $($variant:path => $tok:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $tok),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($tok => Ok($variant),)+
                    _ => Err(Error::invalid(format!(concat!("unknown ", stringify!($ty), " `{}`"), s))),
                }
            }
        }
    };
}

token_enum!(Channel, Channel::Signal794 => "SIGNAL_794", Channel::Idler1535 => "IDLER_1535", Channel::Clock => "CLOCK");
token_enum!(Bin, Bin::Early => "EARLY", Bin::Central => "CENTRAL", Bin::Late => "LATE", Bin::Superposed => "SUPERPOSED");
token_enum!(Origin, Origin::Pair => "PAIR", Origin::Dark => "DARK", Origin::SpuriousEcho => "SPURIOUS_ECHO");

impl fmt::Display for MemoryOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemoryOutcome::Transmitted => f.write_str("TRANSMITTED"),
            MemoryOutcome::Recalled(k) => write!(f, "RECALLED({k})"),
            MemoryOutcome::Lost => f.write_str("LOST"),
        }
    }
}

impl FromStr for MemoryOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TRANSMITTED" => Ok(MemoryOutcome::Transmitted),
            "LOST" => Ok(MemoryOutcome::Lost),
            _ => s
                .strip_prefix("RECALLED(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|k| k.parse().ok())
                .map(MemoryOutcome::Recalled)
                .ok_or_else(|| Error::invalid(format!("unknown memory outcome `{s}`"))),
        }
    }
}

pub const EVENT_CSV_HEADER: &str = "cycle,channel,time_ps,bin,origin,memory_outcome,port";

/// One event as a CSV line (without newline). The joint state and pair id are not part
/// of the format.
pub fn event_csv_line(e: &PhotonEvent) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        e.cycle,
        e.channel,
        e.time_ps,
        e.bin,
        e.origin,
        e.memory_outcome.map(|m| m.to_string()).unwrap_or_default(),
        e.port.map(|p| p.to_string()).unwrap_or_default()
    )
}

pub fn write_events_csv(events: &[PhotonEvent], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{EVENT_CSV_HEADER}").map_err(io)?;
    for e in events {
        writeln!(w, "{}", event_csv_line(e)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_events_csv(path: &Path) -> Result<Vec<PhotonEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events_csv(&text, &path.display().to_string())
}

pub fn parse_events_csv(text: &str, origin: &str) -> Result<Vec<PhotonEvent>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let expected: Vec<&str> = EVENT_CSV_HEADER.split(',').collect();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(parse_err(1, format!("expected header `{EVENT_CSV_HEADER}`")));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            parse_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let err = |e: Error| parse_err(line, e.to_string());
        let num_err = |i: usize, field: &str| parse_err(line, format!("bad {field} `{}`", &rec[i]));
        out.push(PhotonEvent {
            cycle: rec[0].parse().map_err(|_| num_err(0, "cycle"))?,
            channel: rec[1].parse().map_err(err)?,
            time_ps: rec[2].parse().map_err(|_| num_err(2, "time_ps"))?,
            bin: rec[3].parse().map_err(err)?,
            origin: rec[4].parse().map_err(err)?,
            memory_outcome: if rec[5].is_empty() { None } else { Some(rec[5].parse().map_err(err)?) },
            port: match &rec[6] {
                "" => None,
                "+" => Some(Port::Plus),
                "-" => Some(Port::Minus),
                other => return Err(parse_err(line, format!("bad port `{other}`"))),
            },
            pair_id: None,
            joint_state: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let events = vec![
            PhotonEvent {
                channel: Channel::Signal794,
                time_ps: 37_500 + 32_000 + 1400,
                cycle: 3,
                pair_id: Some(1),
                bin: Bin::Central,
                origin: Origin::Pair,
                memory_outcome: Some(MemoryOutcome::Recalled(0)),
                port: Some(Port::Minus),
                joint_state: None,
            },
            PhotonEvent::dark(Channel::Idler1535, 12, 0, Some(Port::Plus)),
            PhotonEvent {
                channel: Channel::Clock,
                time_ps: 6000,
                cycle: 0,
                pair_id: None,
                bin: Bin::Early,
                origin: Origin::Pair,
                memory_outcome: Some(MemoryOutcome::Transmitted),
                port: None,
                joint_state: None,
            },
        ];
        let mut text = format!("{EVENT_CSV_HEADER}\n");
        for e in &events {
            text.push_str(&event_csv_line(e));
            text.push('\n');
        }
        let back = parse_events_csv(&text, "mem").unwrap();
        let strip = |e: &PhotonEvent| PhotonEvent { pair_id: None, ..e.clone() };
        assert_eq!(back, events.iter().map(strip).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_tokens() {
        let text = format!("{EVENT_CSV_HEADER}\n0,SIGNAL_794,0,EARLY,PAIR,RECALLED(x),+\n");
        assert!(matches!(parse_events_csv(&text, "m"), Err(Error::Parse { line: 2, .. })));
    }
}
