//! Traffic ingestion: PCAP and CSV sources producing packet records.
//!
//! A [`PacketRecord`] stands for one APCI/ASDU unit seen on the wire,
//! not one TCP segment: a segment carrying several back-to-back frames
//! yields several records, and a frame split across segments yields one
//! record once reassembled.

mod apci;
mod csv;
mod pcap;
mod reassembly;

pub use apci::ApciUnit;
pub use csv::{
    parse_csv, parse_csv_with_labels, write_csv, write_csv_with_metadata, write_labeled_csv,
    CsvStats,
};
pub use pcap::{read_pcap_records, PcapRecordIter, DEFAULT_IEC104_PORT};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not a PCAP file (bad magic 0x{magic:08x})")]
    BadMagic { path: String, magic: u32 },
    #[error("{path}: truncated PCAP global header")]
    TruncatedHeader { path: String },
    #[error("{path}: unsupported link type {link_type} (only Ethernet is supported)")]
    UnsupportedLinkType { path: String, link_type: u32 },
    #[error("{path}: missing required column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path} line {line}: timestamp goes backwards by {regression:.6}s (more than the 1s tolerance)")]
    TimestampRegression {
        path: String,
        line: usize,
        regression: f64,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
}

/// APCI frame type: information, supervisory, or unnumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApciType {
    I,
    S,
    U,
}

impl fmt::Display for ApciType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApciType::I => write!(f, "I"),
            ApciType::S => write!(f, "S"),
            ApciType::U => write!(f, "U"),
        }
    }
}

impl FromStr for ApciType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(ApciType::I),
            "S" => Ok(ApciType::S),
            "U" => Ok(ApciType::U),
            _ => Err(()),
        }
    }
}

/// One captured IEC 104 application packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    /// Microseconds since the epoch. PCAP timestamps are truncated to
    /// microsecond resolution on ingest.
    pub timestamp_us: u64,
    pub src_addr: Ipv4Addr,
    pub dst_addr: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub apci_type: ApciType,
    /// ASDU type identifier; present exactly when `apci_type` is `I`.
    pub asdu_type_id: Option<u8>,
    /// ASDU byte count; 0 for S and U frames.
    pub asdu_length: u16,
}

impl PacketRecord {
    pub fn timestamp_secs(&self) -> f64 {
        self.timestamp_us as f64 / 1e6
    }

    pub fn source(&self) -> Endpoint {
        Endpoint {
            addr: self.src_addr,
            port: self.src_port,
        }
    }

    pub fn destination(&self) -> Endpoint {
        Endpoint {
            addr: self.dst_addr,
            port: self.dst_port,
        }
    }

    pub fn conversation(&self) -> Conversation {
        Conversation::new(self.source(), self.destination())
    }

    /// Check the I/S/U structural invariants.
    pub fn validate(&self) -> Result<(), String> {
        match self.apci_type {
            ApciType::I => {
                if self.asdu_type_id.is_none() {
                    return Err("I-frame without an ASDU type id".into());
                }
            }
            ApciType::S | ApciType::U => {
                if self.asdu_type_id.is_some() {
                    return Err(format!("{}-frame with an ASDU type id", self.apci_type));
                }
                if self.asdu_length != 0 {
                    return Err(format!(
                        "{}-frame with a nonzero ASDU length",
                        self.apci_type
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One side of a TCP conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub addr: Ipv4Addr,
    pub port: u16,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.addr, self.port)
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, port) = s
            .rsplit_once(':')
            .ok_or_else(|| format!("'{s}' is not addr:port"))?;
        Ok(Endpoint {
            addr: addr.parse().map_err(|e| format!("'{addr}': {e}"))?,
            port: port.parse().map_err(|e| format!("'{port}': {e}"))?,
        })
    }
}

/// Bidirectional flow key: the unordered (addr, port) pair, stored with
/// the lexicographically smaller endpoint first so that both directions
/// map to the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Conversation {
    pub endpoint_a: Endpoint,
    pub endpoint_b: Endpoint,
}

impl Conversation {
    pub fn new(x: Endpoint, y: Endpoint) -> Self {
        if x <= y {
            Conversation {
                endpoint_a: x,
                endpoint_b: y,
            }
        } else {
            Conversation {
                endpoint_a: y,
                endpoint_b: x,
            }
        }
    }
}

impl fmt::Display for Conversation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.endpoint_a, self.endpoint_b)
    }
}

impl FromStr for Conversation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| format!("'{s}' is not addr:port-addr:port"))?;
        Ok(Conversation::new(a.parse()?, b.parse()?))
    }
}

/// Counters accumulated while parsing a capture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    /// Frames read from the capture file.
    pub frames: u64,
    /// TCP segments on the IEC 104 port that carried payload bytes.
    pub segments: u64,
    /// Records emitted.
    pub records: u64,
    /// Captured frames shorter than their stated length.
    pub truncated: u64,
    /// APCI-level errors: resynchronizations and malformed frames.
    pub apci_errors: u64,
    /// TCP segments dropped as retransmissions of delivered data.
    pub duplicate_segments: u64,
    /// Out-of-order segments dropped because the reorder buffer was full,
    /// plus segments still stranded behind a gap at end of capture.
    pub reorder_dropped: u64,
    /// Frames skipped for other reasons (IP fragments, snapped payloads).
    pub skipped: u64,
}

impl ParseStats {
    /// Total count of non-fatal problems encountered.
    pub fn warnings(&self) -> u64 {
        self.truncated + self.apci_errors + self.duplicate_segments + self.reorder_dropped
            + self.skipped
    }
}
