//! Classic PCAP reading: Ethernet/IPv4/TCP decapsulation plus APCI
//! extraction on a configurable port.
//!
//! Both byte orders and both timestamp resolutions of the classic format
//! are accepted; pcapng is not. A malformed global header is fatal, while
//! anything wrong mid-file (truncated frame, snapped payload, IP
//! fragment) is counted and skipped so one bad frame cannot take down a
//! multi-hour capture.

use super::reassembly::StreamReassembler;
use super::{ApciUnit, Endpoint, IngestError, PacketRecord, ParseStats};
use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, Read};
use std::net::Ipv4Addr;
use std::path::Path;

/// IANA-registered IEC 60870-5-104 port.
pub const DEFAULT_IEC104_PORT: u16 = 2404;

/// Upper bound on a single captured frame; anything larger means the
/// file is corrupt, and classic PCAP has no way to resynchronize.
const MAX_FRAME_BYTES: u32 = 256 * 1024;

const LINKTYPE_ETHERNET: u32 = 1;

#[derive(Clone, Copy)]
enum Endian {
    Big,
    Little,
}

impl Endian {
    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            Endian::Big => u32::from_be_bytes(b),
            Endian::Little => u32::from_le_bytes(b),
        }
    }
}

/// Streaming record source over a classic PCAP file.
///
/// The iterator owns its file handle and is `Send`, so parsing and
/// consumption can live on different threads. Warning counters are
/// available through [`Self::stats`] at any point and are final once the
/// iterator is exhausted.
pub struct PcapRecordIter {
    reader: BufReader<File>,
    path: String,
    endian: Endian,
    nanos: bool,
    port: u16,
    reassembler: StreamReassembler,
    stats: ParseStats,
    queue: VecDeque<PacketRecord>,
    unit_buf: Vec<ApciUnit>,
    last_emitted_us: u64,
    done: bool,
}

impl PcapRecordIter {
    /// Open a capture, validating the global header.
    pub fn open(path: &Path, port: u16) -> Result<Self, IngestError> {
        let display = path.display().to_string();
        let io_err = |source| IngestError::Io {
            path: display.clone(),
            source,
        };
        let file = File::open(path).map_err(io_err)?;
        let mut reader = BufReader::new(file);
        let mut header = [0u8; 24];
        reader.read_exact(&mut header).map_err(|_| {
            IngestError::TruncatedHeader {
                path: display.clone(),
            }
        })?;
        let magic: [u8; 4] = header[0..4].try_into().unwrap();
        let (endian, nanos) = match magic {
            [0xa1, 0xb2, 0xc3, 0xd4] => (Endian::Big, false),
            [0xd4, 0xc3, 0xb2, 0xa1] => (Endian::Little, false),
            [0xa1, 0xb2, 0x3c, 0x4d] => (Endian::Big, true),
            [0x4d, 0x3c, 0xb2, 0xa1] => (Endian::Little, true),
            _ => {
                return Err(IngestError::BadMagic {
                    path: display,
                    magic: u32::from_be_bytes(magic),
                })
            }
        };
        let link_type = endian.u32(header[20..24].try_into().unwrap());
        if link_type != LINKTYPE_ETHERNET {
            return Err(IngestError::UnsupportedLinkType {
                path: display,
                link_type,
            });
        }
        Ok(PcapRecordIter {
            reader,
            path: display,
            endian,
            nanos,
            port,
            reassembler: StreamReassembler::new(),
            stats: ParseStats::default(),
            queue: VecDeque::new(),
            unit_buf: Vec::new(),
            last_emitted_us: 0,
            done: false,
        })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// Counters so far; final after the iterator returns `None`.
    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    fn finish(&mut self) {
        if !self.done {
            self.reassembler.finish(&mut self.stats);
            self.done = true;
        }
    }

    /// Read one captured frame and run it through decapsulation and
    /// reassembly. Returns false when the file is exhausted.
    fn pump(&mut self) -> bool {
        let mut header = [0u8; 16];
        match read_full(&mut self.reader, &mut header) {
            ReadOutcome::Full => {}
            ReadOutcome::Eof => {
                self.finish();
                return false;
            }
            ReadOutcome::Partial => {
                self.stats.truncated += 1;
                self.finish();
                return false;
            }
        }
        let ts_sec = self.endian.u32(header[0..4].try_into().unwrap());
        let ts_frac = self.endian.u32(header[4..8].try_into().unwrap());
        let incl_len = self.endian.u32(header[8..12].try_into().unwrap());
        let orig_len = self.endian.u32(header[12..16].try_into().unwrap());
        let frac_limit = if self.nanos { 1_000_000_000 } else { 1_000_000 };
        if incl_len > MAX_FRAME_BYTES || ts_frac >= frac_limit {
            // Nonsense header fields: the stream is corrupt beyond repair.
            self.stats.truncated += 1;
            self.finish();
            return false;
        }
        let mut data = vec![0u8; incl_len as usize];
        match read_full(&mut self.reader, &mut data) {
            ReadOutcome::Full => {}
            ReadOutcome::Eof | ReadOutcome::Partial => {
                self.stats.truncated += 1;
                self.finish();
                return false;
            }
        }
        self.stats.frames += 1;
        let micros = if self.nanos {
            ts_frac as u64 / 1_000
        } else {
            ts_frac as u64
        };
        let timestamp_us = ts_sec as u64 * 1_000_000 + micros;

        let segment = match decapsulate(&data, orig_len, &mut self.stats) {
            Some(s) => s,
            None => return true,
        };
        if segment.src.port != self.port && segment.dst.port != self.port {
            return true;
        }
        if segment.payload.is_empty() {
            return true;
        }
        self.stats.segments += 1;
        self.unit_buf.clear();
        self.reassembler.push_segment(
            segment.src,
            segment.dst,
            segment.seq,
            segment.payload,
            &mut self.stats,
            &mut self.unit_buf,
        );
        // Units completed by this segment share its capture timestamp,
        // monotonized so reorder-buffer flushes cannot step backwards.
        let ts = timestamp_us.max(self.last_emitted_us);
        for unit in self.unit_buf.drain(..) {
            self.last_emitted_us = ts;
            self.stats.records += 1;
            self.queue.push_back(PacketRecord {
                timestamp_us: ts,
                src_addr: segment.src.addr,
                dst_addr: segment.dst.addr,
                src_port: segment.src.port,
                dst_port: segment.dst.port,
                apci_type: unit.apci_type,
                asdu_type_id: unit.asdu_type_id,
                asdu_length: unit.asdu_length,
            });
        }
        true
    }
}

impl Iterator for PcapRecordIter {
    type Item = PacketRecord;

    fn next(&mut self) -> Option<PacketRecord> {
        loop {
            if let Some(rec) = self.queue.pop_front() {
                return Some(rec);
            }
            if self.done {
                return None;
            }
            if !self.pump() {
                return self.queue.pop_front();
            }
        }
    }
}

enum ReadOutcome {
    Full,
    Partial,
    Eof,
}

fn read_full(reader: &mut impl Read, buf: &mut [u8]) -> ReadOutcome {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => {
                return if filled == 0 {
                    ReadOutcome::Eof
                } else {
                    ReadOutcome::Partial
                }
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(_) => return ReadOutcome::Partial,
        }
    }
    ReadOutcome::Full
}

struct TcpSegment<'a> {
    src: Endpoint,
    dst: Endpoint,
    seq: u32,
    payload: &'a [u8],
}

/// Ethernet -> IPv4 -> TCP. Returns `None` for frames that are not TCP
/// over IPv4 or whose payload cannot be recovered intact.
fn decapsulate<'a>(data: &'a [u8], orig_len: u32, stats: &mut ParseStats) -> Option<TcpSegment<'a>> {
    if data.len() < 14 {
        if (data.len() as u32) < orig_len {
            stats.skipped += 1;
        }
        return None;
    }
    let mut ethertype = u16::from_be_bytes([data[12], data[13]]);
    let mut offset = 14;
    if ethertype == 0x8100 {
        if data.len() < 18 {
            return None;
        }
        ethertype = u16::from_be_bytes([data[16], data[17]]);
        offset = 18;
    }
    if ethertype != 0x0800 {
        return None;
    }
    let ip = &data[offset..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return None;
    }
    let ihl = (ip[0] & 0x0f) as usize * 4;
    let total_len = u16::from_be_bytes([ip[2], ip[3]]) as usize;
    if ihl < 20 || total_len < ihl {
        return None;
    }
    if total_len > ip.len() {
        // Snapped below the IP datagram length; feeding a partial
        // payload would corrupt the APCI stream.
        stats.skipped += 1;
        return None;
    }
    let flags_frag = u16::from_be_bytes([ip[6], ip[7]]);
    let more_fragments = flags_frag & 0x2000 != 0;
    let frag_offset = flags_frag & 0x1fff;
    if frag_offset != 0 || more_fragments {
        stats.skipped += 1;
        return None;
    }
    if ip[9] != 6 {
        return None;
    }
    let src_addr = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_addr = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    // Trailing bytes past total_len are Ethernet padding; cut them off.
    let ip = &ip[..total_len];
    let tcp = &ip[ihl..];
    if tcp.len() < 20 {
        return None;
    }
    let src_port = u16::from_be_bytes([tcp[0], tcp[1]]);
    let dst_port = u16::from_be_bytes([tcp[2], tcp[3]]);
    let seq = u32::from_be_bytes([tcp[4], tcp[5], tcp[6], tcp[7]]);
    let data_offset = (tcp[12] >> 4) as usize * 4;
    if data_offset < 20 || data_offset > tcp.len() {
        return None;
    }
    Some(TcpSegment {
        src: Endpoint {
            addr: src_addr,
            port: src_port,
        },
        dst: Endpoint {
            addr: dst_addr,
            port: dst_port,
        },
        seq,
        payload: &tcp[data_offset..],
    })
}

/// Parse a whole capture eagerly.
pub fn read_pcap_records(
    path: &Path,
    port: u16,
) -> Result<(Vec<PacketRecord>, ParseStats), IngestError> {
    let mut iter = PcapRecordIter::open(path, port)?;
    let records: Vec<PacketRecord> = iter.by_ref().collect();
    Ok((records, iter.stats()))
}
