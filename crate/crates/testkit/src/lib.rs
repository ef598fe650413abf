//! Synthetic capture construction for tests and benchmarks.
//!
//! Builds classic PCAP byte streams (both byte orders, micro- and
//! nanosecond timestamps) around hand-assembled Ethernet/IPv4/TCP
//! segments, so parser behavior can be pinned down without binary
//! fixtures in the repository. Checksums are left zero; the parser does
//! not verify them.

use gridlof_core::ingest::{ApciType, Endpoint, PacketRecord};
use std::collections::HashMap;

/// One TCP segment to place in a capture.
#[derive(Debug, Clone)]
pub struct SegmentSpec {
    pub timestamp_us: u64,
    pub src: Endpoint,
    pub dst: Endpoint,
    pub seq: u32,
    pub payload: Vec<u8>,
}

/// Capture file dialect knobs.
#[derive(Debug, Clone, Copy)]
pub struct PcapOptions {
    pub big_endian: bool,
    pub nanos: bool,
    pub snaplen: u32,
    pub link_type: u32,
    /// Pad frames to the 60-byte Ethernet minimum, as NICs do on the wire.
    pub pad_to_min: bool,
    /// Store at most this many bytes per frame (`incl_len < orig_len`),
    /// imitating a capture taken with a small snap length.
    pub truncate_frames_at: Option<usize>,
}

impl Default for PcapOptions {
    fn default() -> Self {
        PcapOptions {
            big_endian: false,
            nanos: false,
            snaplen: 65_535,
            link_type: 1, // Ethernet
            pad_to_min: false,
            truncate_frames_at: None,
        }
    }
}

/// Encode one APCI unit. I-frames get `asdu_length` ASDU bytes starting
/// with the type id; S/U frames are the bare 6-byte control frame.
pub fn apci_unit_bytes(apci_type: ApciType, type_id: u8, asdu_length: u16) -> Vec<u8> {
    match apci_type {
        ApciType::I => {
            assert!(
                (1..=249).contains(&asdu_length),
                "I-frame ASDU length {asdu_length} out of range"
            );
            let mut frame = vec![0x68, 4 + asdu_length as u8, 0x00, 0x00, 0x00, 0x00];
            frame.push(type_id);
            frame.extend((1..asdu_length).map(|i| (i % 251) as u8));
            frame
        }
        ApciType::S => vec![0x68, 0x04, 0x01, 0x00, 0x00, 0x00],
        ApciType::U => vec![0x68, 0x04, 0x43, 0x00, 0x00, 0x00],
    }
}

/// Wire bytes for the APCI unit a record describes.
pub fn record_unit_bytes(record: &PacketRecord) -> Vec<u8> {
    apci_unit_bytes(
        record.apci_type,
        record.asdu_type_id.unwrap_or(0),
        record.asdu_length,
    )
}

fn ethernet_ipv4_tcp(spec: &SegmentSpec) -> Vec<u8> {
    let payload = &spec.payload;
    let mut frame = Vec::with_capacity(54 + payload.len());
    // Ethernet II
    frame.extend_from_slice(&[0x02, 0x00, 0x00, 0x00, 0x00, 0x01]); // dst MAC
    frame.extend_from_slice(&[0x02, 0x00, 0x00, 0x00, 0x00, 0x02]); // src MAC
    frame.extend_from_slice(&0x0800u16.to_be_bytes());
    // IPv4, no options
    let total_len = (40 + payload.len()) as u16;
    frame.push(0x45);
    frame.push(0x00);
    frame.extend_from_slice(&total_len.to_be_bytes());
    frame.extend_from_slice(&[0x00, 0x00]); // identification
    frame.extend_from_slice(&0x4000u16.to_be_bytes()); // DF
    frame.push(64); // TTL
    frame.push(6); // TCP
    frame.extend_from_slice(&[0x00, 0x00]); // checksum (unverified)
    frame.extend_from_slice(&spec.src.addr.octets());
    frame.extend_from_slice(&spec.dst.addr.octets());
    // TCP, no options
    frame.extend_from_slice(&spec.src.port.to_be_bytes());
    frame.extend_from_slice(&spec.dst.port.to_be_bytes());
    frame.extend_from_slice(&spec.seq.to_be_bytes());
    frame.extend_from_slice(&[0x00; 4]); // ack
    frame.push(0x50); // data offset 5
    frame.push(0x18); // PSH|ACK
    frame.extend_from_slice(&0xffffu16.to_be_bytes()); // window
    frame.extend_from_slice(&[0x00; 4]); // checksum, urgent
    frame.extend_from_slice(payload);
    frame
}

fn put_u32(out: &mut Vec<u8>, v: u32, big_endian: bool) {
    if big_endian {
        out.extend_from_slice(&v.to_be_bytes());
    } else {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_u16(out: &mut Vec<u8>, v: u16, big_endian: bool) {
    if big_endian {
        out.extend_from_slice(&v.to_be_bytes());
    } else {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Assemble a classic PCAP file from segments, in the given order.
pub fn build_pcap_with(specs: &[SegmentSpec], opts: PcapOptions) -> Vec<u8> {
    let mut out = Vec::new();
    let magic: u32 = if opts.nanos { 0xa1b2_3c4d } else { 0xa1b2_c3d4 };
    put_u32(&mut out, magic, opts.big_endian);
    put_u16(&mut out, 2, opts.big_endian); // version major
    put_u16(&mut out, 4, opts.big_endian); // version minor
    put_u32(&mut out, 0, opts.big_endian); // thiszone
    put_u32(&mut out, 0, opts.big_endian); // sigfigs
    put_u32(&mut out, opts.snaplen, opts.big_endian);
    put_u32(&mut out, opts.link_type, opts.big_endian);
    for spec in specs {
        let mut frame = ethernet_ipv4_tcp(spec);
        if opts.pad_to_min && frame.len() < 60 {
            frame.resize(60, 0);
        }
        let orig_len = frame.len();
        if let Some(cap) = opts.truncate_frames_at {
            frame.truncate(cap);
        }
        let ts_sec = (spec.timestamp_us / 1_000_000) as u32;
        let frac = spec.timestamp_us % 1_000_000;
        let ts_frac = if opts.nanos {
            (frac * 1_000) as u32
        } else {
            frac as u32
        };
        put_u32(&mut out, ts_sec, opts.big_endian);
        put_u32(&mut out, ts_frac, opts.big_endian);
        put_u32(&mut out, frame.len() as u32, opts.big_endian);
        put_u32(&mut out, orig_len as u32, opts.big_endian);
        out.extend_from_slice(&frame);
    }
    out
}

/// [`build_pcap_with`] using the little-endian microsecond dialect.
pub fn build_pcap(specs: &[SegmentSpec]) -> Vec<u8> {
    build_pcap_with(specs, PcapOptions::default())
}

/// One segment per record, with per-direction sequence numbers that
/// account for earlier payload bytes, as a real stack would produce.
pub fn records_to_segments(records: &[PacketRecord]) -> Vec<SegmentSpec> {
    let mut seq: HashMap<(Endpoint, Endpoint), u32> = HashMap::new();
    records
        .iter()
        .map(|r| {
            let payload = record_unit_bytes(r);
            let key = (r.source(), r.destination());
            let s = seq.entry(key).or_insert(1); // post-SYN relative seq
            let spec = SegmentSpec {
                timestamp_us: r.timestamp_us,
                src: r.source(),
                dst: r.destination(),
                seq: *s,
                payload,
            };
            *s = s.wrapping_add(spec.payload.len() as u32);
            spec
        })
        .collect()
}

/// Straight from records to capture bytes.
pub fn records_to_pcap(records: &[PacketRecord]) -> Vec<u8> {
    build_pcap(&records_to_segments(records))
}
