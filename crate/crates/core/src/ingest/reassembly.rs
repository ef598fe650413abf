//! Per-direction TCP payload reassembly feeding the APCI scanner.
//!
//! Each direction of each conversation carries an independent byte
//! stream. Segments are consumed in capture order; a bounded reorder
//! buffer absorbs out-of-order arrivals, retransmitted data is dropped,
//! and overlaps are trimmed to the unseen suffix. Anything still parked
//! behind a gap when the capture ends is dropped and counted.

use super::apci::{ApciScanner, ApciUnit};
use super::{Endpoint, ParseStats};
use std::collections::{BTreeMap, HashMap};

/// Out-of-order segments buffered per direction before new ones are dropped.
const REORDER_BUFFER_SEGMENTS: usize = 64;

/// `a` strictly before `b` in sequence space (wraparound-aware).
fn seq_lt(a: u32, b: u32) -> bool {
    b.wrapping_sub(a) as i32 > 0
}

#[derive(Default)]
struct DirectionState {
    /// Next expected sequence number; set by the first payload segment.
    next_seq: Option<u32>,
    pending: BTreeMap<u32, Vec<u8>>,
    scanner: ApciScanner,
}

impl DirectionState {
    fn push(&mut self, seq: u32, payload: &[u8], stats: &mut ParseStats, out: &mut Vec<ApciUnit>) {
        let next = *self.next_seq.get_or_insert(seq);
        if seq == next {
            self.deliver(seq, payload, out);
        } else if seq_lt(seq, next) {
            let already_seen = next.wrapping_sub(seq) as usize;
            if already_seen >= payload.len() {
                stats.duplicate_segments += 1;
                return;
            }
            // Partial retransmission: deliver only the unseen suffix.
            self.deliver(next, &payload[already_seen..], out);
        } else {
            if self.pending.insert(seq, payload.to_vec()).is_some() {
                stats.duplicate_segments += 1;
            }
            if self.pending.len() > REORDER_BUFFER_SEGMENTS {
                // Drop the farthest-ahead segment; it has the least
                // chance of ever connecting to the stream.
                let last = *self.pending.keys().next_back().unwrap();
                self.pending.remove(&last);
                stats.reorder_dropped += 1;
            }
            return;
        }
        self.flush_pending(stats, out);
    }

    fn deliver(&mut self, seq: u32, payload: &[u8], out: &mut Vec<ApciUnit>) {
        self.scanner.push(payload, out);
        self.next_seq = Some(seq.wrapping_add(payload.len() as u32));
    }

    fn flush_pending(&mut self, stats: &mut ParseStats, out: &mut Vec<ApciUnit>) {
        while let Some((&seq, _)) = self.pending.iter().next() {
            let next = self.next_seq.unwrap();
            if seq_lt(next, seq) {
                break; // still a gap
            }
            let payload = self.pending.remove(&seq).unwrap();
            let already_seen = next.wrapping_sub(seq) as usize;
            if already_seen >= payload.len() {
                stats.duplicate_segments += 1;
                continue;
            }
            self.deliver(next, &payload[already_seen..], out);
        }
    }

    fn finish(&mut self, stats: &mut ParseStats) {
        stats.reorder_dropped += self.pending.len() as u64;
        self.pending.clear();
        self.scanner.finish();
        stats.apci_errors += self.scanner.errors();
    }
}

/// Reassembles every direction of every conversation in a capture.
#[derive(Default)]
pub(crate) struct StreamReassembler {
    directions: HashMap<(Endpoint, Endpoint), DirectionState>,
}

impl StreamReassembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed one TCP segment; returns the APCI units it completed.
    pub fn push_segment(
        &mut self,
        src: Endpoint,
        dst: Endpoint,
        seq: u32,
        payload: &[u8],
        stats: &mut ParseStats,
        out: &mut Vec<ApciUnit>,
    ) {
        if payload.is_empty() {
            return;
        }
        self.directions
            .entry((src, dst))
            .or_default()
            .push(seq, payload, stats, out);
    }

    /// End of capture: drop stranded segments, flush scanners, and fold
    /// per-direction error counts into `stats`.
    pub fn finish(&mut self, stats: &mut ParseStats) {
        for dir in self.directions.values_mut() {
            dir.finish(stats);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ApciType;

    fn ep(port: u16) -> Endpoint {
        Endpoint {
            addr: std::net::Ipv4Addr::new(10, 0, 0, 1),
            port,
        }
    }

    const S_FRAME: [u8; 6] = [0x68, 0x04, 0x01, 0x00, 0x02, 0x00];

    fn push(
        r: &mut StreamReassembler,
        seq: u32,
        payload: &[u8],
        stats: &mut ParseStats,
    ) -> Vec<ApciUnit> {
        let mut out = Vec::new();
        r.push_segment(ep(1000), ep(2404), seq, payload, stats, &mut out);
        out
    }

    #[test]
    fn in_order_delivery() {
        let mut r = StreamReassembler::new();
        let mut stats = ParseStats::default();
        assert_eq!(push(&mut r, 100, &S_FRAME, &mut stats).len(), 1);
        assert_eq!(push(&mut r, 106, &S_FRAME, &mut stats).len(), 1);
        r.finish(&mut stats);
        assert_eq!(stats.warnings(), 0);
    }

    #[test]
    fn out_of_order_segments_reassemble() {
        let mut r = StreamReassembler::new();
        let mut stats = ParseStats::default();
        // First segment anchors the stream; the next frame is split at
        // byte 3 and its halves arrive swapped.
        assert_eq!(push(&mut r, 100, &S_FRAME, &mut stats).len(), 1);
        assert!(push(&mut r, 109, &S_FRAME[3..], &mut stats).is_empty());
        let units = push(&mut r, 106, &S_FRAME[..3], &mut stats);
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].apci_type, ApciType::S);
        r.finish(&mut stats);
        assert_eq!(stats.warnings(), 0);
    }

    #[test]
    fn retransmission_is_dropped() {
        let mut r = StreamReassembler::new();
        let mut stats = ParseStats::default();
        assert_eq!(push(&mut r, 100, &S_FRAME, &mut stats).len(), 1);
        assert!(push(&mut r, 100, &S_FRAME, &mut stats).is_empty());
        assert_eq!(stats.duplicate_segments, 1);
    }

    #[test]
    fn overlap_is_trimmed_to_new_bytes() {
        let mut r = StreamReassembler::new();
        let mut stats = ParseStats::default();
        let mut two = S_FRAME.to_vec();
        two.extend(S_FRAME);
        assert_eq!(push(&mut r, 100, &two[..8], &mut stats).len(), 1);
        // Retransmits bytes 4..8 and adds 8..12.
        let units = push(&mut r, 104, &two[4..], &mut stats);
        assert_eq!(units.len(), 1);
        r.finish(&mut stats);
        assert_eq!(stats.apci_errors, 0);
    }

    #[test]
    fn reorder_buffer_overflow_drops_and_counts() {
        let mut r = StreamReassembler::new();
        let mut stats = ParseStats::default();
        // Establish the stream origin, then leave a gap open.
        push(&mut r, 0, &S_FRAME, &mut stats);
        for i in 0..(REORDER_BUFFER_SEGMENTS as u32 + 10) {
            push(&mut r, 1000 + i * 6, &S_FRAME, &mut stats);
        }
        assert_eq!(stats.reorder_dropped, 10);
        r.finish(&mut stats);
        assert_eq!(
            stats.reorder_dropped,
            10 + REORDER_BUFFER_SEGMENTS as u64
        );
    }

    #[test]
    fn directions_are_independent() {
        let mut r = StreamReassembler::new();
        let mut stats = ParseStats::default();
        let mut out = Vec::new();
        // Same conversation, opposite directions, clashing seq spaces.
        r.push_segment(ep(1000), ep(2404), 500, &S_FRAME[..3], &mut stats, &mut out);
        r.push_segment(ep(2404), ep(1000), 500, &S_FRAME[..3], &mut stats, &mut out);
        assert!(out.is_empty());
        r.push_segment(ep(1000), ep(2404), 503, &S_FRAME[3..], &mut stats, &mut out);
        assert_eq!(out.len(), 1);
        r.push_segment(ep(2404), ep(1000), 503, &S_FRAME[3..], &mut stats, &mut out);
        assert_eq!(out.len(), 2);
    }
}
