//! APCI frame extraction from a reassembled TCP byte stream.
//!
//! Every IEC 104 frame starts with 0x68 followed by a length byte that
//! counts the four control octets plus the ASDU. The scanner consumes a
//! byte stream incrementally, holds partial frames until the rest
//! arrives, and resynchronizes at the next 0x68 after garbage or an
//! impossible length field.

use super::ApciType;

pub const START_BYTE: u8 = 0x68;
/// Control fields alone; the smallest legal APDU length.
const MIN_APDU_LEN: usize = 4;
/// IEC 104 caps the whole frame at 255 bytes: start + length + 253.
const MAX_APDU_LEN: usize = 253;

/// One decoded APCI unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApciUnit {
    pub apci_type: ApciType,
    pub asdu_type_id: Option<u8>,
    pub asdu_length: u16,
}

#[derive(Debug, Default)]
pub(crate) struct ApciScanner {
    buf: Vec<u8>,
    errors: u64,
}

impl ApciScanner {
    #[cfg(test)]
    pub fn new() -> Self {
        Self::default()
    }

    /// APCI parse errors counted so far (resyncs, malformed frames).
    pub fn errors(&self) -> u64 {
        self.errors
    }

    /// Feed stream bytes and collect every unit that completes.
    pub fn push(&mut self, bytes: &[u8], out: &mut Vec<ApciUnit>) {
        self.buf.extend_from_slice(bytes);
        let mut pos = 0;
        loop {
            // Resynchronize: skip to the next start byte.
            if pos < self.buf.len() && self.buf[pos] != START_BYTE {
                match self.buf[pos..].iter().position(|&b| b == START_BYTE) {
                    Some(offset) => {
                        pos += offset;
                        self.errors += 1;
                    }
                    None => {
                        pos = self.buf.len();
                        self.errors += 1;
                        break;
                    }
                }
            }
            if pos + 2 > self.buf.len() {
                break; // need the length byte
            }
            let apdu_len = self.buf[pos + 1] as usize;
            if !(MIN_APDU_LEN..=MAX_APDU_LEN).contains(&apdu_len) {
                // Impossible length: treat this start byte as noise.
                self.errors += 1;
                pos += 1;
                continue;
            }
            let frame_end = pos + 2 + apdu_len;
            if frame_end > self.buf.len() {
                break; // wait for the rest of the frame
            }
            if let Some(unit) = decode_unit(&self.buf[pos..frame_end]) {
                out.push(unit);
            } else {
                self.errors += 1;
            }
            pos = frame_end;
        }
        self.buf.drain(..pos);
    }

    /// End of stream: any leftover bytes are an unfinished frame.
    pub fn finish(&mut self) {
        if !self.buf.is_empty() {
            self.errors += 1;
            self.buf.clear();
        }
    }
}

/// Decode one complete frame (start byte through end of ASDU). Returns
/// `None` for frames that violate the I/S/U structure.
fn decode_unit(frame: &[u8]) -> Option<ApciUnit> {
    let control = frame[2];
    let asdu = &frame[6..];
    if control & 0x01 == 0 {
        // I-frame: must carry an ASDU.
        let type_id = *asdu.first()?;
        Some(ApciUnit {
            apci_type: ApciType::I,
            asdu_type_id: Some(type_id),
            asdu_length: asdu.len() as u16,
        })
    } else {
        let apci_type = if control & 0x03 == 0x01 {
            ApciType::S
        } else {
            ApciType::U
        };
        // S and U frames are control-only; a payload is a protocol error.
        if !asdu.is_empty() {
            return None;
        }
        Some(ApciUnit {
            apci_type,
            asdu_type_id: None,
            asdu_length: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(chunks: &[&[u8]]) -> (Vec<ApciUnit>, u64) {
        let mut scanner = ApciScanner::new();
        let mut out = Vec::new();
        for chunk in chunks {
            scanner.push(chunk, &mut out);
        }
        scanner.finish();
        (out, scanner.errors())
    }

    const S_FRAME: [u8; 6] = [0x68, 0x04, 0x01, 0x00, 0x02, 0x00];

    fn i_frame(type_id: u8, asdu_len: usize) -> Vec<u8> {
        let mut f = vec![0x68, (4 + asdu_len) as u8, 0x02, 0x00, 0x04, 0x00];
        f.push(type_id);
        f.extend(std::iter::repeat(0u8).take(asdu_len - 1));
        f
    }

    #[test]
    fn minimal_s_frame() {
        let (units, errors) = scan(&[&S_FRAME]);
        assert_eq!(errors, 0);
        assert_eq!(
            units,
            vec![ApciUnit {
                apci_type: ApciType::S,
                asdu_type_id: None,
                asdu_length: 0
            }]
        );
    }

    #[test]
    fn u_frame_testfr() {
        let (units, errors) = scan(&[&[0x68, 0x04, 0x43, 0x00, 0x00, 0x00]]);
        assert_eq!(errors, 0);
        assert_eq!(units[0].apci_type, ApciType::U);
    }

    #[test]
    fn two_i_frames_back_to_back() {
        let mut payload = i_frame(100, 10);
        payload.extend(i_frame(13, 14));
        let (units, errors) = scan(&[&payload]);
        assert_eq!(errors, 0);
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].asdu_type_id, Some(100));
        assert_eq!(units[0].asdu_length, 10);
        assert_eq!(units[1].asdu_type_id, Some(13));
        assert_eq!(units[1].asdu_length, 14);
    }

    #[test]
    fn frame_split_across_chunks() {
        let frame = i_frame(45, 8);
        for split in 1..frame.len() {
            let (units, errors) = scan(&[&frame[..split], &frame[split..]]);
            assert_eq!(errors, 0, "split at {split}");
            assert_eq!(units.len(), 1, "split at {split}");
            assert_eq!(units[0].asdu_type_id, Some(45));
        }
    }

    #[test]
    fn garbage_before_frame_resyncs() {
        let mut payload = vec![0xde, 0xad, 0xbe, 0xef];
        payload.extend(S_FRAME);
        let (units, errors) = scan(&[&payload]);
        assert_eq!(units.len(), 1);
        assert_eq!(errors, 1);
    }

    #[test]
    fn bad_length_byte_resyncs_at_next_start() {
        // Length 0x02 is below the 4-byte control minimum.
        let mut payload = vec![0x68, 0x02, 0xff, 0xff];
        payload.extend(S_FRAME);
        let (units, errors) = scan(&[&payload]);
        assert_eq!(units.len(), 1);
        assert!(errors >= 1);
    }

    #[test]
    fn truncated_trailing_frame_counts_one_error() {
        let frame = i_frame(100, 10);
        let (units, errors) = scan(&[&frame[..4]]);
        assert!(units.is_empty());
        assert_eq!(errors, 1);
    }

    #[test]
    fn s_frame_with_payload_is_rejected() {
        // Claims S-format but carries two ASDU bytes.
        let payload = [0x68, 0x06, 0x01, 0x00, 0x02, 0x00, 0xaa, 0xbb];
        let (units, errors) = scan(&[&payload]);
        assert!(units.is_empty());
        assert_eq!(errors, 1);
    }
}
