//! Property tests for the ingest invariants: CSV round-trip identity and
//! segmentation-invariant APCI reassembly.

use gridlof_core::ingest::{parse_csv, read_pcap_records, write_csv, ApciType, DEFAULT_IEC104_PORT};
use gridlof_core::{Endpoint, PacketRecord};
use gridlof_testkit::{apci_unit_bytes, build_pcap, records_to_pcap, SegmentSpec};
use proptest::prelude::*;
use std::net::Ipv4Addr;

fn ep(last_octet: u8, port: u16) -> Endpoint {
    Endpoint {
        addr: Ipv4Addr::new(10, 1, 0, last_octet),
        port,
    }
}

#[derive(Debug, Clone)]
struct RecordSpec {
    delta_us: u64,
    master_to_slave: bool,
    master: u8,
    frame: FrameSpec,
}

#[derive(Debug, Clone)]
enum FrameSpec {
    I { type_id: u8, asdu_len: u16 },
    S,
    U,
}

fn frame_strategy() -> impl Strategy<Value = FrameSpec> {
    prop_oneof![
        (any::<u8>(), 1u16..=249).prop_map(|(type_id, asdu_len)| FrameSpec::I {
            type_id,
            asdu_len
        }),
        Just(FrameSpec::S),
        Just(FrameSpec::U),
    ]
}

fn record_specs() -> impl Strategy<Value = Vec<RecordSpec>> {
    prop::collection::vec(
        (0u64..5_000_000, any::<bool>(), 1u8..=3, frame_strategy()).prop_map(
            |(delta_us, master_to_slave, master, frame)| RecordSpec {
                delta_us,
                master_to_slave,
                master,
                frame,
            },
        ),
        1..80,
    )
}

fn build_records(specs: &[RecordSpec]) -> Vec<PacketRecord> {
    let mut ts = 1_544_400_000_000_000u64;
    specs
        .iter()
        .map(|spec| {
            ts += spec.delta_us;
            let master = ep(spec.master, 40_000 + spec.master as u16);
            let slave = ep(200, DEFAULT_IEC104_PORT);
            let (src, dst) = if spec.master_to_slave {
                (master, slave)
            } else {
                (slave, master)
            };
            let (apci_type, asdu_type_id, asdu_length) = match spec.frame {
                FrameSpec::I { type_id, asdu_len } => (ApciType::I, Some(type_id), asdu_len),
                FrameSpec::S => (ApciType::S, None, 0),
                FrameSpec::U => (ApciType::U, None, 0),
            };
            PacketRecord {
                timestamp_us: ts,
                src_addr: src.addr,
                dst_addr: dst.addr,
                src_port: src.port,
                dst_port: dst.port,
                apci_type,
                asdu_type_id,
                asdu_length,
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_roundtrip_is_identity(specs in record_specs()) {
        let records = build_records(&specs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let written = write_csv(&records, &path).unwrap();
        prop_assert_eq!(written as usize, records.len());
        let (parsed, stats) = parse_csv(&path).unwrap();
        prop_assert_eq!(parsed, records);
        prop_assert_eq!(stats.warnings(), 0);
    }

    #[test]
    fn pcap_to_csv_pipeline_is_identity(specs in record_specs()) {
        let records = build_records(&specs);
        let dir = tempfile::tempdir().unwrap();
        let pcap_path = dir.path().join("capture.pcap");
        std::fs::write(&pcap_path, records_to_pcap(&records)).unwrap();
        let (from_pcap, stats) = read_pcap_records(&pcap_path, DEFAULT_IEC104_PORT).unwrap();
        prop_assert_eq!(&from_pcap, &records);
        prop_assert_eq!(stats.warnings(), 0);

        let csv_path = dir.path().join("records.csv");
        write_csv(&from_pcap, &csv_path).unwrap();
        let (from_csv, _) = parse_csv(&csv_path).unwrap();
        prop_assert_eq!(from_csv, records);
    }

    /// Re-splitting one direction's APCI byte stream across arbitrary
    /// TCP segment boundaries never changes the decoded unit sequence.
    #[test]
    fn reassembly_is_boundary_invariant(
        frames in prop::collection::vec(frame_strategy(), 1..40),
        cuts in prop::collection::vec(1usize..10_000, 0..60),
    ) {
        let mut stream = Vec::new();
        let mut expected = Vec::new();
        for frame in &frames {
            let (t, id, len) = match *frame {
                FrameSpec::I { type_id, asdu_len } => (ApciType::I, Some(type_id), asdu_len),
                FrameSpec::S => (ApciType::S, None, 0),
                FrameSpec::U => (ApciType::U, None, 0),
            };
            stream.extend(apci_unit_bytes(t, id.unwrap_or(0), len));
            expected.push((t, id, len));
        }
        // Turn cut offsets into segment boundaries inside the stream.
        let mut bounds: Vec<usize> = cuts.iter().map(|c| c % stream.len()).collect();
        bounds.push(0);
        bounds.push(stream.len());
        bounds.sort_unstable();
        bounds.dedup();
        let src = ep(1, 40001);
        let dst = ep(200, DEFAULT_IEC104_PORT);
        let segments: Vec<SegmentSpec> = bounds
            .windows(2)
            .map(|w| SegmentSpec {
                timestamp_us: 1_544_400_000_000_000,
                src,
                dst,
                seq: 1 + w[0] as u32,
                payload: stream[w[0]..w[1]].to_vec(),
            })
            .filter(|s| !s.payload.is_empty())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.pcap");
        std::fs::write(&path, build_pcap(&segments)).unwrap();
        let (records, stats) = read_pcap_records(&path, DEFAULT_IEC104_PORT).unwrap();
        prop_assert_eq!(stats.apci_errors, 0);
        let got: Vec<(ApciType, Option<u8>, u16)> = records
            .iter()
            .map(|r| (r.apci_type, r.asdu_type_id, r.asdu_length))
            .collect();
        prop_assert_eq!(got, expected);
    }
}
