//! Inter-arrival-time series extraction.
//!
//! Packets are grouped by bidirectional conversation and the merged
//! two-way sequence is differenced in time order: master/slave traffic
//! alternates directions, and it is the spacing of the combined channel
//! that is stable. Zero gaps are kept — frames batched into one TCP
//! segment are legitimate signal.

use crate::ingest::{Conversation, PacketRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("series has {len} samples; need at least 3 to split")]
    TooShortToSplit { len: usize },
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Ground-truth label carried by synthetic traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Attack,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => write!(f, "normal"),
            Label::Attack => write!(f, "attack"),
        }
    }
}

/// One inter-arrival observation: the gap between a packet and its
/// predecessor within the same conversation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureSample {
    /// 1-based position in the series.
    pub index: usize,
    /// Gap to the previous packet, in seconds. Zero only when two APCI
    /// units shared a TCP segment.
    pub iat: f64,
    /// Arrival time of the later packet of the pair, in seconds.
    pub timestamp: f64,
    /// Index of the later packet in the source record stream; lets
    /// per-record ground truth be mapped onto samples.
    pub record_index: usize,
}

/// Ordered inter-arrival-time series for one conversation, or for the
/// whole capture when conversations are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    /// `None` for a merged all-traffic series.
    pub conversation: Option<Conversation>,
    pub samples: Vec<FeatureSample>,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iats(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.iat)
    }

    /// Build a series directly from gap values (1-based indices,
    /// cumulative timestamps). Convenient for synthetic inputs.
    pub fn from_iats(iats: &[f64]) -> Self {
        let mut t = 0.0;
        let samples = iats
            .iter()
            .enumerate()
            .map(|(i, &iat)| {
                t += iat;
                FeatureSample {
                    index: i + 1,
                    iat,
                    timestamp: t,
                    record_index: i + 1,
                }
            })
            .collect();
        FeatureSeries {
            conversation: None,
            samples,
        }
    }

    /// Label each sample with the ground truth of its later packet: an
    /// inserted or shifted packet changes exactly the gap that ends at it.
    pub fn sample_labels(&self, record_labels: &[Label]) -> Vec<Label> {
        self.samples
            .iter()
            .map(|s| record_labels[s.record_index])
            .collect()
    }
}

fn series_from_group(
    conversation: Option<Conversation>,
    group: &[(usize, u64)],
) -> FeatureSeries {
    let samples = group
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (_, prev_ts) = pair[0];
            let (rec_idx, ts) = pair[1];
            FeatureSample {
                index: i + 1,
                iat: (ts - prev_ts) as f64 / 1e6,
                timestamp: ts as f64 / 1e6,
                record_index: rec_idx,
            }
        })
        .collect();
    FeatureSeries {
        conversation,
        samples,
    }
}

/// Group records by canonical conversation and difference each group's
/// merged bidirectional sequence. A conversation with a single packet
/// yields an empty series.
pub fn extract_features(records: &[PacketRecord]) -> BTreeMap<Conversation, FeatureSeries> {
    let mut groups: BTreeMap<Conversation, Vec<(usize, u64)>> = BTreeMap::new();
    for (idx, rec) in records.iter().enumerate() {
        groups
            .entry(rec.conversation())
            .or_default()
            .push((idx, rec.timestamp_us));
    }
    groups
        .into_iter()
        .map(|(conv, group)| (conv, series_from_group(Some(conv), &group)))
        .collect()
}

/// Difference the entire record stream as one series, ignoring
/// conversation boundaries. Intended for captures with a single
/// master/slave pair.
pub fn extract_merged(records: &[PacketRecord]) -> FeatureSeries {
    let group: Vec<(usize, u64)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.timestamp_us))
        .collect();
    series_from_group(None, &group)
}

/// Temporal split: the first `floor(train_fraction * n)` samples train,
/// the rest test. No shuffling.
pub fn split_series(
    series: &FeatureSeries,
    train_fraction: f64,
) -> Result<(FeatureSeries, FeatureSeries), FeatureError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::BadFraction(train_fraction));
    }
    let n = series.samples.len();
    if n < 3 {
        return Err(FeatureError::TooShortToSplit { len: n });
    }
    let cut = (train_fraction * n as f64).floor() as usize;
    let (train, test) = series.samples.split_at(cut);
    Ok((
        FeatureSeries {
            conversation: series.conversation,
            samples: train.to_vec(),
        },
        FeatureSeries {
            conversation: series.conversation,
            samples: test.to_vec(),
        },
    ))
}

/// Export a series as two-column CSV for external plotting.
pub fn write_series_csv(series: &FeatureSeries, path: &Path) -> Result<u64, FeatureError> {
    let file = File::create(path).map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "index,iat_seconds")?;
        for s in &series.samples {
            writeln!(w, "{},{}", s.index, s.iat)?;
        }
        w.flush()
    };
    emit().map_err(|e| FeatureError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(series.samples.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ApciType;
    use std::net::Ipv4Addr;

    fn record(ts_us: u64, src: (u8, u16), dst: (u8, u16)) -> PacketRecord {
        PacketRecord {
            timestamp_us: ts_us,
            src_addr: Ipv4Addr::new(10, 0, 0, src.0),
            dst_addr: Ipv4Addr::new(10, 0, 0, dst.0),
            src_port: src.1,
            dst_port: dst.1,
            apci_type: ApciType::S,
            asdu_type_id: None,
            asdu_length: 0,
        }
    }

    const MASTER: (u8, u16) = (1, 34567);
    const SLAVE: (u8, u16) = (2, 2404);
    const OTHER: (u8, u16) = (3, 2404);

    #[test]
    fn differencing_is_direct() {
        let records = vec![
            record(0, MASTER, SLAVE),
            record(1_000_000, SLAVE, MASTER),
            record(3_000_000, MASTER, SLAVE),
        ];
        let map = extract_features(&records);
        assert_eq!(map.len(), 1);
        let series = map.values().next().unwrap();
        let iats: Vec<f64> = series.iats().collect();
        assert_eq!(iats, vec![1.0, 2.0]);
        assert_eq!(series.samples[0].index, 1);
        assert_eq!(series.samples[1].index, 2);
        assert_eq!(series.samples[1].record_index, 2);
    }

    #[test]
    fn sample_count_is_packets_minus_one_per_conversation() {
        let records: Vec<PacketRecord> = (0..10)
            .map(|i| record(i * 500_000, MASTER, SLAVE))
            .collect();
        let map = extract_features(&records);
        assert_eq!(map.values().next().unwrap().len(), 9);
    }

    #[test]
    fn differencing_never_crosses_conversations() {
        // A<->B at even seconds, A<->C at odd seconds.
        let records = vec![
            record(0, MASTER, SLAVE),
            record(1_000_000, MASTER, OTHER),
            record(2_000_000, SLAVE, MASTER),
            record(3_000_000, OTHER, MASTER),
        ];
        let map = extract_features(&records);
        assert_eq!(map.len(), 2);
        for series in map.values() {
            let iats: Vec<f64> = series.iats().collect();
            assert_eq!(iats, vec![2.0]);
        }
    }

    #[test]
    fn direction_does_not_split_a_conversation() {
        let forward = record(0, MASTER, SLAVE);
        let reverse = record(1_000_000, SLAVE, MASTER);
        assert_eq!(forward.conversation(), reverse.conversation());
        let map = extract_features(&[forward, reverse]);
        assert_eq!(map.len(), 1);
    }

    #[test]
    fn zero_gaps_are_retained() {
        let records = vec![
            record(0, MASTER, SLAVE),
            record(1_000_000, SLAVE, MASTER),
            record(1_000_000, SLAVE, MASTER),
            record(2_000_000, MASTER, SLAVE),
        ];
        let series = extract_merged(&records);
        let iats: Vec<f64> = series.iats().collect();
        assert_eq!(iats, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn iats_telescope_to_the_conversation_span() {
        let timestamps: [u64; 6] = [0, 700_000, 1_500_000, 4_200_000, 4_200_000, 9_000_000];
        let records: Vec<PacketRecord> = timestamps
            .iter()
            .map(|&t| record(t, MASTER, SLAVE))
            .collect();
        let series = extract_merged(&records);
        let sum: f64 = series.iats().sum();
        let span = (timestamps[5] - timestamps[0]) as f64 / 1e6;
        assert!((sum - span).abs() < 1e-9);
    }

    #[test]
    fn equal_time_interleaving_across_conversations_is_irrelevant() {
        let a = record(5_000_000, MASTER, SLAVE);
        let b = record(5_000_000, MASTER, OTHER);
        let mut one = vec![record(0, MASTER, SLAVE), record(0, MASTER, OTHER)];
        let mut two = one.clone();
        one.extend([a.clone(), b.clone()]);
        two.extend([b, a]);
        // The timing content is identical; only the record back-pointers
        // may differ.
        let timing = |records: &[PacketRecord]| -> Vec<(Conversation, Vec<(usize, f64, f64)>)> {
            extract_features(records)
                .into_iter()
                .map(|(conv, series)| {
                    let samples = series
                        .samples
                        .iter()
                        .map(|s| (s.index, s.iat, s.timestamp))
                        .collect();
                    (conv, samples)
                })
                .collect()
        };
        assert_eq!(timing(&one), timing(&two));
    }

    #[test]
    fn empty_input_gives_empty_map() {
        assert!(extract_features(&[]).is_empty());
        assert!(extract_merged(&[]).is_empty());
    }

    #[test]
    fn split_uses_floor_arithmetic() {
        let series = FeatureSeries::from_iats(&vec![1.0; 9]);
        let (train, test) = split_series(&series, 2.0 / 3.0).unwrap();
        assert_eq!((train.len(), test.len()), (6, 3));

        let series = FeatureSeries::from_iats(&vec![1.0; 5000]);
        let (train, test) = split_series(&series, 2.0 / 3.0).unwrap();
        assert_eq!((train.len(), test.len()), (3333, 1667));
    }

    #[test]
    fn split_preserves_order() {
        let iats: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let series = FeatureSeries::from_iats(&iats);
        let (train, test) = split_series(&series, 0.5).unwrap();
        let mut joined = train.samples.clone();
        joined.extend(test.samples);
        assert_eq!(joined, series.samples);
    }

    #[test]
    fn split_rejects_tiny_series_and_bad_fractions() {
        let series = FeatureSeries::from_iats(&[1.0, 2.0]);
        assert!(matches!(
            split_series(&series, 0.5),
            Err(FeatureError::TooShortToSplit { .. })
        ));
        let ok = FeatureSeries::from_iats(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            split_series(&ok, 1.0),
            Err(FeatureError::BadFraction(_))
        ));
    }

    #[test]
    fn sample_labels_follow_the_later_record() {
        let records = vec![
            record(0, MASTER, SLAVE),
            record(1_000_000, SLAVE, MASTER),
            record(2_000_000, MASTER, SLAVE),
        ];
        let series = extract_merged(&records);
        let labels = series.sample_labels(&[Label::Normal, Label::Attack, Label::Normal]);
        assert_eq!(labels, vec![Label::Attack, Label::Normal]);
    }

    #[test]
    fn series_csv_export() {
        let series = FeatureSeries::from_iats(&[0.5, 1.25]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        assert_eq!(write_series_csv(&series, &path).unwrap(), 2);
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content, "index,iat_seconds\n1,0.5\n2,1.25\n");
    }
}
