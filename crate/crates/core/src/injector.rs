//! Synthetic IEC 104-like traffic and labeled attack effects.
//!
//! The generator produces the stable periodic polling pattern the
//! detector expects from industrial traffic; the injector applies one of
//! four timing attacks to a record stream and returns per-record ground
//! truth, so false-positive and detection rates can be measured against
//! construction rather than guesswork. Everything is seeded and
//! deterministic.

use crate::features::Label;
use crate::ingest::{ApciType, PacketRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario outside stream bounds: {0}")]
    OutOfBounds(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Epoch base for generated captures (2018-12-10T00:00:00Z).
const BASE_TIMESTAMP_US: u64 = 1_544_400_000_000_000;

const MASTER: (Ipv4Addr, u16) = (Ipv4Addr::new(10, 0, 0, 1), 40123);
const SLAVE: (Ipv4Addr, u16) = (Ipv4Addr::new(10, 0, 0, 10), 2404);

/// Interrogation command in the control direction.
const POLL_TYPE_ID: u8 = 100;
const POLL_ASDU_LEN: u16 = 10;
/// Measured value response in the monitor direction.
const REPLY_TYPE_ID: u8 = 13;
const REPLY_ASDU_LEN: u16 = 14;
/// Single command, used for inserted attack packets.
const ATTACK_TYPE_ID: u8 = 45;
const ATTACK_ASDU_LEN: u16 = 10;

/// Shape of generated normal traffic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalPattern {
    /// Mean gap between consecutive packets, seconds.
    pub period: f64,
    /// Uniform jitter as a fraction of the period, in [0, 1).
    pub jitter_fraction: f64,
    /// Number of packets to generate.
    pub count: usize,
    pub seed: u64,
}

/// Periodic master/slave exchange: directions alternate and every gap is
/// `period * (1 ± jitter)`. Deterministic for a fixed seed.
pub fn generate_normal(pattern: &NormalPattern) -> Result<Vec<PacketRecord>, InjectError> {
    if !(pattern.period > 0.0 && pattern.period.is_finite()) {
        return Err(InjectError::InvalidPattern(format!(
            "period {} must be positive",
            pattern.period
        )));
    }
    if !(0.0..1.0).contains(&pattern.jitter_fraction) {
        return Err(InjectError::InvalidPattern(format!(
            "jitter fraction {} must be in [0, 1)",
            pattern.jitter_fraction
        )));
    }
    if pattern.count < 2 {
        return Err(InjectError::InvalidPattern(format!(
            "count {} must be at least 2",
            pattern.count
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pattern.seed);
    let mut records = Vec::with_capacity(pattern.count);
    let mut ts = BASE_TIMESTAMP_US;
    for i in 0..pattern.count {
        if i > 0 {
            let jitter = if pattern.jitter_fraction == 0.0 {
                0.0
            } else {
                rng.gen_range(-pattern.jitter_fraction..=pattern.jitter_fraction)
            };
            let gap = pattern.period * (1.0 + jitter);
            ts += (gap * 1e6).round() as u64;
        }
        let master_to_slave = i % 2 == 0;
        records.push(make_record(ts, master_to_slave, i % 2 == 0));
    }
    Ok(records)
}

fn make_record(ts: u64, master_to_slave: bool, poll: bool) -> PacketRecord {
    let (src, dst) = if master_to_slave {
        (MASTER, SLAVE)
    } else {
        (SLAVE, MASTER)
    };
    let (type_id, asdu_len) = if poll {
        (POLL_TYPE_ID, POLL_ASDU_LEN)
    } else {
        (REPLY_TYPE_ID, REPLY_ASDU_LEN)
    };
    PacketRecord {
        timestamp_us: ts,
        src_addr: src.0,
        dst_addr: dst.0,
        src_port: src.1,
        dst_port: dst.1,
        apci_type: ApciType::I,
        asdu_type_id: Some(type_id),
        asdu_length: asdu_len,
    }
}

/// Attack effect applied to a record stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Burst of extra packets inside each affected interval.
    Flood,
    /// Added latency on each affected packet.
    Delay,
    /// Single foreign packets slipped in after affected packets.
    Injection,
    /// Communication gap: packets silenced for a span of seconds.
    Outage,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioKind::Flood => "flood",
            ScenarioKind::Delay => "delay",
            ScenarioKind::Injection => "injection",
            ScenarioKind::Outage => "outage",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flood" => Ok(ScenarioKind::Flood),
            "delay" => Ok(ScenarioKind::Delay),
            "injection" => Ok(ScenarioKind::Injection),
            "outage" => Ok(ScenarioKind::Outage),
            other => Err(format!("unknown scenario kind '{other}'")),
        }
    }
}

/// A labeled attack to weave into a stream.
///
/// `magnitude` is kind-specific: packets per interval for `flood`, added
/// seconds per packet for `delay`, the inserted packet's offset in
/// seconds for `injection`, and the gap length in seconds for `outage`
/// (which ignores `duration`; the gap swallows however many packets fall
/// inside it).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackScenario {
    pub kind: ScenarioKind,
    /// First affected record index.
    pub start: usize,
    /// Affected record / interval count.
    pub duration: usize,
    pub magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AttackScenario {
    pub fn validate(&self) -> Result<(), InjectError> {
        if self.duration < 1 {
            return Err(InjectError::InvalidScenario(
                "duration must be at least 1".into(),
            ));
        }
        if !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return Err(InjectError::InvalidScenario(format!(
                "magnitude {} must be positive",
                self.magnitude
            )));
        }
        if self.kind == ScenarioKind::Flood && self.magnitude.round() < 1.0 {
            return Err(InjectError::InvalidScenario(
                "flood magnitude rounds to zero packets per interval".into(),
            ));
        }
        Ok(())
    }

    /// Load a scenario from a JSON object or `key=value` lines.
    pub fn from_file(path: &Path) -> Result<Self, InjectError> {
        let raw = std::fs::read_to_string(path).map_err(|e| InjectError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let scenario = Self::from_config_str(&raw)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_config_str(raw: &str) -> Result<Self, InjectError> {
        if raw.trim_start().starts_with('{') {
            return serde_json::from_str(raw)
                .map_err(|e| InjectError::InvalidScenario(e.to_string()));
        }
        let mut kind = None;
        let mut start = None;
        let mut duration = None;
        let mut magnitude = None;
        let mut seed = 0u64;
        for line in raw.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                InjectError::InvalidScenario(format!("expected key=value, got '{line}'"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn fmt::Display| {
                InjectError::InvalidScenario(format!("{key}={value}: {e}"))
            };
            match key {
                "kind" => kind = Some(value.parse().map_err(|e: String| bad(&e))?),
                "start" => start = Some(value.parse().map_err(|e| bad(&e))?),
                "duration" => duration = Some(value.parse().map_err(|e| bad(&e))?),
                "magnitude" => magnitude = Some(value.parse().map_err(|e| bad(&e))?),
                "seed" => seed = value.parse().map_err(|e| bad(&e))?,
                other => {
                    return Err(InjectError::InvalidScenario(format!(
                        "unknown key '{other}'"
                    )))
                }
            }
        }
        let missing =
            |name: &str| InjectError::InvalidScenario(format!("missing key '{name}'"));
        Ok(AttackScenario {
            kind: kind.ok_or_else(|| missing("kind"))?,
            start: start.ok_or_else(|| missing("start"))?,
            duration: duration.ok_or_else(|| missing("duration"))?,
            magnitude: magnitude.ok_or_else(|| missing("magnitude"))?,
            seed,
        })
    }
}

/// Apply a scenario, returning the modified stream and one ground-truth
/// label per output record. Timestamps remain non-decreasing.
pub fn inject(
    records: &[PacketRecord],
    scenario: &AttackScenario,
) -> Result<(Vec<PacketRecord>, Vec<Label>), InjectError> {
    scenario.validate()?;
    let out = match scenario.kind {
        ScenarioKind::Flood => inject_flood(records, scenario)?,
        ScenarioKind::Delay => inject_delay(records, scenario)?,
        ScenarioKind::Injection => inject_single(records, scenario)?,
        ScenarioKind::Outage => inject_outage(records, scenario)?,
    };
    let (records, labels) = out;
    assert!(
        records.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us),
        "injection broke timestamp monotonicity"
    );
    Ok((records, labels))
}

fn check_range(len: usize, start: usize, need_past_end: usize, what: &str) -> Result<(), InjectError> {
    if start.checked_add(need_past_end).filter(|&end| end < len).is_none() {
        return Err(InjectError::OutOfBounds(format!(
            "{what} needs records [{start}, {}] but the stream has {len}",
            start + need_past_end
        )));
    }
    Ok(())
}

fn inject_flood(
    records: &[PacketRecord],
    scenario: &AttackScenario,
) -> Result<(Vec<PacketRecord>, Vec<Label>), InjectError> {
    // Interval j spans records[start+j] .. records[start+j+1].
    check_range(records.len(), scenario.start, scenario.duration, "flood")?;
    let per_interval = scenario.magnitude.round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut out = Vec::with_capacity(records.len() + per_interval * scenario.duration);
    let mut labels = Vec::with_capacity(out.capacity());
    for (i, rec) in records.iter().enumerate() {
        out.push(rec.clone());
        labels.push(Label::Normal);
        if i >= scenario.start && i < scenario.start + scenario.duration {
            let t0 = rec.timestamp_us;
            let t1 = records[i + 1].timestamp_us;
            let mut offsets: Vec<f64> = (0..per_interval).map(|_| rng.gen::<f64>()).collect();
            offsets.sort_by(f64::total_cmp);
            for u in offsets {
                let ts = t0 + ((t1 - t0) as f64 * u).round() as u64;
                let mut burst = attack_record(rec, ts.min(t1));
                burst.timestamp_us = burst.timestamp_us.max(t0);
                out.push(burst);
                labels.push(Label::Attack);
            }
        }
    }
    Ok((out, labels))
}

fn inject_delay(
    records: &[PacketRecord],
    scenario: &AttackScenario,
) -> Result<(Vec<PacketRecord>, Vec<Label>), InjectError> {
    if scenario.start + scenario.duration > records.len() {
        return Err(InjectError::OutOfBounds(format!(
            "delay covers records [{}, {}) but the stream has {}",
            scenario.start,
            scenario.start + scenario.duration,
            records.len()
        )));
    }
    let step_us = (scenario.magnitude * 1e6).round() as u64;
    let mut out = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let mut rec = rec.clone();
        if i >= scenario.start {
            // Latency accumulates across the affected packets and the
            // final total shifts everything after, preserving order.
            let steps = (i - scenario.start + 1).min(scenario.duration) as u64;
            rec.timestamp_us += step_us * steps;
        }
        let affected = i >= scenario.start && i < scenario.start + scenario.duration;
        labels.push(if affected { Label::Attack } else { Label::Normal });
        out.push(rec);
    }
    Ok((out, labels))
}

fn inject_single(
    records: &[PacketRecord],
    scenario: &AttackScenario,
) -> Result<(Vec<PacketRecord>, Vec<Label>), InjectError> {
    check_range(records.len(), scenario.start, scenario.duration, "injection")?;
    let offset_us = (scenario.magnitude * 1e6).round() as u64;
    let mut out = Vec::with_capacity(records.len() + scenario.duration);
    let mut labels = Vec::with_capacity(out.capacity());
    for (i, rec) in records.iter().enumerate() {
        out.push(rec.clone());
        labels.push(Label::Normal);
        if i >= scenario.start && i < scenario.start + scenario.duration {
            let ts = rec.timestamp_us + offset_us;
            if ts > records[i + 1].timestamp_us {
                return Err(InjectError::OutOfBounds(format!(
                    "injection offset {}s overshoots the gap after record {i}",
                    scenario.magnitude
                )));
            }
            out.push(attack_record(rec, ts));
            labels.push(Label::Attack);
        }
    }
    Ok((out, labels))
}

fn inject_outage(
    records: &[PacketRecord],
    scenario: &AttackScenario,
) -> Result<(Vec<PacketRecord>, Vec<Label>), InjectError> {
    if scenario.start >= records.len() {
        return Err(InjectError::OutOfBounds(format!(
            "outage starts at {} but the stream has {}",
            scenario.start,
            records.len()
        )));
    }
    let gap_us = (scenario.magnitude * 1e6).round() as u64;
    let gap_end = records[scenario.start].timestamp_us + gap_us;
    let survivor = records[scenario.start..]
        .iter()
        .position(|r| r.timestamp_us >= gap_end)
        .map(|p| p + scenario.start)
        .ok_or_else(|| {
            InjectError::OutOfBounds(format!(
                "outage of {}s runs past the end of the stream",
                scenario.magnitude
            ))
        })?;
    let mut out = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if i >= scenario.start && i < survivor {
            continue; // silenced
        }
        out.push(rec.clone());
        // The packet that ends the gap is the observable evidence.
        labels.push(if i == survivor {
            Label::Attack
        } else {
            Label::Normal
        });
    }
    Ok((out, labels))
}

/// An inserted packet: same conversation and direction as its anchor so
/// it lands in the same feature series, but a command-type ASDU.
fn attack_record(anchor: &PacketRecord, ts: u64) -> PacketRecord {
    PacketRecord {
        timestamp_us: ts,
        src_addr: anchor.src_addr,
        dst_addr: anchor.dst_addr,
        src_port: anchor.src_port,
        dst_port: anchor.dst_port,
        apci_type: ApciType::I,
        asdu_type_id: Some(ATTACK_TYPE_ID),
        asdu_length: ATTACK_ASDU_LEN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_merged;

    fn pattern(count: usize, jitter: f64) -> NormalPattern {
        NormalPattern {
            period: 1.0,
            jitter_fraction: jitter,
            count,
            seed: 42,
        }
    }

    #[test]
    fn zero_jitter_gives_exact_gaps() {
        let records = generate_normal(&pattern(100, 0.0)).unwrap();
        assert_eq!(records.len(), 100);
        let series = extract_merged(&records);
        assert_eq!(series.len(), 99);
        assert!(series.iats().all(|iat| iat == 1.0));
    }

    #[test]
    fn jitter_stays_within_bounds() {
        let records = generate_normal(&pattern(10_000, 0.01)).unwrap();
        let series = extract_merged(&records);
        assert!(series.iats().all(|iat| (0.99..=1.01).contains(&iat)));
    }

    #[test]
    fn same_seed_same_stream() {
        let a = generate_normal(&pattern(500, 0.05)).unwrap();
        let b = generate_normal(&pattern(500, 0.05)).unwrap();
        assert_eq!(a, b);
        let mut p = pattern(500, 0.05);
        p.seed = 43;
        assert_ne!(generate_normal(&p).unwrap(), a);
    }

    #[test]
    fn directions_alternate() {
        let records = generate_normal(&pattern(4, 0.0)).unwrap();
        assert_eq!(records[0].dst_port, 2404);
        assert_eq!(records[1].src_port, 2404);
        assert_eq!(records[0].conversation(), records[1].conversation());
        for r in &records {
            assert!(r.validate().is_ok());
        }
    }

    #[test]
    fn invalid_patterns_are_rejected() {
        assert!(generate_normal(&NormalPattern {
            period: 0.0,
            ..pattern(10, 0.0)
        })
        .is_err());
        assert!(generate_normal(&pattern(1, 0.0)).is_err());
        assert!(generate_normal(&pattern(10, 1.0)).is_err());
    }

    fn scenario(kind: ScenarioKind, start: usize, duration: usize, magnitude: f64) -> AttackScenario {
        AttackScenario {
            kind,
            start,
            duration,
            magnitude,
            seed: 7,
        }
    }

    #[test]
    fn outage_leaves_a_single_wide_gap() {
        let records = generate_normal(&pattern(1000, 0.0)).unwrap();
        let (out, labels) =
            inject(&records, &scenario(ScenarioKind::Outage, 400, 1, 300.0)).unwrap();
        let series = extract_merged(&out);
        let wide: Vec<f64> = series.iats().filter(|&iat| iat > 2.0).collect();
        assert_eq!(wide.len(), 1);
        assert!((wide[0] - 300.0).abs() <= 1.0);
        assert_eq!(labels.iter().filter(|&&l| l == Label::Attack).count(), 1);
        assert_eq!(out.len(), records.len() - 300);
    }

    #[test]
    fn flood_inserts_the_advertised_burst() {
        let records = generate_normal(&pattern(2000, 0.0)).unwrap();
        let (out, labels) =
            inject(&records, &scenario(ScenarioKind::Flood, 500, 10, 50.0)).unwrap();
        let attacks = labels.iter().filter(|&&l| l == Label::Attack).count();
        assert!(attacks >= 490, "only {attacks} attack records");
        assert_eq!(out.len(), records.len() + attacks);
    }

    #[test]
    fn labels_partition_the_output() {
        let records = generate_normal(&pattern(2000, 0.0)).unwrap();
        let (out, labels) =
            inject(&records, &scenario(ScenarioKind::Flood, 500, 10, 50.0)).unwrap();
        assert_eq!(out.len(), labels.len());
        let attack = labels.iter().filter(|&&l| l == Label::Attack).count();
        let normal = labels.iter().filter(|&&l| l == Label::Normal).count();
        assert_eq!(attack + normal, out.len());
    }

    #[test]
    fn delay_adds_latency_to_each_affected_gap() {
        let records = generate_normal(&pattern(100, 0.0)).unwrap();
        let (out, labels) =
            inject(&records, &scenario(ScenarioKind::Delay, 40, 20, 30.0)).unwrap();
        assert_eq!(out.len(), records.len());
        let series = extract_merged(&out);
        let iats: Vec<f64> = series.iats().collect();
        for (i, &iat) in iats.iter().enumerate() {
            // Sample i is the gap ending at record i+1.
            let expect_big = (40..60).contains(&(i + 1));
            assert_eq!(expect_big, iat > 30.0, "sample {i}: iat {iat}");
        }
        assert_eq!(labels.iter().filter(|&&l| l == Label::Attack).count(), 20);
    }

    #[test]
    fn injection_inserts_small_gaps() {
        let records = generate_normal(&pattern(100, 0.0)).unwrap();
        let (out, labels) =
            inject(&records, &scenario(ScenarioKind::Injection, 50, 5, 0.05)).unwrap();
        assert_eq!(out.len(), 105);
        let series = extract_merged(&out);
        let small = series.iats().filter(|&iat| iat < 0.5).count();
        assert_eq!(small, 5);
        assert_eq!(labels.iter().filter(|&&l| l == Label::Attack).count(), 5);
    }

    #[test]
    fn injection_never_reorders() {
        let records = generate_normal(&pattern(50, 0.0)).unwrap();
        // Offset larger than the period would land past the next packet.
        assert!(matches!(
            inject(&records, &scenario(ScenarioKind::Injection, 10, 1, 2.0)),
            Err(InjectError::OutOfBounds(_))
        ));
    }

    #[test]
    fn inject_is_never_the_identity() {
        let records = generate_normal(&pattern(200, 0.0)).unwrap();
        for kind in [
            ScenarioKind::Flood,
            ScenarioKind::Delay,
            ScenarioKind::Injection,
            ScenarioKind::Outage,
        ] {
            let magnitude = match kind {
                ScenarioKind::Flood => 2.0,
                ScenarioKind::Delay => 5.0,
                ScenarioKind::Injection => 0.25,
                ScenarioKind::Outage => 10.0,
            };
            let (out, _) = inject(&records, &scenario(kind, 50, 3, magnitude)).unwrap();
            assert_ne!(out, records, "{kind} left the stream unchanged");
        }
    }

    #[test]
    fn out_of_bounds_scenarios_error() {
        let records = generate_normal(&pattern(100, 0.0)).unwrap();
        assert!(inject(&records, &scenario(ScenarioKind::Flood, 95, 10, 5.0)).is_err());
        assert!(inject(&records, &scenario(ScenarioKind::Delay, 95, 10, 5.0)).is_err());
        assert!(inject(&records, &scenario(ScenarioKind::Outage, 50, 1, 1e6)).is_err());
        assert!(inject(&records, &scenario(ScenarioKind::Outage, 100, 1, 5.0)).is_err());
    }

    #[test]
    fn zero_magnitude_and_zero_duration_are_rejected() {
        let records = generate_normal(&pattern(100, 0.0)).unwrap();
        assert!(inject(&records, &scenario(ScenarioKind::Delay, 10, 0, 5.0)).is_err());
        assert!(inject(&records, &scenario(ScenarioKind::Delay, 10, 5, 0.0)).is_err());
        assert!(inject(&records, &scenario(ScenarioKind::Flood, 10, 5, 0.2)).is_err());
    }

    #[test]
    fn timestamps_stay_sorted_across_scenarios() {
        let records = generate_normal(&pattern(3000, 0.02)).unwrap();
        for (kind, magnitude) in [
            (ScenarioKind::Flood, 50.0),
            (ScenarioKind::Delay, 30.0),
            (ScenarioKind::Injection, 0.05),
            (ScenarioKind::Outage, 120.0),
        ] {
            let (out, _) = inject(&records, &scenario(kind, 1000, 10, magnitude)).unwrap();
            assert!(out.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us));
        }
    }

    #[test]
    fn scenario_files_parse_in_both_formats() {
        let kv = "# flood burst\nkind=flood\nstart=12000\nduration=10\nmagnitude=50\nseed=7\n";
        let a = AttackScenario::from_config_str(kv).unwrap();
        assert_eq!(a.kind, ScenarioKind::Flood);
        assert_eq!((a.start, a.duration), (12000, 10));
        let json = r#"{"kind":"flood","start":12000,"duration":10,"magnitude":50.0,"seed":7}"#;
        let b = AttackScenario::from_config_str(json).unwrap();
        assert_eq!((b.start, b.duration, b.magnitude), (a.start, a.duration, a.magnitude));
        assert!(AttackScenario::from_config_str("kind=flood\nstart=1\n").is_err());
        assert!(AttackScenario::from_config_str("kind=meteor\nstart=1\nduration=1\nmagnitude=1\n").is_err());
    }
}
