//! The record CSV dialect.
//!
//! Header row is mandatory; columns may appear in any order and are
//! matched by name. Required columns: `timestamp` (decimal seconds),
//! `src_addr`, `dst_addr`, `src_port`, `dst_port`, `apci_type` (I/S/U),
//! `asdu_type_id` (empty for S/U frames), `asdu_length`. An optional
//! `label` column (`normal`/`attack`) carries injector ground truth.
//! Lines starting with `#` are metadata comments and are ignored; fields
//! never contain commas, so nothing is quoted. Line ending is LF.

use super::{IngestError, PacketRecord};
use crate::features::Label;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const REQUIRED_COLUMNS: [&str; 8] = [
    "timestamp",
    "src_addr",
    "dst_addr",
    "src_port",
    "dst_port",
    "apci_type",
    "asdu_type_id",
    "asdu_length",
];

/// A row timestamp may precede the previous row by up to this much
/// (capture clock jitter) and is clamped forward; anything worse means
/// the extract is corrupt.
const REGRESSION_TOLERANCE_US: u64 = 1_000_000;

/// Counters from one CSV parse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvStats {
    /// Data rows accepted.
    pub rows: u64,
    /// Rows dropped: wrong field count, unparseable values, or records
    /// violating the I/S/U invariants.
    pub skipped: u64,
    /// Rows whose timestamp was clamped forward to stay non-decreasing.
    pub clamped: u64,
}

impl CsvStats {
    pub fn warnings(&self) -> u64 {
        self.skipped + self.clamped
    }
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parse a record CSV, ignoring any label column.
pub fn parse_csv(path: &Path) -> Result<(Vec<PacketRecord>, CsvStats), IngestError> {
    let (records, _, stats) = parse_csv_with_labels(path)?;
    Ok((records, stats))
}

/// Parse a record CSV; the labels are `Some` exactly when the file has a
/// `label` column, and then align one-to-one with the records.
pub fn parse_csv_with_labels(
    path: &Path,
) -> Result<(Vec<PacketRecord>, Option<Vec<Label>>, CsvStats), IngestError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let display = path.display().to_string();

    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| io_err(path, e))?;
                if line.starts_with('#') || line.trim().is_empty() {
                    continue;
                }
                break line;
            }
            None => {
                return Err(IngestError::Format {
                    path: display,
                    reason: "empty file: header row is required".into(),
                })
            }
        }
    };
    let columns: Vec<&str> = header.trim_end().split(',').collect();
    let col = |name: &str| columns.iter().position(|c| *c == name);
    let mut required = [0usize; 8];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = col(name).ok_or_else(|| IngestError::MissingColumn {
            path: display.clone(),
            column: name.into(),
        })?;
    }
    let [ts_col, src_addr_col, dst_addr_col, src_port_col, dst_port_col, type_col, type_id_col, len_col] =
        required;
    let label_col = col("label");

    let mut records = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    let mut stats = CsvStats::default();
    let mut prev_ts: Option<u64> = None;

    for (idx, line) in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\n');
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            stats.skipped += 1;
            continue;
        }
        let parsed = parse_row(
            &fields, ts_col, src_addr_col, dst_addr_col, src_port_col, dst_port_col, type_col,
            type_id_col, len_col,
        );
        let mut record = match parsed {
            Some(r) => r,
            None => {
                stats.skipped += 1;
                continue;
            }
        };
        let label = match label_col {
            Some(c) => match fields[c] {
                "normal" => Some(Label::Normal),
                "attack" => Some(Label::Attack),
                _ => {
                    stats.skipped += 1;
                    continue;
                }
            },
            None => None,
        };
        if let Some(prev) = prev_ts {
            if record.timestamp_us < prev {
                let regression = prev - record.timestamp_us;
                if regression > REGRESSION_TOLERANCE_US {
                    return Err(IngestError::TimestampRegression {
                        path: display,
                        line: idx + 1,
                        regression: regression as f64 / 1e6,
                    });
                }
                record.timestamp_us = prev;
                stats.clamped += 1;
            }
        }
        prev_ts = Some(record.timestamp_us);
        stats.rows += 1;
        records.push(record);
        if let (Some(labels), Some(label)) = (labels.as_mut(), label) {
            labels.push(label);
        }
    }
    Ok((records, labels, stats))
}

#[allow(clippy::too_many_arguments)]
fn parse_row(
    fields: &[&str],
    ts_col: usize,
    src_addr_col: usize,
    dst_addr_col: usize,
    src_port_col: usize,
    dst_port_col: usize,
    type_col: usize,
    type_id_col: usize,
    len_col: usize,
) -> Option<PacketRecord> {
    let record = PacketRecord {
        timestamp_us: parse_decimal_seconds(fields[ts_col])?,
        src_addr: fields[src_addr_col].parse().ok()?,
        dst_addr: fields[dst_addr_col].parse().ok()?,
        src_port: fields[src_port_col].parse().ok()?,
        dst_port: fields[dst_port_col].parse().ok()?,
        apci_type: fields[type_col].parse().ok()?,
        asdu_type_id: match fields[type_id_col] {
            "" => None,
            v => Some(v.parse().ok()?),
        },
        asdu_length: fields[len_col].parse().ok()?,
    };
    record.validate().ok()?;
    Some(record)
}

/// Decimal seconds to microseconds, truncating digits past the sixth.
fn parse_decimal_seconds(s: &str) -> Option<u64> {
    let (secs, frac) = match s.split_once('.') {
        Some((secs, frac)) => (secs, frac),
        None => (s, ""),
    };
    if secs.is_empty() || !secs.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: u64 = secs.parse().ok()?;
    let mut micros = 0u64;
    for i in 0..6 {
        let digit = frac.as_bytes().get(i).map_or(0, |b| (b - b'0') as u64);
        micros = micros * 10 + digit;
    }
    secs.checked_mul(1_000_000)?.checked_add(micros)
}

fn format_timestamp(us: u64) -> String {
    format!("{}.{:06}", us / 1_000_000, us % 1_000_000)
}

fn write_rows(
    path: &Path,
    metadata: Option<&str>,
    labeled: Option<&[Label]>,
    records: &[PacketRecord],
) -> Result<u64, IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<u64> {
        if let Some(meta) = metadata {
            writeln!(w, "# {meta}")?;
        }
        write!(w, "{}", REQUIRED_COLUMNS.join(","))?;
        if labeled.is_some() {
            write!(w, ",label")?;
        }
        writeln!(w)?;
        for (i, r) in records.iter().enumerate() {
            let type_id = r.asdu_type_id.map_or(String::new(), |t| t.to_string());
            write!(
                w,
                "{},{},{},{},{},{},{},{}",
                format_timestamp(r.timestamp_us),
                r.src_addr,
                r.dst_addr,
                r.src_port,
                r.dst_port,
                r.apci_type,
                type_id,
                r.asdu_length
            )?;
            if let Some(labels) = labeled {
                write!(w, ",{}", labels[i])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(records.len() as u64)
    };
    emit().map_err(|e| IngestError::Io {
        path: format!("{} (partial file left behind)", path.display()),
        source: e,
    })
}

/// Write records in the dialect accepted by [`parse_csv`]. Returns the
/// number of data rows written.
pub fn write_csv(records: &[PacketRecord], path: &Path) -> Result<u64, IngestError> {
    write_rows(path, None, None, records)
}

/// [`write_csv`] with a leading `# ...` metadata comment.
pub fn write_csv_with_metadata(
    records: &[PacketRecord],
    path: &Path,
    metadata: &str,
) -> Result<u64, IngestError> {
    write_rows(path, Some(metadata), None, records)
}

/// Write records plus their ground-truth label column.
pub fn write_labeled_csv(
    records: &[PacketRecord],
    labels: &[Label],
    path: &Path,
    metadata: Option<&str>,
) -> Result<u64, IngestError> {
    assert_eq!(records.len(), labels.len());
    write_rows(path, metadata, Some(labels), records)
}
