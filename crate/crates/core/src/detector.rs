//! Windowed LOF detection over an inter-arrival-time series.
//!
//! Two modes: `BatchPerWindow` fits a fresh model on each tumbling
//! window and judges every sample by its own LOF score, which works
//! without any clean training data; `TrainThenScore` learns models from
//! the leading fraction of the series and scores the remainder
//! out-of-sample, which is the held-out validation protocol. Both are
//! deterministic for a fixed input and configuration.

use crate::features::{split_series, FeatureError, FeatureSeries, Label};
use crate::lof::{self, LofError, LofModel, Point};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_WINDOW_SIZE: usize = 5000;
pub const DEFAULT_K: usize = 20;
pub const DEFAULT_TRAIN_FRACTION: f64 = 2.0 / 3.0;
/// Percentile used when the threshold is learned from training scores.
pub const DEFAULT_AUTO_PERCENTILE: f64 = 99.9;
/// A learned threshold never sinks to 1.0 or below; duplicate-heavy
/// windows would otherwise flag every ordinary sample.
const MIN_AUTO_THRESHOLD: f64 = 1.0 + 1e-6;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("series has {len} samples; need at least {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error("training part has {len} samples; need at least {min} (raise the train fraction or supply more data)")]
    TrainTooShort { len: usize, min: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Lof(#[from] LofError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// How the decision boundary is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Use this score boundary as given.
    Fixed(f64),
    /// Use the given percentile of the training LOF scores.
    AutoPercentile(f64),
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Fixed(t) => write!(f, "fixed({t})"),
            ThresholdPolicy::AutoPercentile(p) => write!(f, "auto(p{p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    BatchPerWindow,
    TrainThenScore,
}

impl fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionMode::BatchPerWindow => write!(f, "batch-per-window"),
            DetectionMode::TrainThenScore => write!(f, "train-then-score"),
        }
    }
}

/// Detection configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub k: usize,
    pub threshold: ThresholdPolicy,
    pub mode: DetectionMode,
    /// Leading fraction used for training in `TrainThenScore` mode.
    pub train_fraction: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_size: DEFAULT_WINDOW_SIZE,
            k: DEFAULT_K,
            threshold: ThresholdPolicy::Fixed(lof::DEFAULT_THRESHOLD),
            mode: DetectionMode::BatchPerWindow,
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.k < 1 {
            return Err(DetectorError::InvalidConfig("k must be at least 1".into()));
        }
        if self.window_size <= self.k + 1 {
            return Err(DetectorError::InvalidConfig(format!(
                "window size {} must exceed k + 1 = {}",
                self.window_size,
                self.k + 1
            )));
        }
        match self.threshold {
            ThresholdPolicy::Fixed(t) => {
                if !(t > 1.0 && t.is_finite()) {
                    return Err(DetectorError::InvalidConfig(format!(
                        "threshold {t} must be a finite number above 1"
                    )));
                }
            }
            ThresholdPolicy::AutoPercentile(p) => {
                if !(p > 0.0 && p <= 100.0) {
                    return Err(DetectorError::InvalidConfig(format!(
                        "percentile {p} must be in (0, 100]"
                    )));
                }
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DetectorError::InvalidConfig(format!(
                "train fraction {} must be in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Inlier,
    Outlier,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Inlier => write!(f, "inlier"),
            Verdict::Outlier => write!(f, "outlier"),
        }
    }
}

/// Per-sample outcome. `sample_index` is the 1-based series index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleVerdict {
    pub sample_index: usize,
    pub window_id: usize,
    pub score: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub total: usize,
    pub outliers: usize,
    pub windows: usize,
    pub window_sizes: Vec<usize>,
    pub per_window_outliers: Vec<usize>,
    /// Resolved decision thresholds: one per window in batch mode, a
    /// single pooled value in train-then-score mode.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub config: WindowConfig,
    pub summary: ReportSummary,
    pub entries: Vec<SampleVerdict>,
}

impl DetectionReport {
    pub fn outlier_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.verdict == Verdict::Outlier)
            .map(|e| e.sample_index)
            .collect()
    }
}

/// Tumbling-window partition of `0..n`. A final fragment of `k + 1`
/// samples or fewer cannot stand as its own window and merges backwards,
/// so every sample lands in exactly one window.
pub fn window_spans(n: usize, window_size: usize, k: usize) -> Vec<Range<usize>> {
    let mut spans: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + window_size).min(n);
        spans.push(start..end);
        start = end;
    }
    if spans.len() > 1 {
        let last = spans.last().unwrap().clone();
        if last.len() <= k + 1 {
            spans.pop();
            spans.last_mut().unwrap().end = last.end;
        }
    }
    spans
}

/// Nearest-rank percentile of an unsorted slice.
fn percentile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Decision boundary for a window, given the policy and the training
/// scores the window produced.
pub fn resolve_threshold(policy: ThresholdPolicy, training_scores: &[f64]) -> f64 {
    match policy {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::AutoPercentile(p) => {
            percentile(training_scores, p).max(MIN_AUTO_THRESHOLD)
        }
    }
}

fn window_points(series: &FeatureSeries, span: &Range<usize>) -> Vec<Point> {
    series.samples[span.clone()]
        .iter()
        .enumerate()
        .map(|(j, s)| Point::scalar(j, s.iat))
        .collect()
}

/// Run detection over the series according to `cfg.mode`.
pub fn detect_windowed(
    series: &FeatureSeries,
    cfg: &WindowConfig,
) -> Result<DetectionReport, DetectorError> {
    cfg.validate()?;
    let n = series.len();
    if n < cfg.k + 2 {
        return Err(DetectorError::SeriesTooShort {
            len: n,
            min: cfg.k + 2,
        });
    }
    match cfg.mode {
        DetectionMode::BatchPerWindow => detect_batch(series, cfg),
        DetectionMode::TrainThenScore => detect_train_then_score(series, cfg),
    }
}

fn detect_batch(
    series: &FeatureSeries,
    cfg: &WindowConfig,
) -> Result<DetectionReport, DetectorError> {
    let spans = window_spans(series.len(), cfg.window_size, cfg.k);
    let per_window: Vec<(Vec<SampleVerdict>, f64)> = spans
        .par_iter()
        .enumerate()
        .map(|(wid, span)| -> Result<_, DetectorError> {
            let model = lof::fit(&window_points(series, span), cfg.k)?;
            let threshold = resolve_threshold(cfg.threshold, model.lof_scores());
            let entries = span
                .clone()
                .zip(model.lof_scores())
                .map(|(pos, &score)| SampleVerdict {
                    sample_index: series.samples[pos].index,
                    window_id: wid,
                    score,
                    verdict: verdict(score, threshold),
                })
                .collect();
            Ok((entries, threshold))
        })
        .collect::<Result<_, _>>()?;

    let thresholds: Vec<f64> = per_window.iter().map(|(_, t)| *t).collect();
    let entries: Vec<SampleVerdict> = per_window.into_iter().flat_map(|(e, _)| e).collect();
    Ok(assemble_report(
        cfg,
        spans.iter().map(|s| s.len()).collect(),
        thresholds,
        entries,
    ))
}

fn detect_train_then_score(
    series: &FeatureSeries,
    cfg: &WindowConfig,
) -> Result<DetectionReport, DetectorError> {
    let (train, test) = split_series(series, cfg.train_fraction)?;
    if train.len() < cfg.k + 2 {
        return Err(DetectorError::TrainTooShort {
            len: train.len(),
            min: cfg.k + 2,
        });
    }
    let spans = window_spans(train.len(), cfg.window_size, cfg.k);
    let models: Vec<LofModel> = spans
        .par_iter()
        .map(|span| lof::fit(&window_points(&train, span), cfg.k))
        .collect::<Result<_, _>>()?;

    // One pooled threshold across all training windows.
    let pooled: Vec<f64> = models
        .iter()
        .flat_map(|m| m.lof_scores().iter().copied())
        .collect();
    let threshold = resolve_threshold(cfg.threshold, &pooled);

    // A test sample conforms to the learned profile if any training
    // window accepts it: keep the minimum score across windows.
    let entries: Vec<SampleVerdict> = test
        .samples
        .par_iter()
        .map(|sample| -> Result<SampleVerdict, DetectorError> {
            let q = Point::scalar(0, sample.iat);
            let mut best = f64::INFINITY;
            let mut best_window = 0;
            for (wid, model) in models.iter().enumerate() {
                let s = model.score(&q)?;
                if s < best {
                    best = s;
                    best_window = wid;
                }
            }
            Ok(SampleVerdict {
                sample_index: sample.index,
                window_id: best_window,
                score: best,
                verdict: verdict(best, threshold),
            })
        })
        .collect::<Result<_, _>>()?;

    Ok(assemble_report(
        cfg,
        spans.iter().map(|s| s.len()).collect(),
        vec![threshold],
        entries,
    ))
}

fn verdict(score: f64, threshold: f64) -> Verdict {
    // Strict inequality: a score exactly on the boundary stays an inlier.
    if score > threshold {
        Verdict::Outlier
    } else {
        Verdict::Inlier
    }
}

fn assemble_report(
    cfg: &WindowConfig,
    window_sizes: Vec<usize>,
    thresholds: Vec<f64>,
    entries: Vec<SampleVerdict>,
) -> DetectionReport {
    let windows = window_sizes.len();
    let mut per_window_outliers = vec![0usize; windows];
    let mut outliers = 0;
    for e in &entries {
        if e.verdict == Verdict::Outlier {
            outliers += 1;
            per_window_outliers[e.window_id] += 1;
        }
    }
    DetectionReport {
        config: *cfg,
        summary: ReportSummary {
            total: entries.len(),
            outliers,
            windows,
            window_sizes,
            per_window_outliers,
            thresholds,
        },
        entries,
    }
}

/// Validation outcome: false positives against held-out data, plus
/// detection figures when ground truth is available.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub train_samples: usize,
    pub test_samples: usize,
    pub false_positives: usize,
    pub fp_rate: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected_attacks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub summary: ValidationSummary,
    pub report: DetectionReport,
}

/// Train on the leading fraction, score the rest, and count mistakes.
///
/// `labels`, when given, must align one-to-one with the series samples;
/// test samples labeled `Attack` feed the detection rate, the rest feed
/// the false-positive count. Without labels every test sample is assumed
/// normal, which is the attack-free validation protocol.
pub fn validate(
    series: &FeatureSeries,
    cfg: &WindowConfig,
    train_fraction: f64,
    labels: Option<&[Label]>,
) -> Result<ValidationReport, DetectorError> {
    if let Some(labels) = labels {
        if labels.len() != series.len() {
            return Err(DetectorError::InvalidConfig(format!(
                "{} labels for {} samples",
                labels.len(),
                series.len()
            )));
        }
    }
    let cfg = WindowConfig {
        mode: DetectionMode::TrainThenScore,
        train_fraction,
        ..*cfg
    };
    let report = detect_windowed(series, &cfg)?;
    let test_samples = report.entries.len();
    let train_samples = series.len() - test_samples;

    let label_of = |e: &SampleVerdict| {
        labels.map_or(Label::Normal, |ls| ls[e.sample_index - 1])
    };
    let false_positives = report
        .entries
        .iter()
        .filter(|e| e.verdict == Verdict::Outlier && label_of(e) == Label::Normal)
        .count();
    let normal_total = report
        .entries
        .iter()
        .filter(|e| label_of(e) == Label::Normal)
        .count();
    let fp_rate = if normal_total == 0 {
        0.0
    } else {
        false_positives as f64 / normal_total as f64
    };
    let (attack_samples, detected_attacks, detection_rate) = match labels {
        None => (None, None, None),
        Some(_) => {
            let total = test_samples - normal_total;
            let detected = report
                .entries
                .iter()
                .filter(|e| e.verdict == Verdict::Outlier && label_of(e) == Label::Attack)
                .count();
            let rate = if total == 0 {
                None
            } else {
                Some(detected as f64 / total as f64)
            };
            (Some(total), Some(detected), rate)
        }
    };
    Ok(ValidationReport {
        summary: ValidationSummary {
            train_samples,
            test_samples,
            false_positives,
            fp_rate,
            threshold: report.summary.thresholds[0],
            attack_samples,
            detected_attacks,
            detection_rate,
        },
        report,
    })
}

/// Write plot-ready CSV: one row per reported sample, in sample order.
pub fn emit_plot_data(
    report: &DetectionReport,
    series: &FeatureSeries,
    path: &Path,
) -> Result<u64, DetectorError> {
    let file = File::create(path).map_err(|e| DetectorError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "sample_index,iat_seconds,score,verdict")?;
        for e in &report.entries {
            let sample = &series.samples[e.sample_index - 1];
            writeln!(w, "{},{},{},{}", e.sample_index, sample.iat, e.score, e.verdict)?;
        }
        w.flush()
    };
    emit().map_err(|e| DetectorError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(report.entries.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSeries;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn jittered_series(n: usize, seed: u64) -> FeatureSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let iats: Vec<f64> = (0..n).map(|_| rng.gen_range(0.99..=1.01)).collect();
        FeatureSeries::from_iats(&iats)
    }

    fn cfg(window: usize, k: usize, threshold: f64) -> WindowConfig {
        WindowConfig {
            window_size: window,
            k,
            threshold: ThresholdPolicy::Fixed(threshold),
            ..WindowConfig::default()
        }
    }

    #[test]
    fn partition_matches_block_size() {
        let sizes: Vec<usize> = window_spans(12_000, 5000, 20).iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![5000, 5000, 2000]);
    }

    #[test]
    fn tiny_tail_merges_backwards() {
        let spans = window_spans(10_010, 5000, 20);
        let sizes: Vec<usize> = spans.iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![5000, 5010]);
        assert_eq!(spans.last().unwrap().end, 10_010);
    }

    #[test]
    fn short_series_is_one_window() {
        let sizes: Vec<usize> = window_spans(300, 5000, 20).iter().map(|s| s.len()).collect();
        assert_eq!(sizes, vec![300]);
    }

    #[test]
    fn every_position_lands_in_exactly_one_window() {
        for n in [23, 5000, 5021, 5022, 9999, 15000] {
            let spans = window_spans(n, 5000, 20);
            let mut covered = 0;
            for (i, span) in spans.iter().enumerate() {
                assert_eq!(span.start, covered, "n={n} window {i}");
                covered = span.end;
            }
            assert_eq!(covered, n, "n={n}");
        }
    }

    #[test]
    fn uniform_series_has_no_outliers() {
        let series = jittered_series(6000, 1);
        let report = detect_windowed(&series, &cfg(5000, 20, 1.5)).unwrap();
        assert_eq!(report.summary.outliers, 0);
        assert_eq!(report.summary.total, 6000);
    }

    #[test]
    fn implanted_wide_gaps_are_flagged_exactly() {
        let mut series = jittered_series(5000, 2);
        let implanted: Vec<usize> = (0..10).map(|i| 1000 + i * 137).collect();
        for &pos in &implanted {
            series.samples[pos].iat = 60.0;
        }
        let report = detect_windowed(&series, &cfg(5000, 20, 1.5)).unwrap();
        let flagged: Vec<usize> = report.outlier_indices().iter().map(|i| i - 1).collect();
        assert_eq!(flagged, implanted);
    }

    #[test]
    fn verdicts_are_consistent_with_scores() {
        let series = jittered_series(4000, 3);
        let report = detect_windowed(&series, &cfg(1000, 10, 1.2)).unwrap();
        for e in &report.entries {
            assert_eq!(e.verdict == Verdict::Outlier, e.score > 1.2);
        }
        let recount = report
            .entries
            .iter()
            .filter(|e| e.verdict == Verdict::Outlier)
            .count();
        assert_eq!(recount, report.summary.outliers);
    }

    #[test]
    fn raising_the_threshold_never_adds_outliers() {
        let mut series = jittered_series(3000, 4);
        for i in (100..3000).step_by(290) {
            series.samples[i].iat = 5.0;
        }
        let mut previous = usize::MAX;
        for threshold in [1.1, 1.5, 2.0, 4.0, 8.0] {
            let report = detect_windowed(&series, &cfg(1000, 10, threshold)).unwrap();
            assert!(report.summary.outliers <= previous, "threshold {threshold}");
            previous = report.summary.outliers;
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let series = jittered_series(7000, 5);
        let a = detect_windowed(&series, &cfg(2000, 15, 1.4)).unwrap();
        let b = detect_windowed(&series, &cfg(2000, 15, 1.4)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn too_short_series_errors() {
        let series = jittered_series(20, 6);
        assert!(matches!(
            detect_windowed(&series, &cfg(5000, 20, 1.5)),
            Err(DetectorError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn config_validation_catches_inconsistency() {
        assert!(cfg(21, 20, 1.5).validate().is_err());
        assert!(cfg(5000, 20, 1.0).validate().is_err());
        assert!(cfg(5000, 0, 1.5).validate().is_err());
        let auto = WindowConfig {
            threshold: ThresholdPolicy::AutoPercentile(0.0),
            ..WindowConfig::default()
        };
        assert!(auto.validate().is_err());
    }

    #[test]
    fn auto_threshold_follows_training_scores() {
        let series = jittered_series(3000, 7);
        let auto = WindowConfig {
            window_size: 1000,
            k: 10,
            threshold: ThresholdPolicy::AutoPercentile(99.9),
            ..WindowConfig::default()
        };
        let report = detect_windowed(&series, &auto).unwrap();
        assert_eq!(report.summary.thresholds.len(), 3);
        for &t in &report.summary.thresholds {
            assert!(t > 1.0);
        }
    }

    #[test]
    fn validation_on_clean_series_has_no_false_positives() {
        let series = jittered_series(15_000, 8);
        let result = validate(&series, &cfg(5000, 20, 1.5), 2.0 / 3.0, None).unwrap();
        assert_eq!(result.summary.false_positives, 0);
        assert_eq!(result.summary.fp_rate, 0.0);
        assert_eq!(result.summary.train_samples, 10_000);
        assert_eq!(result.summary.test_samples, 5_000);
        assert!(result.summary.detection_rate.is_none());
    }

    #[test]
    fn validation_flags_implanted_attacks() {
        let mut series = jittered_series(9000, 9);
        let mut labels = vec![Label::Normal; 9000];
        for i in 7000..7020 {
            series.samples[i].iat = 45.0;
            labels[i] = Label::Attack;
        }
        let result = validate(&series, &cfg(3000, 20, 1.5), 2.0 / 3.0, Some(&labels)).unwrap();
        assert_eq!(result.summary.attack_samples, Some(20));
        assert_eq!(result.summary.detected_attacks, Some(20));
        assert_eq!(result.summary.detection_rate, Some(1.0));
        assert_eq!(result.summary.false_positives, 0);
    }

    #[test]
    fn constant_series_validates_clean() {
        // Every gap identical: duplicate handling keeps all scores at 1.
        let series = FeatureSeries::from_iats(&vec![2.0; 900]);
        let result = validate(&series, &cfg(300, 10, 1.5), 2.0 / 3.0, None).unwrap();
        assert_eq!(result.summary.false_positives, 0);
    }

    #[test]
    fn plot_data_has_one_row_per_sample() {
        let mut series = jittered_series(200, 10);
        series.samples[50].iat = 100.0;
        series.samples[150].iat = 100.0;
        let report = detect_windowed(&series, &cfg(200, 20, 1.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        assert_eq!(emit_plot_data(&report, &series, &path).unwrap(), 200);
        let content = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines.len(), 201);
        assert_eq!(lines[0], "sample_index,iat_seconds,score,verdict");
        // Outlier rows match the report's count, and the implanted gaps
        // are among them.
        assert_eq!(
            content.matches(",outlier").count(),
            report.summary.outliers
        );
        assert!(report.outlier_indices().contains(&51));
        assert!(report.outlier_indices().contains(&151));
        // Row order equals sample order.
        let indices: Vec<usize> = lines[1..]
            .iter()
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_report_writes_header_only() {
        let series = jittered_series(100, 11);
        let report = DetectionReport {
            config: WindowConfig::default(),
            summary: ReportSummary {
                total: 0,
                outliers: 0,
                windows: 0,
                window_sizes: vec![],
                per_window_outliers: vec![],
                thresholds: vec![],
            },
            entries: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        emit_plot_data(&report, &series, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "sample_index,iat_seconds,score,verdict\n"
        );
    }
}
