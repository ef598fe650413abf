//! Subcommand implementations.

use crate::config::{data, read_err, resolve_window_config, usage, AppError, FileConfig};
use crate::{
    BenchArgs, DetectArgs, ExtractArgs, GenerateArgs, InjectArgs, SelectorArgs, TrainArgs,
    ValidateArgs,
};
use gridlof_core::detector::{
    detect_windowed, emit_plot_data, resolve_threshold, validate as run_validation, window_spans,
    DetectionMode, DetectionReport, ReportSummary, SampleVerdict, Verdict, WindowConfig,
};
use gridlof_core::features::{
    extract_features, extract_merged, write_series_csv, FeatureSeries, Label,
};
use gridlof_core::ingest::{
    parse_csv_with_labels, read_pcap_records, write_csv_with_metadata, write_labeled_csv,
    ApciType, DEFAULT_IEC104_PORT,
};
use gridlof_core::injector::{generate_normal, inject as run_inject, AttackScenario, NormalPattern};
use gridlof_core::lof::{fit, LofModel, Point};
use gridlof_core::{Conversation, PacketRecord};
use serde::Serialize;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const OK: ExitCode = ExitCode::SUCCESS;

pub fn extract(args: ExtractArgs) -> Result<ExitCode, AppError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let port = match args.port.or(file.get("port")?) {
        Some(p) => p,
        None => DEFAULT_IEC104_PORT,
    };
    let started = Instant::now();
    let (mut records, stats) = read_pcap_records(&args.pcap, port).map_err(read_err)?;
    if args.i_frames_only {
        records.retain(|r| r.apci_type == ApciType::I);
    }
    let conversations: BTreeSet<Conversation> =
        records.iter().map(|r| r.conversation()).collect();
    let metadata = format!(
        "gridlof extract source={} port={port} i_frames_only={}",
        args.pcap.display(),
        args.i_frames_only
    );
    let rows = write_csv_with_metadata(&records, &args.out, &metadata).map_err(data)?;
    let elapsed = started.elapsed();
    println!(
        "records: {} conversations: {} warnings: {} elapsed: {:.3}s",
        records.len(),
        conversations.len(),
        stats.warnings(),
        elapsed.as_secs_f64()
    );
    println!("wrote: {} (rows: {rows})", args.out.display());
    Ok(OK)
}

pub fn generate(args: GenerateArgs) -> Result<ExitCode, AppError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let pattern = NormalPattern {
        period: args.period.or(file.get("period")?).unwrap_or(1.0),
        jitter_fraction: args.jitter.or(file.get("jitter")?).unwrap_or(0.02),
        count: args.count.or(file.get("count")?).unwrap_or(15_000),
        seed: args.seed.or(file.get("seed")?).unwrap_or(1),
    };
    let records = generate_normal(&pattern).map_err(usage)?;
    let metadata = format!(
        "gridlof generate period={} jitter={} count={} seed={}",
        pattern.period, pattern.jitter_fraction, pattern.count, pattern.seed
    );
    let rows = write_csv_with_metadata(&records, &args.out, &metadata).map_err(data)?;
    println!(
        "generated: {rows} records period: {} jitter: {} seed: {}",
        pattern.period, pattern.jitter_fraction, pattern.seed
    );
    println!("wrote: {}", args.out.display());
    Ok(OK)
}

pub fn inject(args: InjectArgs) -> Result<ExitCode, AppError> {
    let scenario = load_scenario(&args.scenario)?;
    let (records, _, stats) = parse_csv_with_labels(&args.input).map_err(read_err)?;
    warn_if_lossy(&args.input, stats.warnings());
    let (out, labels) = run_inject(&records, &scenario).map_err(data)?;
    let attack = labels.iter().filter(|&&l| l == Label::Attack).count();
    let metadata = format!(
        "gridlof inject kind={} start={} duration={} magnitude={} seed={} source={}",
        scenario.kind,
        scenario.start,
        scenario.duration,
        scenario.magnitude,
        scenario.seed,
        args.input.display()
    );
    write_labeled_csv(&out, &labels, &args.out, Some(&metadata)).map_err(data)?;
    println!(
        "scenario: {} records_in: {} records_out: {} attack_labeled: {attack}",
        scenario.kind,
        records.len(),
        out.len()
    );
    println!("wrote: {}", args.out.display());
    Ok(OK)
}

fn load_scenario(path: &Path) -> Result<AttackScenario, AppError> {
    if !path.exists() {
        return Err(usage(format!("{}: no such file", path.display())));
    }
    AttackScenario::from_file(path).map_err(data)
}

pub fn train(args: TrainArgs) -> Result<ExitCode, AppError> {
    let cfg = resolve_window_config(&args.tuning, DetectionMode::TrainThenScore)?;
    let (records, _, stats) = parse_csv_with_labels(&args.input).map_err(read_err)?;
    warn_if_lossy(&args.input, stats.warnings());
    let series = select_series(&records, &args.selector)?;
    let (tag, series) = expect_one_series(series)?;
    if series.len() < cfg.k + 2 {
        return Err(data(format!(
            "series '{tag}' has {} samples; need at least {}",
            series.len(),
            cfg.k + 2
        )));
    }
    let points: Vec<Point> = series
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| Point::scalar(i, s.iat))
        .collect();
    let started = Instant::now();
    let mut model = fit(&points, cfg.k).map_err(data)?;
    let threshold = resolve_threshold(cfg.threshold, model.lof_scores());
    model.set_threshold(threshold);
    model.save(&args.model_out).map_err(data)?;
    println!(
        "trained: {} points k: {} threshold: {threshold} elapsed: {:.3}s",
        model.len(),
        cfg.k,
        started.elapsed().as_secs_f64()
    );
    println!("wrote: {}", args.model_out.display());
    Ok(OK)
}


pub fn detect(args: DetectArgs) -> Result<ExitCode, AppError> {
    let mode = match args.mode.as_deref() {
        None | Some("batch") => DetectionMode::BatchPerWindow,
        Some("train-score") => DetectionMode::TrainThenScore,
        Some(other) => {
            return Err(usage(format!(
                "unknown mode '{other}' (expected batch or train-score)"
            )))
        }
    };
    let cfg = resolve_window_config(&args.tuning, mode)?;
    let model = args
        .model
        .as_deref()
        .map(|p| LofModel::load(p).map_err(data))
        .transpose()?;
    let (records, _, stats) = parse_csv_with_labels(&args.input).map_err(read_err)?;
    warn_if_lossy(&args.input, stats.warnings());
    let series_set = select_series(&records, &args.selector)?;
    let multi = series_set.len() > 1;

    let mut total_outliers = 0usize;
    for (i, (tag, series)) in series_set.iter().enumerate() {
        let report = match &model {
            Some(model) => score_against_model(series, model, &cfg).map_err(data)?,
            None => detect_windowed(series, &cfg).map_err(data)?,
        };
        total_outliers += report.summary.outliers;
        println!(
            "series: {tag} samples: {} windows: {} outliers: {} mode: {}",
            report.summary.total,
            report.summary.windows,
            report.summary.outliers,
            if model.is_some() { "saved-model".to_string() } else { cfg.mode.to_string() },
        );
        if let Some(path) = &args.plot_out {
            let path = suffixed(path, multi, i);
            emit_plot_data(&report, series, &path).map_err(data)?;
            println!("plot: {}", path.display());
        }
        if let Some(path) = &args.report_out {
            let path = suffixed(path, multi, i);
            write_report_json(&path, &args.input, tag, &report)?;
            println!("report: {}", path.display());
        }
        if let Some(path) = &args.series_out {
            let path = suffixed(path, multi, i);
            write_series_csv(series, &path).map_err(data)?;
            println!("series_csv: {}", path.display());
        }
    }
    println!("outliers: {total_outliers}");
    if args.fail_on_outlier && total_outliers > 0 {
        return Ok(ExitCode::from(1));
    }
    Ok(OK)
}

/// Score every sample against a saved model: the train-once/detect-later
/// path. The whole series counts as one window.
fn score_against_model(
    series: &FeatureSeries,
    model: &LofModel,
    cfg: &WindowConfig,
) -> Result<DetectionReport, gridlof_core::detector::DetectorError> {
    let threshold = model.threshold();
    let mut entries = Vec::with_capacity(series.len());
    for sample in &series.samples {
        let score = model.score(&Point::scalar(0, sample.iat))?;
        entries.push(SampleVerdict {
            sample_index: sample.index,
            window_id: 0,
            score,
            verdict: if score > threshold {
                Verdict::Outlier
            } else {
                Verdict::Inlier
            },
        });
    }
    let outliers = entries.iter().filter(|e| e.verdict == Verdict::Outlier).count();
    Ok(DetectionReport {
        config: *cfg,
        summary: ReportSummary {
            total: entries.len(),
            outliers,
            windows: 1,
            window_sizes: vec![model.len()],
            per_window_outliers: vec![outliers],
            thresholds: vec![threshold],
        },
        entries,
    })
}

pub fn validate(args: ValidateArgs) -> Result<ExitCode, AppError> {
    let cfg = resolve_window_config(&args.tuning, DetectionMode::TrainThenScore)?;
    let (records, record_labels, stats) =
        parse_csv_with_labels(&args.input).map_err(read_err)?;
    warn_if_lossy(&args.input, stats.warnings());
    let series_set = select_series(&records, &args.selector)?;

    let mut artifacts = Vec::new();
    for (tag, series) in &series_set {
        let sample_labels = record_labels
            .as_deref()
            .map(|labels| series.sample_labels(labels));
        let result = run_validation(series, &cfg, cfg.train_fraction, sample_labels.as_deref())
            .map_err(data)?;
        let s = &result.summary;
        println!("series={tag}");
        println!("train_samples={}", s.train_samples);
        println!("test_samples={}", s.test_samples);
        println!("false_positives={}", s.false_positives);
        println!("fp_rate={:.6}", s.fp_rate);
        println!("threshold={}", s.threshold);
        if let (Some(total), Some(detected)) = (s.attack_samples, s.detected_attacks) {
            println!("attack_samples={total}");
            println!("detected_attacks={detected}");
            if let Some(rate) = s.detection_rate {
                println!("detection_rate={rate:.6}");
            }
        }
        artifacts.push(ValidationArtifact {
            input: args.input.display().to_string(),
            series: tag.clone(),
            config: cfg,
            summary: result.summary.clone(),
        });
    }
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&artifacts)
            .map_err(|e| data(format!("serializing summary: {e}")))?;
        std::fs::write(path, json).map_err(|e| data(format!("{}: {e}", path.display())))?;
        println!("json: {}", path.display());
    }
    Ok(OK)
}

pub fn bench(args: BenchArgs) -> Result<ExitCode, AppError> {
    let cfg = resolve_window_config(&args.tuning, DetectionMode::BatchPerWindow)?;
    let (records, _, stats) = parse_csv_with_labels(&args.input).map_err(read_err)?;
    warn_if_lossy(&args.input, stats.warnings());
    // Bench defaults to the merged series; it times fitting, not routing.
    let series = if !args.selector.merge_all && args.selector.conversation.is_none() {
        vec![("all".to_string(), extract_merged(&records))]
    } else {
        select_series(&records, &args.selector)?
    };
    let (tag, series) = expect_one_series(series)?;
    if series.len() < cfg.k + 2 {
        return Err(data(format!(
            "series '{tag}' has {} samples; need at least {}",
            series.len(),
            cfg.k + 2
        )));
    }
    let spans = window_spans(series.len(), cfg.window_size, cfg.k);
    println!(
        "series: {tag} samples: {} windows: {} window_size: {} k: {}",
        series.len(),
        spans.len(),
        cfg.window_size,
        cfg.k
    );
    // At least three timings, cycling windows when the input is short.
    let runs = spans.len().max(3);
    let mut timings_ms = Vec::with_capacity(runs);
    for run in 0..runs {
        let span = &spans[run % spans.len()];
        let points: Vec<Point> = series.samples[span.clone()]
            .iter()
            .enumerate()
            .map(|(i, s)| Point::scalar(i, s.iat))
            .collect();
        let started = Instant::now();
        let model = fit(&points, cfg.k).map_err(data)?;
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        timings_ms.push(elapsed);
        println!(
            "window {}: {} points fit in {elapsed:.2} ms",
            run % spans.len(),
            model.len()
        );
    }
    let mean = timings_ms.iter().sum::<f64>() / timings_ms.len() as f64;
    let min = timings_ms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = timings_ms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("fit_ms: mean={mean:.2} min={min:.2} max={max:.2}");

    // Repeat one window to confirm scoring is reproducible.
    let points: Vec<Point> = series.samples[spans[0].clone()]
        .iter()
        .enumerate()
        .map(|(i, s)| Point::scalar(i, s.iat))
        .collect();
    let a = fit(&points, cfg.k).map_err(data)?;
    let b = fit(&points, cfg.k).map_err(data)?;
    let deterministic = a.lof_scores() == b.lof_scores();
    println!("deterministic: {deterministic}");
    Ok(OK)
}

#[derive(Serialize)]
struct ValidationArtifact {
    input: String,
    series: String,
    config: WindowConfig,
    summary: gridlof_core::detector::ValidationSummary,
}

#[derive(Serialize)]
struct ReportArtifact<'a> {
    input: String,
    series: String,
    #[serde(flatten)]
    report: &'a DetectionReport,
}

fn write_report_json(
    path: &Path,
    input: &Path,
    tag: &str,
    report: &DetectionReport,
) -> Result<(), AppError> {
    let artifact = ReportArtifact {
        input: input.display().to_string(),
        series: tag.to_string(),
        report,
    };
    let json = serde_json::to_string_pretty(&artifact)
        .map_err(|e| data(format!("serializing report: {e}")))?;
    std::fs::write(path, json).map_err(|e| data(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Build the series set the analysis commands operate on.
fn select_series(
    records: &[PacketRecord],
    selector: &SelectorArgs,
) -> Result<Vec<(String, FeatureSeries)>, AppError> {
    if selector.merge_all {
        return Ok(vec![("all".to_string(), extract_merged(records))]);
    }
    let mut map = extract_features(records);
    if let Some(spec) = &selector.conversation {
        let conv: Conversation = spec.parse().map_err(usage)?;
        let series = map.remove(&conv).ok_or_else(|| {
            data(format!("conversation {conv} not present in the input"))
        })?;
        return Ok(vec![(conv.to_string(), series)]);
    }
    let nonempty: Vec<(String, FeatureSeries)> = map
        .into_iter()
        .filter(|(_, s)| !s.is_empty())
        .map(|(conv, s)| (conv.to_string(), s))
        .collect();
    if nonempty.is_empty() {
        return Err(data("input contains no conversation with two or more packets".to_string()));
    }
    Ok(nonempty)
}

fn expect_one_series(
    mut series: Vec<(String, FeatureSeries)>,
) -> Result<(String, FeatureSeries), AppError> {
    if series.len() > 1 {
        let names: Vec<String> = series.iter().map(|(tag, _)| tag.clone()).collect();
        return Err(usage(format!(
            "input has {} conversations ({}); pick one with --conversation or use --merge-all",
            series.len(),
            names.join(", ")
        )));
    }
    Ok(series.pop().expect("nonempty by construction"))
}

fn suffixed(path: &Path, multi: bool, index: usize) -> PathBuf {
    if !multi {
        return path.to_path_buf();
    }
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}-{index}{ext}"))
}

fn warn_if_lossy(path: &Path, warnings: u64) {
    if warnings > 0 {
        eprintln!(
            "warning: {} rows skipped or adjusted while reading {}",
            warnings,
            path.display()
        );
    }
}
