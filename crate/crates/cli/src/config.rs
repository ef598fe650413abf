//! Config-file handling, option resolution, and the exit-code policy.

use gridlof_core::detector::{DetectionMode, ThresholdPolicy, WindowConfig};
use gridlof_core::ingest::IngestError;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::process::ExitCode;

/// Command failure with its documented exit code: 2 for usage problems
/// (bad flags, inconsistent config, missing files), 3 for data problems
/// (malformed or contradictory file contents).
#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Usage(_) => ExitCode::from(2),
            AppError::Data(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(msg) | AppError::Data(msg) => write!(f, "{msg}"),
        }
    }
}

pub fn usage(err: impl fmt::Display) -> AppError {
    AppError::Usage(err.to_string())
}

pub fn data(err: impl fmt::Display) -> AppError {
    AppError::Data(err.to_string())
}

/// Classify an ingest failure from a file we were asked to read: a file
/// that cannot be opened is a usage problem, bad content is a data
/// problem.
pub fn read_err(err: IngestError) -> AppError {
    match err {
        IngestError::Io { .. } => AppError::Usage(err.to_string()),
        other => AppError::Data(other.to_string()),
    }
}

/// Optional `key=value` defaults loaded with `--config`; explicit flags
/// always win.
#[derive(Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

const KNOWN_KEYS: [&str; 11] = [
    "port",
    "k",
    "window-size",
    "threshold",
    "auto-threshold",
    "train-fraction",
    "merge-all",
    "conversation",
    "count",
    "period",
    "jitter",
];

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, AppError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let raw = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for line in raw.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{}: expected key=value, got '{line}'", path.display())))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) && key != "seed" {
                return Err(usage(format!("{}: unknown config key '{key}'", path.display())));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, AppError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| usage(format!("config key {key}={raw}: {e}"))),
        }
    }
}

/// Fold flags and config-file defaults into a validated detector config.
pub fn resolve_window_config(
    tuning: &crate::TuningArgs,
    mode: DetectionMode,
) -> Result<WindowConfig, AppError> {
    let file = FileConfig::load(tuning.config.as_deref())?;
    let threshold = match (tuning.threshold, tuning.auto_threshold) {
        (Some(t), _) => ThresholdPolicy::Fixed(t),
        (None, Some(p)) => ThresholdPolicy::AutoPercentile(p),
        (None, None) => match (file.get::<f64>("threshold")?, file.get::<f64>("auto-threshold")?) {
            (Some(t), None) => ThresholdPolicy::Fixed(t),
            (None, Some(p)) => ThresholdPolicy::AutoPercentile(p),
            (None, None) => WindowConfig::default().threshold,
            (Some(_), Some(_)) => {
                return Err(usage(
                    "config file sets both threshold and auto-threshold".to_string(),
                ))
            }
        },
    };
    let defaults = WindowConfig::default();
    let cfg = WindowConfig {
        window_size: tuning
            .window_size
            .or(file.get("window-size")?)
            .unwrap_or(defaults.window_size),
        k: tuning.k.or(file.get("k")?).unwrap_or(defaults.k),
        threshold,
        mode,
        train_fraction: tuning
            .train_fraction
            .or(file.get("train-fraction")?)
            .unwrap_or(defaults.train_fraction),
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}
