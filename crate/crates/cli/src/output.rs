use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    /// Write `rows` with a header row taken from the row type.
    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| with_path(&path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| with_path(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }
}

fn with_path(path: &Path, err: csv::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

/// `stem.ext` for a single run, `stem_<i>.ext` inside a batch.
pub fn indexed(stem: &str, ext: &str, run: usize, batch: bool) -> String {
    if batch {
        format!("{stem}_{run}.{ext}")
    } else {
        format!("{stem}.{ext}")
    }
}

#[derive(Debug, Serialize)]
pub struct ExchangeRow {
    pub run: usize,
    pub seed: u64,
    pub periods: u64,
    pub ll: u64,
    pub lh: u64,
    pub hl: u64,
    pub hh: u64,
    pub secure_bits: usize,
    pub compromised_bits: usize,
    pub misclassified: u64,
    pub alarms: u64,
    pub elapsed_s: f64,
    pub keys_match: bool,
}

#[derive(Debug, Serialize)]
pub struct LifetimeRow {
    pub theta: f64,
    pub wave_speed_mps: f64,
    pub line_length_m: f64,
    pub gamma: f64,
    pub key_length_bits: u64,
    pub parallel_channels: u32,
    pub car_density: f64,
    pub noise_bandwidth_hz: f64,
    pub secure_bit_rate_bps: f64,
    pub per_car_rate_bps: f64,
    pub key_lifetime_s: f64,
    pub no_wave_warning: bool,
    pub gamma_warning: bool,
}

#[derive(Debug, Serialize)]
pub struct MetricsRow {
    pub run: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub vehicles: usize,
    pub donation_attempts: u64,
    pub donation_successes: u64,
    pub failures_pool_empty: u64,
    pub failures_window_too_short: u64,
    pub failures_no_former_key: u64,
    pub missed_detections: u64,
    pub pool_depletion_episodes: u64,
    pub bits_generated: u64,
    pub bits_donated: u64,
    pub refresh_count: u64,
    pub mean_refresh_interval_s: f64,
    pub max_refresh_interval_s: f64,
    pub mean_vehicle_key_rate_bps: f64,
    pub max_rsd_load: u64,
    pub chain_failures: u64,
    pub events_processed: u64,
}

#[derive(Debug, Serialize)]
pub struct RsdRow {
    pub run: usize,
    pub rsd_id: u32,
    pub pads: usize,
    pub load: u64,
    pub bits_generated: u64,
    pub bits_donated: u64,
}

#[derive(Debug, Serialize)]
pub struct PassiveRow {
    pub strategy: &'static str,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
    pub cross_mean_w: f64,
    pub cross_stderr_w: f64,
}

#[derive(Debug, Serialize)]
pub struct InjectionRow {
    pub relative_amplitude: f64,
    pub periods: u64,
    pub alarms: u64,
    pub alarm_rate: f64,
}

#[derive(Debug, Serialize)]
pub struct BerRow {
    pub gamma: f64,
    pub runs: u64,
    pub errors: u64,
    pub ber: f64,
}
