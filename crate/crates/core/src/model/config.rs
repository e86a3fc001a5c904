//! Run configuration, its validation, and the flat `key=value` file format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ConfigError, Error, Violation};

/// Per-detector dark-count rate used by the reference configuration.
pub const DEFAULT_DARK_RATE_HZ: f64 = 9.0;
/// 100 ns time-tagger dead time.
pub const DEFAULT_DEAD_TIME_PS: u64 = 100_000;
/// Per-detector flux above which a detector is declared latched.
pub const DEFAULT_LATCH_FLUX_HZ: f64 = 5e7;
/// Combined transmission of beamsplitter, fibers and cryostat coupling.
pub const DEFAULT_PATH_EFFICIENCY: f64 = 0.93;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub dead_time_ps: u64,
    pub latch_flux_hz: Option<f64>,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate_hz: DEFAULT_DARK_RATE_HZ,
            dead_time_ps: DEFAULT_DEAD_TIME_PS,
            latch_flux_hz: Some(DEFAULT_LATCH_FLUX_HZ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// LO photon flux at the beamsplitter input before path losses.
    pub lo_flux_hz: f64,
    pub path_efficiency: f64,
    /// Fraction of photons routed to detector A.
    pub split_ratio: f64,
    pub detector_a: DetectorModel,
    pub detector_b: DetectorModel,
    pub duration_ps: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lo_flux_hz: 0.0,
            path_efficiency: DEFAULT_PATH_EFFICIENCY,
            split_ratio: 0.5,
            detector_a: DetectorModel::default(),
            detector_b: DetectorModel::default(),
            duration_ps: 5 * super::PS_PER_S,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Photon flux reaching detector A and B before detector efficiency.
    pub fn arm_flux_hz(&self) -> (f64, f64) {
        let f = self.lo_flux_hz * self.path_efficiency;
        (f * self.split_ratio, f * (1.0 - self.split_ratio))
    }

    /// Expected LO flux registered by both detectors together (no dead time).
    pub fn detected_flux_hz(&self) -> f64 {
        let (a, b) = self.arm_flux_hz();
        a * self.detector_a.efficiency + b * self.detector_b.efficiency
    }

    pub fn total_dark_rate_hz(&self) -> f64 {
        self.detector_a.dark_rate_hz + self.detector_b.dark_rate_hz
    }

    /// LO flux that yields the given total detected flux under this setup.
    pub fn lo_flux_for_detected(&self, detected_hz: f64) -> f64 {
        let gain = self.path_efficiency
            * (self.split_ratio * self.detector_a.efficiency
                + (1.0 - self.split_ratio) * self.detector_b.efficiency);
        detected_hz / gain
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        let mut push = |field: &str, message: &str| {
            v.push(Violation {
                field: field.to_string(),
                message: message.to_string(),
            })
        };
        if !(self.lo_flux_hz.is_finite() && self.lo_flux_hz >= 0.0) {
            push("lo_flux_hz", "must be finite and >= 0");
        }
        if !unit_interval(self.path_efficiency) {
            push("path_efficiency", "efficiency out of [0,1]");
        }
        if !unit_interval(self.split_ratio) {
            push("split_ratio", "split ratio out of [0,1]");
        }
        if self.duration_ps == 0 {
            push("duration_ps", "must be > 0");
        }
        for (prefix, det) in [("detector_a", &self.detector_a), ("detector_b", &self.detector_b)] {
            if !unit_interval(det.efficiency) {
                push(&format!("{prefix}_efficiency"), "efficiency out of [0,1]");
            }
            if !(det.dark_rate_hz.is_finite() && det.dark_rate_hz >= 0.0) {
                push(&format!("{prefix}_dark_rate_hz"), "must be finite and >= 0");
            }
            if let Some(latch) = det.latch_flux_hz {
                if !(latch.is_finite() && latch > 0.0) {
                    push(&format!("{prefix}_latch_flux_hz"), "must be finite and > 0");
                }
            }
        }
        // Latching is only meaningful once the flux inputs themselves are sane.
        if v.is_empty() {
            let (fa, fb) = self.arm_flux_hz();
            for (prefix, det, flux) in [
                ("detector_a", &self.detector_a, fa),
                ("detector_b", &self.detector_b, fb),
            ] {
                if let Some(latch) = det.latch_flux_hz {
                    if flux > latch {
                        v.push(Violation {
                            field: format!("{prefix}_latch_flux_hz"),
                            message: format!(
                                "detector latched: incident flux {flux:e} Hz exceeds {latch:e} Hz"
                            ),
                        });
                    }
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Returns `cfg` unchanged when every invariant holds.
pub fn validate_config(cfg: SimConfig) -> Result<SimConfig, ConfigError> {
    cfg.validate().map(|_| cfg)
}

const REQUIRED_KEYS: [&str; 11] = [
    "lo_flux_hz",
    "path_efficiency",
    "split_ratio",
    "duration_ps",
    "seed",
    "detector_a_efficiency",
    "detector_a_dark_rate_hz",
    "detector_a_dead_time_ps",
    "detector_b_efficiency",
    "detector_b_dark_rate_hz",
    "detector_b_dead_time_ps",
];
const OPTIONAL_KEYS: [&str; 2] = ["detector_a_latch_flux_hz", "detector_b_latch_flux_hz"];

/// Parses the `key=value` configuration text. Does not validate ranges.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut map: HashMap<&str, &str> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: lineno + 1,
            message: format!("expected key=value, found {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !REQUIRED_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if map.insert(key, value).is_some() {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
    }
    if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !map.contains_key(*k)) {
        return Err(ConfigError::MissingKey(missing.to_string()));
    }

    let float = |key: &str| -> Result<f64, ConfigError> {
        let value = map[key];
        value.parse::<f64>().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        })
    };
    let int = |key: &str| -> Result<u64, ConfigError> {
        let value = map[key];
        value.replace('_', "").parse::<u64>().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        })
    };
    let detector = |prefix: &str| -> Result<DetectorModel, ConfigError> {
        let latch_key = format!("{prefix}_latch_flux_hz");
        Ok(DetectorModel {
            efficiency: float(&format!("{prefix}_efficiency"))?,
            dark_rate_hz: float(&format!("{prefix}_dark_rate_hz"))?,
            dead_time_ps: int(&format!("{prefix}_dead_time_ps"))?,
            latch_flux_hz: if map.contains_key(latch_key.as_str()) {
                Some(float(&latch_key)?)
            } else {
                None
            },
        })
    };

    Ok(SimConfig {
        lo_flux_hz: float("lo_flux_hz")?,
        path_efficiency: float("path_efficiency")?,
        split_ratio: float("split_ratio")?,
        detector_a: detector("detector_a")?,
        detector_b: detector("detector_b")?,
        duration_ps: int("duration_ps")?,
        seed: int("seed")?,
    })
}

/// Renders `cfg` in the configuration file format. `parse_config` inverts it.
pub fn to_config_string(cfg: &SimConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lo_flux_hz={}", cfg.lo_flux_hz);
    let _ = writeln!(s, "path_efficiency={}", cfg.path_efficiency);
    let _ = writeln!(s, "split_ratio={}", cfg.split_ratio);
    let _ = writeln!(s, "duration_ps={}", cfg.duration_ps);
    let _ = writeln!(s, "seed={}", cfg.seed);
    for (prefix, det) in [("detector_a", &cfg.detector_a), ("detector_b", &cfg.detector_b)] {
        let _ = writeln!(s, "{prefix}_efficiency={}", det.efficiency);
        let _ = writeln!(s, "{prefix}_dark_rate_hz={}", det.dark_rate_hz);
        let _ = writeln!(s, "{prefix}_dead_time_ps={}", det.dead_time_ps);
        if let Some(latch) = det.latch_flux_hz {
            let _ = writeln!(s, "{prefix}_latch_flux_hz={latch}");
        }
    }
    s
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SimConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let cfg = parse_config(&text)?;
    Ok(validate_config(cfg)?)
}
