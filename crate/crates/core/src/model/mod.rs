//! Domain types shared by the simulation and analysis modules.
//!
//! Times are integer picoseconds throughout; rates are in hertz (events per
//! second). All types are plain values and are `Send + Sync`.

mod config;

pub use config::{
    load_config, parse_config, to_config_string, validate_config, DetectorModel, SimConfig,
    DEFAULT_DARK_RATE_HZ, DEFAULT_DEAD_TIME_PS, DEFAULT_LATCH_FLUX_HZ, DEFAULT_PATH_EFFICIENCY,
};

use crate::error::FormatError;

/// Picoseconds per second.
pub const PS_PER_S: u64 = 1_000_000_000_000;

pub fn seconds_to_ps(seconds: f64) -> u64 {
    (seconds * PS_PER_S as f64).round() as u64
}

pub fn ps_to_seconds(ps: u64) -> f64 {
    ps as f64 / PS_PER_S as f64
}

/// Detection events of one channel over a measurement window `[0, duration_ps)`.
///
/// Tags are strictly increasing and all lie inside the window; every
/// constructor enforces this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    channel_id: u16,
    duration_ps: u64,
    tags: Vec<u64>,
}

impl TimeTagStream {
    pub fn new(channel_id: u16, duration_ps: u64, tags: Vec<u64>) -> Result<Self, FormatError> {
        check_tags(&tags, duration_ps)?;
        Ok(Self {
            channel_id,
            duration_ps,
            tags,
        })
    }

    pub fn empty(channel_id: u16, duration_ps: u64) -> Self {
        Self {
            channel_id,
            duration_ps,
            tags: Vec::new(),
        }
    }

    /// Caller guarantees the invariants; checked in debug builds.
    pub(crate) fn from_sorted_unchecked(channel_id: u16, duration_ps: u64, tags: Vec<u64>) -> Self {
        debug_assert!(check_tags(&tags, duration_ps).is_ok());
        Self {
            channel_id,
            duration_ps,
            tags,
        }
    }

    pub fn channel_id(&self) -> u16 {
        self.channel_id
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn into_tags(self) -> Vec<u64> {
        self.tags
    }

    pub fn with_channel(mut self, channel_id: u16) -> Self {
        self.channel_id = channel_id;
        self
    }

    /// Mean event rate over the window in hertz.
    pub fn rate_hz(&self) -> f64 {
        self.tags.len() as f64 / ps_to_seconds(self.duration_ps)
    }
}

pub(crate) fn check_tags(tags: &[u64], duration_ps: u64) -> Result<(), FormatError> {
    for (i, w) in tags.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(FormatError::Unsorted(i + 1));
        }
    }
    if let Some(&last) = tags.last() {
        if last >= duration_ps {
            return Err(FormatError::TagOutOfWindow {
                tag: last,
                duration_ps,
            });
        }
    }
    Ok(())
}

/// Event counts per fixed-width bin for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedCounts {
    pub channel_id: u16,
    pub bin_width_ps: u64,
    pub counts: Vec<u32>,
}

impl BinnedCounts {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Per-bin channel difference `counts_a - counts_b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceSeries {
    pub bin_width_ps: u64,
    pub diffs: Vec<i64>,
}

impl DifferenceSeries {
    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// One point of a local-oscillator flux sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// LO flux before any path loss, photons/s.
    pub lo_flux_set_hz: f64,
    /// Expected LO flux detected by both detectors together, photons/s.
    pub lo_flux_detected_hz: f64,
    /// Difference-signal variance normalized to a rate, photons/s.
    pub variance_rate_hz: f64,
    pub variance_rel_err: f64,
    pub shot_noise_ref_hz: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearanceResult {
    pub v_dc_hz: f64,
    pub v_lin_max_hz: f64,
    pub linear_limit_flux_hz: f64,
    pub clearance_db: f64,
}

/// Quality flag attached to a g2 estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum G2Flag {
    Ok,
    /// Fewer coincidences than the caller's statistics threshold.
    LowStatistics,
    /// No coincidences: `g2` is zero and the error is undefined.
    ZeroCoincidences,
    /// A channel had no events at all; `g2` is reported as zero.
    NoSingles,
}

impl G2Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            G2Flag::Ok => "ok",
            G2Flag::LowStatistics => "low_statistics",
            G2Flag::ZeroCoincidences => "zero_coincidences",
            G2Flag::NoSingles => "no_singles",
        }
    }
}

/// Second-order correlation at one bin shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Estimate {
    pub tau_bins: i64,
    pub coincidences: u64,
    pub singles_1: u64,
    pub singles_2: u64,
    pub n_bins: u64,
    pub g2: f64,
    /// `None` when the Poisson error is undefined (no coincidences).
    pub g2_err: Option<f64>,
    pub flag: G2Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Curve {
    pub bin_width_ps: u64,
    pub points: Vec<G2Estimate>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_rejects_duplicates_and_out_of_window() {
        assert_eq!(
            TimeTagStream::new(0, 10, vec![1, 1]),
            Err(FormatError::Unsorted(1))
        );
        assert_eq!(
            TimeTagStream::new(0, 10, vec![3, 2]),
            Err(FormatError::Unsorted(1))
        );
        assert!(matches!(
            TimeTagStream::new(0, 10, vec![10]),
            Err(FormatError::TagOutOfWindow { tag: 10, .. })
        ));
        assert!(TimeTagStream::new(0, 10, vec![0, 9]).is_ok());
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(seconds_to_ps(5.0), 5 * PS_PER_S);
        assert_eq!(seconds_to_ps(500e-9), 500_000);
        assert_eq!(ps_to_seconds(100_000), 1e-7);
    }
}
