//! Synthetic detector time tags.
//!
//! The local oscillator is a coherent CW beam, so photon arrivals form a
//! homogeneous Poisson process. The vacuum at the second beamsplitter port
//! contributes no photons, which makes the splitter a per-photon Bernoulli
//! router. Detector loss is Bernoulli thinning, dark counts are an
//! independent Poisson process, and the tagger dead time is non-paralyzable.
//!
//! Every random draw comes from a [`RngSpec`] substream, so each stage of
//! each channel has its own reproducible sequence.

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use sha2::{Digest, Sha256};

use crate::error::{AnalysisError, ConfigError};
use crate::model::{ps_to_seconds, SimConfig, TimeTagStream, PS_PER_S};

pub const CHANNEL_A: u16 = 1;
pub const CHANNEL_B: u16 = 2;

/// Names an independent random substream derived from a run seed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_label: String,
}

impl RngSpec {
    pub fn new(seed: u64, stream_label: impl Into<String>) -> Self {
        Self {
            seed,
            stream_label: stream_label.into(),
        }
    }

    fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.stream_label.as_bytes());
        h.finalize().into()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest())
    }

    /// A 64-bit seed for a nested run, e.g. one point of a sweep.
    pub fn derive_seed(&self) -> u64 {
        let d = self.digest();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}

/// Homogeneous Poisson arrivals on `[0, duration_ps)`.
///
/// Inter-arrival times are exponential and accumulated in continuous time;
/// a tag that floors onto an already used picosecond moves to the next free
/// one.
///
/// # Panics
/// If `rate_hz` is negative or not finite.
pub fn generate_poisson_stream(rate_hz: f64, duration_ps: u64, rng: &RngSpec) -> TimeTagStream {
    assert!(
        rate_hz.is_finite() && rate_hz >= 0.0,
        "rate must be finite and non-negative, got {rate_hz}"
    );
    if rate_hz == 0.0 || duration_ps == 0 {
        return TimeTagStream::empty(0, duration_ps);
    }
    let expected = rate_hz * ps_to_seconds(duration_ps);
    let mut tags = Vec::with_capacity((expected + 5.0 * expected.sqrt() + 16.0) as usize);
    let exp = Exp::new(rate_hz / PS_PER_S as f64).expect("positive rate");
    let mut rng = rng.rng();
    let end = duration_ps as f64;
    let mut t = 0.0f64;
    loop {
        t += exp.sample(&mut rng);
        if t >= end {
            break;
        }
        let mut tag = t as u64;
        if let Some(&last) = tags.last() {
            if tag <= last {
                tag = last + 1;
            }
        }
        if tag >= duration_ps {
            break;
        }
        tags.push(tag);
    }
    TimeTagStream::from_sorted_unchecked(0, duration_ps, tags)
}

/// Routes each tag to output A with probability `ratio`, otherwise to B.
/// Both outputs keep the input's channel id.
///
/// # Panics
/// If `ratio` is outside `[0, 1]`.
pub fn beamsplitter_split(
    stream: &TimeTagStream,
    ratio: f64,
    rng: &RngSpec,
) -> (TimeTagStream, TimeTagStream) {
    let coin = Bernoulli::new(ratio).expect("split ratio in [0, 1]");
    let mut rng = rng.rng();
    let n = stream.len();
    let mut a = Vec::with_capacity((n as f64 * ratio * 1.01) as usize + 16);
    let mut b = Vec::with_capacity((n as f64 * (1.0 - ratio) * 1.01) as usize + 16);
    for &tag in stream.tags() {
        if coin.sample(&mut rng) {
            a.push(tag);
        } else {
            b.push(tag);
        }
    }
    let (ch, d) = (stream.channel_id(), stream.duration_ps());
    (
        TimeTagStream::from_sorted_unchecked(ch, d, a),
        TimeTagStream::from_sorted_unchecked(ch, d, b),
    )
}

/// Keeps each tag independently with probability `keep_prob`.
///
/// # Panics
/// If `keep_prob` is outside `[0, 1]`.
pub fn thin_stream(stream: TimeTagStream, keep_prob: f64, rng: &RngSpec) -> TimeTagStream {
    let coin = Bernoulli::new(keep_prob).expect("keep probability in [0, 1]");
    if keep_prob == 1.0 {
        return stream;
    }
    let mut rng = rng.rng();
    let (ch, d) = (stream.channel_id(), stream.duration_ps());
    let mut tags = stream.into_tags();
    tags.retain(|_| coin.sample(&mut rng));
    TimeTagStream::from_sorted_unchecked(ch, d, tags)
}

/// Sorted union of two streams over the same window, labelled with `a`'s
/// channel. Coinciding timestamps are nudged forward by 1 ps; a nudge past
/// the end of the window drops that tag.
pub fn merge_streams(a: TimeTagStream, b: TimeTagStream) -> Result<TimeTagStream, AnalysisError> {
    if a.duration_ps() != b.duration_ps() {
        return Err(AnalysisError::MismatchedDuration(
            a.duration_ps(),
            b.duration_ps(),
        ));
    }
    let (ch, d) = (a.channel_id(), a.duration_ps());
    if b.is_empty() {
        return Ok(a);
    }
    if a.is_empty() {
        return Ok(b.with_channel(ch));
    }
    let (x, y) = (a.tags(), b.tags());
    let mut out: Vec<u64> = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let next = if j >= y.len() || (i < x.len() && x[i] <= y[j]) {
            i += 1;
            x[i - 1]
        } else {
            j += 1;
            y[j - 1]
        };
        let tag = match out.last() {
            Some(&last) if next <= last => last + 1,
            _ => next,
        };
        if tag < d {
            out.push(tag);
        }
    }
    Ok(TimeTagStream::from_sorted_unchecked(ch, d, out))
}

/// Non-paralyzable dead time: a tag survives iff it comes at least
/// `dead_time_ps` after the previous surviving tag.
pub fn apply_dead_time(stream: TimeTagStream, dead_time_ps: u64) -> TimeTagStream {
    if dead_time_ps == 0 {
        return stream;
    }
    let (ch, d) = (stream.channel_id(), stream.duration_ps());
    let mut tags = stream.into_tags();
    let mut last_kept: Option<u64> = None;
    tags.retain(|&t| match last_kept {
        Some(k) if t - k < dead_time_ps => false,
        _ => {
            last_kept = Some(t);
            true
        }
    });
    TimeTagStream::from_sorted_unchecked(ch, d, tags)
}

/// Runs the full two-detector chain for one configuration.
///
/// LO arrivals at `lo_flux_hz * path_efficiency` are split between the
/// arms, thinned by each detector's efficiency, merged with that detector's
/// dark counts and finally passed through its dead time. Substream labels:
/// `lo`, `split`, `thin_a`, `thin_b`, `dark_a`, `dark_b`.
pub fn simulate_detector_pair(
    cfg: &SimConfig,
) -> Result<(TimeTagStream, TimeTagStream), ConfigError> {
    cfg.validate()?;
    let d = cfg.duration_ps;
    let lo = generate_poisson_stream(
        cfg.lo_flux_hz * cfg.path_efficiency,
        d,
        &RngSpec::new(cfg.seed, "lo"),
    );
    let (arm_a, arm_b) = beamsplitter_split(&lo, cfg.split_ratio, &RngSpec::new(cfg.seed, "split"));
    drop(lo);

    let arm = |photons: TimeTagStream, det: &crate::model::DetectorModel, tag: &str, ch: u16| {
        let photons = thin_stream(
            photons,
            det.efficiency,
            &RngSpec::new(cfg.seed, format!("thin_{tag}")),
        );
        let dark = generate_poisson_stream(
            det.dark_rate_hz,
            d,
            &RngSpec::new(cfg.seed, format!("dark_{tag}")),
        );
        let clicks = merge_streams(photons, dark).expect("same window");
        apply_dead_time(clicks, det.dead_time_ps).with_channel(ch)
    };
    let a = arm(arm_a, &cfg.detector_a, "a", CHANNEL_A);
    let b = arm(arm_b, &cfg.detector_b, "b", CHANNEL_B);
    Ok((a, b))
}
