//! Continuous-variable analysis of the two click streams.
//!
//! The per-bin count difference plays the role of the homodyne photocurrent
//! difference. Its variance, divided by the bin width, is a rate in photons/s
//! that for vacuum input equals the detected LO flux (the shot-noise line).
//! Dark counts set a flat floor under that line and dead time pulls the
//! variance below it at high flux.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{AnalysisError, Error};
use crate::model::{
    ps_to_seconds, BinnedCounts, ClearanceResult, DifferenceSeries, SimConfig, SweepPoint,
};
use crate::simgen::{simulate_detector_pair, RngSpec};
use crate::timetag::bin_counts;

/// Quadrature variance of the vacuum state.
pub const VACUUM_QUADRATURE_VARIANCE: f64 = 0.25;

/// Default bound on the deviation from the shot-noise line.
pub const DEFAULT_MAX_DEV: f64 = 0.1;

/// Difference-signal variance expected for vacuum input,
/// `4 |beta|^2 Var(X)`, with `|beta|^2` the detected LO flux in photons/s.
pub fn shot_noise_reference(detected_flux_hz: f64) -> f64 {
    4.0 * detected_flux_hz * VACUUM_QUADRATURE_VARIANCE
}

pub fn difference_series(
    a: &BinnedCounts,
    b: &BinnedCounts,
) -> Result<DifferenceSeries, AnalysisError> {
    if a.bin_width_ps != b.bin_width_ps {
        return Err(AnalysisError::MismatchedBinWidth(
            a.bin_width_ps,
            b.bin_width_ps,
        ));
    }
    if a.len() != b.len() {
        return Err(AnalysisError::MismatchedLength(a.len(), b.len()));
    }
    let diffs = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(&x, &y)| x as i64 - y as i64)
        .collect();
    Ok(DifferenceSeries {
        bin_width_ps: a.bin_width_ps,
        diffs,
    })
}

/// Sample variance (denominator `n - 1`) of the differences divided by the
/// bin width in seconds, and its relative error `[1/(2n-2)]^(1/2)`.
///
/// The moments are accumulated exactly in 128-bit integers, so the result
/// carries only the final rounding of one division.
pub fn rate_normalized_variance(d: &DifferenceSeries) -> Result<(f64, f64), AnalysisError> {
    let n = d.len();
    if n < 2 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let (sum, sum_sq) = d.diffs.iter().fold((0i128, 0i128), |(s, q), &x| {
        let x = x as i128;
        (s + x, q + x * x)
    });
    let n_i = n as i128;
    let centered = n_i * sum_sq - sum * sum;
    let variance = centered as f64 / (n as f64 * (n - 1) as f64);
    Ok((
        variance / ps_to_seconds(d.bin_width_ps),
        variance_rel_err(n),
    ))
}

pub fn variance_rel_err(n: usize) -> f64 {
    (1.0 / (2.0 * n as f64 - 2.0)).sqrt()
}

/// Mean of the per-bin differences; ~0 for balanced channels.
pub fn mean_difference(d: &DifferenceSeries) -> f64 {
    d.diffs.iter().map(|&x| x as f64).sum::<f64>() / d.len() as f64
}

/// Points whose detected LO flux is below this fraction of the total dark
/// rate count as dark-floor points.
pub const DARK_THRESHOLD_FRACTION: f64 = 0.1;

pub fn default_dark_threshold_hz(total_dark_rate_hz: f64) -> f64 {
    DARK_THRESHOLD_FRACTION * total_dark_rate_hz
}

/// Mean variance over the points with detected LO flux below
/// `flux_threshold_hz`, where the variance is flat at the dark-count floor.
pub fn estimate_dark_variance(
    sweep: &[SweepPoint],
    flux_threshold_hz: f64,
) -> Result<f64, AnalysisError> {
    let (sum, n) = sweep
        .iter()
        .filter(|p| p.lo_flux_detected_hz < flux_threshold_hz)
        .fold((0.0, 0usize), |(s, n), p| (s + p.variance_rate_hz, n + 1));
    if n == 0 {
        return Err(AnalysisError::NoDarkPoints(flux_threshold_hz));
    }
    Ok(sum / n as f64)
}

/// A sweep point together with its dark-floor-subtracted variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedPoint {
    pub point: SweepPoint,
    pub dark_subtracted_hz: f64,
}

pub fn subtract_dark_variance(
    sweep: &[SweepPoint],
    v_dc_hz: f64,
) -> Result<Vec<CorrectedPoint>, AnalysisError> {
    if v_dc_hz.is_nan() || v_dc_hz < 0.0 {
        return Err(AnalysisError::Negative {
            name: "v_dc_hz",
            value: v_dc_hz,
        });
    }
    Ok(sweep
        .iter()
        .map(|p| CorrectedPoint {
            point: p.clone(),
            dark_subtracted_hz: (p.variance_rate_hz - v_dc_hz).max(0.0),
        })
        .collect())
}

/// How far a measured variance may sit from the shot-noise line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeviationMetric {
    /// `|variance / reference - 1|`
    #[default]
    Relative,
    /// `|log10(variance / reference)|`, i.e. decades on a log-log plot.
    Log10,
}

impl DeviationMetric {
    pub fn deviation(&self, variance: f64, reference: f64) -> f64 {
        let ratio = variance / reference;
        match self {
            DeviationMetric::Relative => (ratio - 1.0).abs(),
            DeviationMetric::Log10 => ratio.log10().abs(),
        }
    }
}

impl std::str::FromStr for DeviationMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relative" => Ok(Self::Relative),
            "log10" => Ok(Self::Log10),
            other => Err(format!("unknown deviation metric {other:?} (relative|log10)")),
        }
    }
}

/// Highest flux at which the detector still follows the shot-noise line.
///
/// The scan starts at the first point whose reference exceeds the dark
/// floor by `1 / max_dev`; below that the subtracted floor alone can break
/// the criterion. Walking up in flux, it stops at the first pair of
/// consecutive violating points, so a lone statistical outlier does not end
/// the linear range. Returns the limit's detected flux and its
/// *uncorrected* variance.
pub fn find_linear_limit(
    sweep: &[CorrectedPoint],
    v_dc_hz: f64,
    max_dev: f64,
    metric: DeviationMetric,
) -> Result<(f64, f64), AnalysisError> {
    if max_dev.is_nan() || max_dev <= 0.0 {
        return Err(AnalysisError::NonPositive {
            name: "max_dev",
            value: max_dev,
        });
    }
    if sweep
        .windows(2)
        .any(|w| w[1].point.lo_flux_detected_hz < w[0].point.lo_flux_detected_hz)
    {
        return Err(AnalysisError::UnsortedSweep);
    }
    let resolvable = v_dc_hz / max_dev;
    let mut last_ok: Option<&CorrectedPoint> = None;
    let mut previous_violated = false;
    for p in sweep
        .iter()
        .skip_while(|p| !(p.point.shot_noise_ref_hz > 0.0 && p.point.shot_noise_ref_hz >= resolvable))
    {
        let dev = metric.deviation(p.dark_subtracted_hz, p.point.shot_noise_ref_hz);
        if dev <= max_dev {
            last_ok = Some(p);
            previous_violated = false;
        } else if previous_violated {
            break;
        } else {
            previous_violated = true;
        }
    }
    last_ok
        .map(|p| (p.point.lo_flux_detected_hz, p.point.variance_rate_hz))
        .ok_or(AnalysisError::NoCompliantPoints)
}

/// `-10 log10(v_dc / v_lin_max)` in dB.
pub fn clearance(v_dc_hz: f64, v_lin_max_hz: f64) -> Result<f64, AnalysisError> {
    for (name, value) in [("v_dc_hz", v_dc_hz), ("v_lin_max_hz", v_lin_max_hz)] {
        if value.is_nan() || value <= 0.0 {
            return Err(AnalysisError::NonPositive { name, value });
        }
    }
    Ok(-10.0 * (v_dc_hz / v_lin_max_hz).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub dark_threshold_hz: f64,
    pub max_dev: f64,
    pub metric: DeviationMetric,
}

impl AnalysisOptions {
    pub fn for_config(cfg: &SimConfig) -> Self {
        Self {
            dark_threshold_hz: default_dark_threshold_hz(cfg.total_dark_rate_hz()),
            max_dev: DEFAULT_MAX_DEV,
            metric: DeviationMetric::default(),
        }
    }
}

/// Dark floor, subtraction, linear limit and clearance in one pass.
pub fn analyze_sweep(
    sweep: &[SweepPoint],
    opts: &AnalysisOptions,
) -> Result<(Vec<CorrectedPoint>, ClearanceResult), AnalysisError> {
    if sweep.len() < 2 {
        return Err(AnalysisError::InsufficientSweep(sweep.len()));
    }
    let v_dc_hz = estimate_dark_variance(sweep, opts.dark_threshold_hz)?;
    let corrected = subtract_dark_variance(sweep, v_dc_hz)?;
    let (linear_limit_flux_hz, v_lin_max_hz) =
        find_linear_limit(&corrected, v_dc_hz, opts.max_dev, opts.metric)?;
    let clearance_db = clearance(v_dc_hz, v_lin_max_hz)?;
    Ok((
        corrected,
        ClearanceResult {
            v_dc_hz,
            v_lin_max_hz,
            linear_limit_flux_hz,
            clearance_db,
        },
    ))
}

/// Least-squares slope of `log10(dark-subtracted variance)` against
/// `log10(detected flux)` over points with flux in `[flux_min, flux_max]`.
pub fn loglog_slope(
    sweep: &[CorrectedPoint],
    flux_min_hz: f64,
    flux_max_hz: f64,
) -> Result<f64, AnalysisError> {
    let xy: Vec<(f64, f64)> = sweep
        .iter()
        .filter(|p| {
            let f = p.point.lo_flux_detected_hz;
            f >= flux_min_hz && f <= flux_max_hz && p.dark_subtracted_hz > 0.0
        })
        .map(|p| {
            (
                p.point.lo_flux_detected_hz.log10(),
                p.dark_subtracted_hz.log10(),
            )
        })
        .collect();
    if xy.len() < 2 {
        return Err(AnalysisError::InsufficientSweep(xy.len()));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Seed of the sweep point at `lo_flux_hz`; depends only on the flux so a
/// point reproduces regardless of the rest of the list.
pub fn sweep_point_seed(base_seed: u64, lo_flux_hz: f64) -> u64 {
    RngSpec::new(base_seed, format!("sweep:{:016x}", lo_flux_hz.to_bits())).derive_seed()
}

/// Simulates and reduces one configuration to a sweep point.
pub fn measure_point(cfg: &SimConfig, bin_width_ps: u64) -> Result<SweepPoint, Error> {
    Ok(measure_point_with(cfg, bin_width_ps, |_, _, _| ())?.0)
}

fn measure_point_with<T, F>(cfg: &SimConfig, bin_width_ps: u64, visit: F) -> Result<(SweepPoint, T), Error>
where
    F: FnOnce(&SimConfig, &BinnedCounts, &BinnedCounts) -> T,
{
    let (a, b) = simulate_detector_pair(cfg)?;
    let ba = bin_counts(&a, bin_width_ps)?;
    let bb = bin_counts(&b, bin_width_ps)?;
    drop((a, b));
    let diff = difference_series(&ba, &bb)?;
    let (variance_rate_hz, variance_rel_err) = rate_normalized_variance(&diff)?;
    drop(diff);
    let detected = cfg.detected_flux_hz();
    let point = SweepPoint {
        lo_flux_set_hz: cfg.lo_flux_hz,
        lo_flux_detected_hz: detected,
        variance_rate_hz,
        variance_rel_err,
        shot_noise_ref_hz: shot_noise_reference(detected),
        n_samples: ba.len(),
    };
    let extra = visit(cfg, &ba, &bb);
    Ok((point, extra))
}

/// Runs [`run_sweep`] and additionally hands each point's binned channels to
/// `visit`, e.g. to compute g2 on the same data.
///
/// `durations_ps`, when given, overrides the window per flux entry. Points
/// run in parallel on the current rayon pool; output order follows input.
pub fn run_sweep_with<T, F>(
    base: &SimConfig,
    fluxes: &[f64],
    durations_ps: Option<&[u64]>,
    bin_width_ps: u64,
    visit: F,
) -> Result<Vec<(SweepPoint, T)>, Error>
where
    T: Send,
    F: Fn(&SimConfig, &BinnedCounts, &BinnedCounts) -> T + Sync,
{
    if fluxes.is_empty() {
        return Err(AnalysisError::EmptyFluxList.into());
    }
    if let Some(d) = durations_ps {
        if d.len() != fluxes.len() {
            return Err(AnalysisError::MismatchedLength(fluxes.len(), d.len()).into());
        }
    }
    fluxes
        .par_iter()
        .enumerate()
        .map(|(i, &flux)| {
            let cfg = SimConfig {
                lo_flux_hz: flux,
                duration_ps: durations_ps.map_or(base.duration_ps, |d| d[i]),
                seed: sweep_point_seed(base.seed, flux),
                ..*base
            };
            measure_point_with(&cfg, bin_width_ps, &visit)
        })
        .collect()
}

pub fn run_sweep(
    base: &SimConfig,
    fluxes: &[f64],
    durations_ps: Option<&[u64]>,
    bin_width_ps: u64,
) -> Result<Vec<SweepPoint>, Error> {
    Ok(run_sweep_with(base, fluxes, durations_ps, bin_width_ps, |_, _, _| ())?
        .into_iter()
        .map(|(p, ())| p)
        .collect())
}

pub const SWEEP_CSV_HEADER: &str = "lo_flux_set_hz,lo_flux_detected_hz,variance_rate_hz,variance_rel_err,shot_noise_ref_hz,dark_subtracted_variance_hz";

/// Writes the sweep CSV. The last column is empty when no dark floor is known.
pub fn write_sweep_csv<W: Write>(
    w: &mut W,
    sweep: &[SweepPoint],
    v_dc_hz: Option<f64>,
) -> Result<(), Error> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for p in sweep {
        let corrected = v_dc_hz
            .map(|v| (p.variance_rate_hz - v).max(0.0).to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.lo_flux_set_hz,
            p.lo_flux_detected_hz,
            p.variance_rate_hz,
            p.variance_rel_err,
            p.shot_noise_ref_hz,
            corrected
        )?;
    }
    Ok(())
}

/// Flat JSON object with the four clearance keys.
pub fn format_clearance_report(r: &ClearanceResult) -> String {
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"v_dc_hz\": {},", r.v_dc_hz);
    let _ = writeln!(s, "  \"v_lin_max_hz\": {},", r.v_lin_max_hz);
    let _ = writeln!(s, "  \"linear_limit_flux_hz\": {},", r.linear_limit_flux_hz);
    let _ = writeln!(s, "  \"clearance_db\": {}", r.clearance_db);
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::seconds_to_ps;
    use crate::simgen::{generate_poisson_stream, CHANNEL_A};
    use proptest::prelude::*;

    fn binned(counts: &[u32]) -> BinnedCounts {
        BinnedCounts {
            channel_id: 0,
            bin_width_ps: 500_000,
            counts: counts.to_vec(),
        }
    }

    fn series(diffs: &[i64]) -> DifferenceSeries {
        DifferenceSeries {
            bin_width_ps: 500_000,
            diffs: diffs.to_vec(),
        }
    }

    fn point(detected: f64, variance: f64) -> SweepPoint {
        SweepPoint {
            lo_flux_set_hz: detected / 0.93,
            lo_flux_detected_hz: detected,
            variance_rate_hz: variance,
            variance_rel_err: 1e-3,
            shot_noise_ref_hz: shot_noise_reference(detected),
            n_samples: 1000,
        }
    }

    fn corrected(points: &[(f64, f64)], v_dc: f64) -> Vec<CorrectedPoint> {
        let sweep: Vec<_> = points.iter().map(|&(f, v)| point(f, v)).collect();
        subtract_dark_variance(&sweep, v_dc).unwrap()
    }

    fn log_fluxes(start: f64, stop: f64, n: usize) -> Vec<f64> {
        let r = (stop / start).ln() / (n - 1) as f64;
        (0..n).map(|i| start * (r * i as f64).exp()).collect()
    }

    #[test]
    fn difference_examples() {
        let a = binned(&[2, 0, 1]);
        let b = binned(&[1, 1, 1]);
        assert_eq!(difference_series(&a, &b).unwrap().diffs, vec![1, -1, 0]);
        assert!(difference_series(&a, &a).unwrap().diffs.iter().all(|&d| d == 0));
        assert_eq!(
            difference_series(&a, &binned(&[1])),
            Err(AnalysisError::MismatchedLength(3, 1))
        );
        let mut c = b.clone();
        c.bin_width_ps = 1;
        assert!(matches!(
            difference_series(&a, &c),
            Err(AnalysisError::MismatchedBinWidth(..))
        ));
    }

    #[test]
    fn variance_basics() {
        assert_eq!(rate_normalized_variance(&series(&[3, 3, 3, 3])).unwrap().0, 0.0);
        assert_eq!(
            rate_normalized_variance(&series(&[1])),
            Err(AnalysisError::TooFewSamples(1))
        );
        // [1, -1]: sample variance 2 counts^2 per 0.5 us bin
        let (v, e) = rate_normalized_variance(&series(&[1, -1])).unwrap();
        assert!((v - 4e6).abs() < 1e-6);
        assert!((e - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rel_err_at_ten_megasamples() {
        let e = variance_rel_err(10_000_000);
        assert!((e - 2.236e-4).abs() < 5e-8, "{e}");
    }

    #[test]
    fn variance_is_shift_invariant_and_exact() {
        // A large offset would wreck a naive sum-of-squares in f64.
        let base: Vec<i64> = (0..1000).map(|i| (i % 7) - 3).collect();
        let offset: Vec<i64> = base.iter().map(|x| x + 1_000_000_000).collect();
        let v0 = rate_normalized_variance(&series(&base)).unwrap().0;
        let v1 = rate_normalized_variance(&series(&offset)).unwrap().0;
        assert_eq!(v0, v1);
    }

    fn poisson_pair(rate_hz: f64, seconds: f64, seed: u64) -> (BinnedCounts, BinnedCounts) {
        let d = seconds_to_ps(seconds);
        let a = generate_poisson_stream(rate_hz, d, &RngSpec::new(seed, "a"));
        let b = generate_poisson_stream(rate_hz, d, &RngSpec::new(seed, "b"));
        (bin_counts(&a, 500_000).unwrap(), bin_counts(&b, 500_000).unwrap())
    }

    /// Standard error of the sample variance of a Skellam(mu, mu) variable:
    /// sigma^2 = kappa_4 = 2 mu, so Var(s^2) ~ (2 mu + 8 mu^2) / n.
    fn skellam_variance_se(mu: f64, n: f64) -> f64 {
        ((2.0 * mu + 8.0 * mu * mu) / n).sqrt()
    }

    #[test]
    fn poisson_difference_at_linearity_limit() {
        // 0.1825 counts per 500 ns bin on each channel.
        let (a, b) = poisson_pair(3.65e5, 1.0, 8);
        let d = difference_series(&a, &b).unwrap();
        let (v, _) = rate_normalized_variance(&d).unwrap();
        let se = skellam_variance_se(0.1825, d.len() as f64) / 500e-9;
        assert!((v - 7.3e5).abs() < 4.0 * se, "{v} vs 7.3e5 (se {se})");
        let mean_se = (v * 500e-9 / d.len() as f64).sqrt();
        assert!(mean_difference(&d).abs() < 4.0 * mean_se);
    }

    #[test]
    fn shot_noise_reference_is_identity_line() {
        assert_eq!(shot_noise_reference(0.0), 0.0);
        assert_eq!(shot_noise_reference(7.3e5), 7.3e5);
        assert_eq!(shot_noise_reference(2.0 * 123.4), 2.0 * shot_noise_reference(123.4));
    }

    #[test]
    fn dark_variance_estimate() {
        let sweep = vec![point(0.5, 17.0), point(1.0, 19.0), point(100.0, 118.0)];
        assert_eq!(estimate_dark_variance(&sweep, 1.8).unwrap(), 18.0);
        assert_eq!(estimate_dark_variance(&sweep, 0.6).unwrap(), 17.0);
        assert_eq!(
            estimate_dark_variance(&sweep, 0.5),
            Err(AnalysisError::NoDarkPoints(0.5))
        );
        assert_eq!(default_dark_threshold_hz(18.0), 1.8);
    }

    #[test]
    fn dark_only_variance_converges_to_total_dark_rate() {
        let cfg = SimConfig {
            duration_ps: seconds_to_ps(20.0),
            seed: 77,
            ..Default::default()
        };
        let p = measure_point(&cfg, 500_000).unwrap();
        // Poisson difference: variance = 18 Hz, se = sqrt(18 / T)
        let se = (18.0f64 / 20.0).sqrt();
        assert!((p.variance_rate_hz - 18.0).abs() < 4.0 * se, "{}", p.variance_rate_hz);
        assert_eq!(p.lo_flux_detected_hz, 0.0);
    }

    #[test]
    fn dark_subtraction() {
        let c = corrected(&[(0.0, 18.0), (1e6, 1e6)], 18.0);
        assert_eq!(c[0].dark_subtracted_hz, 0.0);
        assert_eq!(c[0].point.variance_rate_hz, 18.0);
        let rel = (c[1].point.variance_rate_hz - c[1].dark_subtracted_hz) / 1e6;
        assert!(rel <= 18.0 / 1e6);
        // never negative
        assert_eq!(corrected(&[(0.0, 10.0)], 18.0)[0].dark_subtracted_hz, 0.0);
        assert!(subtract_dark_variance(&[], -1.0).is_err());
    }

    #[test]
    fn linear_limit_on_exact_reference_is_top_point() {
        let fluxes = log_fluxes(1.0, 1e6, 20);
        let pts: Vec<_> = fluxes.iter().map(|&f| (f, f + 18.0)).collect();
        let c = corrected(&pts, 18.0);
        let top = *fluxes.last().unwrap();
        let (limit, v) = find_linear_limit(&c, 18.0, 0.1, DeviationMetric::Relative).unwrap();
        assert_eq!(limit, top);
        assert_eq!(v, top + 18.0);
        let (limit, _) = find_linear_limit(&c, 18.0, 0.1, DeviationMetric::Log10).unwrap();
        assert_eq!(limit, top);
    }

    /// Asymptotic difference variance for two dead-time-limited channels
    /// each seeing rate f/2: f/2 / (1 + x)^3 per channel, x = (f/2)·tau.
    fn dead_time_variance(f: f64, tau_s: f64) -> f64 {
        let x = 0.5 * f * tau_s;
        f / (1.0 + x).powi(3)
    }

    #[test]
    fn linear_limit_stops_before_dead_time_rollover() {
        let tau = 100e-9;
        let fluxes = log_fluxes(1.0, 2.3e7, 60);
        let pts: Vec<_> = fluxes
            .iter()
            .map(|&f| (f, dead_time_variance(f, tau) + 18.0))
            .collect();
        let c = corrected(&pts, 18.0);
        for metric in [DeviationMetric::Relative, DeviationMetric::Log10] {
            let (limit, _) = find_linear_limit(&c, 18.0, 0.1, metric).unwrap();
            // Oracle: largest listed flux whose analytic deviation is <= 0.1.
            let expected = fluxes
                .iter()
                .copied()
                .filter(|&f| metric.deviation(dead_time_variance(f, tau), f) <= 0.1)
                .fold(0.0, f64::max);
            assert_eq!(limit, expected, "{metric:?}");
            // Rollover: lambda*tau = 0.1 per channel.
            assert!(limit < 2.0 * 0.1 / tau);
        }
    }

    #[test]
    fn linear_limit_tolerates_a_single_outlier() {
        let fluxes = log_fluxes(1e3, 1e6, 10);
        let mut pts: Vec<_> = fluxes.iter().map(|&f| (f, f)).collect();
        pts[4].1 *= 0.5;
        let c = corrected(&pts, 0.0);
        let (limit, _) = find_linear_limit(&c, 0.0, 0.1, DeviationMetric::Relative).unwrap();
        assert_eq!(limit, fluxes[9]);

        // Two consecutive violations end the scan.
        pts[5].1 *= 0.5;
        let c = corrected(&pts, 0.0);
        let (limit, _) = find_linear_limit(&c, 0.0, 0.1, DeviationMetric::Relative).unwrap();
        assert_eq!(limit, fluxes[3]);
    }

    #[test]
    fn linear_limit_ignores_points_buried_in_the_floor() {
        // Below 180 Hz the subtracted 18 Hz floor dominates; noisy there.
        let pts = vec![
            (1.0, 30.0),
            (10.0, 10.0),
            (50.0, 100.0),
            (100.0, 60.0),
            (200.0, 218.0),
            (400.0, 418.0),
            (800.0, 818.0),
        ];
        let c = corrected(&pts, 18.0);
        let (limit, _) = find_linear_limit(&c, 18.0, 0.1, DeviationMetric::Relative).unwrap();
        assert_eq!(limit, 800.0);
    }

    #[test]
    fn linear_limit_errors() {
        let c = corrected(&[(1e3, 10.0), (1e4, 10.0)], 0.0);
        assert_eq!(
            find_linear_limit(&c, 0.0, 0.1, DeviationMetric::Relative),
            Err(AnalysisError::NoCompliantPoints)
        );
        let c = corrected(&[(1e4, 1e4), (1e3, 1e3)], 0.0);
        assert_eq!(
            find_linear_limit(&c, 0.0, 0.1, DeviationMetric::Relative),
            Err(AnalysisError::UnsortedSweep)
        );
    }

    #[test]
    fn clearance_examples() {
        let db = clearance(18.0, 7.3e5).unwrap();
        assert!((db - 46.08).abs() < 0.005, "{db}");
        assert!((db - 46.0).abs() <= 1.1);
        assert_eq!(clearance(5.0, 5.0).unwrap(), 0.0);
        assert!((clearance(1.0, 100.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(clearance(0.0, 1.0).is_err());
        assert!(clearance(1.0, -1.0).is_err());
    }

    #[test]
    fn analyze_requires_two_points() {
        let opts = AnalysisOptions::for_config(&SimConfig::default());
        assert_eq!(
            analyze_sweep(&[point(0.0, 18.0)], &opts).unwrap_err(),
            AnalysisError::InsufficientSweep(1)
        );
    }

    #[test]
    fn slope_of_exact_line() {
        let pts: Vec<_> = log_fluxes(10.0, 1e5, 9).iter().map(|&f| (f, 3.0 * f + 18.0)).collect();
        let c = corrected(&pts, 18.0);
        assert!((loglog_slope(&c, 1.0, 1e6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_single_zero_point_is_dark_floor() {
        let base = SimConfig {
            duration_ps: seconds_to_ps(2.0),
            seed: 5,
            ..Default::default()
        };
        let sweep = run_sweep(&base, &[0.0], None, 500_000).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].n_samples, 4_000_000);
        assert!(sweep[0].variance_rate_hz > 0.0 && sweep[0].variance_rate_hz < 40.0);
    }

    #[test]
    fn sweep_is_deterministic_and_monotone_above_floor() {
        let base = SimConfig {
            duration_ps: seconds_to_ps(0.2),
            seed: 9,
            ..Default::default()
        };
        let fluxes = log_fluxes(1e3, 1e6, 7);
        let first = run_sweep(&base, &fluxes, None, 500_000).unwrap();
        assert_eq!(first, run_sweep(&base, &fluxes, None, 500_000).unwrap());
        assert!(first
            .windows(2)
            .all(|w| w[1].variance_rate_hz > w[0].variance_rate_hz));
        // Each point depends only on its own flux.
        let alone = run_sweep(&base, &fluxes[3..4], None, 500_000).unwrap();
        assert_eq!(alone[0], first[3]);

        let durations = vec![seconds_to_ps(0.1); fluxes.len()];
        let short = run_sweep(&base, &fluxes, Some(&durations), 500_000).unwrap();
        assert_eq!(short[0].n_samples, 200_000);
        assert!(run_sweep(&base, &fluxes, Some(&durations[1..]), 500_000).is_err());
        assert!(run_sweep(&base, &[], None, 500_000).is_err());
    }

    #[test]
    fn balanced_simulation_has_zero_mean_difference() {
        let cfg = SimConfig {
            lo_flux_hz: 1e6,
            duration_ps: seconds_to_ps(0.5),
            seed: 31,
            ..Default::default()
        };
        let (a, b) = simulate_detector_pair(&cfg).unwrap();
        assert_eq!(a.channel_id(), CHANNEL_A);
        let d = difference_series(&bin_counts(&a, 500_000).unwrap(), &bin_counts(&b, 500_000).unwrap())
            .unwrap();
        let (v, _) = rate_normalized_variance(&d).unwrap();
        let se = (v * 500e-9 / d.len() as f64).sqrt();
        assert!(mean_difference(&d).abs() < 4.0 * se);
    }

    #[test]
    fn csv_and_report_format() {
        let sweep = vec![point(0.0, 18.0), point(930.0, 950.0)];
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &sweep, Some(18.0)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[2], "1000,930,950,0.001,930,932");
        let mut out = Vec::new();
        write_sweep_csv(&mut out, &sweep[..1], None).unwrap();
        assert!(String::from_utf8(out).unwrap().ends_with(",\n"));

        let report = format_clearance_report(&ClearanceResult {
            v_dc_hz: 18.0,
            v_lin_max_hz: 7.3e5,
            linear_limit_flux_hz: 7.3e5,
            clearance_db: 46.08,
        });
        assert!(report.contains("\"v_dc_hz\": 18,"));
        assert!(report.contains("\"clearance_db\": 46.08\n"));
    }

    proptest! {
        #[test]
        fn clearance_depends_only_on_ratio(v in 1e-3f64..1e3, r in 1.0f64..1e6, k in 1e-6f64..1e6) {
            let a = clearance(v, v * r).unwrap();
            let b = clearance(k * v, k * v * r).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }
}
