//! Hanbury-Brown–Twiss analysis of the same two channels.
//!
//! Each bin is reduced to "clicked / did not click", coincidences are
//! same-bin occupancy after shifting one channel by whole bins, and
//!
//! ```text
//! g2(tau) = n_bins * c / (s1 * s2)
//! ```
//!
//! The error bar propagates Poisson fluctuations of the three disjoint
//! counts: coincidences `c`, channel-1-only clicks `s1 - c` and
//! channel-2-only clicks `s2 - c`.

use std::io::Write;

use crate::error::{AnalysisError, Error};
use crate::model::{BinnedCounts, G2Curve, G2Estimate, G2Flag, TimeTagStream};
use crate::timetag::{bin_counts, shifted_slice};

/// Relative error of `g2` from Poisson statistics of the disjoint counts.
/// Undefined (`None`) without coincidences.
pub fn g2_relative_error(coincidences: u64, singles_1: u64, singles_2: u64) -> Option<f64> {
    if coincidences == 0 || singles_1 == 0 || singles_2 == 0 {
        return None;
    }
    let (c, s1, s2) = (coincidences as f64, singles_1 as f64, singles_2 as f64);
    // Grouped so the result is exactly symmetric in the two channels.
    let d_c = 1.0 / c - (1.0 / s1 + 1.0 / s2);
    let var = c * d_c * d_c + ((s1 - c) / (s1 * s1) + (s2 - c) / (s2 * s2));
    Some(var.sqrt())
}

fn occupancy(b: &BinnedCounts) -> Vec<u8> {
    b.counts.iter().map(|&c| (c > 0) as u8).collect()
}

fn check_pair(a: &BinnedCounts, b: &BinnedCounts) -> Result<(), AnalysisError> {
    if a.bin_width_ps != b.bin_width_ps {
        return Err(AnalysisError::MismatchedBinWidth(a.bin_width_ps, b.bin_width_ps));
    }
    if a.len() != b.len() {
        return Err(AnalysisError::MismatchedLength(a.len(), b.len()));
    }
    Ok(())
}

fn estimate(a: &[u8], b: &[u8], tau_bins: i64) -> Result<G2Estimate, AnalysisError> {
    // Pairs (a[i], b[i + tau]) over the overlap.
    let xa = shifted_slice(a, tau_bins)?;
    let xb = shifted_slice(b, -tau_bins)?;
    let (mut c, mut s1, mut s2) = (0u64, 0u64, 0u64);
    for (&x, &y) in xa.iter().zip(xb) {
        s1 += x as u64;
        s2 += y as u64;
        c += (x & y) as u64;
    }
    if s1 == 0 || s2 == 0 {
        return Err(AnalysisError::InsufficientSingles);
    }
    let n_bins = xa.len() as u64;
    let g2 = n_bins as f64 * c as f64 / (s1 as f64 * s2 as f64);
    let g2_err = g2_relative_error(c, s1, s2).map(|r| g2 * r);
    Ok(G2Estimate {
        tau_bins,
        coincidences: c,
        singles_1: s1,
        singles_2: s2,
        n_bins,
        g2,
        g2_err,
        flag: if c == 0 {
            G2Flag::ZeroCoincidences
        } else {
            G2Flag::Ok
        },
    })
}

/// g2 at a shift of `tau_bins` whole bins; channel 2 is read `tau_bins`
/// later than channel 1.
pub fn g2_at_shift(
    a: &BinnedCounts,
    b: &BinnedCounts,
    tau_bins: i64,
) -> Result<G2Estimate, AnalysisError> {
    check_pair(a, b)?;
    estimate(&occupancy(a), &occupancy(b), tau_bins)
}

/// g2 for every shift in `[-tau_range, tau_range]`.
pub fn g2_curve(
    a: &BinnedCounts,
    b: &BinnedCounts,
    tau_range: u64,
) -> Result<G2Curve, AnalysisError> {
    check_pair(a, b)?;
    if tau_range.saturating_mul(2) >= a.len() as u64 {
        return Err(AnalysisError::TauRangeTooLarge {
            tau_range,
            len: a.len(),
        });
    }
    let (oa, ob) = (occupancy(a), occupancy(b));
    let r = tau_range as i64;
    let points = (-r..=r)
        .map(|tau| estimate(&oa, &ob, tau))
        .collect::<Result<_, _>>()?;
    Ok(G2Curve {
        bin_width_ps: a.bin_width_ps,
        points,
    })
}

/// Marks estimates with fewer than `min_coincidences` coincidences.
pub fn flag_low_statistics(est: &mut G2Estimate, min_coincidences: u64) {
    if est.flag == G2Flag::Ok && est.coincidences < min_coincidences {
        est.flag = G2Flag::LowStatistics;
    }
}

/// g2 at one sweep point. Never fails on sparse data: an empty channel is
/// reported as `g2 = 0` flagged [`G2Flag::NoSingles`].
pub fn g2_scan_point(
    a: &BinnedCounts,
    b: &BinnedCounts,
    tau_bins: i64,
    min_coincidences: u64,
) -> Result<G2Estimate, AnalysisError> {
    check_pair(a, b)?;
    match g2_at_shift(a, b, tau_bins) {
        Ok(mut est) => {
            flag_low_statistics(&mut est, min_coincidences);
            Ok(est)
        }
        Err(AnalysisError::InsufficientSingles) => {
            let (xa, xb) = (
                shifted_slice(&a.counts, tau_bins)?,
                shifted_slice(&b.counts, -tau_bins)?,
            );
            Ok(G2Estimate {
                tau_bins,
                coincidences: 0,
                singles_1: xa.iter().filter(|&&c| c > 0).count() as u64,
                singles_2: xb.iter().filter(|&&c| c > 0).count() as u64,
                n_bins: xa.len() as u64,
                g2: 0.0,
                g2_err: None,
                flag: G2Flag::NoSingles,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxG2 {
    pub lo_flux_set_hz: f64,
    pub lo_flux_detected_hz: f64,
    pub estimate: G2Estimate,
}

/// One streams pair of a flux sweep.
#[derive(Debug, Clone)]
pub struct ScanInput {
    pub lo_flux_set_hz: f64,
    pub lo_flux_detected_hz: f64,
    pub a: TimeTagStream,
    pub b: TimeTagStream,
}

/// g2 at `tau_bins` for every sweep point.
pub fn g2_flux_scan(
    inputs: &[ScanInput],
    bin_width_ps: u64,
    tau_bins: i64,
    min_coincidences: u64,
) -> Result<Vec<FluxG2>, AnalysisError> {
    inputs
        .iter()
        .map(|p| {
            let a = bin_counts(&p.a, bin_width_ps)?;
            let b = bin_counts(&p.b, bin_width_ps)?;
            Ok(FluxG2 {
                lo_flux_set_hz: p.lo_flux_set_hz,
                lo_flux_detected_hz: p.lo_flux_detected_hz,
                estimate: g2_scan_point(&a, &b, tau_bins, min_coincidences)?,
            })
        })
        .collect()
}

pub const G2_CSV_HEADER: &str = "tau_bins,tau_ns,coincidences,singles_1,singles_2,n_bins,g2,g2_err,flag";
pub const G2_SCAN_CSV_HEADER: &str = "lo_flux_set_hz,lo_flux_detected_hz,tau_bins,coincidences,singles_1,singles_2,n_bins,g2,g2_err,flag";

fn err_field(e: &G2Estimate) -> String {
    e.g2_err.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_g2_csv<W: Write>(w: &mut W, curve: &G2Curve) -> Result<(), Error> {
    writeln!(w, "{G2_CSV_HEADER}")?;
    for p in &curve.points {
        let tau_ns = p.tau_bins as f64 * curve.bin_width_ps as f64 / 1000.0;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.tau_bins,
            tau_ns,
            p.coincidences,
            p.singles_1,
            p.singles_2,
            p.n_bins,
            p.g2,
            err_field(p),
            p.flag.as_str()
        )?;
    }
    Ok(())
}

pub fn write_g2_scan_csv<W: Write>(w: &mut W, scan: &[FluxG2]) -> Result<(), Error> {
    writeln!(w, "{G2_SCAN_CSV_HEADER}")?;
    for s in scan {
        let p = &s.estimate;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.lo_flux_set_hz,
            s.lo_flux_detected_hz,
            p.tau_bins,
            p.coincidences,
            p.singles_1,
            p.singles_2,
            p.n_bins,
            p.g2,
            err_field(p),
            p.flag.as_str()
        )?;
    }
    Ok(())
}
