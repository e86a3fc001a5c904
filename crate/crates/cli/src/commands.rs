use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use clickhomodyne_core::hbt::{
    flag_low_statistics, g2_curve, g2_scan_point, write_g2_csv, write_g2_scan_csv, FluxG2,
};
use clickhomodyne_core::homodyne::{
    analyze_sweep, default_dark_threshold_hz, difference_series, format_clearance_report,
    mean_difference, rate_normalized_variance, run_sweep_with, write_sweep_csv, AnalysisOptions,
};
use clickhomodyne_core::model::{parse_config, seconds_to_ps, to_config_string, validate_config};
use clickhomodyne_core::simgen::simulate_detector_pair;
use clickhomodyne_core::timetag::{bin_counts, encode_stream, read_stream, write_binned_csv};
use clickhomodyne_core::{AnalysisError, ConfigError, SimConfig, Violation};

use crate::flux::parse_flux_spec;
use crate::output::{sha256_hex, write_atomic, write_with};
use crate::{AnalyzeArgs, Failure, Mode, SimOverrides, SimulateArgs, SweepArgs};

type CmdResult = Result<(), Failure>;

fn bad_flag(flag: &str, message: &str) -> Failure {
    ConfigError::Invalid(vec![Violation {
        field: flag.to_string(),
        message: message.to_string(),
    }])
    .into()
}

fn seconds_flag(flag: &str, s: f64) -> Result<u64, Failure> {
    if !(s.is_finite() && s > 0.0) {
        return Err(bad_flag(flag, "must be a positive number of seconds"));
    }
    Ok(seconds_to_ps(s))
}

fn ns_to_ps(flag: &str, ns: f64, allow_zero: bool) -> Result<u64, Failure> {
    let ok = ns.is_finite() && (ns > 0.0 || allow_zero && ns == 0.0);
    let ps = (ns * 1000.0).round();
    if !ok || ps > u64::MAX as f64 || (!allow_zero && ps < 1.0) {
        return Err(bad_flag(flag, "out of range"));
    }
    Ok(ps as u64)
}

/// Reads the configuration, applies command-line overrides, then validates.
fn load(path: &Path, ov: &SimOverrides) -> Result<SimConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = ov.duration_s {
        cfg.duration_ps = seconds_flag("--duration-s", s)?;
    }
    if let Some(ns) = ov.dead_time_ns {
        let ps = ns_to_ps("--dead-time-ns", ns, true)?;
        cfg.detector_a.dead_time_ps = ps;
        cfg.detector_b.dead_time_ps = ps;
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    Ok(validate_config(cfg)?)
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let cfg = load(&args.config, &args.sim)?;
    let (a, b) = simulate_detector_pair(&cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(io_at(&args.out_dir))?;

    let mut manifest = String::from("# clickhomodyne simulate manifest\n");
    manifest.push_str(&to_config_string(&cfg));
    for (name, stream) in [("channel_a", &a), ("channel_b", &b)] {
        let file = format!("{name}.ttg");
        let bytes = encode_stream(stream);
        let path = args.out_dir.join(&file);
        write_atomic(&path, &bytes).map_err(io_at(&path))?;
        let _ = writeln!(manifest, "{name}_file={file}");
        let _ = writeln!(manifest, "{name}_tags={}", stream.len());
        let _ = writeln!(manifest, "{name}_sha256={}", sha256_hex(&bytes));
        println!("{file}: {} tags, {:.6} Hz", stream.len(), stream.rate_hz());
    }
    let path = args.out_dir.join("manifest.txt");
    write_atomic(&path, manifest.as_bytes()).map_err(io_at(&path))?;
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let base = load(&args.config, &args.sim)?;
    let fluxes = parse_flux_spec(&args.flux)?;
    let bin_ps = ns_to_ps("--bin-width-ns", args.bin_width_ns, false)?;
    if !(args.max_dev.is_finite() && args.max_dev > 0.0) {
        return Err(bad_flag("--max-dev", "must be positive"));
    }
    let durations = if args.low_flux_points > 0 {
        let low = seconds_flag("--low-flux-duration-s", args.low_flux_duration_s)?;
        Some(
            (0..fluxes.len())
                .map(|i| if i < args.low_flux_points { low } else { base.duration_ps })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };

    let want_g2 = args.g2_out.is_some();
    let run = || {
        run_sweep_with(&base, &fluxes, durations.as_deref(), bin_ps, |_, a, b| {
            want_g2.then(|| g2_scan_point(a, b, args.g2_tau, args.min_coincidences))
        })
    };
    let results = match args.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| bad_flag("--jobs", &e.to_string()))?
            .install(run),
        None => run(),
    }?;

    let mut points = Vec::with_capacity(results.len());
    let mut scan = Vec::new();
    for (p, g2) in results {
        if let Some(est) = g2 {
            scan.push(FluxG2 {
                lo_flux_set_hz: p.lo_flux_set_hz,
                lo_flux_detected_hz: p.lo_flux_detected_hz,
                estimate: est?,
            });
        }
        points.push(p);
    }

    let opts = AnalysisOptions {
        dark_threshold_hz: args
            .dark_threshold_hz
            .unwrap_or_else(|| default_dark_threshold_hz(base.total_dark_rate_hz())),
        max_dev: args.max_dev,
        metric: args.metric.into(),
    };
    let analysis = analyze_sweep(&points, &opts);
    let v_dc = analysis.as_ref().ok().map(|(_, r)| r.v_dc_hz);
    write_with(&args.out, |w| write_sweep_csv(w, &points, v_dc)).map_err(Failure::from)?;
    if let Some(path) = &args.g2_out {
        write_with(path, |w| write_g2_scan_csv(w, &scan))?;
    }

    let (_, result) = analysis?;
    let report = format_clearance_report(&result);
    match &args.report {
        Some(path) => write_atomic(path, report.as_bytes()).map_err(io_at(path))?,
        None => print!("{report}"),
    }
    Ok(())
}

pub const HOMODYNE_CSV_HEADER: &str =
    "bin_width_ns,n_bins,rate_a_hz,rate_b_hz,variance_rate_hz,variance_rel_err,mean_difference";

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let a = read_stream(&args.file_a)?;
    let b = read_stream(&args.file_b)?;
    if a.duration_ps() != b.duration_ps() {
        return Err(AnalysisError::MismatchedDuration(a.duration_ps(), b.duration_ps()).into());
    }
    let bin_ps = ns_to_ps("--bin-width-ns", args.bin_width_ns, false)?;
    let ba = bin_counts(&a, bin_ps)?;
    let bb = bin_counts(&b, bin_ps)?;
    if let Some(path) = &args.binned_csv {
        write_with(path, |w| write_binned_csv(w, &ba, &bb))?;
    }

    let mut out = Vec::new();
    match args.mode {
        Mode::Homodyne => {
            let diff = difference_series(&ba, &bb)?;
            let (var, rel) = rate_normalized_variance(&diff)?;
            writeln!(out, "{HOMODYNE_CSV_HEADER}")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                bin_ps as f64 / 1000.0,
                diff.len(),
                a.rate_hz(),
                b.rate_hz(),
                var,
                rel,
                mean_difference(&diff)
            )?;
        }
        Mode::G2 => {
            let mut curve = g2_curve(&ba, &bb, args.tau_range)?;
            for p in &mut curve.points {
                flag_low_statistics(p, args.min_coincidences);
            }
            write_g2_csv(&mut out, &curve)?;
        }
    }
    match &args.out {
        Some(path) => write_atomic(path, &out).map_err(io_at(path))?,
        None => std::io::stdout().write_all(&out)?,
    }
    Ok(())
}
