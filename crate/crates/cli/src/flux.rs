//! Flux list syntax: `log:<start>:<stop>:<points>` or `f1,f2,...`.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluxSpecError(pub String);

impl fmt::Display for FluxSpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad flux list: {}", self.0)
    }
}

impl std::error::Error for FluxSpecError {}

fn number(s: &str) -> Result<f64, FluxSpecError> {
    let x: f64 = s
        .trim()
        .parse()
        .map_err(|_| FluxSpecError(format!("not a number: {s:?}")))?;
    if !x.is_finite() || x < 0.0 {
        return Err(FluxSpecError(format!("flux must be finite and >= 0, got {s}")));
    }
    Ok(x)
}

/// Geometric grid from `start` to `stop` inclusive; both ends are exact.
pub fn log_spaced(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let step = (stop / start).ln() / (points - 1) as f64;
    (0..points)
        .map(|i| match i {
            0 => start,
            i if i == points - 1 => stop,
            i => start * (step * i as f64).exp(),
        })
        .collect()
}

/// Parses a flux list and returns it sorted ascending.
pub fn parse_flux_spec(spec: &str) -> Result<Vec<f64>, FluxSpecError> {
    let mut fluxes = if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [start, stop, points] = parts[..] else {
            return Err(FluxSpecError(format!(
                "expected log:<start>:<stop>:<points>, got {spec:?}"
            )));
        };
        let (start, stop) = (number(start)?, number(stop)?);
        let points: usize = points
            .trim()
            .parse()
            .map_err(|_| FluxSpecError(format!("bad point count {points:?}")))?;
        if points == 0 {
            return Err(FluxSpecError("point count must be at least 1".into()));
        }
        if start <= 0.0 || stop <= 0.0 {
            return Err(FluxSpecError("log grid bounds must be positive".into()));
        }
        log_spaced(start, stop, points)
    } else {
        spec.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    fluxes.sort_by(f64::total_cmp);
    if let Some(w) = fluxes.windows(2).find(|w| w[0] == w[1]) {
        return Err(FluxSpecError(format!("duplicate flux {}", w[0])));
    }
    Ok(fluxes)
}
