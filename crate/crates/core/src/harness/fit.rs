//! Least-squares exponential decay fit of a norm time series.

use serde::Serialize;

use crate::error::{Error, Result};

/// `log |f(t)| ~ intercept - nu * t` over `window`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub nu: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when the response has zero variance.
    pub r_squared: f64,
    pub window: [f64; 2],
    pub samples: usize,
}

/// Fits samples with `window[0] <= t <= window[1]`. Needs at least three of
/// them, all with positive norm.
pub fn fit_decay(times: &[f64], norms: &[f64], window: [f64; 2]) -> Result<DecayFit> {
    if times.len() != norms.len() {
        return Err(Error::Fit(format!(
            "{} times but {} norms",
            times.len(),
            norms.len()
        )));
    }
    let slack = 1e-9 * window[1].abs().max(1.0);
    let selected: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= window[0] - slack && **t <= window[1] + slack)
        .map(|(&t, &n)| (t, n))
        .collect();
    if selected.len() < 3 {
        return Err(Error::Fit(format!(
            "{} samples in window [{}, {}], need at least 3",
            selected.len(),
            window[0],
            window[1]
        )));
    }
    if let Some(&(t, n)) = selected.iter().find(|(_, n)| !(*n > 0.0 && n.is_finite())) {
        return Err(Error::Fit(format!("norm {n} at t = {t} is not positive")));
    }

    let count = selected.len() as f64;
    let mean_t = selected.iter().map(|s| s.0).sum::<f64>() / count;
    let mean_y = selected.iter().map(|s| s.1.ln()).sum::<f64>() / count;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, n) in &selected {
        let dt = t - mean_t;
        let dy = n.ln() - mean_y;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::Fit("all samples share one time".into()));
    }
    let (lo, hi) = selected
        .iter()
        .map(|s| s.1.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let flat = hi - lo <= 4.0 * f64::EPSILON * mean_y.abs().max(1.0);
    // A zero-variance response is an exactly flat line, not rounding noise.
    let slope = if flat { 0.0 } else { sty / stt };
    let intercept = mean_y - slope * mean_t;
    let residual: f64 = selected
        .iter()
        .map(|&(t, n)| {
            let e = n.ln() - (intercept + slope * t);
            e * e
        })
        .sum();
    let r_squared = if flat {
        1.0
    } else {
        (1.0 - residual / syy).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        nu: if slope == 0.0 { 0.0 } else { -slope },
        intercept,
        r_squared,
        window,
        samples: selected.len(),
    })
}
