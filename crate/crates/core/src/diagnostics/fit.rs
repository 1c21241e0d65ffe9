use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples a fit window must contain.
pub const MIN_FIT_SAMPLES: usize = 8;

/// Power-law fit `y ≈ C (1 + t)^exponent` over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub quantity: String,
    pub t0: f64,
    pub t1: f64,
    pub exponent: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares slope of `ln y` against `ln(1 + t)` over samples with
/// `t0 ≤ t ≤ t1`.
pub fn decay_fit(quantity: &str, series: &[(f64, f64)], t0: f64, t1: f64) -> Result<DecayFit> {
    if !(t0 >= 1.0 && t1 > t0) {
        return Err(Error::config(format!(
            "fit window [{t0}, {t1}] for {quantity} must satisfy t1 > t0 >= 1"
        )));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .copied()
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Data(format!(
            "{quantity}: {} samples in [{t0}, {t1}], need at least {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    if let Some((t, y)) = pts.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::Data(format!(
            "{quantity}: non-positive sample {y} at t = {t}"
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, y)| y.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let exponent = sxy / sxx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        quantity: quantity.to_string(),
        t0,
        t1,
        exponent,
        r_squared,
        samples: pts.len(),
    })
}
