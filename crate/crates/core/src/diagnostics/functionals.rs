use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Lp;

/// Exponents `(p, q)` with `1/p + 1/q = 1/2` and `2 ≤ q < ∞`.
///
/// Only `p = 4` and `p = ∞` are supported, since those are the quadrature
/// norms the solver computes; they give `q = 4` and `q = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerrinPair {
    pub p: f64,
    pub q: f64,
}

impl Default for SerrinPair {
    fn default() -> Self {
        SerrinPair { p: 4.0, q: 4.0 }
    }
}

impl SerrinPair {
    pub fn new(p: f64, q: f64) -> Result<SerrinPair> {
        let pair = SerrinPair { p, q };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        let SerrinPair { p, q } = *self;
        if !(q.is_finite() && q >= 2.0) {
            return Err(Error::config(format!("serrin q = {q} must satisfy 2 <= q < inf")));
        }
        let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
        if (inv_p + 1.0 / q - 0.5).abs() > 1e-12 {
            return Err(Error::config(format!(
                "serrin pair (p, q) = ({p}, {q}) violates 1/p + 1/q = 1/2"
            )));
        }
        self.lp()?;
        Ok(())
    }

    pub fn lp(&self) -> Result<Lp> {
        match Lp::from_exponent(self.p)? {
            lp @ (Lp::L4 | Lp::Inf) => Ok(lp),
            _ => Err(Error::config(format!(
                "serrin p = {} is not supported (use 4 or inf)",
                self.p
            ))),
        }
    }
}

/// Centered estimate of `½ dE/dt + D` between two records.
///
/// Zero when the energy identity holds; positive values mean energy was gained.
pub fn energy_residual(t1: f64, e1: f64, d1: f64, t2: f64, e2: f64, d2: f64) -> f64 {
    0.5 * (e2 - e1) / (t2 - t1) + 0.5 * (d1 + d2)
}

fn check_series(ts: &[f64], ys: &[f64]) -> Result<()> {
    if ts.len() != ys.len() {
        return Err(Error::Data(format!(
            "series lengths differ: {} times, {} values",
            ts.len(),
            ys.len()
        )));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Data("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Running trapezoid integral of `ys` over `ts`, starting at zero.
pub fn cumulative_trapezoid(ts: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    check_series(ts, ys)?;
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    for i in 0..ts.len() {
        if i > 0 {
            acc += 0.5 * (ts[i] - ts[i - 1]) * (ys[i] + ys[i - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

/// `B(t) = ∫₀ᵗ ‖∇Z‖^q_{L^p} ds` from samples of `‖∇Z‖_{L^p}`.
pub fn blowup_functional(ts: &[f64], grad_z_lp: &[f64], pair: SerrinPair) -> Result<Vec<f64>> {
    pair.validate()?;
    let ys: Vec<f64> = grad_z_lp.iter().map(|v| v.powf(pair.q)).collect();
    cumulative_trapezoid(ts, &ys)
}

/// `∫₀ᵗ (‖Δψ‖^q_{L^p} + ‖∇Z‖^q_{L^p}) ds` from samples of both norms.
pub fn serrin_integral(
    ts: &[f64],
    lap_psi_lp: &[f64],
    grad_z_lp: &[f64],
    pair: SerrinPair,
) -> Result<Vec<f64>> {
    pair.validate()?;
    if lap_psi_lp.len() != grad_z_lp.len() {
        return Err(Error::Data("Δψ and ∇Z series lengths differ".into()));
    }
    let ys: Vec<f64> = lap_psi_lp
        .iter()
        .zip(grad_z_lp)
        .map(|(a, b)| a.powf(pair.q) + b.powf(pair.q))
        .collect();
    cumulative_trapezoid(ts, &ys)
}

/// Time at which the diffusion length `√(4t)` reaches `l/8`.
pub fn t_box(l: f64) -> f64 {
    (l / 8.0).powi(2) / 4.0
}
