use serde::Serialize;

use super::norms::{norm_suite, Norms};
use crate::error::{Error, Result};
use crate::models::{BackgroundKind, HarmonicBackground, Scenario, State};
use crate::spectral::Lp;

/// One smallness quantity with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Epsilon {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Background constant `C₁` or `C₂` for the perturbation audits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Coefficients of the value as a polynomial in `k`, lowest power first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_polynomial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub scenario: &'static str,
    pub entries: Vec<Epsilon>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

fn entry(name: &'static str, value: f64, threshold: f64) -> Epsilon {
    Epsilon {
        name,
        value,
        threshold,
        passed: value < threshold,
        constant: None,
        k_polynomial: None,
    }
}

fn polynomial(name: &'static str, k: f64, base: f64, coeffs: Vec<f64>, threshold: f64) -> Epsilon {
    let value = coeffs.iter().rev().fold(0.0, |acc, c| acc * k + c);
    Epsilon {
        constant: Some(k * base),
        k_polynomial: Some(coeffs),
        ..entry(name, value, threshold)
    }
}

/// Evaluates the smallness quantity that governs `scenario` on initial data.
///
/// * hall, heat_validation: `ε₁ = ‖Δψ₀‖² + ‖∇Z₀‖²`
/// * perturb_case1: `ε₂ = C₁²F₁ + C₁F₂ + F₃`, `C₁ = k‖∇²ψ̄‖²∞`
/// * perturb_case2: `ε₃ = C₂³‖ψ₀‖² + C₂²K₁ + C₂K₂ + K₃`, `C₂ = k‖∇Z̄‖²∞`
/// * mhd: `ε₄ = P₁ + P₂`, reported together with `ε₁` of the magnetic part
///
/// The constant in front of ε is only known to exist, so the verdict is
/// `ε < threshold` for a user-chosen threshold. `k` is required for the
/// perturbation scenarios.
pub fn smallness_audit(
    initial: &State,
    scenario: Scenario,
    background: Option<&HarmonicBackground>,
    k: Option<f64>,
    threshold: f64,
) -> Result<AuditReport> {
    let norms: Norms = norm_suite(initial, scenario, Lp::L4)?;
    let need_k = || {
        k.filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(|| {
            Error::config(format!(
                "{} audit needs diagnostics.k (a non-negative number)",
                scenario.name()
            ))
        })
    };
    let need_bg = || {
        background.ok_or_else(|| Error::config(format!("{} audit needs a background", scenario.name())))
    };
    let entries = match scenario {
        Scenario::Hall | Scenario::HeatValidation => {
            vec![entry("epsilon1", norms.s(), threshold)]
        }
        Scenario::PerturbCase1 => {
            let k = need_k()?;
            let h = need_bg()?.hessian_sup().powi(2);
            let f = |i| norms.bundle(i);
            vec![polynomial(
                "epsilon2",
                k,
                h,
                vec![f(3), h * f(2), h * h * f(1)],
                threshold,
            )]
        }
        Scenario::PerturbCase2 => {
            let k = need_k()?;
            let g = match need_bg()?.kind() {
                BackgroundKind::Linear { a, b } => a * a + b * b,
                _ => return Err(Error::config("case 2 needs a linear background")),
            };
            let psi2 = norms.a.sq(0);
            let kk = |i| norms.bundle(i);
            vec![polynomial(
                "epsilon3",
                k,
                g,
                vec![kk(3), g * kk(2), g * g * kk(1), g * g * g * psi2],
                threshold,
            )]
        }
        Scenario::Mhd => vec![
            entry("epsilon4", norms.bundle(1) + norms.bundle(2), threshold),
            entry("epsilon1", norms.s(), threshold),
        ],
    };
    Ok(AuditReport {
        scenario: scenario.name(),
        entries,
    })
}
