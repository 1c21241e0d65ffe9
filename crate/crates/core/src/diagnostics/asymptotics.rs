use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{heat_evolve, heat_kernel, KernelParams};
use crate::spectral::{Field, Lp};

/// Mass, first moments and weighted `L¹` norm of a field about the box center.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Moments {
    /// `∫ f`
    pub mass: f64,
    /// `∫ x̃ f`, `∫ ỹ f` with `(x̃, ỹ)` the offset from the box center.
    pub first: [f64; 2],
    /// `∫ ⟨x̃⟩ |f|` with `⟨x⟩ = √(1 + |x|²)`.
    pub weighted_l1: f64,
}

/// Rectangle-rule moments of `f`; the mass equals the zero-mode reading.
pub fn moments(f: &Field) -> Moments {
    let g = f.grid();
    let phys = f.to_physical();
    let [cx, cy] = g.center();
    let area = g.dx() * g.dx();
    let mut m = Moments::default();
    for ((i, j), &v) in phys.indexed_iter() {
        let x = g.coord(i) - cx;
        let y = g.coord(j) - cy;
        m.mass += v;
        m.first[0] += x * v;
        m.first[1] += y * v;
        m.weighted_l1 += (1.0 + x * x + y * y).sqrt() * v.abs();
    }
    m.mass *= area;
    m.first[0] *= area;
    m.first[1] *= area;
    m.weighted_l1 *= area;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticMode {
    /// Comparator `γΓ(t)` or `ηΓ(t)`.
    GammaKernel,
    /// Comparator `Γ(t) ∗ f₀`.
    Convolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Psi,
    Z,
}

/// Initial data and masses the comparators are built from.
#[derive(Debug, Clone)]
pub struct AsymptoticContext {
    pub psi0: Field,
    pub z0: Field,
    pub gamma: f64,
    pub eta: f64,
}

impl AsymptoticContext {
    pub fn new(psi0: &Field, z0: &Field) -> AsymptoticContext {
        AsymptoticContext {
            psi0: psi0.clone(),
            z0: z0.clone(),
            gamma: psi0.integral(),
            eta: z0.integral(),
        }
    }
}

/// Weight exponent: `t²` for the convolved Z comparator, `t^{3/2}` otherwise.
pub fn weight_exponent(mode: AsymptoticMode, reference: Reference) -> f64 {
    match (mode, reference) {
        (AsymptoticMode::Convolved, Reference::Z) => 2.0,
        _ => 1.5,
    }
}

/// `t^ρ ‖field − comparator‖∞` at time `t > 0`.
///
/// The kernel comparator is centered in the box, where the presets put
/// their data.
pub fn asymptotic_error(
    field: &Field,
    t: f64,
    mode: AsymptoticMode,
    reference: Reference,
    ctx: &AsymptoticContext,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!(
            "asymptotic error is undefined at t = {t}"
        )));
    }
    let grid = field.grid();
    let comparator = match mode {
        AsymptoticMode::GammaKernel => {
            let mass = match reference {
                Reference::Psi => ctx.gamma,
                Reference::Z => ctx.eta,
            };
            heat_kernel(grid, &KernelParams::centered(grid, t, mass))?
        }
        AsymptoticMode::Convolved => {
            let f0 = match reference {
                Reference::Psi => &ctx.psi0,
                Reference::Z => &ctx.z0,
            };
            heat_evolve(f0, t)?
        }
    };
    let diff = (field - &comparator).lp_norm(Lp::Inf);
    Ok(t.powf(weight_exponent(mode, reference)) * diff)
}
