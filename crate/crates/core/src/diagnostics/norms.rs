use crate::error::Result;
use crate::models::{Scenario, State};
use crate::spectral::{lp_of_magnitude, Field, Gradient, Lp};

/// Homogeneous Sobolev seminorms `‖∇^s f‖₂` for `s = 0..=4`, plus `‖f‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldNorms {
    pub sem: [f64; 5],
    pub l1: f64,
}

impl FieldNorms {
    pub fn of(f: &Field) -> Result<FieldNorms> {
        let mut sem = [0.0; 5];
        for (s, v) in sem.iter_mut().enumerate() {
            *v = f.sobolev_seminorm(s as u32)?;
        }
        Ok(FieldNorms {
            sem,
            l1: f.lp_norm(Lp::L1),
        })
    }

    /// `‖∇^s f‖₂²`
    pub fn sq(&self, s: usize) -> f64 {
        self.sem[s] * self.sem[s]
    }
}

/// Every norm a record needs, for one state.
///
/// `a` is the first unknown (ψ, or ρ in case 1) and `b` the second
/// (Z, or ω in case 2). `w` and `phi` are present for the full system only.
#[derive(Debug, Clone, PartialEq)]
pub struct Norms {
    pub scenario: Scenario,
    pub a: FieldNorms,
    pub b: FieldNorms,
    pub w: Option<FieldNorms>,
    pub phi: Option<FieldNorms>,
    /// `‖∇b‖₄`
    pub grad_b_l4: f64,
    /// `‖∇b‖_{L^p}` for the configured Serrin exponent.
    pub grad_b_lp: f64,
    /// `‖Δa‖_{L^p}` for the configured Serrin exponent.
    pub lap_a_lp: f64,
}

/// Computes the norms of `state`; `p` is the Serrin space exponent.
pub fn norm_suite(state: &State, scenario: Scenario, p: Lp) -> Result<Norms> {
    let a = &state.fields[0];
    let b = &state.fields[1];
    let dx = a.grid().dx();
    let gb = Gradient::of(b);
    let grad_b_l4 = lp_of_magnitude(&[&gb.x, &gb.y], Lp::L4, dx);
    let grad_b_lp = if p == Lp::L4 {
        grad_b_l4
    } else {
        lp_of_magnitude(&[&gb.x, &gb.y], p, dx)
    };
    let (w, phi) = if scenario == Scenario::Mhd {
        let phi = state.fields[3].inv_laplacian()?;
        (
            Some(FieldNorms::of(&state.fields[2])?),
            Some(FieldNorms::of(&phi)?),
        )
    } else {
        (None, None)
    };
    Ok(Norms {
        scenario,
        a: FieldNorms::of(a)?,
        b: FieldNorms::of(b)?,
        w,
        phi,
        grad_b_l4,
        grad_b_lp,
        lap_a_lp: a.laplacian().lp_norm(p),
    })
}

impl Norms {
    /// Level-`i` bundle, `i` in `1..=4`: `‖∇^i a‖² + ‖∇^{i−1} b‖²`, plus the
    /// fluid terms `‖∇^i φ‖² + ‖∇^{i−1} W‖²` for the full system.
    ///
    /// These are F₁–F₄ (case 1), K₁–K₄ (case 2) and P₁–P₄ (full system).
    pub fn bundle(&self, i: usize) -> f64 {
        assert!((1..=4).contains(&i), "bundle level {i} out of range");
        let mut v = self.a.sq(i) + self.b.sq(i - 1);
        if let (Some(w), Some(phi)) = (&self.w, &self.phi) {
            v += phi.sq(i) + w.sq(i - 1);
        }
        v
    }

    /// Magnetic part of bundle `i` only, ignoring any fluid unknowns.
    pub fn magnetic_bundle(&self, i: usize) -> f64 {
        self.a.sq(i) + self.b.sq(i - 1)
    }

    /// `M = ‖∇a‖²_{H²} + ‖b‖²_{H²}`
    pub fn m(&self) -> f64 {
        (1..=3).map(|i| self.magnetic_bundle(i)).sum()
    }

    /// `N = ‖Δa‖²_{H²} + ‖∇b‖²_{H²}`
    pub fn n(&self) -> f64 {
        (2..=4).map(|i| self.magnetic_bundle(i)).sum()
    }

    /// `S = ‖Δa‖² + ‖∇b‖²`
    pub fn s(&self) -> f64 {
        self.magnetic_bundle(2)
    }

    /// `P = P₁ + P₂ + P₃`
    pub fn p_total(&self) -> f64 {
        (1..=3).map(|i| self.bundle(i)).sum()
    }

    /// `Q = P₂ + P₃ + P₄`
    pub fn q_total(&self) -> f64 {
        (2..=4).map(|i| self.bundle(i)).sum()
    }

    /// Quantity whose decay the energy identity controls: `½ dE/dt + D = 0`.
    pub fn energy(&self) -> f64 {
        self.bundle(1)
    }

    /// Dissipation rate paired with [`Norms::energy`].
    pub fn dissipation(&self, resistivity: f64, viscosity: f64) -> f64 {
        let mut v = resistivity * self.magnetic_bundle(2);
        if let (Some(w), Some(phi)) = (&self.w, &self.phi) {
            v += viscosity * (phi.sq(2) + w.sq(1));
        }
        v
    }
}
