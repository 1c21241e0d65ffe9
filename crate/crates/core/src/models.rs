//! Right-hand sides of the Hall system, the full 2½-D Hall MHD system, and
//! the two perturbation systems around harmonic backgrounds.
//!
//! Every system is written as `u_t = D Δu + N(u)` per unknown, with `D` the
//! unknown's diffusivity. The timestepper integrates `D Δu` exactly and only
//! asks the model for `N(u)`.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{bracket_of_gradients, dealiased, poisson_bracket, Field, Gradient, Grid};

/// Which system is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Hall,
    Mhd,
    PerturbCase1,
    PerturbCase2,
    HeatValidation,
}

impl Scenario {
    /// Stable numeric id used in checkpoint headers.
    pub fn id(self) -> u32 {
        match self {
            Scenario::Hall => 1,
            Scenario::Mhd => 2,
            Scenario::PerturbCase1 => 3,
            Scenario::PerturbCase2 => 4,
            Scenario::HeatValidation => 5,
        }
    }

    pub fn from_id(id: u32) -> Option<Scenario> {
        Some(match id {
            1 => Scenario::Hall,
            2 => Scenario::Mhd,
            3 => Scenario::PerturbCase1,
            4 => Scenario::PerturbCase2,
            5 => Scenario::HeatValidation,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hall => "hall",
            Scenario::Mhd => "mhd",
            Scenario::PerturbCase1 => "perturb_case1",
            Scenario::PerturbCase2 => "perturb_case2",
            Scenario::HeatValidation => "heat_validation",
        }
    }

    /// Names of the evolved unknowns, in storage order.
    pub fn unknowns(self) -> &'static [&'static str] {
        match self {
            Scenario::Mhd => &["psi", "z", "w", "omega"],
            Scenario::PerturbCase1 => &["rho", "z"],
            Scenario::PerturbCase2 => &["psi", "omega"],
            Scenario::Hall | Scenario::HeatValidation => &["psi", "z"],
        }
    }
}

/// Magnetic stream function and out-of-plane field of the Hall system.
#[derive(Debug, Clone)]
pub struct HallState {
    pub psi: Field,
    pub z: Field,
    pub t: f64,
}

/// Unknowns of the full system; `omega = Δφ`.
#[derive(Debug, Clone)]
pub struct MhdState {
    pub psi: Field,
    pub z: Field,
    pub w: Field,
    pub omega: Field,
    pub t: f64,
}

/// Any system's unknowns, as handled by the timestepper.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub fields: Vec<Field>,
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        self.fields[0].grid()
    }
}

impl From<HallState> for State {
    fn from(s: HallState) -> State {
        State {
            t: s.t,
            fields: vec![s.psi, s.z],
        }
    }
}

impl From<MhdState> for State {
    fn from(s: MhdState) -> State {
        State {
            t: s.t,
            fields: vec![s.psi, s.z, s.w, s.omega],
        }
    }
}

impl TryFrom<State> for HallState {
    type Error = Error;
    fn try_from(s: State) -> Result<HallState> {
        let [psi, z]: [Field; 2] = s
            .fields
            .try_into()
            .map_err(|_| Error::config("expected two unknowns"))?;
        Ok(HallState { psi, z, t: s.t })
    }
}

impl TryFrom<State> for MhdState {
    type Error = Error;
    fn try_from(s: State) -> Result<MhdState> {
        let [psi, z, w, omega]: [Field; 4] = s
            .fields
            .try_into()
            .map_err(|_| Error::config("expected four unknowns"))?;
        Ok(MhdState {
            psi,
            z,
            w,
            omega,
            t: s.t,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundKind {
    /// `a x + b y`
    Linear { a: f64, b: f64 },
    /// `c (x² − y²)` about the box center.
    QuadraticSaddle { c: f64 },
    /// `c x y` about the box center.
    QuadraticXy { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundTarget {
    PsiBar,
    ZBar,
}

/// A harmonic function added to ψ (case 1) or to Z (case 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicBackground {
    kind: BackgroundKind,
    target: BackgroundTarget,
}

impl HarmonicBackground {
    pub fn new(kind: BackgroundKind, target: BackgroundTarget) -> Result<Self> {
        if target == BackgroundTarget::ZBar && !matches!(kind, BackgroundKind::Linear { .. }) {
            return Err(Error::config(
                "a Z background must be linear (Z̄ = a x + b y)",
            ));
        }
        Ok(HarmonicBackground { kind, target })
    }

    pub fn kind(&self) -> BackgroundKind {
        self.kind
    }

    pub fn target(&self) -> BackgroundTarget {
        self.target
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, BackgroundKind::Linear { .. })
    }

    /// Gradient at offsets `(x, y)` from the box center.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match self.kind {
            BackgroundKind::Linear { a, b } => (a, b),
            BackgroundKind::QuadraticSaddle { c } => (2.0 * c * x, -2.0 * c * y),
            BackgroundKind::QuadraticXy { c } => (c * y, c * x),
        }
    }

    /// Sup of the Frobenius norm of the Hessian (constant for these kinds).
    pub fn hessian_sup(&self) -> f64 {
        match self.kind {
            BackgroundKind::Linear { .. } => 0.0,
            BackgroundKind::QuadraticSaddle { c } => 2.0 * 2f64.sqrt() * c.abs(),
            BackgroundKind::QuadraticXy { c } => 2f64.sqrt() * c.abs(),
        }
    }

    /// Sup of `|∇·|`; infinite for the quadratic kinds.
    pub fn gradient_sup(&self) -> f64 {
        match self.kind {
            BackgroundKind::Linear { a, b } => a.hypot(b),
            _ => f64::INFINITY,
        }
    }

    /// Gradient sampled on the grid, as physical arrays.
    fn gradient_fields(&self, grid: &Grid) -> (Array2<f64>, Array2<f64>) {
        let [cx, cy] = grid.center();
        let n = grid.n();
        let gx = Array2::from_shape_fn((n, n), |(i, j)| {
            self.gradient(grid.coord(i) - cx, grid.coord(j) - cy).0
        });
        let gy = Array2::from_shape_fn((n, n), |(i, j)| {
            self.gradient(grid.coord(i) - cx, grid.coord(j) - cy).1
        });
        (gx, gy)
    }
}

/// Background terms prepared for one grid.
#[derive(Debug, Clone)]
enum BackgroundTerms {
    Linear { a: f64, b: f64 },
    Sampled(Gradient),
}

impl BackgroundTerms {
    fn prepare(bg: &HarmonicBackground, grid: &Grid) -> Self {
        match bg.kind {
            BackgroundKind::Linear { a, b } => BackgroundTerms::Linear { a, b },
            _ => {
                let (x, y) = bg.gradient_fields(grid);
                BackgroundTerms::Sampled(Gradient { x, y })
            }
        }
    }

    /// `[f, ψ̄]` given `f` and its gradient.
    fn bracket_with(&self, f: &Field, grad_f: Option<&Gradient>) -> Field {
        match self {
            // [f, ax + by] = b f_x − a f_y
            BackgroundTerms::Linear { a, b } => {
                let mut out = f.dx().scaled(*b);
                out.axpy(-a, &f.dy());
                out
            }
            BackgroundTerms::Sampled(bg) => {
                let owned;
                let gf = match grad_f {
                    Some(g) => g,
                    None => {
                        owned = Gradient::of(f);
                        &owned
                    }
                };
                let mut prod = Array2::<f64>::zeros(gf.x.dim());
                Zip::from(&mut prod)
                    .and(&gf.x)
                    .and(&gf.y)
                    .and(&bg.x)
                    .and(&bg.y)
                    .for_each(|o, &fx, &fy, &bx, &by| *o = fx * by - fy * bx);
                dealiased(f, &prod)
            }
        }
    }
}

/// Cosine-ramp damping in the outer tenth of the box on each side.
#[derive(Debug, Clone)]
pub struct Sponge {
    rate: Array2<f64>,
}

/// Fraction of the half-width beyond which the sponge acts.
const SPONGE_START: f64 = 0.8;

impl Sponge {
    pub fn new(grid: &Grid, strength: f64) -> Sponge {
        let n = grid.n();
        let half = 0.5 * grid.l();
        let [cx, cy] = grid.center();
        let rate = Array2::from_shape_fn((n, n), |(i, j)| {
            let d = ((grid.coord(i) - cx).abs().max((grid.coord(j) - cy).abs())) / half;
            if d <= SPONGE_START {
                0.0
            } else {
                let s = ((d - SPONGE_START) / (1.0 - SPONGE_START)).min(1.0);
                0.5 * strength * (1.0 - (std::f64::consts::PI * s).cos())
            }
        });
        Sponge { rate }
    }

    /// `-σ(x) f`, dealiased.
    fn damping(&self, f: &Field) -> Field {
        let mut phys = f.to_physical();
        Zip::from(&mut phys).and(&self.rate).for_each(|v, &r| *v *= -r);
        dealiased(f, &phys)
    }

    /// Share of `∫(|f| + |g| + ...)` lying where the sponge acts.
    pub fn mass_fraction(&self, fields: &[Field]) -> f64 {
        let mut inside = 0.0;
        let mut total = 0.0;
        for f in fields {
            let phys = f.to_physical();
            Zip::from(&phys).and(&self.rate).for_each(|v, &r| {
                total += v.abs();
                if r > 0.0 {
                    inside += v.abs();
                }
            });
        }
        if total > 0.0 {
            inside / total
        } else {
            0.0
        }
    }
}

/// Support-monitor threshold for runs with a sponge.
pub const SPONGE_MASS_LIMIT: f64 = 1e-6;

/// Nonlinear terms of the Hall system: `([ψ,Z], [Δψ,ψ])`.
pub fn hall_nonlinear(psi: &Field, z: &Field) -> Result<(Field, Field)> {
    psi.check_same_grid(z)?;
    let gpsi = Gradient::of(psi);
    let gz = Gradient::of(z);
    let glap = Gradient::of(&psi.laplacian());
    Ok((
        bracket_of_gradients(psi, &gpsi, &gz),
        bracket_of_gradients(psi, &glap, &gpsi),
    ))
}

/// `ψ_t = Δψ + [ψ,Z]`, `Z_t = ΔZ + [Δψ,ψ]`.
pub fn hall_rhs(s: &HallState) -> Result<(Field, Field)> {
    let (mut dpsi, mut dz) = hall_nonlinear(&s.psi, &s.z)?;
    dpsi += &s.psi.laplacian();
    dz += &s.z.laplacian();
    Ok((dpsi, dz))
}

/// Nonlinear terms of the full system, with `φ = Δ⁻¹Ω`.
pub fn mhd_nonlinear(psi: &Field, z: &Field, w: &Field, omega: &Field) -> Result<[Field; 4]> {
    for f in [z, w, omega] {
        psi.check_same_grid(f)?;
    }
    let phi = omega.inv_laplacian()?;
    let gpsi = Gradient::of(psi);
    let gz = Gradient::of(z);
    let gw = Gradient::of(w);
    let gphi = Gradient::of(&phi);
    let glap = Gradient::of(&psi.laplacian());
    let gom = Gradient::of(omega);
    let br = |a: &Gradient, b: &Gradient| bracket_of_gradients(psi, a, b);

    let psi_z = br(&gpsi, &gz);
    let lap_psi = br(&glap, &gpsi);

    let mut dpsi = psi_z.clone();
    dpsi.axpy(-1.0, &br(&gpsi, &gphi));

    let mut dz = lap_psi.clone();
    dz.axpy(-1.0, &br(&gz, &gphi));
    dz += &br(&gw, &gpsi);

    let mut dw = br(&gw, &gphi).scaled(-1.0);
    dw.axpy(-1.0, &psi_z);

    let mut domega = br(&gom, &gphi).scaled(-1.0);
    domega += &lap_psi;

    Ok([dpsi, dz, dw, domega])
}

/// Full right-hand side of the 2½-D system with unit dissipation.
pub fn mhd_rhs(s: &MhdState) -> Result<[Field; 4]> {
    let mut out = mhd_nonlinear(&s.psi, &s.z, &s.w, &s.omega)?;
    for (o, f) in out.iter_mut().zip([&s.psi, &s.z, &s.w, &s.omega]) {
        *o += &f.laplacian();
    }
    Ok(out)
}

fn case1_nonlinear(rho: &Field, z: &Field, terms: &BackgroundTerms) -> Result<(Field, Field)> {
    rho.check_same_grid(z)?;
    let grho = Gradient::of(rho);
    let gz = Gradient::of(z);
    let lap = rho.laplacian();
    let glap = Gradient::of(&lap);
    let mut drho = bracket_of_gradients(rho, &grho, &gz);
    // [ψ̄, Z] = -[Z, ψ̄]
    drho.axpy(-1.0, &terms.bracket_with(z, Some(&gz)));
    let mut dz = bracket_of_gradients(rho, &glap, &grho);
    dz += &terms.bracket_with(&lap, Some(&glap));
    Ok((drho, dz))
}

/// Case 1: `ψ = ρ + ψ̄`. Returns `(ρ_t, Z_t)` for the state read as `(ρ, Z)`.
pub fn case1_rhs(s: &HallState, bg: &HarmonicBackground) -> Result<(Field, Field)> {
    if bg.target != BackgroundTarget::PsiBar {
        return Err(Error::config("case 1 needs a ψ̄ background"));
    }
    let terms = BackgroundTerms::prepare(bg, s.psi.grid());
    let (mut drho, mut dz) = case1_nonlinear(&s.psi, &s.z, &terms)?;
    drho += &s.psi.laplacian();
    dz += &s.z.laplacian();
    Ok((drho, dz))
}

fn case2_nonlinear(psi: &Field, omega: &Field, a: f64, b: f64) -> Result<(Field, Field)> {
    let (mut dpsi, domega) = hall_nonlinear(psi, omega)?;
    // [ψ, ax + by] = b ψ_x − a ψ_y
    if a != 0.0 || b != 0.0 {
        dpsi.axpy(b, &psi.dx());
        dpsi.axpy(-a, &psi.dy());
    }
    Ok((dpsi, domega))
}

/// Case 2: `Z = ω + Z̄` with linear `Z̄`. Returns `(ψ_t, ω_t)` for the state read as `(ψ, ω)`.
pub fn case2_rhs(s: &HallState, bg: &HarmonicBackground) -> Result<(Field, Field)> {
    let (a, b) = match (bg.target, bg.kind) {
        (BackgroundTarget::ZBar, BackgroundKind::Linear { a, b }) => (a, b),
        _ => return Err(Error::config("case 2 needs a linear Z̄ background")),
    };
    let (mut dpsi, mut domega) = case2_nonlinear(&s.psi, &s.z, a, b)?;
    dpsi += &s.psi.laplacian();
    domega += &s.z.laplacian();
    Ok((dpsi, domega))
}

/// Scaling symmetry `ψ_λ(x) = ψ(λx)/λ`, `Z_λ(x) = Z(λx)`, `t_λ = t/λ²`.
///
/// The samples are unchanged; the box shrinks to `l/λ`. This is exact for
/// any `λ > 0`.
pub fn rescale(s: &HallState, lambda: f64) -> Result<HallState> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config(format!("scaling factor {lambda} must be positive")));
    }
    let grid = s.psi.grid();
    let target = Grid::new(grid.n(), grid.l() / lambda)?;
    let psi = Field::from_spectral(&target, s.psi.spec() / lambda)?;
    let z = Field::from_spectral(&target, s.z.spec().clone())?;
    Ok(HallState {
        psi,
        z,
        t: s.t / (lambda * lambda),
    })
}

/// Scaling on the same box for integer `λ`: mode `m` moves to `λ m`.
///
/// Fails when some mode would leave the representable band.
pub fn rescale_in_box(s: &HallState, lambda: usize) -> Result<HallState> {
    if lambda == 0 {
        return Err(Error::config("scaling factor must be a positive integer"));
    }
    let grid = s.psi.grid().clone();
    let n = grid.n();
    let reindex = |f: &Field, amp: f64| -> Result<Field> {
        let mut out = Array2::zeros(grid.spectral_shape());
        let scale = 1e-13 * f.spec().iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        for ((q, p), c) in f.spec().indexed_iter() {
            if c.norm() <= scale {
                continue;
            }
            let mq = q * lambda;
            let mp = grid.mode_index(p) * lambda as i64;
            if 2 * mq >= n || 2 * mp.unsigned_abs() as usize >= n {
                return Err(Error::config(format!(
                    "λ = {lambda} maps mode ({}, {q}) beyond the grid's Nyquist limit",
                    grid.mode_index(p)
                )));
            }
            let pp = mp.rem_euclid(n as i64) as usize;
            out[[mq, pp]] = c * amp;
        }
        Field::from_spectral(&grid, out)
    };
    Ok(HallState {
        psi: reindex(&s.psi, 1.0 / lambda as f64)?,
        z: reindex(&s.z, 1.0)?,
        t: s.t / (lambda * lambda) as f64,
    })
}

#[derive(Debug, Clone)]
enum System {
    Hall,
    Mhd,
    Case1(BackgroundTerms),
    Case2 { a: f64, b: f64 },
    Heat,
}

/// A system ready for integration on one grid.
#[derive(Debug, Clone)]
pub struct Model {
    scenario: Scenario,
    system: System,
    background: Option<HarmonicBackground>,
    /// Magnetic diffusivity, acting on ψ and Z.
    resistivity: f64,
    /// Fluid viscosity, acting on W and Ω.
    viscosity: f64,
    sponge: Option<Sponge>,
}

impl Model {
    /// Builds the model; perturbation scenarios require a background of the
    /// matching target. Quadratic case-1 backgrounds get a sponge of the given strength.
    pub fn new(
        scenario: Scenario,
        grid: &Grid,
        background: Option<HarmonicBackground>,
        sponge_strength: f64,
    ) -> Result<Model> {
        let system = match scenario {
            Scenario::Hall => System::Hall,
            Scenario::Mhd => System::Mhd,
            Scenario::HeatValidation => System::Heat,
            Scenario::PerturbCase1 => {
                let bg = background
                    .filter(|b| b.target == BackgroundTarget::PsiBar)
                    .ok_or_else(|| Error::config("perturb_case1 needs a psi_bar background"))?;
                System::Case1(BackgroundTerms::prepare(&bg, grid))
            }
            Scenario::PerturbCase2 => match background {
                Some(HarmonicBackground {
                    kind: BackgroundKind::Linear { a, b },
                    target: BackgroundTarget::ZBar,
                }) => System::Case2 { a, b },
                _ => return Err(Error::config("perturb_case2 needs a linear z_bar background")),
            },
        };
        let sponge = match &system {
            System::Case1(BackgroundTerms::Sampled(_)) => Some(Sponge::new(grid, sponge_strength)),
            _ => None,
        };
        Ok(Model {
            scenario,
            system,
            background,
            resistivity: 1.0,
            viscosity: 1.0,
            sponge,
        })
    }

    pub fn with_dissipation(mut self, resistivity: f64, viscosity: f64) -> Model {
        self.resistivity = resistivity;
        self.viscosity = viscosity;
        self
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn background(&self) -> Option<&HarmonicBackground> {
        self.background.as_ref()
    }

    pub fn sponge(&self) -> Option<&Sponge> {
        self.sponge.as_ref()
    }

    pub fn resistivity(&self) -> f64 {
        self.resistivity
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn n_unknowns(&self) -> usize {
        self.scenario.unknowns().len()
    }

    /// Diffusion coefficient per unknown.
    pub fn diffusivities(&self) -> Vec<f64> {
        match self.system {
            System::Mhd => vec![
                self.resistivity,
                self.resistivity,
                self.viscosity,
                self.viscosity,
            ],
            _ => vec![self.resistivity; 2],
        }
    }

    /// Everything except the diffusion terms.
    pub fn nonlinear(&self, fields: &[Field]) -> Result<Vec<Field>> {
        if fields.len() != self.n_unknowns() {
            return Err(Error::config(format!(
                "{} expects {} unknowns, got {}",
                self.scenario.name(),
                self.n_unknowns(),
                fields.len()
            )));
        }
        let mut out = match &self.system {
            System::Hall => {
                let (a, b) = hall_nonlinear(&fields[0], &fields[1])?;
                vec![a, b]
            }
            System::Mhd => mhd_nonlinear(&fields[0], &fields[1], &fields[2], &fields[3])?.to_vec(),
            System::Case1(terms) => {
                let (a, b) = case1_nonlinear(&fields[0], &fields[1], terms)?;
                vec![a, b]
            }
            System::Case2 { a, b } => {
                let (x, y) = case2_nonlinear(&fields[0], &fields[1], *a, *b)?;
                vec![x, y]
            }
            System::Heat => {
                fields[0].check_same_grid(&fields[1])?;
                fields.iter().map(|f| Field::zeros(f.grid())).collect()
            }
        };
        if let Some(sponge) = &self.sponge {
            for (o, f) in out.iter_mut().zip(fields) {
                *o += &sponge.damping(f);
            }
        }
        Ok(out)
    }

    /// Full right-hand side.
    pub fn rhs(&self, fields: &[Field]) -> Result<Vec<Field>> {
        let mut out = self.nonlinear(fields)?;
        for ((o, f), d) in out.iter_mut().zip(fields).zip(self.diffusivities()) {
            o.axpy(d, &f.laplacian());
        }
        Ok(out)
    }
}

/// `[f, g]` re-exported for callers that only need the models module.
pub fn bracket(f: &Field, g: &Field) -> Result<Field> {
    poisson_bracket(f, g)
}
