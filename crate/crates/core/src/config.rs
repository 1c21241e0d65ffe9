//! Run configuration: a TOML file with `[grid]`, `[model]`, `[background]`,
//! `[integrator]`, `[diagnostics]`, `[output]`, `[run]` sections and a list
//! of `[[initial]]` presets whose fields are summed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsConfig;
use crate::error::{Error, Result};
use crate::models::{BackgroundKind, BackgroundTarget, HarmonicBackground, Model, Scenario, State};
use crate::oracle::{heat_kernel, KernelParams};
use crate::spectral::{Field, Grid};
use crate::timestepper::IntegratorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub l: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 128, l: 32.0 * PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Diffusivity of the magnetic unknowns.
    pub resistivity: f64,
    /// Diffusivity of the fluid unknowns (full system only).
    pub viscosity: f64,
    /// Peak damping rate of the sponge used with quadratic backgrounds.
    pub sponge_strength: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            resistivity: 1.0,
            viscosity: 1.0,
            sponge_strength: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundShape {
    /// `a x + b y`
    Linear,
    /// `c (x² − y²)`
    QuadraticSaddle,
    /// `c x y`
    QuadraticXy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    pub kind: BackgroundShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Defaults to the target the scenario perturbs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BackgroundTarget>,
}

impl BackgroundConfig {
    pub fn build(&self, scenario: Scenario) -> Result<HarmonicBackground> {
        let need = |v: Option<f64>, name: &str| {
            let v = v.ok_or_else(|| {
                Error::config(format!("background.{name} is required for {:?} backgrounds", self.kind))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(format!("background.{name} must be finite")))
            }
        };
        let forbid = |v: Option<f64>, name: &str| match v {
            Some(_) => Err(Error::config(format!(
                "background.{name} is not used by {:?} backgrounds",
                self.kind
            ))),
            None => Ok(()),
        };
        let kind = match self.kind {
            BackgroundShape::Linear => {
                forbid(self.c, "c")?;
                BackgroundKind::Linear {
                    a: need(self.a, "a")?,
                    b: need(self.b, "b")?,
                }
            }
            BackgroundShape::QuadraticSaddle | BackgroundShape::QuadraticXy => {
                forbid(self.a, "a")?;
                forbid(self.b, "b")?;
                let c = need(self.c, "c")?;
                if self.kind == BackgroundShape::QuadraticSaddle {
                    BackgroundKind::QuadraticSaddle { c }
                } else {
                    BackgroundKind::QuadraticXy { c }
                }
            }
        };
        let target = self.target.unwrap_or(match scenario {
            Scenario::PerturbCase2 => BackgroundTarget::ZBar,
            _ => BackgroundTarget::PsiBar,
        });
        HarmonicBackground::new(kind, target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for all outputs; relative paths resolve against the config file.
    pub dir: PathBuf,
    pub csv: String,
    pub summary: String,
    pub checkpoint: String,
    /// Write a checkpoint (and refresh CSV and summary) every this many
    /// records; 0 writes one only at the end.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            csv: "records.csv".into(),
            summary: "summary.json".into(),
            checkpoint: "checkpoint.bin".into(),
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads for the FFTs and pointwise loops; 0 uses every core.
    /// Results do not depend on this value.
    pub threads: usize,
}

/// Where a preset writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Psi,
    Rho,
    Z,
    W,
    /// Fluid stream function; stored as its Laplacian `Ω`.
    Phi,
    Omega,
}

impl Slot {
    fn name(self) -> &'static str {
        match self {
            Slot::Psi => "psi",
            Slot::Rho => "rho",
            Slot::Z => "z",
            Slot::W => "w",
            Slot::Phi => "phi",
            Slot::Omega => "omega",
        }
    }

    /// Index into the state and whether the Laplacian must be applied.
    fn resolve(self, scenario: Scenario) -> Result<(usize, bool)> {
        if scenario == Scenario::Mhd && self == Slot::Phi {
            return Ok((3, true));
        }
        scenario
            .unknowns()
            .iter()
            .position(|u| *u == self.name())
            .map(|i| (i, false))
            .ok_or_else(|| {
                Error::config(format!(
                    "initial field '{}' does not exist in scenario {} (unknowns: {})",
                    self.name(),
                    scenario.name(),
                    scenario.unknowns().join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineMode {
    pub field: Slot,
    pub kx: i64,
    pub ky: i64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn zero_offset() -> [f64; 2] {
    [0.0, 0.0]
}

fn is_zero_offset(c: &[f64; 2]) -> bool {
    *c == [0.0, 0.0]
}

/// Initial-data presets. Positions are offsets from the box center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// Gaussians of masses `gamma` (first unknown) and `eta` (second unknown):
    /// `m exp(−|x−c|²/w²) / (π w²)`.
    GaussianPair {
        gamma: f64,
        eta: f64,
        width: f64,
        #[serde(default = "zero_offset", skip_serializing_if = "is_zero_offset")]
        center: [f64; 2],
    },
    /// `γΓ(t0)` and `ηΓ(t0)` centered in the box, an exact solution pair.
    KernelExact { gamma: f64, eta: f64, t0: f64 },
    /// `Σ A sin(2π(kx x + ky y)/l + phase)` per mode.
    SineModes { modes: Vec<SineMode> },
    /// Band-limited noise from a ChaCha8 stream seeded with `seed`, drawn
    /// for each listed field in order (all unknowns when empty).
    RandomBandlimited {
        seed: u64,
        band: usize,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        fields: Vec<Slot>,
    },
    /// One Gaussian of the given mass, same profile as `gaussian_pair`.
    Gaussian {
        field: Slot,
        mass: f64,
        width: f64,
        #[serde(default = "zero_offset", skip_serializing_if = "is_zero_offset")]
        center: [f64; 2],
    },
    /// Mass-free odd bump `A (x̃ cos θ + ỹ sin θ)/w · exp(−|x̃|²/w²)`.
    GaussianDipole {
        field: Slot,
        amplitude: f64,
        width: f64,
        #[serde(default)]
        angle: f64,
        #[serde(default = "zero_offset", skip_serializing_if = "is_zero_offset")]
        center: [f64; 2],
    },
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{what} must be positive, got {v}")))
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{what} must be finite")))
    }
}

fn gaussian(grid: &Arc<Grid>, mass: f64, width: f64, center: [f64; 2]) -> Field {
    let [cx, cy] = grid.center();
    let norm = mass / (PI * width * width);
    Field::from_fn(grid, |x, y| {
        let (u, v) = (x - cx - center[0], y - cy - center[1]);
        norm * (-(u * u + v * v) / (width * width)).exp()
    })
}

impl Preset {
    fn validate(&self, scenario: Scenario) -> Result<()> {
        match self {
            Preset::GaussianPair { gamma, eta, width, center } => {
                finite(*gamma, "gaussian_pair.gamma")?;
                finite(*eta, "gaussian_pair.eta")?;
                positive(*width, "gaussian_pair.width")?;
                finite(center[0] + center[1], "gaussian_pair.center")?;
            }
            Preset::KernelExact { gamma, eta, t0 } => {
                finite(*gamma, "kernel_exact.gamma")?;
                finite(*eta, "kernel_exact.eta")?;
                positive(*t0, "kernel_exact.t0")?;
            }
            Preset::SineModes { modes } => {
                for m in modes {
                    m.field.resolve(scenario)?;
                    finite(m.amplitude, "sine_modes.amplitude")?;
                    finite(m.phase, "sine_modes.phase")?;
                }
            }
            Preset::RandomBandlimited { band, amplitude, fields, .. } => {
                if *band == 0 {
                    return Err(Error::config("random_bandlimited.band must be at least 1"));
                }
                finite(*amplitude, "random_bandlimited.amplitude")?;
                for f in fields {
                    f.resolve(scenario)?;
                }
            }
            Preset::Gaussian { field, mass, width, center } => {
                field.resolve(scenario)?;
                finite(*mass, "gaussian.mass")?;
                positive(*width, "gaussian.width")?;
                finite(center[0] + center[1], "gaussian.center")?;
            }
            Preset::GaussianDipole { field, amplitude, width, angle, center } => {
                field.resolve(scenario)?;
                finite(*amplitude, "gaussian_dipole.amplitude")?;
                positive(*width, "gaussian_dipole.width")?;
                finite(*angle, "gaussian_dipole.angle")?;
                finite(center[0] + center[1], "gaussian_dipole.center")?;
            }
        }
        Ok(())
    }

    /// Adds this preset's contribution to `fields`.
    fn apply(&self, scenario: Scenario, grid: &Arc<Grid>, fields: &mut [Field]) -> Result<()> {
        let mut add = |slot: Slot, f: Field| -> Result<()> {
            let (i, lap) = slot.resolve(scenario)?;
            let f = if lap { f.laplacian() } else { f };
            fields[i] += &f;
            Ok(())
        };
        match self {
            Preset::GaussianPair { gamma, eta, width, center } => {
                fields[0] += &gaussian(grid, *gamma, *width, *center);
                fields[1] += &gaussian(grid, *eta, *width, *center);
            }
            Preset::KernelExact { gamma, eta, t0 } => {
                fields[0] += &heat_kernel(grid, &KernelParams::centered(grid, *t0, *gamma))?;
                fields[1] += &heat_kernel(grid, &KernelParams::centered(grid, *t0, *eta))?;
            }
            Preset::SineModes { modes } => {
                let k0 = 2.0 * PI / grid.l();
                for m in modes {
                    let (kx, ky) = (m.kx as f64 * k0, m.ky as f64 * k0);
                    let f = Field::from_fn(grid, |x, y| m.amplitude * (kx * x + ky * y + m.phase).sin());
                    add(m.field, f)?;
                }
            }
            Preset::RandomBandlimited { seed, band, amplitude, fields: slots } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let all: Vec<Slot> = if slots.is_empty() {
                    (0..scenario.unknowns().len()).map(|i| default_slot(scenario, i)).collect()
                } else {
                    slots.clone()
                };
                for slot in all {
                    let mut f = Field::random_bandlimited(grid, *band, *amplitude, &mut rng)?;
                    // The vorticity must be mean-free.
                    if scenario == Scenario::Mhd && slot.resolve(scenario)?.0 == 3 {
                        f.spec_mut()[[0, 0]] = 0.0.into();
                    }
                    add(slot, f)?;
                }
            }
            Preset::Gaussian { field, mass, width, center } => {
                add(*field, gaussian(grid, *mass, *width, *center))?;
            }
            Preset::GaussianDipole { field, amplitude, width, angle, center } => {
                let [cx, cy] = grid.center();
                let (c, s) = (angle.cos(), angle.sin());
                let f = Field::from_fn(grid, |x, y| {
                    let (u, v) = (x - cx - center[0], y - cy - center[1]);
                    amplitude * (u * c + v * s) / width * (-(u * u + v * v) / (width * width)).exp()
                });
                add(*field, f)?;
            }
        }
        Ok(())
    }
}

fn default_slot(scenario: Scenario, i: usize) -> Slot {
    match scenario.unknowns()[i] {
        "psi" => Slot::Psi,
        "rho" => Slot::Rho,
        "z" => Slot::Z,
        "w" => Slot::W,
        "omega" => Slot::Omega,
        other => unreachable!("unknown name {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<Preset>,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates TOML text; `path` is used in messages only.
    pub fn from_toml(text: &str, path: &Path) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative output directory is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_toml(&text, path)?;
        if cfg.output.dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.output.dir = parent.join(&cfg.output.dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.n, self.grid.l)
            .map_err(|e| Error::config(format!("grid: {e}")))?;
        let m = &self.model;
        for (v, name) in [(m.resistivity, "model.resistivity"), (m.viscosity, "model.viscosity")] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(m.sponge_strength.is_finite() && m.sponge_strength >= 0.0) {
            return Err(Error::config("model.sponge_strength must be non-negative"));
        }
        match (self.scenario, &self.background) {
            (Scenario::PerturbCase1 | Scenario::PerturbCase2, None) => {
                return Err(Error::config(format!(
                    "scenario {} requires a [background] section",
                    self.scenario.name()
                )));
            }
            (Scenario::PerturbCase2, Some(bg)) if bg.kind != BackgroundShape::Linear => {
                return Err(Error::config(
                    "background.kind: perturb_case2 only admits a linear background",
                ));
            }
            (Scenario::PerturbCase1 | Scenario::PerturbCase2, Some(bg)) => {
                let built = bg.build(self.scenario)?;
                let want = if self.scenario == Scenario::PerturbCase1 {
                    BackgroundTarget::PsiBar
                } else {
                    BackgroundTarget::ZBar
                };
                if built.target() != want {
                    return Err(Error::config(format!(
                        "background.target must be {want:?} for {}",
                        self.scenario.name()
                    )));
                }
            }
            (_, Some(_)) => {
                return Err(Error::config(format!(
                    "[background] is only used by perturbation scenarios, not {}",
                    self.scenario.name()
                )));
            }
            (_, None) => {}
        }
        self.integrator
            .validate()
            .map_err(|e| Error::config(format!("integrator: {e}")))?;
        self.diagnostics
            .validate()
            .map_err(|e| Error::config(format!("diagnostics: {e}")))?;
        for p in &self.initial {
            p.validate(self.scenario)?;
        }
        let o = &self.output;
        for (v, name) in [(&o.csv, "output.csv"), (&o.summary, "output.summary"), (&o.checkpoint, "output.checkpoint")] {
            if v.is_empty() {
                return Err(Error::config(format!("{name} must not be empty")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid.n, self.grid.l)
    }

    pub fn background(&self) -> Result<Option<HarmonicBackground>> {
        self.background
            .as_ref()
            .map(|b| b.build(self.scenario))
            .transpose()
    }

    pub fn model(&self, grid: &Grid) -> Result<Model> {
        Ok(
            Model::new(self.scenario, grid, self.background()?, self.model.sponge_strength)?
                .with_dissipation(self.model.resistivity, self.model.viscosity),
        )
    }

    /// Initial state at `t = 0`: the sum of every preset, dealiased.
    pub fn initial_state(&self, grid: &Arc<Grid>) -> Result<State> {
        let mut fields = vec![Field::zeros(grid); self.scenario.unknowns().len()];
        for p in &self.initial {
            p.apply(self.scenario, grid, &mut fields)?;
        }
        for f in &mut fields {
            f.dealias_mut();
        }
        if self.scenario == Scenario::Mhd {
            let mean = fields[3].mean();
            if mean.abs() > 1e-12 * (1.0 + fields[3].lp_norm(crate::spectral::Lp::Inf)) {
                return Err(Error::config(format!(
                    "initial omega must be mean-free (mean {mean:e}); use the phi slot"
                )));
            }
        }
        Ok(State { t: 0.0, fields })
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.csv)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.summary)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.checkpoint)
    }
}
