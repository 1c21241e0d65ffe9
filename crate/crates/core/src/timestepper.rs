//! Integrating-factor time stepping.
//!
//! Each unknown obeys `u_t = D Δu + N(u)`. In the variable `v = e^{D|k|²t} û`
//! the stiff diffusion disappears and `N` is advanced explicitly (classical
//! RK4 or forward Euler). Steps are shortened so every record time is hit
//! exactly.

use std::collections::HashMap;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, Scenario, State};
use crate::spectral::{lp_of_magnitude, Field, Gradient, Grid, Lp};

/// Any field max-norm above this is treated as blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    IfRk4,
    IfEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub cfl: f64,
    pub adaptive: bool,
    pub t_end: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::IfRk4,
            dt: 1e-3,
            cfl: 0.5,
            adaptive: false,
            t_end: 1.0,
            dt_min: 1e-9,
            dt_max: 0.1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.dt) {
            return Err(Error::config(format!("integrator.dt must be positive, got {}", self.dt)));
        }
        if !positive(self.cfl) {
            return Err(Error::config(format!("integrator.cfl must be positive, got {}", self.cfl)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::config(format!(
                "integrator.t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if !(positive(self.dt_min) && positive(self.dt_max) && self.dt_min <= self.dt_max) {
            return Err(Error::config(format!(
                "integrator.dt_min ({}) and dt_max ({}) must satisfy 0 < dt_min <= dt_max",
                self.dt_min, self.dt_max
            )));
        }
        Ok(())
    }
}

/// Reason a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUp {
    pub t: f64,
    pub field: String,
    pub norm: f64,
}

impl From<BlowUp> for Error {
    fn from(b: BlowUp) -> Error {
        Error::BlowUp {
            t: b.t,
            field: b.field,
            norm: b.norm,
        }
    }
}

/// Record times `min(k·cadence, t_end)`, always including `0` and `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub cadence: f64,
    pub t_end: f64,
}

impl Schedule {
    pub fn new(cadence: f64, t_end: f64) -> Result<Schedule> {
        if !(cadence.is_finite() && cadence > 0.0) {
            return Err(Error::config(format!("cadence must be positive, got {cadence}")));
        }
        Ok(Schedule { cadence, t_end })
    }

    /// Number of records, counting the one at `t = 0`.
    pub fn len(&self) -> usize {
        if self.t_end <= 0.0 {
            1
        } else {
            (self.t_end / self.cadence - 1e-9).ceil() as usize + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 >= self.len() {
            self.t_end
        } else {
            k as f64 * self.cadence
        }
    }
}

/// Diffusion factors `exp(−D|k|²h)` for one step size.
#[derive(Debug)]
struct Factors {
    full: Vec<Array2<f64>>,
    half: Vec<Array2<f64>>,
}

fn decay(grid: &Grid, d: f64, h: f64) -> Array2<f64> {
    Array2::from_shape_fn(grid.spectral_shape(), |(q, p)| (-d * grid.k2(q, p) * h).exp())
}

fn factors<'a>(
    cache: &'a mut HashMap<u64, Factors>,
    model: &Model,
    grid: &Grid,
    h: f64,
) -> &'a Factors {
    // Adaptive runs rarely repeat a step size; keep the cache small.
    if cache.len() > 8 && !cache.contains_key(&h.to_bits()) {
        cache.clear();
    }
    let ds = model.diffusivities();
    cache.entry(h.to_bits()).or_insert_with(|| Factors {
        full: ds.iter().map(|&d| decay(grid, d, h)).collect(),
        half: ds.iter().map(|&d| decay(grid, d, 0.5 * h)).collect(),
    })
}

/// Advances a model's state; caches integrating factors per step size.
#[derive(Debug)]
pub struct Stepper {
    model: Model,
    scheme: Scheme,
    cache: HashMap<u64, Factors>,
    steps: u64,
}

/// `a = e ∘ (a + s·b)`
fn fused(a: &Field, s: f64, b: &Field, e: &Array2<f64>) -> Field {
    let mut out = a.clone();
    Zip::from(out.spec_mut())
        .and(b.spec())
        .and(e)
        .for_each(|o, &y, &w| *o = (*o + y * s) * w);
    out
}

impl Stepper {
    pub fn new(model: Model, scheme: Scheme) -> Stepper {
        Stepper {
            model,
            scheme,
            cache: HashMap::new(),
            steps: 0,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Steps taken so far, including any restored count.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
    }

    /// One step of size `h`; checks the result for blow-up.
    pub fn step(&mut self, state: &mut State, h: f64) -> Result<()> {
        let grid = state.grid().clone();
        if state.fields.len() != self.model.n_unknowns() {
            return Err(Error::config(format!(
                "state has {} unknowns but the model expects {}",
                state.fields.len(),
                self.model.n_unknowns()
            )));
        }
        let model = &self.model;
        let scheme = self.scheme;
        let fac = factors(&mut self.cache, model, &grid, h);
        let u = &state.fields;
        let next: Vec<Field> = match scheme {
            Scheme::IfEuler => {
                let k1 = model.nonlinear(u)?;
                u.iter()
                    .zip(&k1)
                    .zip(&fac.full)
                    .map(|((a, b), e)| fused(a, h, b, e))
                    .collect()
            }
            Scheme::IfRk4 => {
                let k1 = model.nonlinear(u)?;
                let s2: Vec<Field> = u
                    .iter()
                    .zip(&k1)
                    .zip(&fac.half)
                    .map(|((a, b), e)| fused(a, 0.5 * h, b, e))
                    .collect();
                let k2 = model.nonlinear(&s2)?;
                let s3: Vec<Field> = (0..u.len())
                    .map(|i| {
                        let mut f = u[i].clone();
                        Zip::from(f.spec_mut())
                            .and(k2[i].spec())
                            .and(&fac.half[i])
                            .for_each(|o, &k, &e2| *o = *o * e2 + k * (0.5 * h));
                        f
                    })
                    .collect();
                let k3 = model.nonlinear(&s3)?;
                let s4: Vec<Field> = (0..u.len())
                    .map(|i| {
                        let mut f = u[i].clone();
                        Zip::from(f.spec_mut())
                            .and(k3[i].spec())
                            .and(&fac.full[i])
                            .and(&fac.half[i])
                            .for_each(|o, &k, &e, &e2| *o = *o * e + k * (h * e2));
                        f
                    })
                    .collect();
                let k4 = model.nonlinear(&s4)?;
                (0..u.len())
                    .map(|i| {
                        let mut f = u[i].clone();
                        let w = h / 6.0;
                        let mid = &k2[i] + &k3[i];
                        Zip::from(f.spec_mut())
                            .and(k1[i].spec())
                            .and(mid.spec())
                            .and(k4[i].spec())
                            .and(&fac.full[i])
                            .and(&fac.half[i])
                            .for_each(|o, &a, &bc, &d, &e, &e2| {
                                *o = *o * e + (a * e + bc * (2.0 * e2) + d) * w;
                            });
                        f
                    })
                    .collect()
            }
        };
        state.fields = next;
        state.t += h;
        self.steps += 1;
        if let Some(b) = blow_up_check(state, self.model.scenario()) {
            return Err(b.into());
        }
        Ok(())
    }

    /// Integrates from `state.t` to exactly `t_target`.
    pub fn advance_to(&mut self, state: &mut State, t_target: f64, cfg: &IntegratorConfig) -> Result<()> {
        let t0 = state.t;
        let span = t_target - t0;
        if span <= 0.0 {
            return Ok(());
        }
        if !cfg.adaptive {
            let m = (span / cfg.dt - 1e-9).ceil().max(1.0) as u64;
            let h = span / m as f64;
            for k in 1..=m {
                self.step(state, h)?;
                state.t = if k == m { t_target } else { t0 + k as f64 * h };
            }
            return Ok(());
        }
        while state.t < t_target {
            let remaining = t_target - state.t;
            let h = adapt_dt(state, &self.model, cfg);
            if remaining <= h * (1.0 + 1e-9) {
                self.step(state, remaining)?;
                state.t = t_target;
            } else if remaining < 2.0 * h {
                self.step(state, 0.5 * remaining)?;
            } else {
                self.step(state, h)?;
            }
        }
        Ok(())
    }
}

/// Upper bound for the sup norm from the spectral coefficients.
fn sup_bound(f: &Field) -> f64 {
    let n = f.grid().n();
    let mut sum = 0.0;
    for ((q, _), c) in f.spec().indexed_iter() {
        let w = if q == 0 || 2 * q == n { 1.0 } else { 2.0 };
        sum += w * c.norm();
    }
    sum / (n * n) as f64
}

/// First field whose max-norm is non-finite or above the threshold.
pub fn blow_up_check(state: &State, scenario: Scenario) -> Option<BlowUp> {
    for (f, name) in state.fields.iter().zip(scenario.unknowns()) {
        let bound = sup_bound(f);
        if bound.is_finite() && bound <= BLOWUP_THRESHOLD {
            continue;
        }
        let norm = if bound.is_finite() {
            f.lp_norm(Lp::Inf)
        } else {
            f64::INFINITY
        };
        if !norm.is_finite() || norm > BLOWUP_THRESHOLD {
            return Some(BlowUp {
                t: state.t,
                field: (*name).to_string(),
                norm,
            });
        }
    }
    None
}

/// CFL-limited step: `cfl / (k²‖∇ψ‖∞ + k(‖∇Z‖∞ + ‖∇φ‖∞ + ‖W‖∞) + 1)`,
/// clamped to `[dt_min, dt_max]`.
///
/// `ψ` is the first unknown and `Z` the second; for the perturbation systems
/// the constant background gradient joins the matching term.
pub fn adapt_dt(state: &State, model: &Model, cfg: &IntegratorConfig) -> f64 {
    let grid = state.grid();
    let k = grid.k_max();
    let grad_sup = |f: &Field| {
        let g = Gradient::of(f);
        lp_of_magnitude(&[&g.x, &g.y], Lp::Inf, grid.dx())
    };
    let mut whistler = grad_sup(&state.fields[0]);
    let mut advect = grad_sup(&state.fields[1]);
    if model.scenario() == Scenario::Mhd {
        if let Ok(phi) = state.fields[3].inv_laplacian() {
            advect += grad_sup(&phi);
        }
        advect += state.fields[2].lp_norm(Lp::Inf);
    }
    if let Some(bg) = model.background() {
        let g = background_gradient_sup(bg, grid);
        match model.scenario() {
            Scenario::PerturbCase1 => whistler += g,
            Scenario::PerturbCase2 => advect += g,
            _ => {}
        }
    }
    let rate = k * k * whistler.max(1e-12) + k * advect + 1.0;
    (cfg.cfl / rate).clamp(cfg.dt_min, cfg.dt_max)
}

/// Largest background gradient over the box.
fn background_gradient_sup(bg: &crate::models::HarmonicBackground, grid: &Grid) -> f64 {
    let h = 0.5 * grid.l();
    [(-h, -h), (-h, h), (h, -h), (h, h), (0.0, 0.0)]
        .iter()
        .map(|&(x, y)| {
            let (gx, gy) = bg.gradient(x, y);
            gx.hypot(gy)
        })
        .fold(0.0, f64::max)
}

/// What stopped a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    BlowUp(BlowUp),
}

/// Information passed to the record observer.
#[derive(Debug, Clone, Copy)]
pub struct RecordInfo {
    pub index: usize,
    pub steps: u64,
}

/// Runs from record `start` of `schedule` to `t_end`, calling `observe` at
/// every record. The record at `start` itself is observed only when
/// `observe_start` is set (fresh runs), not on resume.
pub fn run<F>(
    stepper: &mut Stepper,
    state: &mut State,
    cfg: &IntegratorConfig,
    schedule: &Schedule,
    start: usize,
    observe_start: bool,
    mut observe: F,
) -> Result<Termination>
where
    F: FnMut(&State, RecordInfo) -> Result<()>,
{
    cfg.validate()?;
    if observe_start {
        observe(
            state,
            RecordInfo {
                index: start,
                steps: stepper.steps(),
            },
        )?;
    }
    for k in start + 1..schedule.len() {
        match stepper.advance_to(state, schedule.time(k), cfg) {
            Ok(()) => {}
            Err(Error::BlowUp { t, field, norm }) => {
                log::warn!("blow-up at t = {t}: {field} max-norm {norm:e}");
                return Ok(Termination::BlowUp(BlowUp { t, field, norm }));
            }
            Err(e) => return Err(e),
        }
        observe(
            state,
            RecordInfo {
                index: k,
                steps: stepper.steps(),
            },
        )?;
    }
    Ok(Termination::Completed)
}

/// One step of `scheme` with a fresh stepper; convenient for tests and tools.
pub fn step(model: &Model, state: &State, scheme: Scheme, dt: f64) -> Result<State> {
    let mut s = state.clone();
    Stepper::new(model.clone(), scheme).step(&mut s, dt)?;
    Ok(s)
}

#[cfg(test)]
mod tests;
