//! Norm bundles, energy bookkeeping, blow-up functionals, decay fits,
//! asymptotic-profile errors and smallness audits.

mod asymptotics;
mod audit;
mod fit;
mod functionals;
mod norms;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use asymptotics::{
    asymptotic_error, moments, weight_exponent, AsymptoticContext, AsymptoticMode, Moments,
    Reference,
};
pub use audit::{smallness_audit, AuditReport, Epsilon};
pub use fit::{decay_fit, DecayFit, MIN_FIT_SAMPLES};
pub use functionals::{
    blowup_functional, cumulative_trapezoid, energy_residual, serrin_integral, t_box, SerrinPair,
};
pub use norms::{norm_suite, FieldNorms, Norms};

use crate::error::{Error, Result};
use crate::models::{BackgroundKind, Model, Scenario, State, SPONGE_MASS_LIMIT};
use crate::oracle::heat_evolve;
use crate::spectral::Lp;

/// A fit requested in the configuration. `quantity` is a column name or a
/// `+`-separated sum of column names; `t1` defaults to the box time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub quantity: String,
    #[serde(default = "default_fit_start")]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
}

fn default_fit_start() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Time between records.
    pub cadence: f64,
    pub serrin_p: f64,
    pub serrin_q: f64,
    /// Record weighted distances to the heat-kernel comparators.
    pub asymptotics: bool,
    pub smallness_threshold: f64,
    /// Multiplier in the background constants `C₁`, `C₂`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub fits: Vec<FitSpec>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            cadence: 0.1,
            serrin_p: 4.0,
            serrin_q: 4.0,
            asymptotics: false,
            smallness_threshold: 1.0,
            k: None,
            fits: Vec::new(),
        }
    }
}

impl DiagnosticsConfig {
    pub fn serrin(&self) -> Result<SerrinPair> {
        SerrinPair::new(self.serrin_p, self.serrin_q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cadence.is_finite() && self.cadence > 0.0) {
            return Err(Error::config(format!(
                "diagnostics.cadence must be positive, got {}",
                self.cadence
            )));
        }
        self.serrin()?;
        if !(self.smallness_threshold > 0.0) {
            return Err(Error::config("diagnostics.smallness_threshold must be positive"));
        }
        if let Some(k) = self.k {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::config(format!("diagnostics.k must be non-negative, got {k}")));
            }
        }
        for f in &self.fits {
            if f.quantity.split('+').any(|s| s.trim().is_empty()) {
                return Err(Error::config(format!("fit quantity '{}' is malformed", f.quantity)));
            }
        }
        Ok(())
    }
}

/// Column names of a run's records, in CSV order.
pub fn columns(scenario: Scenario, cfg: &DiagnosticsConfig, has_sponge: bool) -> Vec<String> {
    let names = scenario.unknowns();
    let (a, b) = (names[0], names[1]);
    let mut c: Vec<String> = vec!["t".into(), "steps".into()];
    let push = |c: &mut Vec<String>, items: &[&str]| c.extend(items.iter().map(|s| s.to_string()));
    match scenario {
        Scenario::Hall | Scenario::HeatValidation => push(&mut c, &["M", "N", "S"]),
        Scenario::PerturbCase1 => push(&mut c, &["F1", "F2", "F3", "F4"]),
        Scenario::PerturbCase2 => push(&mut c, &["K1", "K2", "K3", "K4"]),
        Scenario::Mhd => push(&mut c, &["P1", "P2", "P3", "P4", "P", "Q"]),
    }
    if matches!(scenario, Scenario::PerturbCase1 | Scenario::PerturbCase2) && cfg.k.is_some() {
        push(&mut c, &["weighted_total"]);
    }
    push(&mut c, &["energy", "dissipation"]);
    for u in [a, b] {
        c.push(format!("{u}_l1"));
        c.push(format!("{u}_l2"));
        c.push(format!("grad_{u}_l2"));
        c.push(format!("lap_{u}_l2"));
        c.push(format!("grad_lap_{u}_l2"));
        c.push(format!("bilap_{u}_l2"));
    }
    c.push(format!("grad_{b}_l4"));
    c.push(format!("grad_{b}_lp"));
    c.push(format!("lap_{a}_lp"));
    if scenario == Scenario::Mhd {
        push(
            &mut c,
            &[
                "w_l2",
                "grad_w_l2",
                "lap_w_l2",
                "grad_lap_w_l2",
                "grad_phi_l2",
                "lap_phi_l2",
                "grad_lap_phi_l2",
                "bilap_phi_l2",
            ],
        );
    }
    push(
        &mut c,
        &[
            "energy_residual",
            "energy_inequality",
            "dissipation_integral",
            "blowup_increment",
            "blowup_functional",
            "serrin_increment",
            "serrin_integral",
            "gamma_hat",
            "eta_hat",
            "gn_ladyzhenskaya",
            "gn_agmon",
        ],
    );
    for u in [a, b] {
        c.push(format!("{u}_mx"));
        c.push(format!("{u}_my"));
        c.push(format!("{u}_wl1"));
    }
    if has_sponge {
        c.push("sponge_mass".into());
    }
    if scenario == Scenario::HeatValidation {
        c.push("heat_error".into());
    }
    if cfg.asymptotics {
        for u in [a, b] {
            c.push(format!("err_{u}_kernel"));
            c.push(format!("err_{u}_conv"));
        }
    }
    c
}

/// Records of one run, one row per record time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub columns: Arc<[String]>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Trajectory {
    pub fn new(columns: Vec<String>) -> Trajectory {
        Trajectory {
            columns: columns.into(),
            rows: Vec::new(),
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0].unwrap_or(f64::NAN)).collect()
    }

    /// `(t, value)` pairs of a column or of a `+`-separated sum of columns;
    /// rows with an empty cell are skipped.
    pub fn series(&self, expr: &str) -> Result<Vec<(f64, f64)>> {
        let idx: Vec<usize> = expr
            .split('+')
            .map(|name| {
                let name = name.trim();
                self.index(name)
                    .ok_or_else(|| Error::Data(format!("unknown column '{name}'")))
            })
            .collect::<Result<_>>()?;
        Ok(self
            .rows
            .iter()
            .filter_map(|r| {
                let t = r[0]?;
                let mut sum = 0.0;
                for &i in &idx {
                    sum += r[i]?;
                }
                Some((t, sum))
            })
            .collect())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.series(name)?.into_iter().map(|(_, v)| v).collect())
    }
}

/// State carried between records.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Previous {
    t: f64,
    energy: f64,
    dissipation: f64,
    blowup_integrand: f64,
    serrin_integrand: f64,
}

/// Turns states into records and keeps the running integrals.
#[derive(Debug)]
pub struct Tracker {
    scenario: Scenario,
    cfg: DiagnosticsConfig,
    pair: SerrinPair,
    lp: Lp,
    resistivity: f64,
    viscosity: f64,
    background_constant: Option<f64>,
    sponge: Option<crate::models::Sponge>,
    asym: Option<AsymptoticContext>,
    heat_initial: Option<Vec<crate::spectral::Field>>,
    e0: Option<f64>,
    prev: Option<Previous>,
    dissipation_integral: f64,
    blowup: f64,
    serrin: f64,
    sponge_warned: bool,
    sponge_max: f64,
    trajectory: Trajectory,
}

impl Tracker {
    /// `initial` supplies the comparators for asymptotics and heat validation.
    pub fn new(model: &Model, cfg: &DiagnosticsConfig, initial: &State) -> Result<Tracker> {
        cfg.validate()?;
        let scenario = model.scenario();
        let pair = cfg.serrin()?;
        let background_constant = match (scenario, model.background(), cfg.k) {
            (Scenario::PerturbCase1, Some(bg), Some(k)) => Some(k * bg.hessian_sup().powi(2)),
            (Scenario::PerturbCase2, Some(bg), Some(k)) => match bg.kind() {
                BackgroundKind::Linear { a, b } => Some(k * (a * a + b * b)),
                _ => None,
            },
            _ => None,
        };
        let asym = cfg
            .asymptotics
            .then(|| AsymptoticContext::new(&initial.fields[0], &initial.fields[1]));
        let heat_initial =
            (scenario == Scenario::HeatValidation).then(|| initial.fields.clone());
        let sponge = model.sponge().cloned();
        let cols = columns(scenario, cfg, sponge.is_some());
        Ok(Tracker {
            scenario,
            cfg: cfg.clone(),
            pair,
            lp: pair.lp()?,
            resistivity: model.resistivity(),
            viscosity: model.viscosity(),
            background_constant,
            sponge,
            asym,
            heat_initial,
            e0: None,
            prev: None,
            dissipation_integral: 0.0,
            blowup: 0.0,
            serrin: 0.0,
            sponge_warned: false,
            sponge_max: 0.0,
            trajectory: Trajectory::new(cols),
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    /// Largest sponge mass fraction seen, if a sponge is active.
    pub fn sponge_max(&self) -> Option<f64> {
        self.sponge.as_ref().map(|_| self.sponge_max)
    }

    /// Whether the support monitor has tripped.
    pub fn support_violated(&self) -> bool {
        self.sponge_warned
    }

    fn integrands(&self, norms: &Norms) -> (f64, f64) {
        let q = self.pair.q;
        let b = norms.grad_b_lp.powf(q);
        (b, norms.lap_a_lp.powf(q) + b)
    }

    /// Computes, stores and returns the record for `state`.
    pub fn record(&mut self, state: &State, steps: u64) -> Result<&[Option<f64>]> {
        let norms = norm_suite(state, self.scenario, self.lp)?;
        let t = state.t;
        if let Some(p) = &self.prev {
            if !(t > p.t) {
                return Err(Error::Data(format!(
                    "record times must increase: {t} after {}",
                    p.t
                )));
            }
        }
        let energy = norms.energy();
        let dissipation = norms.dissipation(self.resistivity, self.viscosity);
        let (bi, si) = self.integrands(&norms);
        let e0 = *self.e0.get_or_insert(energy);

        let (residual, b_inc, s_inc) = match self.prev {
            None => (0.0, 0.0, 0.0),
            Some(p) => {
                let h = t - p.t;
                self.dissipation_integral += 0.5 * h * (p.dissipation + dissipation);
                (
                    energy_residual(p.t, p.energy, p.dissipation, t, energy, dissipation),
                    0.5 * h * (p.blowup_integrand + bi),
                    0.5 * h * (p.serrin_integrand + si),
                )
            }
        };
        self.blowup += b_inc;
        self.serrin += s_inc;
        let inequality = if e0 > 0.0 {
            (energy + 2.0 * self.dissipation_integral - e0) / e0
        } else {
            0.0
        };
        self.prev = Some(Previous {
            t,
            energy,
            dissipation,
            blowup_integrand: bi,
            serrin_integrand: si,
        });

        let mut row: Vec<Option<f64>> = Vec::with_capacity(self.trajectory.columns.len());
        macro_rules! put {
            ($v:expr) => {
                row.push(Some($v))
            };
        }
        put!(t);
        put!(steps as f64);
        match self.scenario {
            Scenario::Hall | Scenario::HeatValidation => {
                put!(norms.m());
                put!(norms.n());
                put!(norms.s());
            }
            Scenario::PerturbCase1 | Scenario::PerturbCase2 => {
                for i in 1..=4 {
                    put!(norms.bundle(i));
                }
            }
            Scenario::Mhd => {
                for i in 1..=4 {
                    put!(norms.bundle(i));
                }
                put!(norms.p_total());
                put!(norms.q_total());
            }
        }
        if matches!(self.scenario, Scenario::PerturbCase1 | Scenario::PerturbCase2)
            && self.cfg.k.is_some()
        {
            let c = self.background_constant.unwrap_or(0.0);
            let f = |i| norms.bundle(i);
            let total = if self.scenario == Scenario::PerturbCase1 {
                c * c * f(1) + c * f(2) + f(3)
            } else {
                c * c * c * norms.a.sq(0) + c * c * f(1) + c * f(2) + f(3)
            };
            put!(total);
        }
        put!(energy);
        put!(dissipation);
        for fnorm in [&norms.a, &norms.b] {
            put!(fnorm.l1);
            for s in 0..5 {
                put!(fnorm.sem[s]);
            }
        }
        put!(norms.grad_b_l4);
        put!(norms.grad_b_lp);
        put!(norms.lap_a_lp);
        if let (Some(w), Some(phi)) = (&norms.w, &norms.phi) {
            for s in 0..4 {
                put!(w.sem[s]);
            }
            for s in 1..5 {
                put!(phi.sem[s]);
            }
        }
        put!(residual);
        put!(inequality);
        put!(self.dissipation_integral);
        put!(b_inc);
        put!(self.blowup);
        put!(s_inc);
        put!(self.serrin);
        let ma = moments(&state.fields[0]);
        let mb = moments(&state.fields[1]);
        put!(ma.mass);
        put!(mb.mass);
        // Interpolation ratios, monitored only since their constants are unknown:
        // ‖∇b‖₄² / (‖∇b‖₂‖Δb‖₂) and ‖b‖∞² / (‖b‖₂‖Δb‖₂).
        let denom = norms.b.sem[1] * norms.b.sem[2];
        row.push((denom > 0.0).then(|| norms.grad_b_l4.powi(2) / denom));
        let denom = norms.b.sem[0] * norms.b.sem[2];
        row.push((denom > 0.0).then(|| state.fields[1].lp_norm(Lp::Inf).powi(2) / denom));
        for m in [&ma, &mb] {
            put!(m.first[0]);
            put!(m.first[1]);
            put!(m.weighted_l1);
        }
        if let Some(sponge) = &self.sponge {
            let frac = sponge.mass_fraction(&state.fields);
            self.sponge_max = self.sponge_max.max(frac);
            if frac > SPONGE_MASS_LIMIT && !self.sponge_warned {
                log::warn!(
                    "support monitor: {:.3e} of the mass lies in the sponge at t = {t} (limit {SPONGE_MASS_LIMIT:e})",
                    frac
                );
                self.sponge_warned = true;
            }
            put!(frac);
        }
        if let Some(init) = &self.heat_initial {
            let mut err = 0.0_f64;
            for (f, f0) in state.fields.iter().zip(init) {
                let exact = heat_evolve(f0, t)?;
                err = err.max((f - &exact).lp_norm(Lp::Inf));
            }
            put!(err);
        }
        if let Some(ctx) = &self.asym {
            for (f, r) in state.fields.iter().zip([Reference::Psi, Reference::Z]) {
                for mode in [AsymptoticMode::GammaKernel, AsymptoticMode::Convolved] {
                    row.push(if t > 0.0 {
                        Some(asymptotic_error(f, t, mode, r, ctx)?)
                    } else {
                        None
                    });
                }
            }
        }
        debug_assert_eq!(row.len(), self.trajectory.columns.len());
        self.trajectory.rows.push(row);
        Ok(self.trajectory.rows.last().expect("row just pushed"))
    }

    /// Rebuilds the running integrals from previously written rows, so a
    /// resumed run continues the series exactly.
    pub fn restore(&mut self, rows: Vec<Vec<Option<f64>>>) -> Result<()> {
        let traj = Trajectory {
            columns: self.trajectory.columns.clone(),
            rows,
        };
        let (first, last) = match (traj.rows.first(), traj.rows.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::Data("no records to resume from".into())),
        };
        let get = |row: &Vec<Option<f64>>, name: &str| -> Result<f64> {
            let i = traj
                .index(name)
                .ok_or_else(|| Error::Data(format!("missing column {name}")))?;
            row.get(i)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Data(format!("empty {name} cell in record")))
        };
        let names = self.scenario.unknowns();
        let q = self.pair.q;
        let grad_b = get(last, &format!("grad_{}_lp", names[1]))?;
        let lap_a = get(last, &format!("lap_{}_lp", names[0]))?;
        let b = grad_b.powf(q);
        self.e0 = Some(get(first, "energy")?);
        self.prev = Some(Previous {
            t: get(last, "t")?,
            energy: get(last, "energy")?,
            dissipation: get(last, "dissipation")?,
            blowup_integrand: b,
            serrin_integrand: lap_a.powf(q) + b,
        });
        self.dissipation_integral = get(last, "dissipation_integral")?;
        self.blowup = get(last, "blowup_functional")?;
        self.serrin = get(last, "serrin_integral")?;
        if let Some(i) = traj.index("sponge_mass") {
            self.sponge_max = traj
                .rows
                .iter()
                .filter_map(|r| r[i])
                .fold(0.0, f64::max);
            self.sponge_warned = self.sponge_max > SPONGE_MASS_LIMIT;
        }
        self.trajectory = traj;
        Ok(())
    }

    /// Runs the configured fits on the records so far; failures are
    /// reported per fit rather than aborting.
    pub fn fits(&self, l: f64) -> Vec<FitOutcome> {
        run_fits(&self.trajectory, &self.cfg.fits, l)
    }
}

/// Result of one configured fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutcome {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub t_box: f64,
}

/// Evaluates every fit spec against a trajectory; `l` fixes the default window end.
pub fn run_fits(traj: &Trajectory, specs: &[FitSpec], l: f64) -> Vec<FitOutcome> {
    let tb = t_box(l);
    specs
        .iter()
        .map(|spec| {
            let t1 = spec.t1.unwrap_or(tb);
            let result = traj
                .series(&spec.quantity)
                .and_then(|s| decay_fit(&spec.quantity, &s, spec.t0, t1));
            match result {
                Ok(fit) => {
                    log::debug!(
                        "fit {}: exponent {:.4} (r² {:.6}) on [{}, {}], t_box = {tb}",
                        fit.quantity,
                        fit.exponent,
                        fit.r_squared,
                        fit.t0,
                        fit.t1
                    );
                    FitOutcome {
                        quantity: spec.quantity.clone(),
                        fit: Some(fit),
                        error: None,
                        t_box: tb,
                    }
                }
                Err(e) => FitOutcome {
                    quantity: spec.quantity.clone(),
                    fit: None,
                    error: Some(e.to_string()),
                    t_box: tb,
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
