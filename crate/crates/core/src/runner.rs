//! Orchestrates one configured run: initial data, stepping, records,
//! checkpoints and the summary.

use std::time::Instant;

use crate::config::RunConfig;
use crate::diagnostics::{smallness_audit, t_box, AuditReport, Trajectory, Tracker};
use crate::error::{Error, Result};
use crate::models::State;
use crate::output::{
    read_checkpoint, read_csv, write_checkpoint, write_csv, write_summary, BlowUpReport,
    Checkpoint, CsvMeta, Summary, CSV_VERSION,
};
use crate::timestepper::{run, Schedule, Stepper, Termination};

/// Result of [`execute`].
#[derive(Debug)]
pub struct RunOutcome {
    pub termination: Termination,
    pub trajectory: Trajectory,
    pub state: State,
    pub summary: Summary,
}

/// Audit of the configured initial data, without running anything.
pub fn audit(cfg: &RunConfig) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let initial = cfg.initial_state(&grid)?;
    let bg = cfg.background()?;
    smallness_audit(
        &initial,
        cfg.scenario,
        bg.as_ref(),
        cfg.diagnostics.k,
        cfg.diagnostics.smallness_threshold,
    )
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("run.threads: {e}")))
}

/// Runs the configuration from `t = 0`, or from its checkpoint when
/// `resume` is set. Outputs are written as configured.
pub fn execute(cfg: &RunConfig, resume: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    thread_pool(cfg.run.threads)?.install(|| execute_inner(cfg, resume))
}

fn execute_inner(cfg: &RunConfig, resume: bool) -> Result<RunOutcome> {
    let started = Instant::now();
    let grid = cfg.grid()?;
    let model = cfg.model(&grid)?;
    let initial = cfg.initial_state(&grid)?;
    let schedule = Schedule::new(cfg.diagnostics.cadence, cfg.integrator.t_end)?;
    let mut tracker = Tracker::new(&model, &cfg.diagnostics, &initial)?;
    let mut stepper = Stepper::new(model.clone(), cfg.integrator.scheme);
    let meta = CsvMeta {
        version: CSV_VERSION,
        scenario: cfg.scenario,
        n: grid.n(),
        l: grid.l(),
    };

    let (audit, audit_error) = match smallness_audit(
        &initial,
        cfg.scenario,
        model.background(),
        cfg.diagnostics.k,
        cfg.diagnostics.smallness_threshold,
    ) {
        Ok(r) => {
            for e in &r.entries {
                log::info!(
                    "{} = {:.6e} (threshold {}) {}",
                    e.name,
                    e.value,
                    e.threshold,
                    if e.passed { "pass" } else { "FAIL" }
                );
            }
            (Some(r), None)
        }
        Err(e) => {
            log::info!("smallness audit skipped: {e}");
            (None, Some(e.to_string()))
        }
    };

    let (mut state, start) = if resume {
        let ck = read_checkpoint(&cfg.checkpoint_path())?;
        if ck.scenario != cfg.scenario
            || ck.state.grid().n() != grid.n()
            || ck.state.grid().l() != grid.l()
        {
            return Err(Error::config(format!(
                "checkpoint ({}, n = {}, l = {}) does not match the config ({}, n = {}, l = {})",
                ck.scenario.name(),
                ck.state.grid().n(),
                ck.state.grid().l(),
                cfg.scenario.name(),
                grid.n(),
                grid.l()
            )));
        }
        let record = ck.record as usize;
        if record >= schedule.len() || schedule.time(record) != ck.state.t {
            return Err(Error::config(format!(
                "checkpoint time {} is not record {record} of this schedule",
                ck.state.t
            )));
        }
        let (csv_meta, traj) = read_csv(&cfg.csv_path())?;
        if csv_meta != meta {
            return Err(Error::config("record file does not match the config"));
        }
        if traj.columns != tracker.trajectory().columns {
            return Err(Error::format(cfg.csv_path(), "columns differ from this configuration"));
        }
        let rows: Vec<_> = traj
            .rows
            .into_iter()
            .filter(|r| r[0].is_some_and(|t| t <= ck.state.t))
            .collect();
        if rows.len() != record + 1 {
            return Err(Error::format(
                cfg.csv_path(),
                format!("{} records up to t = {}, checkpoint expects {}", rows.len(), ck.state.t, record + 1),
            ));
        }
        tracker.restore(rows)?;
        stepper.set_steps(ck.steps);
        log::info!("resuming at t = {} (record {record}, {} steps)", ck.state.t, ck.steps);
        (ck.state, record)
    } else {
        (initial, 0)
    };

    let every = cfg.output.checkpoint_every;
    let summary_of = |tracker: &Tracker, status: &'static str, blow: Option<BlowUpReport>, t: f64, steps: u64| {
        Summary {
            format_version: CSV_VERSION,
            scenario: cfg.scenario.name(),
            status,
            blow_up: blow,
            t,
            steps,
            records: tracker.trajectory().rows.len(),
            t_box: t_box(grid.l()),
            audit: audit.clone(),
            audit_error: audit_error.clone(),
            fits: tracker.fits(grid.l()),
            sponge_max_mass_fraction: tracker.sponge_max(),
            support_violated: tracker.support_violated(),
            config: cfg.clone(),
        }
    };

    let termination = run(
        &mut stepper,
        &mut state,
        &cfg.integrator,
        &schedule,
        start,
        !resume,
        |s, info| {
            tracker.record(s, info.steps)?;
            let last = info.index + 1 == schedule.len();
            if every > 0 && info.index > start && info.index % every == 0 && !last {
                write_checkpoint(
                    &cfg.checkpoint_path(),
                    &Checkpoint {
                        scenario: cfg.scenario,
                        dt: cfg.integrator.dt,
                        steps: info.steps,
                        record: info.index as u64,
                        state: s.clone(),
                    },
                )?;
                write_csv(&cfg.csv_path(), &meta, tracker.trajectory())?;
                write_summary(
                    &cfg.summary_path(),
                    &summary_of(&tracker, "running", None, s.t, info.steps),
                )?;
                log::debug!("checkpoint at t = {}", s.t);
            }
            Ok(())
        },
    )?;

    let (status, blow) = match &termination {
        Termination::Completed => {
            write_checkpoint(
                &cfg.checkpoint_path(),
                &Checkpoint {
                    scenario: cfg.scenario,
                    dt: cfg.integrator.dt,
                    steps: stepper.steps(),
                    record: (schedule.len() - 1) as u64,
                    state: state.clone(),
                },
            )?;
            ("completed", None)
        }
        Termination::BlowUp(b) => ("blow_up", Some(BlowUpReport::from(b))),
    };
    write_csv(&cfg.csv_path(), &meta, tracker.trajectory())?;
    let summary = summary_of(&tracker, status, blow, state.t, stepper.steps());
    write_summary(&cfg.summary_path(), &summary)?;
    log::info!(
        "{status} at t = {} after {} steps and {} records in {:.1} s",
        state.t,
        stepper.steps(),
        summary.records,
        started.elapsed().as_secs_f64()
    );
    Ok(RunOutcome {
        termination,
        trajectory: tracker.into_trajectory(),
        state,
        summary,
    })
}
