use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hallmhd::config::RunConfig;
use hallmhd::diagnostics::{run_fits, t_box, AuditReport, FitOutcome, FitSpec};
use hallmhd::output::read_csv;
use hallmhd::runner::{audit, execute};
use hallmhd::spectral::identities::{run_identity_suite, IdentityReport};
use hallmhd::spectral::DEFAULT_BOX;
use hallmhd::timestepper::Termination;
use hallmhd::Error;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_IO: u8 = 4;

/// Pseudo-spectral Hall MHD solver with decay and blow-up diagnostics.
#[derive(Parser)]
#[command(name = "hallmhd", version)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more configurations; several configs form a sweep.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Runs executed at once in a sweep.
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Continue a run from its checkpoint; a larger --t-end extends it.
    Resume {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the smallness report for a config without running it.
    Audit {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Re-run decay fits on an existing record CSV.
    Fit {
        csv: PathBuf,
        /// Column or `a+b` sum to fit; may be repeated.
        #[arg(short = 'Q', long = "quantity")]
        quantities: Vec<String>,
        #[arg(long, default_value_t = 4.0)]
        t0: f64,
        /// Window end; defaults to the box time of the recorded grid.
        #[arg(long)]
        t1: Option<f64>,
        /// Take the fit list from this config instead.
        #[arg(long, conflicts_with = "quantities")]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Check the bracket identities on random band-limited fields.
    Identities {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_BOX)]
        l: f64,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Override integrator.t_end.
    #[arg(long)]
    t_end: Option<f64>,
    /// Override run.threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Override output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Error> {
        if let Some(t) = self.t_end {
            cfg.integrator.t_end = t;
        }
        if let Some(n) = self.threads {
            cfg.run.threads = n;
        }
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        cfg.validate()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Precondition(_) | Error::Data(_) => {
            EXIT_CONFIG
        }
        Error::BlowUp { .. } => EXIT_BLOWUP,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn run_one(path: &Path, overrides: &Overrides, resume: bool) -> u8 {
    let result = load(path, overrides).and_then(|cfg| execute(&cfg, resume).map(|o| (cfg, o)));
    match result {
        Ok((cfg, outcome)) => {
            println!(
                "{}: {} at t = {} ({} records) -> {}",
                path.display(),
                outcome.summary.status,
                outcome.summary.t,
                outcome.summary.records,
                cfg.output.dir.display()
            );
            print_fits(&outcome.summary.fits);
            match outcome.termination {
                Termination::Completed => 0,
                Termination::BlowUp(b) => {
                    eprintln!("blow-up at t = {}: {} max-norm {:e}", b.t, b.field, b.norm);
                    EXIT_BLOWUP
                }
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            exit_code(&e)
        }
    }
}

fn run_sweep(configs: &[PathBuf], jobs: usize, overrides: &Overrides) -> u8 {
    if configs.len() > 1 {
        // Each run must own its output directory.
        let mut dirs = Vec::new();
        for p in configs {
            match load(p, overrides) {
                Ok(c) => dirs.push(c.output.dir),
                Err(e) => {
                    eprintln!("{}: {e}", p.display());
                    return exit_code(&e);
                }
            }
        }
        let mut sorted = dirs.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != dirs.len() || overrides.out.is_some() {
            eprintln!("sweep configs must write to distinct output directories");
            return EXIT_CONFIG;
        }
    }
    let jobs = jobs.max(1);
    let mut worst = 0;
    for chunk in configs.chunks(jobs) {
        let codes: Vec<u8> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|p| s.spawn(move || run_one(p, overrides, false)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or(EXIT_FAILED))
                .collect()
        });
        worst = codes.into_iter().fold(worst, u8::max);
    }
    worst
}

fn print_fits(fits: &[FitOutcome]) {
    for f in fits {
        match (&f.fit, &f.error) {
            (Some(fit), _) => println!(
                "  fit {:<24} exponent {:+.4}  r2 {:.6}  window [{}, {}]  samples {}",
                fit.quantity, fit.exponent, fit.r_squared, fit.t0, fit.t1, fit.samples
            ),
            (None, Some(e)) => println!("  fit {:<24} failed: {e}", f.quantity),
            (None, None) => {}
        }
    }
}

fn print_audit(r: &AuditReport) {
    println!("smallness audit ({})", r.scenario);
    for e in &r.entries {
        print!(
            "  {:<9} = {:.6e}  threshold {}  {}",
            e.name,
            e.value,
            e.threshold,
            if e.passed { "pass" } else { "fail" }
        );
        if let Some(c) = e.constant {
            print!("  constant {c:.6e}");
        }
        println!();
        if let Some(p) = &e.k_polynomial {
            let terms: Vec<String> = p
                .iter()
                .enumerate()
                .map(|(i, c)| match i {
                    0 => format!("{c:.6e}"),
                    1 => format!("{c:.6e} k"),
                    _ => format!("{c:.6e} k^{i}"),
                })
                .collect();
            println!("            as a polynomial in k: {}", terms.join(" + "));
        }
    }
}

fn print_identities(r: &IdentityReport) {
    println!("bracket identities: n = {}, {} triples, seed {}", r.n, r.pairs, r.seed);
    for c in &r.checks {
        println!(
            "  {:<34} max violation {:.3e}  (tolerance {:e})  {}",
            c.name,
            c.max_violation,
            c.tolerance,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run {
            configs,
            jobs,
            overrides,
        } => Ok(run_sweep(&configs, jobs, &overrides)),
        Command::Resume { config, overrides } => Ok(run_one(&config, &overrides, true)),
        Command::Audit { config, json: as_json } => {
            let cfg = RunConfig::load(&config)?;
            let report = audit(&cfg)?;
            if as_json {
                json(&report)?;
            } else {
                print_audit(&report);
            }
            Ok(if report.passed() { 0 } else { EXIT_FAILED })
        }
        Command::Fit {
            csv,
            quantities,
            t0,
            t1,
            config,
            json: as_json,
        } => {
            let (meta, traj) = read_csv(&csv)?;
            let specs: Vec<FitSpec> = match config {
                Some(path) => RunConfig::load(&path)?.diagnostics.fits,
                None => quantities
                    .into_iter()
                    .map(|quantity| FitSpec { quantity, t0, t1 })
                    .collect(),
            };
            if specs.is_empty() {
                return Err(Error::Config("no fits requested (use --quantity or --config)".into()));
            }
            let fits = run_fits(&traj, &specs, meta.l);
            if as_json {
                json(&fits)?;
            } else {
                println!("{} records, t_box = {}", traj.rows.len(), t_box(meta.l));
                print_fits(&fits);
            }
            Ok(if fits.iter().all(|f| f.fit.is_some()) { 0 } else { EXIT_CONFIG })
        }
        Command::Identities {
            n,
            l,
            pairs,
            seed,
            json: as_json,
        } => {
            let report = run_identity_suite(n, l, pairs, seed)?;
            if as_json {
                json(&report)?;
            } else {
                print_identities(&report);
            }
            Ok(if report.passed() { 0 } else { EXIT_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        (false, _) => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
