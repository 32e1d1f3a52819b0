//! `mplab`: configuration-driven experiments on measure-data semilinear
//! problems.
//!
//! Exit codes: 0 when every ladder converged and every invariant row
//! passed, 1 otherwise (or on a runtime failure), 2 for configuration
//! errors.

mod config;
mod expr;
mod io;
mod plot;
mod report;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{ConfigError, Experiment, ProfileSel};

#[derive(Parser)]
#[command(name = "mplab", version, about = "Measure-data semilinear elliptic experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Clone)]
enum Cmd {
    /// Solve on every grid of the ladder.
    Solve(Opts),
    /// Reduced measure by truncation and/or mollification.
    Reduce(Opts),
    /// Metric projection onto good measures.
    Project(Opts),
    /// Integrability of f(·, Gμ) along the ladder.
    Admissible(Opts),
    /// A priori bound along the mollification family.
    Sweep(Opts),
    /// Built-in invariant suite; `--config` only sets the grid size.
    Verify(Opts),
}

#[derive(clap::Args, Clone)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides MPLAB_OUT and the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    mollifier_profile: Option<ProfileSel>,
}

impl Cmd {
    fn opts(&self) -> &Opts {
        match self {
            Cmd::Solve(o) | Cmd::Reduce(o) | Cmd::Project(o) | Cmd::Admissible(o) | Cmd::Sweep(o) | Cmd::Verify(o) => o,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Cmd::Solve(_) => "solve",
            Cmd::Reduce(_) => "reduce",
            Cmd::Project(_) => "project",
            Cmd::Admissible(_) => "admissible",
            Cmd::Sweep(_) => "sweep",
            Cmd::Verify(_) => "verify",
        }
    }
}

fn out_dir(opts: &Opts, exp: Option<&Experiment>) -> PathBuf {
    if let Some(o) = &opts.out {
        return o.clone();
    }
    if let Some(o) = std::env::var_os("MPLAB_OUT").filter(|o| !o.is_empty()) {
        return PathBuf::from(o);
    }
    exp.and_then(|e| e.out.clone()).unwrap_or_else(|| PathBuf::from("mplab_out"))
}

fn execute(cmd: Cmd) -> Result<i32> {
    let opts = cmd.opts().clone();
    let exp = match &opts.config {
        Some(p) => {
            let mut e = config::load(p)?;
            if let Some(pr) = opts.mollifier_profile {
                e.profile = pr.into();
            }
            Some(e)
        }
        None if matches!(cmd, Cmd::Verify(_)) => None,
        None => {
            return Err(ConfigError {
                key: "--config".into(),
                msg: format!("`{}` needs a config file", cmd.name()),
            }
            .into())
        }
    };
    let out = out_dir(&opts, exp.as_ref());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    let report = pool.install(|| match (&cmd, exp.as_ref()) {
        (Cmd::Verify(_), e) => {
            let n = e.and_then(|e| e.grids.last()).map_or(63, |g| g.n());
            verify::run_verify(n, e.map(|e| e.config_hash.clone()).unwrap_or_default())
        }
        (Cmd::Solve(_), Some(e)) => run::run_solve(e, &out),
        (Cmd::Reduce(_), Some(e)) => run::run_reduce(e, &out),
        (Cmd::Project(_), Some(e)) => run::run_project(e, &out),
        (Cmd::Admissible(_), Some(e)) => run::run_admissible(e, &out),
        (Cmd::Sweep(_), Some(e)) => run::run_sweep(e, &out),
        _ => unreachable!("config presence checked above"),
    })?;
    if matches!(cmd, Cmd::Verify(_)) {
        let mut csv = String::from("name,passed,value,limit,detail\n");
        for r in &report.invariants {
            csv += &format!("\"{}\",{},{},{},\"{}\"\n", r.name, r.passed, r.value, r.limit, r.detail.replace('"', "'"));
        }
        io::write_atomic(&out.join("trace.csv"), csv.as_bytes())?;
    }
    io::write_json(&out.join("report.json"), &report)?;
    print!("{}", report.summary());
    println!("wrote {}", out.display());
    Ok(report.exit_code())
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.downcast_ref::<ConfigError>().is_some()
        || matches!(
            e.downcast_ref::<mplab_core::Error>(),
            Some(mplab_core::Error::MonotonicityViolation { .. })
        )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
