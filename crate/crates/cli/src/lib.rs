//! The `mixwass` command line and the files it reads and writes.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::Value;

use crate::cli::{Cli, Command};
use crate::commands::{Dump, Outcome};
use crate::config::Job;
use crate::error::{CliError, CliResult, EXIT_USAGE};
use crate::manifest::{FileDigest, RunManifest};

pub use crate::error::{EXIT_NUMERICAL, EXIT_VALIDATION};

pub const THREADS_ENV: &str = "MIXWASS_THREADS";

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(cli: &Cli) -> CliResult<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let threads = thread_count(cli)?;
    if let Command::Verify(v) = &cli.command {
        return verify(&v.manifest, &cli.out, threads);
    }
    let job = cli::build_job(cli)?.expect("non-verify commands build a job");
    let started = chrono::Utc::now();
    let outcome = in_pool(threads, || commands::execute(&job))??;
    let manifest = write_outputs(&cli.out, &job, &outcome, started)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", outcome.summary);
    let _ = writeln!(stdout, "report: {}", cli.out.join("report.json").display());
    let _ = writeln!(stdout, "manifest: {} (seed {})", cli.out.join("manifest.json").display(), manifest.seed);
    match outcome.failure {
        Some(f) => Err(CliError::Check(f)),
        None => Ok(()),
    }
}

/// Writes the report (with the resolved configuration echoed), sample dumps
/// and the manifest into `out`.
pub fn write_outputs(out: &Path, job: &Job, outcome: &Outcome, started: chrono::DateTime<chrono::Utc>) -> CliResult<RunManifest> {
    let config = serde_json::to_value(job).map_err(|e| CliError::Config(e.to_string()))?;
    let report = full_report(job, &config, outcome);
    let report_path = out.join("report.json");
    io::save_report(&report, &report_path)?;
    let mut outputs = vec![FileDigest::of(&report_path)?];
    for (name, dump) in &outcome.dumps {
        let path = out.join(name);
        match dump {
            Dump::Samples(set) => io::save_limit_samples(set, &path)?,
            Dump::Series(series) => io::save_series(series, &path)?,
        }
        outputs.push(FileDigest::of(&path)?);
    }
    let inputs = job.input_files().iter().map(|p| FileDigest::of(p)).collect::<CliResult<Vec<_>>>()?;
    let manifest = RunManifest {
        command: job.command().to_string(),
        config_hash: manifest::value_digest(&config),
        config,
        seed: job.seed(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        build: env!("MIXWASS_BUILD").to_string(),
        started_at: started,
        finished_at: chrono::Utc::now(),
        inputs,
        outputs,
        report_digest: manifest::report_digest(&report),
    };
    io::save_report(&manifest, &out.join("manifest.json"))?;
    Ok(manifest)
}

fn full_report(job: &Job, config: &Value, outcome: &Outcome) -> Value {
    serde_json::json!({
        "command": job.command(),
        "seed": job.seed(),
        "config": config,
        "result": outcome.report,
    })
}

/// Re-runs the job recorded in a manifest, writing fresh outputs into `out`.
/// The report must match up to timing fields and every sample dump must match
/// byte for byte.
fn verify(path: &Path, out: &Path, threads: Option<usize>) -> CliResult<()> {
    let m = RunManifest::load(path)?;
    let changed = m.changed_inputs()?;
    if !changed.is_empty() {
        let names: Vec<String> = changed.iter().map(|p| p.display().to_string()).collect();
        return Err(CliError::Check(format!("inputs changed since the run: {}", names.join(", "))));
    }
    if manifest::value_digest(&m.config) != m.config_hash {
        return Err(CliError::Check("stored configuration does not match its hash".into()));
    }
    let job: Job = serde_json::from_value(m.config.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let started = chrono::Utc::now();
    let outcome = in_pool(threads, || commands::execute(&job))??;
    let fresh = write_outputs(out, &job, &outcome, started)?;
    if fresh.report_digest != m.report_digest {
        return Err(CliError::Check(format!(
            "report differs: {} vs recorded {}",
            fresh.report_digest, m.report_digest
        )));
    }
    for old in m.outputs.iter().skip(1) {
        let name = old.path.file_name();
        let new = fresh.outputs.iter().find(|f| f.path.file_name() == name);
        if new.map(|f| &f.sha256) != Some(&old.sha256) {
            return Err(CliError::Check(format!("{} differs from the recorded run", old.path.display())));
        }
    }
    println!(
        "reproduced {} run (seed {}): report digest {} and {} dump(s) match",
        m.command,
        m.seed,
        fresh.report_digest,
        m.outputs.len() - 1
    );
    Ok(())
}
