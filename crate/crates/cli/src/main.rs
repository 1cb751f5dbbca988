mod config;
mod jobs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use phigamma::par::Exec;

use config::{parse_config, Overrides, RunConfig};
use jobs::{run_job, DimsRow, Job, JobReport, Status};

/// Directory for `run_report.json` and `dims.csv`; defaults to the working directory.
const OUT_DIR_VAR: &str = "PHIGAMMA_OUT_DIR";

const EXIT_OK: u8 = 0;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "phigamma", version, about = "Finite-precision experiments with (phi, Gamma)-modules")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Residue characteristic (odd prime).
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Working precision N.
    #[arg(long = "prec", global = true)]
    prec: Option<u32>,
    /// Guard digits G.
    #[arg(long, global = true)]
    guard: Option<u32>,
    /// Window depth D.
    #[arg(long, global = true)]
    window: Option<i64>,
    /// Cyclotomic level m of the untilt.
    #[arg(long = "level-m", global = true)]
    level_m: Option<u32>,
    #[arg(long = "witt-length", global = true)]
    witt_length: Option<usize>,
    /// Seed of the sampled checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Print the report to stdout instead of writing files.
    #[arg(long, global = true)]
    stdout: bool,
    #[command(subcommand)]
    job: Option<Job>,
}

#[derive(Serialize)]
struct Summary {
    jobs: usize,
    ok: usize,
    not_converged: usize,
    rejected: usize,
    all_converged: bool,
}

/// Wall-clock time is reported on stderr only, so equal configs give equal bytes.
#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a RunConfig,
    jobs: Vec<JobReport>,
    summary: Summary,
}

fn summarize(jobs: &[JobReport]) -> Summary {
    let count = |s: Status| jobs.iter().filter(|j| j.status == s).count();
    let (ok, not_converged, rejected) = (count(Status::Ok), count(Status::NotConverged), count(Status::Rejected));
    Summary { jobs: jobs.len(), ok, not_converged, rejected, all_converged: ok == jobs.len() }
}

fn write_outputs(dir: &Path, report: &str, dims: &[DimsRow]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("run_report.json"), report)?;
    let mut w = csv::Writer::from_path(dir.join("dims.csv"))?;
    for row in dims {
        w.serialize(row)?;
    }
    w.flush()
}

fn run(cli: Cli) -> Result<u8, String> {
    let overrides = Overrides {
        p: cli.p,
        n: cli.prec,
        g: cli.guard,
        d: cli.window,
        m: cli.level_m,
        witt_length: cli.witt_length,
        seed: cli.seed,
    };
    let mut cfg = parse_config(cli.config.as_deref(), &overrides).map_err(|e| e.to_string())?;
    if let Some(job) = cli.job {
        cfg.jobs = vec![job];
    }
    if cfg.jobs.is_empty() {
        return Err("no job: give a subcommand or a config file with a jobs list".into());
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let t0 = Instant::now();
    let results = exec.map(cfg.jobs.len(), |i| run_job(&cfg, i, &cfg.jobs[i], exec));
    let (jobs, dims): (Vec<JobReport>, Vec<Option<DimsRow>>) = results.into_iter().unzip();
    let dims: Vec<DimsRow> = dims.into_iter().flatten().collect();
    let summary = summarize(&jobs);
    let code = if summary.rejected > 0 {
        EXIT_PRECONDITION
    } else if summary.not_converged > 0 {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    };
    for j in &jobs {
        if let Some(err) = &j.error {
            eprintln!("job {}: {err}", j.index);
        }
    }
    let report = RunReport { config: &cfg, jobs, summary };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    text.push('\n');
    if cli.stdout {
        print!("{text}");
    } else {
        let dir = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
        write_outputs(&dir, &text, &dims).map_err(|e| format!("cannot write to {}: {e}", dir.display()))?;
        eprintln!("wrote {}", dir.join("run_report.json").display());
    }
    eprintln!("{} job(s) in {:.2}s, exit {code}", report.summary.jobs, t0.elapsed().as_secs_f64());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PRECONDITION)
        }
    }
}
