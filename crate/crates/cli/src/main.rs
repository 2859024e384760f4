use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use irsbeam::alt_opt::{solve, SolveStatus};
use irsbeam::scenario::{apply_override, ScenarioFile, SweepAxis};
use rayon::prelude::*;

mod output;

#[derive(Parser)]
#[command(name = "irsbeam", version, about = "Joint beamforming and reflecting-surface phase optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario.
    Run(Common),
    /// Solve one scenario per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of N, M, K, tau, P, trials.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replaces algorithm.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override any scenario field, e.g. `algorithm.epsilon=1e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(common: &Common) -> Result<ScenarioFile> {
    let text = fs::read_to_string(&common.scenario)
        .with_context(|| format!("reading {}", common.scenario.display()))?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", common.scenario.display()))?;
    for item in &common.overrides {
        let Some((key, value)) = item.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {item:?}");
        };
        apply_override(&mut doc, key.trim(), value.trim())?;
    }
    if let Some(seed) = common.seed {
        apply_override(&mut doc, "algorithm.seed", &seed.to_string())?;
    }
    Ok(ScenarioFile::from_value(doc)?)
}

fn exit_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::BeamformingInfeasible => 2,
        SolveStatus::PhaseStepFailed => 3,
        SolveStatus::IterationCap => 4,
    }
}

fn run(common: &Common) -> Result<u8> {
    let file = load(common)?;
    let mut scenario = file.realize()?;
    if common.jobs.is_some() {
        scenario.algorithm.threads = common.jobs;
    }
    let report = solve(&scenario).context("solving scenario")?;
    output::write_run(&common.out, &report)?;
    log::info!(
        "status {}, objective {:?}, {} iterations",
        output::status_name(report.status),
        report.objective,
        report.iterations
    );
    Ok(exit_code(report.status))
}

fn sweep(common: &Common, axis: &str, values: &[String]) -> Result<u8> {
    let axis: SweepAxis = axis.parse()?;
    let values: Vec<(String, f64)> = values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| Ok((v.to_string(), v.parse::<f64>().with_context(|| format!("sweep value {v:?}"))?)))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        bail!("--values is empty");
    }
    let base = load(common)?;
    let points: Vec<ScenarioFile> = values
        .iter()
        .map(|(_, v)| base.with_axis(axis, *v))
        .collect::<irsbeam::Result<_>>()?;
    let scenarios = points.iter().map(ScenarioFile::realize).collect::<irsbeam::Result<Vec<_>>>()?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;

    let solve_point = |(k, scenario): (usize, &irsbeam::alt_opt::Scenario)| -> Result<String> {
        let label = &values[k].0;
        let report = solve(scenario).with_context(|| format!("solving {axis}={label}"))?;
        output::write_run(&common.out.join(format!("{axis}={label}")), &report)?;
        let objective = report.objective.map(|v| v.to_string()).unwrap_or_default();
        Ok(format!(
            "{label},{objective},{},{}\n",
            report.iterations,
            output::status_name(report.status)
        ))
    };
    let run_all = || -> Result<Vec<String>> { scenarios.par_iter().enumerate().map(solve_point).collect() };
    let rows = match common.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run_all)?,
        None => run_all()?,
    };
    let mut csv = format!("{axis},objective,iterations,status\n");
    csv.extend(rows);
    output::write_atomic(&Path::new(&common.out).join("sweep.csv"), &csv)?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IRSBEAM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => run(common),
        Command::Sweep { common, axis, values } => sweep(common, axis, values),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
