//! Report files. Each file is written to a temporary sibling and renamed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use irsbeam::alt_opt::{Problem, SolveReport, SolveStatus};
use irsbeam::channel_model::{BeamformingSet, PhaseProfile};
use serde::Serialize;

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct Solution<'a> {
    problem: Problem,
    status: SolveStatus,
    objective: Option<f64>,
    w: Option<&'a BeamformingSet>,
    phase: Option<&'a PhaseProfile>,
}

pub fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::PhaseStepFailed => "phase_step_failed",
        SolveStatus::BeamformingInfeasible => "beamforming_infeasible",
        SolveStatus::IterationCap => "iteration_cap",
    }
}

/// `iteration,objective,min_scaled_sinr,wall_ms`.
pub fn trajectory_csv(report: &SolveReport) -> String {
    let mut out = String::from("iteration,objective,min_scaled_sinr,wall_ms\n");
    for (k, rec) in report.trajectory.iter().enumerate() {
        let wall = report.timing.iteration_ms.get(k).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{:.3}",
            rec.iteration, rec.objective, rec.sinr.min_scaled_sinr, wall
        );
    }
    out
}

/// Writes `report.json`, `trajectory.csv` and `solution.json` into `dir`.
pub fn write_run(dir: &Path, report: &SolveReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let json = serde_json::to_string_pretty(report)?;
    write_atomic(&dir.join("report.json"), &(json + "\n"))?;
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(report))?;
    let solution = Solution {
        problem: report.problem,
        status: report.status,
        objective: report.objective,
        w: report.w.as_ref(),
        phase: report.phase.as_ref(),
    };
    write_atomic(&dir.join("solution.json"), &(serde_json::to_string_pretty(&solution)? + "\n"))?;
    Ok(())
}
