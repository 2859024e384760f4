//! Alternating optimization of beamformers and reflection coefficients.
//!
//! Each outer iteration solves the beamforming subproblem for the current
//! phases, tests convergence, then searches for new phases under which the
//! current beamformers still meet their requirements. The single-surface,
//! single-antenna case runs through the same code as the general one.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{maxmin_with_grams, minimize_power_with_grams, BeamformingOptions, Recovery};
use crate::channel_model::{all_grams, BeamformingSet, ChannelSet, PhaseProfile, SystemConfig};
use crate::error::{Error, Result};
use crate::phase::{find_phase, random_profile, PhaseConstraints, PhaseOptions, PhaseOutcome, PhaseStepReport, PhaseVariant};
use crate::rng::{derive_seed, Stream};
use crate::sdp::Tolerances;
use crate::sinr_metrics::{evaluate, SinrReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Minimize total power subject to `SINR_i ≥ γ_i`.
    PowerQos,
    /// Maximize `min_i SINR_i / γ_i` subject to total power `≤ P`.
    MaxminQos,
}

/// Traffic pattern; realized entirely through the group partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traffic {
    Unicast,
    Broadcast,
    Multicast,
}

impl Traffic {
    pub fn check(self, config: &SystemConfig) -> Result<()> {
        let ok = match self {
            Traffic::Unicast => config.groups.iter().all(|g| g.len() == 1),
            Traffic::Broadcast => config.groups.len() == 1,
            Traffic::Multicast => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("system.groups", format!("inconsistent with {self:?} traffic")))
        }
    }
}

mod eps_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmOptions {
    pub problem: Problem,
    /// Relative-change threshold; `"inf"` stops after the second W-step.
    #[serde(default = "default_epsilon", with = "eps_serde")]
    pub epsilon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Randomization trials for both subproblems.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Maximize SINR residuals in the phase step instead of bare feasibility.
    #[serde(default = "default_true")]
    pub residual_variant: bool,
    #[serde(default)]
    pub seed: u64,
    /// Offer the current phases as a fallback in each phase step.
    #[serde(default = "default_true")]
    pub keep_incumbent_phase: bool,
    /// Discrete phases: project all randomized candidates before selection.
    #[serde(default)]
    pub project_before_select: bool,
    #[serde(default)]
    pub sdp: Tolerances,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_epsilon() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    50
}
fn default_trials() -> usize {
    1000
}
fn default_restarts() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl AlgorithmOptions {
    pub fn new(problem: Problem) -> Self {
        AlgorithmOptions {
            problem,
            epsilon: default_epsilon(),
            max_iter: default_max_iter(),
            trials: default_trials(),
            restarts: default_restarts(),
            residual_variant: true,
            seed: 0,
            keep_incumbent_phase: true,
            project_before_select: false,
            sdp: Tolerances::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::config("algorithm.epsilon", "must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("algorithm.max_iter", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("algorithm.trials", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("algorithm.restarts", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("algorithm.threads", "must be at least 1"));
        }
        Ok(())
    }
}

/// A fully realized problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub constraints: PhaseConstraints,
    pub traffic: Traffic,
    pub algorithm: AlgorithmOptions,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.channels.check_against(&self.config)?;
        self.constraints.validate(&self.config.irs_sizes)?;
        self.traffic.check(&self.config)?;
        self.algorithm.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    PhaseStepFailed,
    BeamformingInfeasible,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total power, or the min scaled SINR for max-min.
    pub objective: f64,
    pub sdr_bound: f64,
    pub recovery: Recovery,
    pub sinr: SinrReport,
    /// The phase step that followed this W-step, if one ran.
    pub phase_step: Option<PhaseStepReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    /// Wall time at the end of each W-step, from the start of its restart.
    pub iteration_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: Problem,
    pub status: SolveStatus,
    /// Best objective over all restarts and iterations; `None` when no
    /// feasible iterate was found.
    pub objective: Option<f64>,
    pub best_restart: usize,
    pub best_iteration: Option<usize>,
    pub iterations: usize,
    /// Trajectory of the best restart.
    pub trajectory: Vec<IterationRecord>,
    pub w: Option<BeamformingSet>,
    pub phase: Option<PhaseProfile>,
    pub final_sinr: Option<SinrReport>,
    pub restarts: Vec<RestartSummary>,
    pub seed: u64,
    pub timing: Timing,
}

struct Iterate {
    iteration: usize,
    objective: f64,
    w: BeamformingSet,
    phase: PhaseProfile,
    sinr: SinrReport,
}

struct RunOutcome {
    status: SolveStatus,
    trajectory: Vec<IterationRecord>,
    best: Option<Iterate>,
    timing: Timing,
}

/// Feasibility tolerance used when choosing the best iterate.
const ACCEPT_REL: f64 = 1e-6;

fn power_feasible(sinr: &SinrReport, config: &SystemConfig) -> bool {
    sinr.sinr
        .iter()
        .zip(&config.sinr_targets)
        .all(|(s, g)| *s >= g * (1.0 - ACCEPT_REL))
}

fn improves(problem: Problem, candidate: f64, incumbent: Option<&Iterate>) -> bool {
    match (problem, incumbent) {
        (_, None) => true,
        (Problem::PowerQos, Some(b)) => candidate < b.objective,
        (Problem::MaxminQos, Some(b)) => candidate > b.objective,
    }
}

/// `1 − f_r/f_{r−1}` for power, `t_r/t_{r−1} − 1` for max-min.
fn relative_change(problem: Problem, prev: f64, cur: f64) -> f64 {
    match problem {
        Problem::PowerQos => {
            if prev == 0.0 {
                0.0
            } else {
                1.0 - cur / prev
            }
        }
        Problem::MaxminQos => {
            if prev == 0.0 {
                if cur == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                cur / prev - 1.0
            }
        }
    }
}

fn run_once(scenario: &Scenario, restart: usize) -> Result<RunOutcome> {
    let start = Instant::now();
    let alg = &scenario.algorithm;
    let config = &scenario.config;
    let mut phase = random_profile(&scenario.constraints, alg.seed, restart as u64);
    let mut trajectory: Vec<IterationRecord> = Vec::new();
    let mut timing = Timing::default();
    let mut best: Option<Iterate> = None;
    let mut incumbent_w: Option<BeamformingSet> = None;
    let mut prev: Option<f64> = None;
    let mut status = SolveStatus::IterationCap;

    for r in 1..=alg.max_iter {
        let bopts = BeamformingOptions {
            trials: alg.trials,
            seed: derive_seed(alg.seed, Stream::Restart, &[restart as u64, r as u64, 0]),
            sdp: alg.sdp,
            ..BeamformingOptions::default()
        };
        let grams = all_grams(&scenario.channels, &phase);
        let step = match alg.problem {
            Problem::PowerQos => minimize_power_with_grams(&grams, config, &bopts, incumbent_w.as_ref()),
            Problem::MaxminQos => maxmin_with_grams(&grams, config, &bopts, incumbent_w.as_ref()),
        };
        let step = match step {
            Ok(s) => s,
            Err(Error::InfeasibleTargets) => {
                log::info!("restart {restart}, iteration {r}: beamforming subproblem infeasible");
                status = SolveStatus::BeamformingInfeasible;
                break;
            }
            Err(e) => return Err(e),
        };
        let sinr = evaluate(&scenario.channels, &phase, &step.w, config)?;
        let objective = match alg.problem {
            Problem::PowerQos => sinr.total_power,
            Problem::MaxminQos => sinr.min_scaled_sinr.max(0.0),
        };
        let feasible = match alg.problem {
            Problem::PowerQos => power_feasible(&sinr, config),
            Problem::MaxminQos => sinr.total_power <= config.power_budget * (1.0 + 1e-8),
        };
        log::debug!("restart {restart}, iteration {r}: objective {objective:.9e}, feasible {feasible}");
        if feasible && improves(alg.problem, objective, best.as_ref()) {
            best = Some(Iterate {
                iteration: r,
                objective,
                w: step.w.clone(),
                phase: phase.clone(),
                sinr: sinr.clone(),
            });
        }
        trajectory.push(IterationRecord {
            iteration: r,
            objective,
            sdr_bound: step.sdr_bound,
            recovery: step.recovery,
            sinr,
            phase_step: None,
        });
        timing.iteration_ms.push(start.elapsed().as_secs_f64() * 1e3);

        if let Some(p) = prev {
            if relative_change(alg.problem, p, objective) <= alg.epsilon {
                status = SolveStatus::Converged;
                break;
            }
        }
        if r == alg.max_iter {
            break;
        }
        prev = Some(objective);

        if step.w.total_power() == 0.0 {
            // Phases have no effect on a silent transmitter.
            incumbent_w = Some(step.w);
            continue;
        }
        let t_scale = match alg.problem {
            Problem::PowerQos => 1.0,
            Problem::MaxminQos => objective,
        };
        let popts = PhaseOptions {
            trials: alg.trials,
            seed: derive_seed(alg.seed, Stream::Restart, &[restart as u64, r as u64, 1]),
            variant: if alg.residual_variant {
                PhaseVariant::Residual
            } else {
                PhaseVariant::Feasibility
            },
            project_before_select: alg.project_before_select,
            sdp: alg.sdp,
            ..PhaseOptions::default()
        };
        let incumbent_phase = alg.keep_incumbent_phase.then_some(&phase);
        let outcome = find_phase(
            &scenario.channels,
            &step.w,
            config,
            &scenario.constraints,
            t_scale,
            &popts,
            incumbent_phase,
        );
        let (outcome, report) = match outcome {
            Ok(o) => o,
            Err(Error::SolverFailure { status: s }) => {
                log::warn!("restart {restart}, iteration {r}: phase SDP failed with {s:?}");
                status = SolveStatus::PhaseStepFailed;
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(last) = trajectory.last_mut() {
            last.phase_step = Some(report);
        }
        match outcome {
            PhaseOutcome::Found(p) => phase = p,
            PhaseOutcome::Infeasible => {
                log::info!("restart {restart}, iteration {r}: no phase candidate");
                status = SolveStatus::PhaseStepFailed;
                break;
            }
        }
        incumbent_w = Some(step.w);
    }
    timing.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutcome {
        status,
        trajectory,
        best,
        timing,
    })
}

fn solve_checked(scenario: &Scenario, problem: Problem) -> Result<SolveReport> {
    scenario.validate()?;
    if scenario.algorithm.problem != problem {
        return Err(Error::config("algorithm.problem", format!("expected {problem:?}")));
    }
    let run = || -> Result<SolveReport> {
        let start = Instant::now();
        let outcomes: Vec<RunOutcome> = (0..scenario.algorithm.restarts)
            .into_par_iter()
            .map(|k| run_once(scenario, k))
            .collect::<Result<_>>()?;
        let mut pick = 0;
        for (k, o) in outcomes.iter().enumerate() {
            let better = match (&o.best, &outcomes[pick].best) {
                (Some(a), Some(b)) => improves(problem, a.objective, Some(b)),
                (Some(_), None) => true,
                _ => false,
            };
            if better {
                pick = k;
            }
        }
        let restarts = outcomes
            .iter()
            .enumerate()
            .map(|(k, o)| RestartSummary {
                restart: k,
                status: o.status,
                objective: o.best.as_ref().map(|b| b.objective),
                iterations: o.trajectory.len(),
            })
            .collect();
        let chosen = outcomes.into_iter().nth(pick).expect("at least one restart");
        let mut timing = chosen.timing;
        timing.total_ms = start.elapsed().as_secs_f64() * 1e3;
        let iterations = chosen.trajectory.len();
        let (objective, best_iteration, w, phase, final_sinr) = match chosen.best {
            Some(b) => (Some(b.objective), Some(b.iteration), Some(b.w), Some(b.phase), Some(b.sinr)),
            None => (None, None, None, None, None),
        };
        Ok(SolveReport {
            problem,
            status: chosen.status,
            objective,
            best_restart: pick,
            best_iteration,
            iterations,
            trajectory: chosen.trajectory,
            w,
            phase,
            final_sinr,
            restarts,
            seed: scenario.algorithm.seed,
            timing,
        })
    };
    match scenario.algorithm.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("algorithm.threads", e.to_string()))?
            .install(run),
        None => run(),
    }
}

pub fn solve_power_control(scenario: &Scenario) -> Result<SolveReport> {
    solve_checked(scenario, Problem::PowerQos)
}

pub fn solve_maxmin(scenario: &Scenario) -> Result<SolveReport> {
    solve_checked(scenario, Problem::MaxminQos)
}

/// Dispatches on `scenario.algorithm.problem`.
pub fn solve(scenario: &Scenario) -> Result<SolveReport> {
    solve_checked(scenario, scenario.algorithm.problem)
}
