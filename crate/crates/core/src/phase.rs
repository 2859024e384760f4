//! Phase-shift optimization for fixed beamformers.
//!
//! With `a_{i,q}(w_k)` the stacked vectors `diag(h^H_{l,i,q}) H_{b,l} w_k`
//! and `b_{i,q}(w_k) = h^H_{b,i,q} w_k`, the received amplitude is
//! `φ^H a + b` where `φ` stacks the conjugated reflection coefficients. The
//! lifted variable `V = v v^H`, `v = [φ; 1]`, turns every SINR requirement
//! into a linear constraint on `V`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::USABLE_VIOLATION;
use crate::channel_model::{
    grid_angle, nearest_grid_index, wrap_angle, AmplitudeMode, BeamformingSet, ChannelSet, PhaseMode, PhaseProfile,
    SystemConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{psd_factor, CMat, CVec, C64, ONE, ZERO};
use crate::rng::{complex_normal, substream, Stream};
use crate::sdp::{self, BlockKind, Constraint, Relation, SdpProblem, SdpStatus, Sense, Term, Tolerances};

/// Stacked coupling vectors for every `(i, q, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCoupling {
    /// `ΣN_l`.
    pub dim: usize,
    /// `a[i][q][k]`, length `dim`.
    pub a: Vec<Vec<Vec<CVec>>>,
    /// `b[i][q][k]`.
    pub b: Vec<Vec<Vec<C64>>>,
}

impl PhaseCoupling {
    /// `A_{i,q}(w_k) = [[a a^H, a b̄], [b a^H, 0]]`, size `dim + 1`.
    pub fn matrix(&self, i: usize, q: usize, k: usize) -> CMat {
        let a = &self.a[i][q][k];
        let b = self.b[i][q][k];
        let n = self.dim;
        let mut m = CMat::zeros(n + 1, n + 1);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = a[r] * a[c].conj();
            }
            m[(r, n)] = a[r] * b.conj();
            m[(n, r)] = b * a[r].conj();
        }
        m
    }

    /// `|b_{i,q}(w_k)|²`.
    pub fn constant(&self, i: usize, q: usize, k: usize) -> f64 {
        self.b[i][q][k].norm_sqr()
    }

    /// `|φ^H a_{i,q}(w_k) + b_{i,q}(w_k)|²`.
    pub fn received_power(&self, phi: &CVec, i: usize, q: usize, k: usize) -> f64 {
        (phi.dotc(&self.a[i][q][k]) + self.b[i][q][k]).norm_sqr()
    }
}

pub fn build_coupling(channels: &ChannelSet, w: &BeamformingSet, config: &SystemConfig) -> PhaseCoupling {
    let dim = config.total_irs_elements();
    let k_count = config.num_mus();
    // H_{b,l} w_k, computed once per (l, k).
    let hw: Vec<Vec<CVec>> = channels
        .bs_to_irs
        .iter()
        .map(|h| w.vectors.iter().map(|wk| h * wk).collect())
        .collect();
    let mut a = Vec::with_capacity(k_count);
    let mut b = Vec::with_capacity(k_count);
    for i in 0..k_count {
        let mut ai = Vec::with_capacity(config.mu_antennas[i]);
        let mut bi = Vec::with_capacity(config.mu_antennas[i]);
        for q in 0..config.mu_antennas[i] {
            let mut aq = Vec::with_capacity(w.vectors.len());
            let mut bq = Vec::with_capacity(w.vectors.len());
            for (k, wk) in w.vectors.iter().enumerate() {
                let mut stacked = CVec::zeros(dim);
                let mut off = 0;
                for (l, hwl) in hw.iter().enumerate() {
                    let row = &channels.irs_to_mu[l][i][q];
                    for n in 0..row.len() {
                        stacked[off + n] = row[n] * hwl[k][n];
                    }
                    off += row.len();
                }
                aq.push(stacked);
                bq.push(channels.bs_to_mu[i][q].dot(wk));
            }
            ai.push(aq);
            bi.push(bq);
        }
        a.push(ai);
        b.push(bi);
    }
    PhaseCoupling { dim, a, b }
}

/// Amplitude and phase constraints on the reflecting elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConstraints {
    pub amplitude_mode: AmplitudeMode,
    pub phase_mode: PhaseMode,
    /// Per-surface amplitudes, used by the fixed modes.
    pub beta: Vec<Vec<f64>>,
}

impl PhaseConstraints {
    pub fn unit(irs_sizes: &[usize]) -> Self {
        PhaseConstraints {
            amplitude_mode: AmplitudeMode::FixedUnit,
            phase_mode: PhaseMode::Continuous,
            beta: irs_sizes.iter().map(|&n| vec![1.0; n]).collect(),
        }
    }

    pub fn validate(&self, irs_sizes: &[usize]) -> Result<()> {
        if self.beta.len() != irs_sizes.len() || self.beta.iter().zip(irs_sizes).any(|(b, &n)| b.len() != n) {
            return Err(Error::config("constraints.beta", "shape does not match system.irs_sizes"));
        }
        for (l, row) in self.beta.iter().enumerate() {
            for (n, &b) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::config(format!("constraints.beta[{l}][{n}]"), "must lie in [0, 1]"));
                }
                if self.amplitude_mode == AmplitudeMode::FixedUnit && b != 1.0 {
                    return Err(Error::config(format!("constraints.beta[{l}][{n}]"), "fixed_unit requires β = 1"));
                }
            }
        }
        if let PhaseMode::Discrete { tau } = self.phase_mode {
            if tau == 0 {
                return Err(Error::config("constraints.tau", "must be at least 1"));
            }
        }
        Ok(())
    }

    fn stacked_beta(&self) -> Vec<f64> {
        self.beta.iter().flatten().copied().collect()
    }

    /// Builds a profile from stacked conjugated coefficients, taking fixed
    /// amplitudes from the constraints and snapping to the phase grid.
    pub fn profile_from_phi(&self, phi: &CVec) -> PhaseProfile {
        let mut amplitudes = Vec::with_capacity(self.beta.len());
        let mut phases = Vec::with_capacity(self.beta.len());
        let mut idx = 0;
        for betas in &self.beta {
            let mut amps = Vec::with_capacity(betas.len());
            let mut ths = Vec::with_capacity(betas.len());
            for &b in betas {
                let c = phi[idx].conj();
                idx += 1;
                amps.push(match self.amplitude_mode {
                    AmplitudeMode::FixedUnit | AmplitudeMode::FixedValues => b,
                    AmplitudeMode::FreeUnitInterval => c.norm().clamp(0.0, 1.0),
                });
                let theta = if c.norm() == 0.0 { 0.0 } else { wrap_angle(c.arg()) };
                ths.push(match self.phase_mode {
                    PhaseMode::Continuous => theta,
                    PhaseMode::Discrete { tau } => grid_angle(nearest_grid_index(theta, tau), tau),
                });
            }
            amplitudes.push(amps);
            phases.push(ths);
        }
        PhaseProfile {
            amplitudes,
            phases,
            amplitude_mode: self.amplitude_mode,
            phase_mode: self.phase_mode,
        }
    }
}

/// Replaces each reflection phase `θ_n = −arg φ_n` by the nearest grid point
/// `2πm/τ` (midpoints go to the lower angle); magnitudes are kept.
pub fn project_discrete(phi: &CVec, tau: u32) -> CVec {
    phi.map(|z| {
        let r = z.norm();
        let theta = if r == 0.0 { 0.0 } else { wrap_angle(-z.arg()) };
        let snapped = grid_angle(nearest_grid_index(theta, tau), tau);
        C64::from_polar(r, -snapped)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Randomized {
    /// One candidate per trial, length `V.nrows() − 1`.
    pub candidates: Vec<CVec>,
    /// Draws discarded because the last entry of `v` was numerically zero.
    pub redraws: usize,
}

const MAX_REDRAWS: usize = 64;

/// Gaussian randomization on a lifted phase variable: `v = U Λ^{1/2} r`,
/// `r ~ CN(0, I)`, normalized by its last entry; each of the first
/// `V.nrows() − 1` entries is rescaled to magnitude `beta[n]` (phase 0 when
/// the entry vanishes).
pub fn gaussian_randomize(v: &CMat, trials: usize, seed: u64, beta: &[f64]) -> Randomized {
    let d = v.nrows();
    let f = psd_factor(v);
    let results: Vec<(CVec, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, Stream::PhaseRandomization, &[trial as u64]);
            let mut redraws = 0;
            loop {
                let r = CVec::from_fn(d, |_, _| complex_normal(&mut rng));
                let x = &f * r;
                let last = x[d - 1];
                let scale = x.norm();
                if last.norm() <= 1e-12 * scale || scale == 0.0 {
                    redraws += 1;
                    if redraws < MAX_REDRAWS {
                        continue;
                    }
                    let fallback = CVec::from_fn(d - 1, |n, _| C64::new(beta[n], 0.0));
                    return (fallback, redraws);
                }
                let cand = CVec::from_fn(d - 1, |n, _| {
                    let z = x[n] / last;
                    let m = z.norm();
                    if m == 0.0 || !m.is_finite() {
                        C64::new(beta[n], 0.0)
                    } else {
                        z * (beta[n] / m)
                    }
                });
                return (cand, redraws);
            }
        })
        .collect();
    let redraws = results.iter().map(|r| r.1).sum();
    Randomized {
        candidates: results.into_iter().map(|r| r.0).collect(),
        redraws,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseVariant {
    /// Find any `V` meeting the constraints.
    Feasibility,
    /// Maximize the sum of SINR residuals.
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptions {
    pub trials: usize,
    pub seed: u64,
    pub variant: PhaseVariant,
    /// Candidates with normalized slack at or above `−accept_tol` pass.
    pub accept_tol: f64,
    /// Project every candidate onto the discrete grid before scoring instead
    /// of projecting only the selected one.
    pub project_before_select: bool,
    pub sdp: Tolerances,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions {
            trials: 1000,
            seed: 0,
            variant: PhaseVariant::Residual,
            accept_tol: 1e-10,
            project_before_select: false,
            sdp: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStepReport {
    pub sdp_status: Option<SdpStatus>,
    /// `Σα` (residual variant) or the phase-I slack (feasibility variant).
    pub sdp_objective: Option<f64>,
    pub feasible_candidates: usize,
    pub redraws: usize,
    pub selected_trial: Option<usize>,
    /// Smallest normalized slack of the returned profile.
    pub min_slack: Option<f64>,
    /// The selected candidate failed the re-check after discrete projection.
    pub projection_rejected: bool,
    /// The incumbent profile was returned because no new candidate passed.
    pub incumbent_returned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOutcome {
    Found(PhaseProfile),
    Infeasible,
}

/// Per-MU constraint data at scaling `t`: `C_i` on the active elements and
/// right-hand side, both divided by `γ_i σ_i²`.
fn sinr_rows(
    coupling: &PhaseCoupling,
    config: &SystemConfig,
    t: f64,
    active: &[usize],
) -> Vec<(CMat, f64)> {
    let d = active.len() + 1;
    let group_of = config.group_of();
    let g = config.num_groups();
    (0..config.num_mus())
        .map(|i| {
            let k = group_of[i];
            let tg = t * config.sinr_targets[i];
            let norm = config.sinr_targets[i] * config.noise_powers[i];
            let mut c = CMat::zeros(d, d);
            let mut rhs = tg * config.noise_powers[i];
            for q in 0..config.mu_antennas[i] {
                for j in 0..g {
                    let weight = if j == k { 1.0 } else { -tg };
                    if weight == 0.0 {
                        continue;
                    }
                    let a = &coupling.a[i][q][j];
                    let b = coupling.b[i][q][j];
                    for (r, &ar) in active.iter().enumerate() {
                        for (s, &as_) in active.iter().enumerate() {
                            c[(r, s)] += a[ar] * a[as_].conj() * weight;
                        }
                        c[(r, d - 1)] += a[ar] * b.conj() * weight;
                        c[(d - 1, r)] += b * a[ar].conj() * weight;
                    }
                    // Move |b|² to the right-hand side.
                    rhs -= weight * b.norm_sqr();
                }
            }
            (c.unscale(norm), rhs / norm)
        })
        .collect()
}

/// Builds the lifted phase SDP. Block 0 is `V` over the active elements plus
/// the trailing 1; the residual variant adds a nonnegative block of `α_i`.
pub fn build_phase_sdp(
    coupling: &PhaseCoupling,
    config: &SystemConfig,
    constraints: &PhaseConstraints,
    t_scale: f64,
    variant: PhaseVariant,
) -> (SdpProblem, Vec<usize>) {
    let beta = constraints.stacked_beta();
    let active: Vec<usize> = match constraints.amplitude_mode {
        AmplitudeMode::FreeUnitInterval => (0..coupling.dim).collect(),
        _ => (0..coupling.dim).filter(|&n| beta[n] > 0.0).collect(),
    };
    let d = active.len() + 1;
    let k = config.num_mus();
    let mut rows = Vec::new();
    for (i, (c, rhs)) in sinr_rows(coupling, config, t_scale, &active).into_iter().enumerate() {
        let mut terms = vec![Term::dense(0, c)];
        if variant == PhaseVariant::Residual {
            let mut e = vec![0.0; k];
            e[i] = -1.0;
            terms.push(Term::diagonal(1, e));
        }
        rows.push(Constraint {
            terms,
            relation: Relation::Geq,
            rhs,
        });
    }
    for (r, &n) in active.iter().enumerate() {
        let (relation, rhs) = match constraints.amplitude_mode {
            AmplitudeMode::FreeUnitInterval => (Relation::Leq, 1.0),
            _ => (Relation::Eq, beta[n] * beta[n]),
        };
        rows.push(Constraint {
            terms: vec![Term::sparse(0, vec![(r, r, ONE)])],
            relation,
            rhs,
        });
    }
    rows.push(Constraint {
        terms: vec![Term::sparse(0, vec![(d - 1, d - 1, ONE)])],
        relation: Relation::Eq,
        rhs: 1.0,
    });
    let problem = match variant {
        PhaseVariant::Feasibility => SdpProblem {
            blocks: vec![BlockKind::Hermitian(d)],
            objective: vec![],
            constraints: rows,
            sense: Sense::Feasibility,
        },
        PhaseVariant::Residual => SdpProblem {
            blocks: vec![BlockKind::Hermitian(d), BlockKind::Nonnegative(k)],
            objective: vec![Term::diagonal(1, vec![1.0; k])],
            constraints: rows,
            sense: Sense::Maximize,
        },
    };
    (problem, active)
}

/// Smallest normalized slack `(S_i − tγ_i(σ_i² + I_i)) / (γ_i σ_i²)` over
/// all MUs for the stacked coefficients `phi`.
pub fn min_normalized_slack(coupling: &PhaseCoupling, config: &SystemConfig, phi: &CVec, t_scale: f64) -> f64 {
    let group_of = config.group_of();
    let g = config.num_groups();
    let mut worst = f64::INFINITY;
    for (i, &k) in group_of.iter().enumerate() {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for q in 0..config.mu_antennas[i] {
            for j in 0..g {
                let p = coupling.received_power(phi, i, q, j);
                if j == k {
                    signal += p;
                } else {
                    interference += p;
                }
            }
        }
        let gamma = config.sinr_targets[i];
        let sigma = config.noise_powers[i];
        let slack = (signal - t_scale * gamma * (sigma + interference)) / (gamma * sigma);
        worst = worst.min(slack);
    }
    worst
}

/// Solves the phase step for fixed `W` at SINR scaling `t_scale`.
///
/// When `incumbent` is given it is returned, if it satisfies the
/// constraints, whenever no new candidate does.
pub fn find_phase(
    channels: &ChannelSet,
    w: &BeamformingSet,
    config: &SystemConfig,
    constraints: &PhaseConstraints,
    t_scale: f64,
    opts: &PhaseOptions,
    incumbent: Option<&PhaseProfile>,
) -> Result<(PhaseOutcome, PhaseStepReport)> {
    constraints.validate(&config.irs_sizes)?;
    let coupling = build_coupling(channels, w, config);
    let mut report = PhaseStepReport {
        sdp_status: None,
        sdp_objective: None,
        feasible_candidates: 0,
        redraws: 0,
        selected_trial: None,
        min_slack: None,
        projection_rejected: false,
        incumbent_returned: false,
    };
    let incumbent_ok = |report: &mut PhaseStepReport| -> Option<PhaseProfile> {
        let inc = incumbent?;
        let slack = min_normalized_slack(&coupling, config, &inc.stacked_phi(), t_scale);
        (slack >= -opts.accept_tol).then(|| {
            report.incumbent_returned = true;
            report.min_slack = Some(slack);
            inc.clone()
        })
    };

    let (problem, active) = build_phase_sdp(&coupling, config, constraints, t_scale, opts.variant);
    let sol = match opts.variant {
        PhaseVariant::Feasibility => sdp::feasibility(&problem, &opts.sdp)?,
        PhaseVariant::Residual => sdp::solve(&problem, &opts.sdp)?,
    };
    report.sdp_status = Some(sol.status);
    report.sdp_objective = Some(sol.objective);
    let usable = sol.status == SdpStatus::Optimal
        || (sol.status != SdpStatus::Infeasible && sol.primal_violation <= USABLE_VIOLATION);
    if !usable {
        if let Some(p) = incumbent_ok(&mut report) {
            return Ok((PhaseOutcome::Found(p), report));
        }
        if sol.status == SdpStatus::Infeasible {
            return Ok((PhaseOutcome::Infeasible, report));
        }
        return Err(Error::SolverFailure { status: sol.status });
    }

    let v = &sol.blocks[0];
    let d = v.nrows();
    let beta_full = constraints.stacked_beta();
    let targets: Vec<f64> = match constraints.amplitude_mode {
        AmplitudeMode::FreeUnitInterval => (0..d - 1).map(|r| v[(r, r)].re.max(0.0).sqrt().min(1.0)).collect(),
        _ => active.iter().map(|&n| beta_full[n]).collect(),
    };
    let rand = gaussian_randomize(v, opts.trials, opts.seed, &targets);
    report.redraws = rand.redraws;
    let embed = |c: &CVec| -> CVec {
        let mut full = CVec::from_element(coupling.dim, ZERO);
        for (r, &n) in active.iter().enumerate() {
            full[n] = c[r];
        }
        full
    };
    let scored: Vec<(usize, f64, CVec)> = rand
        .candidates
        .par_iter()
        .enumerate()
        .map(|(trial, c)| {
            let mut full = embed(c);
            if let (true, PhaseMode::Discrete { tau }) = (opts.project_before_select, constraints.phase_mode) {
                full = project_discrete(&full, tau);
            }
            let slack = min_normalized_slack(&coupling, config, &full, t_scale);
            (trial, slack, full)
        })
        .collect();
    let passing: Vec<&(usize, f64, CVec)> = scored.iter().filter(|s| s.1 >= -opts.accept_tol).collect();
    report.feasible_candidates = passing.len();
    let best = passing
        .into_iter()
        .fold(None::<&(usize, f64, CVec)>, |best, c| match best {
            Some(b) if b.1 >= c.1 => Some(b),
            _ => Some(c),
        });

    if let Some((trial, _, phi)) = best {
        let profile = constraints.profile_from_phi(phi);
        let slack = min_normalized_slack(&coupling, config, &profile.stacked_phi(), t_scale);
        if slack >= -opts.accept_tol {
            report.selected_trial = Some(*trial);
            report.min_slack = Some(slack);
            return Ok((PhaseOutcome::Found(profile), report));
        }
        report.projection_rejected = true;
    }
    if let Some(p) = incumbent_ok(&mut report) {
        return Ok((PhaseOutcome::Found(p), report));
    }
    Ok((PhaseOutcome::Infeasible, report))
}

/// Uniformly random profile satisfying the constraints: continuous phases on
/// `[0, 2π)` or uniform grid points; fixed amplitudes as given, 1 in free
/// mode.
pub fn random_profile(constraints: &PhaseConstraints, seed: u64, restart: u64) -> PhaseProfile {
    use rand::Rng;
    let mut rng = substream(seed, Stream::InitialPhase, &[restart]);
    let amplitudes = constraints
        .beta
        .iter()
        .map(|row| match constraints.amplitude_mode {
            AmplitudeMode::FreeUnitInterval => vec![1.0; row.len()],
            _ => row.clone(),
        })
        .collect();
    let phases = constraints
        .beta
        .iter()
        .map(|row| {
            row.iter()
                .map(|_| match constraints.phase_mode {
                    PhaseMode::Continuous => wrap_angle(rng.random::<f64>() * TAU),
                    PhaseMode::Discrete { tau } => grid_angle(rng.random_range(0..tau), tau),
                })
                .collect()
        })
        .collect();
    PhaseProfile {
        amplitudes,
        phases,
        amplitude_mode: constraints.amplitude_mode,
        phase_mode: constraints.phase_mode,
    }
}
