//! Transmit beamforming for a fixed phase profile.
//!
//! Power minimization is relaxed to an SDP over `X_k = w_k w_k^H`. Rank-one
//! solutions are read off the principal eigenvector; otherwise candidate
//! directions are drawn from `CN(0, X_k)`. Every candidate direction set is
//! completed by an exact power allocation, so returned beamformers satisfy
//! the SINR constraints by construction.
//!
//! Max-min fairness bisects on the common scaling `t`; each probe solves the
//! power-minimization relaxation at targets `t·γ_i` and compares its value
//! with the budget.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_model::{all_grams, BeamformingSet, ChannelSet, PhaseProfile, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, psd_factor, quad_form, CMat, CVec, C64};
use crate::rng::{complex_normal, substream, Stream};
use crate::sdp::{self, BlockKind, Constraint, Relation, SdpProblem, SdpStatus, Sense, Term, Tolerances};
use crate::sinr_metrics::sinr_from_gram;

/// Non-optimal SDP iterates with at most this row-scaled violation are still
/// used for extraction; the exact power allocation restores feasibility.
pub(crate) const USABLE_VIOLATION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingOptions {
    /// Gaussian randomization trials.
    pub trials: usize,
    pub seed: u64,
    /// `λ₂/λ₁` at or below this declares a block rank one.
    pub rank_tol: f64,
    /// Relative bisection tolerance on `t`.
    pub bisect_tol: f64,
    /// When false only the principal-eigenvector and incumbent candidates
    /// are considered.
    pub randomization: bool,
    pub sdp: Tolerances,
}

impl Default for BeamformingOptions {
    fn default() -> Self {
        BeamformingOptions {
            trials: 1000,
            seed: 0,
            rank_tol: 1e-6,
            bisect_tol: 1e-4,
            randomization: true,
            sdp: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    /// Every block was rank one.
    Principal,
    Randomized,
    /// Randomization found nothing; principal directions with power scaling.
    Fallback,
    /// The incumbent beamformer's directions won.
    Incumbent,
    /// Zero beamformer (zero budget or dead channels).
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingResult {
    pub w: BeamformingSet,
    /// Relaxation value: a lower bound on power for power problems, an upper
    /// bound on `t` (up to the bisection tolerance) for max-min.
    pub sdr_bound: f64,
    /// Total power, or the min scaled SINR for max-min.
    pub achieved_value: f64,
    pub rank1_exact: bool,
    pub randomization_trials_used: usize,
    pub recovery: Recovery,
    /// Final `(t_low, t_high)` of the max-min bisection.
    pub bisection: Option<(f64, f64)>,
}

/// QoS data in a form convenient for allocation.
struct Qos<'a> {
    group_of: Vec<usize>,
    groups: &'a [Vec<usize>],
    gamma: &'a [f64],
    noise: &'a [f64],
}

impl<'a> Qos<'a> {
    fn new(config: &'a SystemConfig) -> Self {
        Qos {
            group_of: config.group_of(),
            groups: &config.groups,
            gamma: &config.sinr_targets,
            noise: &config.noise_powers,
        }
    }

    fn num_groups(&self) -> usize {
        self.groups.len()
    }
}

/// The power-minimization relaxation at targets `t·γ_i`.
///
/// Rows are divided by `t γ_i σ_i²` and the variable is scaled by
/// `s = max_i t γ_i σ_i² / λ_max(H_i)`, so the solver sees `X̂ = X / s`.
/// Returns the problem and `s`.
pub fn build_power_sdp(grams: &[CMat], config: &SystemConfig, t_scale: f64) -> (SdpProblem, f64) {
    let m = config.num_bs_antennas;
    let g = config.num_groups();
    let group_of = config.group_of();
    let mut scale = 0.0f64;
    for (i, h) in grams.iter().enumerate() {
        let lmax = hermitian_eigen(h).values.first().copied().unwrap_or(0.0);
        if lmax > 0.0 {
            scale = scale.max(t_scale * config.sinr_targets[i] * config.noise_powers[i] / lmax);
        }
    }
    if !(scale > 0.0 && scale.is_finite()) {
        scale = 1.0;
    }
    let mut constraints = Vec::with_capacity(grams.len());
    for (i, h) in grams.iter().enumerate() {
        let k = group_of[i];
        let tg = t_scale * config.sinr_targets[i];
        let own = h * C64::new(scale / (tg * config.noise_powers[i]), 0.0);
        let cross = h * C64::new(-scale / config.noise_powers[i], 0.0);
        let terms = (0..g)
            .map(|j| Term::dense(j, if j == k { own.clone() } else { cross.clone() }))
            .collect();
        constraints.push(Constraint {
            terms,
            relation: Relation::Geq,
            rhs: 1.0,
        });
    }
    let objective = (0..g)
        .map(|k| Term::dense(k, CMat::identity(m, m) * C64::new(scale, 0.0)))
        .collect();
    (
        SdpProblem {
            blocks: vec![BlockKind::Hermitian(m); g],
            objective,
            constraints,
            sense: Sense::Minimize,
        },
        scale,
    )
}

/// `sqrt(λ₁) u₁`; the zero matrix maps to the zero vector.
pub fn principal_component(x: &CMat) -> CVec {
    let eig = hermitian_eigen(x);
    match eig.values.first() {
        Some(&l) if l > 0.0 => eig.vectors.column(0).into_owned() * C64::new(l.sqrt(), 0.0),
        _ => CVec::zeros(x.nrows()),
    }
}

fn is_rank_one(x: &CMat, tol: f64) -> bool {
    let eig = hermitian_eigen(x);
    match (eig.values.first(), eig.values.get(1)) {
        (Some(&l1), Some(&l2)) => l1 > 0.0 && l2.abs() <= tol * l1,
        (Some(&l1), None) => l1 > 0.0,
        _ => false,
    }
}

/// `gain[(i, j)] = d_j^H H_i d_j`.
fn gain_matrix(dirs: &[CVec], grams: &[CMat]) -> DMatrix<f64> {
    DMatrix::from_fn(grams.len(), dirs.len(), |i, j| quad_form(&grams[i], &dirs[j]).max(0.0))
}

/// Yates map: smallest power of each group meeting its members' targets
/// given the other groups' powers.
fn interference_map(g: &DMatrix<f64>, qos: &Qos, t: f64, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; qos.num_groups()];
    for (i, &k) in qos.group_of.iter().enumerate() {
        let interference: f64 = (0..p.len()).filter(|&j| j != k).map(|j| p[j] * g[(i, j)]).sum();
        let need = t * qos.gamma[i] * (interference + qos.noise[i]) / g[(i, k)];
        out[k] = out[k].max(need);
    }
    out
}

fn is_fixed_point(g: &DMatrix<f64>, qos: &Qos, t: f64, p: &[f64]) -> bool {
    interference_map(g, qos, t, p)
        .iter()
        .zip(p)
        .all(|(need, have)| *need <= *have * (1.0 + 1e-12) && *have >= 0.0)
}

/// Linear solve with each group's currently binding member held with
/// equality.
fn polish(g: &DMatrix<f64>, qos: &Qos, t: f64, p: &[f64]) -> Option<Vec<f64>> {
    let n = qos.num_groups();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for k in 0..n {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &i in &qos.groups[k] {
            let interference: f64 = (0..n).filter(|&j| j != k).map(|j| p[j] * g[(i, j)]).sum();
            let need = t * qos.gamma[i] * (interference + qos.noise[i]) / g[(i, k)];
            if need > best.0 {
                best = (need, i);
            }
        }
        let i = best.1;
        let tg = t * qos.gamma[i];
        for j in 0..n {
            a[(k, j)] = if j == k { g[(i, k)] } else { -tg * g[(i, j)] };
        }
        b[k] = tg * qos.noise[i];
    }
    let x = a.lu().solve(&b)?;
    let v: Vec<f64> = x.iter().copied().collect();
    (v.iter().all(|x| x.is_finite() && *x >= 0.0) && is_fixed_point(g, qos, t, &v)).then_some(v)
}

/// Minimal group powers meeting targets `t γ_i` for fixed unit directions,
/// or `None` when no finite allocation exists.
fn min_power_allocation(g: &DMatrix<f64>, qos: &Qos, t: f64, budget: Option<f64>) -> Option<Vec<f64>> {
    let n = qos.num_groups();
    for (i, &k) in qos.group_of.iter().enumerate() {
        if g[(i, k)] <= 0.0 {
            return None;
        }
    }
    if n == 1 {
        return Some(interference_map(g, qos, t, &[0.0]));
    }
    let mut p = vec![0.0; n];
    let floor = interference_map(g, qos, t, &p);
    let scale = floor.iter().copied().fold(0.0, f64::max).max(1e-300);
    let cap = budget.map_or(f64::INFINITY, |b| b * (1.0 + 1e-12));
    for it in 0..20_000 {
        let next = interference_map(g, qos, t, &p);
        let total: f64 = next.iter().sum();
        if total > cap || next.iter().any(|x| !x.is_finite() || *x > 1e15 * scale) {
            return None;
        }
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let top = next.iter().copied().fold(0.0, f64::max);
        p = next;
        if it % 16 == 15 || change <= 1e-15 * top {
            if let Some(v) = polish(g, qos, t, &p) {
                return Some(v);
            }
        }
        if change <= 1e-15 * top {
            break;
        }
    }
    // Converged from below: nudge up until the fixed-point test passes.
    let mut v: Vec<f64> = p.iter().map(|x| x * (1.0 + 1e-12)).collect();
    for _ in 0..8 {
        if is_fixed_point(g, qos, t, &v) {
            return Some(v);
        }
        v.iter_mut().for_each(|x| *x *= 1.0 + 1e-10);
    }
    None
}

/// Largest `t` reachable with fixed directions and budget `P`, and its
/// allocation (scaled to spend the full budget).
fn maxmin_allocation(g: &DMatrix<f64>, qos: &Qos, budget: f64) -> (f64, Vec<f64>) {
    let n = qos.num_groups();
    if budget <= 0.0 {
        return (0.0, vec![0.0; n]);
    }
    for (i, &k) in qos.group_of.iter().enumerate() {
        if g[(i, k)] <= 0.0 {
            return (0.0, vec![0.0; n]);
        }
    }
    if n == 1 {
        let t = qos
            .group_of
            .iter()
            .enumerate()
            .map(|(i, _)| budget * g[(i, 0)] / (qos.gamma[i] * qos.noise[i]))
            .fold(f64::INFINITY, f64::min);
        return (t, vec![budget]);
    }
    let mut hi = qos
        .group_of
        .iter()
        .enumerate()
        .map(|(i, &k)| budget * g[(i, k)] / (qos.gamma[i] * qos.noise[i]))
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    let mut best = vec![budget / n as f64; n];
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match min_power_allocation(g, qos, mid, Some(budget)) {
            Some(p) if p.iter().sum::<f64>() <= budget => {
                lo = mid;
                best = p;
            }
            _ => hi = mid,
        }
    }
    let total: f64 = best.iter().sum();
    if total > 0.0 {
        best.iter_mut().for_each(|x| *x *= budget / total);
    }
    (lo, best)
}

fn beams_from(dirs: &[CVec], powers: &[f64]) -> BeamformingSet {
    BeamformingSet {
        vectors: dirs
            .iter()
            .zip(powers)
            .map(|(d, &p)| d * C64::new(p.max(0.0).sqrt(), 0.0))
            .collect(),
    }
}

fn unit(v: &CVec) -> Option<CVec> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v.unscale(n))
}

fn min_scaled_sinr(grams: &[CMat], qos: &Qos, w: &BeamformingSet) -> f64 {
    (0..grams.len())
        .map(|i| sinr_from_gram(&grams[i], &w.vectors, qos.group_of[i], qos.noise[i], i) / qos.gamma[i])
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, PartialEq)]
enum Goal {
    Power,
    MaxMin { budget: f64 },
}

/// A scored candidate. Lower `score` wins; ties go to the lower index.
struct Scored {
    score: f64,
    index: usize,
    w: BeamformingSet,
}

fn score_directions(dirs: &[CVec], grams: &[CMat], qos: &Qos, goal: Goal) -> Option<(f64, BeamformingSet)> {
    let g = gain_matrix(dirs, grams);
    match goal {
        Goal::Power => {
            let p = min_power_allocation(&g, qos, 1.0, None)?;
            let w = beams_from(dirs, &p);
            Some((w.total_power(), w))
        }
        Goal::MaxMin { budget } => {
            let (_, p) = maxmin_allocation(&g, qos, budget);
            let w = beams_from(dirs, &p);
            let t = min_scaled_sinr(grams, qos, &w);
            Some((-t, w))
        }
    }
}

fn pick(cands: impl IntoIterator<Item = Scored>) -> Option<Scored> {
    cands.into_iter().fold(None, |best: Option<Scored>, c| match best {
        Some(b) if b.score < c.score || (b.score == c.score && b.index <= c.index) => Some(b),
        _ => Some(c),
    })
}

struct Extracted {
    w: BeamformingSet,
    value: f64,
    rank1: bool,
    trials: usize,
    recovery: Recovery,
}

fn extract(
    blocks: &[CMat],
    grams: &[CMat],
    qos: &Qos,
    goal: Goal,
    opts: &BeamformingOptions,
    incumbent: Option<&BeamformingSet>,
) -> Option<Extracted> {
    let rank1 = blocks.iter().all(|x| is_rank_one(x, opts.rank_tol));
    let principal: Option<Vec<CVec>> = blocks.iter().map(|x| unit(&principal_component(x))).collect();
    let principal_scored =
        principal.as_ref().and_then(|d| score_directions(d, grams, qos, goal));

    let mut trials_used = 0;
    let mut randomized: Option<Scored> = None;
    if !rank1 && opts.randomization && opts.trials > 0 {
        let factors: Vec<CMat> = blocks.iter().map(psd_factor).collect();
        trials_used = opts.trials;
        let results: Vec<Option<Scored>> = (0..opts.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = substream(opts.seed, Stream::BeamRandomization, &[trial as u64]);
                let dirs: Option<Vec<CVec>> = factors
                    .iter()
                    .map(|f| {
                        let r = CVec::from_fn(f.ncols(), |_, _| complex_normal(&mut rng));
                        unit(&(f * r))
                    })
                    .collect();
                let (score, w) = score_directions(&dirs?, grams, qos, goal)?;
                Some(Scored { score, index: trial, w })
            })
            .collect();
        randomized = pick(results.into_iter().flatten());
    }

    let n = opts.trials;
    let mut cands: Vec<Scored> = Vec::new();
    let randomized_found = randomized.is_some();
    if let Some(r) = randomized {
        cands.push(r);
    }
    if let Some((score, w)) = principal_scored {
        cands.push(Scored { score, index: n, w });
    }
    if let Some(inc) = incumbent {
        let dirs: Option<Vec<CVec>> = inc.vectors.iter().map(unit).collect();
        if let Some((score, w)) = dirs.and_then(|d| score_directions(&d, grams, qos, goal)) {
            cands.push(Scored { score, index: n + 1, w });
        }
    }
    let best = pick(cands)?;
    let recovery = if best.index == n + 1 {
        Recovery::Incumbent
    } else if rank1 {
        Recovery::Principal
    } else if best.index < n {
        Recovery::Randomized
    } else if randomized_found || !opts.randomization {
        Recovery::Principal
    } else {
        Recovery::Fallback
    };
    let value = match goal {
        Goal::Power => best.w.total_power(),
        Goal::MaxMin { .. } => -best.score,
    };
    Some(Extracted {
        w: best.w,
        value,
        rank1,
        trials: trials_used,
        recovery,
    })
}

fn usable(sol: &sdp::SdpSolution) -> bool {
    sol.status == SdpStatus::Optimal || (sol.status != SdpStatus::Infeasible && sol.primal_violation <= USABLE_VIOLATION)
}

/// Rank-one recovery for the power problem from relaxed blocks `X_k`.
/// Returns the best candidate beamformer.
pub fn extract_rank_one(
    blocks: &[CMat],
    grams: &[CMat],
    config: &SystemConfig,
    opts: &BeamformingOptions,
) -> Result<BeamformingSet> {
    let qos = Qos::new(config);
    extract(blocks, grams, &qos, Goal::Power, opts, None)
        .map(|e| e.w)
        .ok_or(Error::RandomizationFailed { sdr_bound: f64::NAN })
}

pub fn minimize_power_given_phase(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    config: &SystemConfig,
    opts: &BeamformingOptions,
) -> Result<BeamformingResult> {
    config.validate()?;
    channels.check_against(config)?;
    minimize_power_with_grams(&all_grams(channels, phase), config, opts, None)
}

/// Power minimization from precomputed Gram matrices. An incumbent
/// beamformer, when given, competes as one more candidate direction set.
pub fn minimize_power_with_grams(
    grams: &[CMat],
    config: &SystemConfig,
    opts: &BeamformingOptions,
    incumbent: Option<&BeamformingSet>,
) -> Result<BeamformingResult> {
    let qos = Qos::new(config);
    let (problem, scale) = build_power_sdp(grams, config, 1.0);
    let sol = sdp::solve(&problem, &opts.sdp)?;
    match sol.status {
        SdpStatus::Infeasible => return Err(Error::InfeasibleTargets),
        _ if !usable(&sol) => return Err(Error::SolverFailure { status: sol.status }),
        _ => {}
    }
    let blocks: Vec<CMat> = sol.blocks.iter().map(|x| x * C64::new(scale, 0.0)).collect();
    // The dual value bounds the optimum from below up to solver tolerance.
    let bound = sol.objective.min(sol.dual_objective);
    let e = extract(&blocks, grams, &qos, Goal::Power, opts, incumbent)
        .ok_or(Error::RandomizationFailed { sdr_bound: bound })?;
    log::debug!(
        "power W-step: SDR {bound:.6e}, achieved {:.6e}, {:?}",
        e.value,
        e.recovery
    );
    Ok(BeamformingResult {
        w: e.w,
        sdr_bound: bound,
        achieved_value: e.value,
        rank1_exact: e.rank1,
        randomization_trials_used: e.trials,
        recovery: e.recovery,
        bisection: None,
    })
}

pub fn maxmin_given_phase(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    config: &SystemConfig,
    opts: &BeamformingOptions,
) -> Result<BeamformingResult> {
    config.validate()?;
    channels.check_against(config)?;
    maxmin_with_grams(&all_grams(channels, phase), config, opts, None)
}

fn trivial_maxmin(config: &SystemConfig) -> BeamformingResult {
    BeamformingResult {
        w: BeamformingSet::zeros(config.num_groups(), config.num_bs_antennas),
        sdr_bound: 0.0,
        achieved_value: 0.0,
        rank1_exact: false,
        randomization_trials_used: 0,
        recovery: Recovery::Trivial,
        bisection: Some((0.0, 0.0)),
    }
}

/// Max-min fairness from precomputed Gram matrices.
pub fn maxmin_with_grams(
    grams: &[CMat],
    config: &SystemConfig,
    opts: &BeamformingOptions,
    incumbent: Option<&BeamformingSet>,
) -> Result<BeamformingResult> {
    let qos = Qos::new(config);
    let budget = config.power_budget;
    let lmax: Vec<f64> = grams
        .iter()
        .map(|h| hermitian_eigen(h).values.first().copied().unwrap_or(0.0).max(0.0))
        .collect();
    if budget <= 0.0 || lmax.iter().any(|&l| l <= 0.0) {
        return Ok(trivial_maxmin(config));
    }
    let mut t_high = (0..grams.len())
        .map(|i| budget * lmax[i] / (config.sinr_targets[i] * config.noise_powers[i]))
        .fold(f64::INFINITY, f64::min);
    let mut t_low = 0.0;
    let mut best_blocks: Option<Vec<CMat>> = None;

    // Probe: minimal relaxed power at targets tγ is at most P.
    let probe = |t: f64| -> Result<Option<Vec<CMat>>> {
        let (problem, scale) = build_power_sdp(grams, config, t);
        let sol = sdp::solve(&problem, &opts.sdp)?;
        if sol.status == SdpStatus::Infeasible || !usable(&sol) {
            if sol.status != SdpStatus::Infeasible {
                log::debug!("bisection probe t={t:.6e}: solver status {:?}, treated as infeasible", sol.status);
            }
            return Ok(None);
        }
        let ok = sol.objective <= budget * (1.0 + opts.sdp.feas_tol);
        Ok(ok.then(|| sol.blocks.iter().map(|x| x * C64::new(scale, 0.0)).collect()))
    };

    if let Some(b) = probe(t_high)? {
        t_low = t_high;
        best_blocks = Some(b);
    } else {
        for _ in 0..200 {
            if t_low > 0.0 && t_high - t_low <= opts.bisect_tol * t_low {
                break;
            }
            let mid = 0.5 * (t_low + t_high);
            match probe(mid)? {
                Some(b) => {
                    t_low = mid;
                    best_blocks = Some(b);
                }
                None => t_high = mid,
            }
        }
    }
    let Some(blocks) = best_blocks else {
        return Err(Error::SolverFailure {
            status: SdpStatus::NumericalFailure,
        });
    };
    let e = extract(&blocks, grams, &qos, Goal::MaxMin { budget }, opts, incumbent).ok_or(Error::RandomizationFailed {
        sdr_bound: t_low,
    })?;
    log::debug!(
        "max-min W-step: bracket [{t_low:.6e}, {t_high:.6e}], achieved t {:.6e}, {:?}",
        e.value,
        e.recovery
    );
    Ok(BeamformingResult {
        w: e.w,
        sdr_bound: t_low,
        achieved_value: e.value,
        rank1_exact: e.rank1,
        randomization_trials_used: e.trials,
        recovery: e.recovery,
        bisection: Some((t_low, t_high)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{generate_channels, ChannelModelParams, PathGains};
    use crate::sinr_metrics::evaluate;

    fn opts() -> BeamformingOptions {
        BeamformingOptions {
            trials: 200,
            ..Default::default()
        }
    }

    #[test]
    fn single_user_matches_matched_filter() {
        let mut config = SystemConfig::unicast(3, vec![2], 1);
        config.sinr_targets = vec![2.0];
        config.noise_powers = vec![0.5];
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, 4).unwrap();
        let phase = PhaseProfile::unit(&config.irs_sizes);
        let r = minimize_power_given_phase(&ch, &phase, &config, &opts()).unwrap();
        let h = crate::channel_model::composite_channel(&ch, &phase, 0, 0).unwrap();
        let closed = 2.0 * 0.5 / h.norm_squared();
        assert!((r.achieved_value - closed).abs() <= 1e-6 * closed);
        assert!(r.rank1_exact);
        let rep = evaluate(&ch, &phase, &r.w, &config).unwrap();
        assert!(rep.constraint_slacks[0] >= -1e-9);
    }

    #[test]
    fn unicast_two_users_is_feasible_and_above_bound() {
        let mut config = SystemConfig::unicast(2, vec![3], 2);
        config.sinr_targets = vec![1.0, 3.0];
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, 21).unwrap();
        let phase = PhaseProfile::unit(&config.irs_sizes);
        let r = minimize_power_given_phase(&ch, &phase, &config, &opts()).unwrap();
        assert!(r.achieved_value >= r.sdr_bound - 1e-6 * (1.0 + r.sdr_bound));
        let rep = evaluate(&ch, &phase, &r.w, &config).unwrap();
        for (s, g) in rep.constraint_slacks.iter().zip(&config.sinr_targets) {
            assert!(*s >= -1e-6 * g, "slack {s}");
        }
    }

    #[test]
    fn maxmin_single_user_closed_form() {
        let mut config = SystemConfig::unicast(2, vec![2], 1);
        config.power_budget = 3.0;
        config.sinr_targets = vec![2.0];
        let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 1.0));
        let ch = generate_channels(&config, &model, 8).unwrap();
        let phase = PhaseProfile::unit(&config.irs_sizes);
        let r = maxmin_given_phase(&ch, &phase, &config, &opts()).unwrap();
        let h = crate::channel_model::composite_channel(&ch, &phase, 0, 0).unwrap();
        let closed = 3.0 * h.norm_squared() / 2.0;
        assert!((r.achieved_value - closed).abs() <= 1e-6 * closed, "{} vs {closed}", r.achieved_value);
        assert!(r.w.total_power() <= 3.0 * (1.0 + 1e-12));
    }

    #[test]
    fn allocation_meets_targets_exactly() {
        let mut config = SystemConfig::with_groups(2, vec![1], vec![vec![0, 2], vec![1]]);
        config.sinr_targets = vec![1.0, 0.5, 2.0];
        let qos = Qos::new(&config);
        let g = DMatrix::from_row_slice(3, 2, &[2.0, 0.1, 0.3, 1.5, 1.0, 0.2]);
        let p = min_power_allocation(&g, &qos, 1.0, None).unwrap();
        assert!(is_fixed_point(&g, &qos, 1.0, &p));
        let need = interference_map(&g, &qos, 1.0, &p);
        for (a, b) in need.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn infeasible_allocation_is_detected() {
        let config = SystemConfig::unicast(1, vec![1], 2);
        let mut config = config;
        config.sinr_targets = vec![2.0, 2.0];
        let qos = Qos::new(&config);
        // Identical unit gains: SINR product ≤ 1 < 4.
        let g = DMatrix::from_element(2, 2, 1.0);
        assert!(min_power_allocation(&g, &qos, 1.0, None).is_none());
    }
}
