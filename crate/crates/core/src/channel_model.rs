//! System configuration, channel data and the composite BS→MU channels seen
//! through one or more reflecting surfaces.
//!
//! Indices are zero-based throughout: MU `i ∈ 0..K`, receive antenna
//! `q ∈ 0..Q_i`, surface `l ∈ 0..L`, surface element `n ∈ 0..N_l`.
//!
//! Row channels (`irs_to_mu`, `bs_to_mu`) are stored as the entries of the
//! row vector itself, so the received amplitude for a beamformer `w` is the
//! plain (non-conjugating) product `row · w`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64, ZERO};
use crate::rng::complex_normal;

/// Dimensions, user grouping and QoS parameters of one downlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub num_bs_antennas: usize,
    pub irs_sizes: Vec<usize>,
    /// Partition of `0..K` into multicast groups; group `k` is served by `w_k`.
    pub groups: Vec<Vec<usize>>,
    pub mu_antennas: Vec<usize>,
    pub noise_powers: Vec<f64>,
    pub sinr_targets: Vec<f64>,
    pub power_budget: f64,
}

impl SystemConfig {
    /// Each MU in its own group, single antenna, unit noise and targets.
    pub fn unicast(num_bs_antennas: usize, irs_sizes: Vec<usize>, num_mus: usize) -> Self {
        Self::with_groups(num_bs_antennas, irs_sizes, (0..num_mus).map(|i| vec![i]).collect())
    }

    pub fn broadcast(num_bs_antennas: usize, irs_sizes: Vec<usize>, num_mus: usize) -> Self {
        Self::with_groups(num_bs_antennas, irs_sizes, vec![(0..num_mus).collect()])
    }

    pub fn with_groups(num_bs_antennas: usize, irs_sizes: Vec<usize>, groups: Vec<Vec<usize>>) -> Self {
        let k: usize = groups.iter().map(Vec::len).sum();
        SystemConfig {
            num_bs_antennas,
            irs_sizes,
            groups,
            mu_antennas: vec![1; k],
            noise_powers: vec![1.0; k],
            sinr_targets: vec![1.0; k],
            power_budget: 1.0,
        }
    }

    pub fn num_mus(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_irs(&self) -> usize {
        self.irs_sizes.len()
    }

    pub fn total_irs_elements(&self) -> usize {
        self.irs_sizes.iter().sum()
    }

    /// `group_of()[i]` is the group serving MU `i`.
    pub fn group_of(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.num_mus()];
        for (k, g) in self.groups.iter().enumerate() {
            for &i in g {
                if i < out.len() {
                    out[i] = k;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bs_antennas == 0 {
            return Err(Error::config("system.num_bs_antennas", "must be at least 1"));
        }
        if self.irs_sizes.is_empty() {
            return Err(Error::config("system.irs_sizes", "at least one surface is required"));
        }
        if let Some(l) = self.irs_sizes.iter().position(|&n| n == 0) {
            return Err(Error::config(format!("system.irs_sizes[{l}]"), "must be at least 1"));
        }
        if self.groups.is_empty() {
            return Err(Error::config("system.groups", "at least one group is required"));
        }
        let k = self.num_mus();
        let mut seen = vec![false; k];
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::config(format!("system.groups[{g}]"), "group is empty"));
            }
            for &i in members {
                if i >= k {
                    return Err(Error::config(
                        format!("system.groups[{g}]"),
                        format!("MU index {i} outside 0..{k}"),
                    ));
                }
                if seen[i] {
                    return Err(Error::config(
                        format!("system.groups[{g}]"),
                        format!("MU {i} appears in more than one group"),
                    ));
                }
                seen[i] = true;
            }
        }
        let lengths = [
            ("system.mu_antennas", self.mu_antennas.len()),
            ("system.noise_powers", self.noise_powers.len()),
            ("system.sinr_targets", self.sinr_targets.len()),
        ];
        for (path, len) in lengths {
            if len != k {
                return Err(Error::config(path, format!("expected {k} entries (one per MU), found {len}")));
            }
        }
        if let Some(i) = self.mu_antennas.iter().position(|&q| q == 0) {
            return Err(Error::config(format!("system.mu_antennas[{i}]"), "must be at least 1"));
        }
        for (i, &s) in self.noise_powers.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::config(format!("system.noise_powers[{i}]"), "must be positive and finite"));
            }
        }
        for (i, &g) in self.sinr_targets.iter().enumerate() {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::config(format!("system.sinr_targets[{i}]"), "must be positive and finite"));
            }
        }
        // A zero budget is accepted as the degenerate max-min case (t* = 0).
        if !(self.power_budget.is_finite() && self.power_budget >= 0.0) {
            return Err(Error::config("system.power_budget", "must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// All channel coefficients of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ChannelSetRepr", try_from = "ChannelSetRepr")]
pub struct ChannelSet {
    pub num_bs_antennas: usize,
    pub irs_sizes: Vec<usize>,
    pub mu_antennas: Vec<usize>,
    /// `bs_to_irs[l]` is `N_l × M`.
    pub bs_to_irs: Vec<CMat>,
    /// `irs_to_mu[l][i][q]` has length `N_l`.
    pub irs_to_mu: Vec<Vec<Vec<CVec>>>,
    /// `bs_to_mu[i][q]` has length `M`.
    pub bs_to_mu: Vec<Vec<CVec>>,
}

impl ChannelSet {
    pub fn zeros(config: &SystemConfig) -> Self {
        let m = config.num_bs_antennas;
        ChannelSet {
            num_bs_antennas: m,
            irs_sizes: config.irs_sizes.clone(),
            mu_antennas: config.mu_antennas.clone(),
            bs_to_irs: config.irs_sizes.iter().map(|&n| CMat::zeros(n, m)).collect(),
            irs_to_mu: config
                .irs_sizes
                .iter()
                .map(|&n| config.mu_antennas.iter().map(|&q| vec![CVec::zeros(n); q]).collect())
                .collect(),
            bs_to_mu: config.mu_antennas.iter().map(|&q| vec![CVec::zeros(m); q]).collect(),
        }
    }

    pub fn num_mus(&self) -> usize {
        self.mu_antennas.len()
    }

    /// Checks shapes against `config` and that every entry is finite.
    pub fn check_against(&self, config: &SystemConfig) -> Result<()> {
        let m = config.num_bs_antennas;
        if self.num_bs_antennas != m || self.irs_sizes != config.irs_sizes || self.mu_antennas != config.mu_antennas {
            return Err(Error::config("channel", "channel dimensions do not match the system block"));
        }
        self.check_shapes()
    }

    fn check_shapes(&self) -> Result<()> {
        let m = self.num_bs_antennas;
        let l_count = self.irs_sizes.len();
        let bad = |path: String| Err(Error::config(path, "shape mismatch or non-finite entry"));
        let finite_m = |a: &CMat| a.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        let finite_v = |a: &CVec| a.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if self.bs_to_irs.len() != l_count || self.irs_to_mu.len() != l_count {
            return bad("channel.bs_to_irs".into());
        }
        for (l, h) in self.bs_to_irs.iter().enumerate() {
            if h.nrows() != self.irs_sizes[l] || h.ncols() != m || !finite_m(h) {
                return bad(format!("channel.bs_to_irs[{l}]"));
            }
        }
        for (l, per_mu) in self.irs_to_mu.iter().enumerate() {
            if per_mu.len() != self.mu_antennas.len() {
                return bad(format!("channel.irs_to_mu[{l}]"));
            }
            for (i, rows) in per_mu.iter().enumerate() {
                if rows.len() != self.mu_antennas[i] {
                    return bad(format!("channel.irs_to_mu[{l}][{i}]"));
                }
                for (q, r) in rows.iter().enumerate() {
                    if r.len() != self.irs_sizes[l] || !finite_v(r) {
                        return bad(format!("channel.irs_to_mu[{l}][{i}][{q}]"));
                    }
                }
            }
        }
        if self.bs_to_mu.len() != self.mu_antennas.len() {
            return bad("channel.bs_to_mu".into());
        }
        for (i, rows) in self.bs_to_mu.iter().enumerate() {
            if rows.len() != self.mu_antennas[i] {
                return bad(format!("channel.bs_to_mu[{i}]"));
            }
            for (q, r) in rows.iter().enumerate() {
                if r.len() != m || !finite_v(r) {
                    return bad(format!("channel.bs_to_mu[{i}][{q}]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    FixedUnit,
    FixedValues,
    FreeUnitInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhaseMode {
    Continuous,
    Discrete { tau: u32 },
}

impl PhaseMode {
    pub fn is_discrete(&self) -> bool {
        matches!(self, PhaseMode::Discrete { .. })
    }
}

/// Amplitudes and phase shifts of every reflecting element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub amplitudes: Vec<Vec<f64>>,
    /// Radians in `[0, 2π)`.
    pub phases: Vec<Vec<f64>>,
    pub amplitude_mode: AmplitudeMode,
    pub phase_mode: PhaseMode,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// The `m`-th point of the τ-grid, `2πm/τ`.
pub fn grid_angle(m: u32, tau: u32) -> f64 {
    TAU * f64::from(m) / f64::from(tau)
}

impl PhaseProfile {
    /// Unit amplitudes and zero phases.
    pub fn unit(irs_sizes: &[usize]) -> Self {
        PhaseProfile {
            amplitudes: irs_sizes.iter().map(|&n| vec![1.0; n]).collect(),
            phases: irs_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            amplitude_mode: AmplitudeMode::FixedUnit,
            phase_mode: PhaseMode::Continuous,
        }
    }

    pub fn irs_sizes(&self) -> Vec<usize> {
        self.phases.iter().map(Vec::len).collect()
    }

    /// Reflection coefficients `β e^{jθ}` per surface.
    pub fn coefficients(&self) -> Vec<CVec> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(b, t)| CVec::from_iterator(b.len(), b.iter().zip(t).map(|(&b, &t)| C64::from_polar(b, t))))
            .collect()
    }

    /// The diagonal reflection matrix of surface `l`.
    pub fn reflection_matrix(&self, l: usize) -> CMat {
        CMat::from_diagonal(&self.coefficients()[l])
    }

    /// Stacked vector of conjugated coefficients, `φ_n = β_n e^{-jθ_n}`, so
    /// that `row · diag(c) · H w = φ^H a` with `a = diag(row) H w`.
    pub fn stacked_phi(&self) -> CVec {
        let coeffs: Vec<C64> = self.coefficients().iter().flat_map(|c| c.iter().map(|z| z.conj())).collect();
        CVec::from_vec(coeffs)
    }

    /// Rebuilds a profile from a stacked conjugated-coefficient vector.
    pub fn from_stacked_phi(
        phi: &CVec,
        irs_sizes: &[usize],
        amplitude_mode: AmplitudeMode,
        phase_mode: PhaseMode,
    ) -> Self {
        let mut amplitudes = Vec::with_capacity(irs_sizes.len());
        let mut phases = Vec::with_capacity(irs_sizes.len());
        let mut offset = 0;
        for &n in irs_sizes {
            let mut a = Vec::with_capacity(n);
            let mut t = Vec::with_capacity(n);
            for idx in offset..offset + n {
                let c = phi[idx].conj();
                a.push(if amplitude_mode == AmplitudeMode::FixedUnit { 1.0 } else { c.norm() });
                let theta = if c.norm() == 0.0 { 0.0 } else { wrap_angle(c.arg()) };
                t.push(match phase_mode {
                    PhaseMode::Continuous => theta,
                    PhaseMode::Discrete { tau } => grid_angle(nearest_grid_index(theta, tau), tau),
                });
            }
            offset += n;
            amplitudes.push(a);
            phases.push(t);
        }
        PhaseProfile {
            amplitudes,
            phases,
            amplitude_mode,
            phase_mode,
        }
    }

    pub fn validate(&self, irs_sizes: &[usize]) -> Result<()> {
        if self.irs_sizes() != irs_sizes || self.amplitudes.iter().map(Vec::len).ne(irs_sizes.iter().copied()) {
            return Err(Error::config("constraints", "phase profile shape does not match irs_sizes"));
        }
        if let PhaseMode::Discrete { tau } = self.phase_mode {
            if tau == 0 {
                return Err(Error::config("constraints.tau", "must be at least 1"));
            }
        }
        for (l, (amps, phases)) in self.amplitudes.iter().zip(&self.phases).enumerate() {
            for (n, (&b, &t)) in amps.iter().zip(phases).enumerate() {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::config(format!("constraints.beta[{l}][{n}]"), "amplitude outside [0, 1]"));
                }
                if self.amplitude_mode == AmplitudeMode::FixedUnit && b != 1.0 {
                    return Err(Error::config(format!("constraints.beta[{l}][{n}]"), "fixed_unit requires β = 1"));
                }
                if !(0.0..TAU).contains(&t) {
                    return Err(Error::config(format!("phases[{l}][{n}]"), "phase outside [0, 2π)"));
                }
                if let PhaseMode::Discrete { tau } = self.phase_mode {
                    let m = nearest_grid_index(t, tau);
                    if grid_angle(m, tau) != t {
                        return Err(Error::config(format!("phases[{l}][{n}]"), "phase is not on the discrete grid"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index of the grid point `2πm/τ` nearest to `theta`; exact midpoints go
/// to the lower angle.
pub fn nearest_grid_index(theta: f64, tau: u32) -> u32 {
    let step = TAU / f64::from(tau);
    let x = wrap_angle(theta) / step;
    let m = (x - 0.5).ceil().max(0.0) as u64;
    (m % u64::from(tau)) as u32
}

/// Transmit beamformers, one per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingSet {
    #[serde(with = "serde_cvec_list")]
    pub vectors: Vec<CVec>,
}

impl BeamformingSet {
    pub fn zeros(num_groups: usize, m: usize) -> Self {
        BeamformingSet {
            vectors: vec![CVec::zeros(m); num_groups],
        }
    }

    pub fn total_power(&self) -> f64 {
        self.vectors.iter().map(|w| w.norm_squared()).sum()
    }
}

/// `h^H_{b,i,q} + Σ_l h^H_{l,i,q} Φ_l H_{b,l}` as row entries of length `M`.
pub fn composite_channel(channels: &ChannelSet, phase: &PhaseProfile, mu: usize, antenna: usize) -> Result<CVec> {
    let coeffs = phase.coefficients();
    composite_with_coeffs(channels, &coeffs, mu, antenna)
}

pub(crate) fn composite_with_coeffs(channels: &ChannelSet, coeffs: &[CVec], mu: usize, antenna: usize) -> Result<CVec> {
    let k = channels.num_mus();
    if mu >= k {
        return Err(Error::IndexOutOfRange {
            what: "MU",
            index: mu,
            limit: k,
        });
    }
    let q_count = channels.mu_antennas[mu];
    if antenna >= q_count {
        return Err(Error::IndexOutOfRange {
            what: "antenna",
            index: antenna,
            limit: q_count,
        });
    }
    let m = channels.num_bs_antennas;
    let mut out = channels.bs_to_mu[mu][antenna].clone();
    for (l, h) in channels.bs_to_irs.iter().enumerate() {
        let row = &channels.irs_to_mu[l][mu][antenna];
        for n in 0..h.nrows() {
            let s = row[n] * coeffs[l][n];
            for col in 0..m {
                out[col] += s * h[(n, col)];
            }
        }
    }
    Ok(out)
}

/// `H_i(Φ) = Σ_q h_{i,q} h_{i,q}^H`, Hermitian PSD of rank at most `Q_i`.
pub fn effective_gram(channels: &ChannelSet, phase: &PhaseProfile, mu: usize) -> Result<CMat> {
    let coeffs = phase.coefficients();
    gram_with_coeffs(channels, &coeffs, mu)
}

pub(crate) fn gram_with_coeffs(channels: &ChannelSet, coeffs: &[CVec], mu: usize) -> Result<CMat> {
    if mu >= channels.num_mus() {
        return Err(Error::IndexOutOfRange {
            what: "MU",
            index: mu,
            limit: channels.num_mus(),
        });
    }
    let m = channels.num_bs_antennas;
    let mut g = CMat::zeros(m, m);
    for q in 0..channels.mu_antennas[mu] {
        let row = composite_with_coeffs(channels, coeffs, mu, q)?;
        for a in 0..m {
            let ca = row[a].conj();
            for b in 0..m {
                g[(a, b)] += ca * row[b];
            }
        }
    }
    Ok(g)
}

/// All composite rows, `rows[i][q]`.
pub(crate) fn all_composite_rows(channels: &ChannelSet, phase: &PhaseProfile) -> Vec<Vec<CVec>> {
    let coeffs = phase.coefficients();
    (0..channels.num_mus())
        .map(|i| {
            (0..channels.mu_antennas[i])
                .map(|q| composite_with_coeffs(channels, &coeffs, i, q).expect("indices in range"))
                .collect()
        })
        .collect()
}

pub(crate) fn all_grams(channels: &ChannelSet, phase: &PhaseProfile) -> Vec<CMat> {
    let coeffs = phase.coefficients();
    (0..channels.num_mus())
        .map(|i| gram_with_coeffs(channels, &coeffs, i).expect("index in range"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FadingModel {
    Rayleigh,
    /// Line-of-sight component of all-ones entries plus Rayleigh scatter,
    /// power split `K/(K+1)` : `1/(K+1)`.
    Rician { k_factor: f64 },
}

/// Average power `ρ` of every link class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathGains {
    /// Per surface.
    pub bs_irs: Vec<f64>,
    /// `irs_mu[l][i]`.
    pub irs_mu: Vec<Vec<f64>>,
    /// Per MU.
    pub bs_mu: Vec<f64>,
}

impl PathGains {
    pub fn uniform(config: &SystemConfig, bs_irs: f64, irs_mu: f64, bs_mu: f64) -> Self {
        let k = config.num_mus();
        PathGains {
            bs_irs: vec![bs_irs; config.num_irs()],
            irs_mu: vec![vec![irs_mu; k]; config.num_irs()],
            bs_mu: vec![bs_mu; k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModelParams {
    pub fading: FadingModel,
    pub gains: PathGains,
}

impl ChannelModelParams {
    pub fn rayleigh(gains: PathGains) -> Self {
        ChannelModelParams {
            fading: FadingModel::Rayleigh,
            gains,
        }
    }

    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        let g = &self.gains;
        let k = config.num_mus();
        let l = config.num_irs();
        if g.bs_irs.len() != l {
            return Err(Error::config("channel.gains.bs_irs", format!("expected {l} entries")));
        }
        if g.irs_mu.len() != l || g.irs_mu.iter().any(|v| v.len() != k) {
            return Err(Error::config("channel.gains.irs_mu", format!("expected {l}×{k} entries")));
        }
        if g.bs_mu.len() != k {
            return Err(Error::config("channel.gains.bs_mu", format!("expected {k} entries")));
        }
        let all = g.bs_irs.iter().chain(g.irs_mu.iter().flatten()).chain(&g.bs_mu);
        if all.into_iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::config("channel.gains", "path gains must be nonnegative and finite"));
        }
        if let FadingModel::Rician { k_factor } = self.fading {
            if !(k_factor.is_finite() && k_factor >= 0.0) {
                return Err(Error::config("channel.model.k_factor", "must be nonnegative and finite"));
            }
        }
        Ok(())
    }
}

/// Draws a synthetic channel set.
///
/// Stream order (ChaCha8 seeded with `seed`, each complex entry consumes two
/// standard normals, real part first): every `bs_to_irs[l]` in row-major
/// order for `l = 0..L`; then `irs_to_mu[l][i][q]` entries for `(l, i, q)` in
/// lexicographic order; then `bs_to_mu[i][q]` entries for `(i, q)` in
/// lexicographic order.
pub fn generate_channels(config: &SystemConfig, model: &ChannelModelParams, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    model.validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |gain: f64| -> C64 {
        let scatter = complex_normal(&mut rng);
        match model.fading {
            FadingModel::Rayleigh => scatter * gain.sqrt(),
            FadingModel::Rician { k_factor } => {
                let los = (k_factor / (k_factor + 1.0)).sqrt();
                let nlos = (1.0 / (k_factor + 1.0)).sqrt();
                (C64::new(los, 0.0) + scatter * nlos) * gain.sqrt()
            }
        }
    };

    let m = config.num_bs_antennas;
    let mut channels = ChannelSet::zeros(config);
    for (l, &n) in config.irs_sizes.iter().enumerate() {
        let gain = model.gains.bs_irs[l];
        let mut h = CMat::zeros(n, m);
        for r in 0..n {
            for c in 0..m {
                h[(r, c)] = draw(gain);
            }
        }
        channels.bs_to_irs[l] = h;
    }
    for (l, &n) in config.irs_sizes.iter().enumerate() {
        for i in 0..config.num_mus() {
            let gain = model.gains.irs_mu[l][i];
            for q in 0..config.mu_antennas[i] {
                channels.irs_to_mu[l][i][q] = CVec::from_fn(n, |_, _| draw(gain));
            }
        }
    }
    for i in 0..config.num_mus() {
        let gain = model.gains.bs_mu[i];
        for q in 0..config.mu_antennas[i] {
            channels.bs_to_mu[i][q] = CVec::from_fn(m, |_, _| draw(gain));
        }
    }
    Ok(channels)
}

// ---------------------------------------------------------------------------
// JSON layout: complex numbers as [re, im], dimensions explicit.

type Pair = [f64; 2];

fn to_pair(z: &C64) -> Pair {
    [z.re, z.im]
}

fn from_pair(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSetRepr {
    num_bs_antennas: usize,
    irs_sizes: Vec<usize>,
    mu_antennas: Vec<usize>,
    /// `[l][row][col]`.
    bs_to_irs: Vec<Vec<Vec<Pair>>>,
    /// `[l][i][q][n]`.
    irs_to_mu: Vec<Vec<Vec<Vec<Pair>>>>,
    /// `[i][q][m]`.
    bs_to_mu: Vec<Vec<Vec<Pair>>>,
}

impl From<ChannelSet> for ChannelSetRepr {
    fn from(c: ChannelSet) -> Self {
        let vec_pairs = |v: &CVec| v.iter().map(to_pair).collect::<Vec<_>>();
        ChannelSetRepr {
            num_bs_antennas: c.num_bs_antennas,
            irs_sizes: c.irs_sizes.clone(),
            mu_antennas: c.mu_antennas.clone(),
            bs_to_irs: c
                .bs_to_irs
                .iter()
                .map(|h| (0..h.nrows()).map(|r| (0..h.ncols()).map(|col| to_pair(&h[(r, col)])).collect()).collect())
                .collect(),
            irs_to_mu: c
                .irs_to_mu
                .iter()
                .map(|per_mu| per_mu.iter().map(|rows| rows.iter().map(vec_pairs).collect()).collect())
                .collect(),
            bs_to_mu: c.bs_to_mu.iter().map(|rows| rows.iter().map(vec_pairs).collect()).collect(),
        }
    }
}

impl TryFrom<ChannelSetRepr> for ChannelSet {
    type Error = Error;

    fn try_from(r: ChannelSetRepr) -> Result<Self> {
        let vec_from = |v: &Vec<Pair>| CVec::from_iterator(v.len(), v.iter().map(from_pair));
        let mut bs_to_irs = Vec::with_capacity(r.bs_to_irs.len());
        for (l, rows) in r.bs_to_irs.iter().enumerate() {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|row| row.len() != ncols) {
                return Err(Error::config(format!("channel.bs_to_irs[{l}]"), "ragged matrix"));
            }
            bs_to_irs.push(CMat::from_fn(nrows, ncols, |a, b| from_pair(&rows[a][b])));
        }
        let set = ChannelSet {
            num_bs_antennas: r.num_bs_antennas,
            irs_sizes: r.irs_sizes,
            mu_antennas: r.mu_antennas,
            bs_to_irs,
            irs_to_mu: r
                .irs_to_mu
                .iter()
                .map(|per_mu| per_mu.iter().map(|rows| rows.iter().map(vec_from).collect()).collect())
                .collect(),
            bs_to_mu: r.bs_to_mu.iter().map(|rows| rows.iter().map(vec_from).collect()).collect(),
        };
        set.check_shapes()?;
        Ok(set)
    }
}

pub(crate) mod serde_cvec_list {
    use super::{from_pair, to_pair, CVec, Pair};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[CVec], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<Vec<Pair>> = v.iter().map(|w| w.iter().map(to_pair).collect()).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVec>, D::Error> {
        let pairs: Vec<Vec<Pair>> = Vec::deserialize(d)?;
        Ok(pairs
            .iter()
            .map(|w| CVec::from_iterator(w.len(), w.iter().map(from_pair)))
            .collect())
    }
}

/// Converts a real matrix into a complex one (used by tests and oracles).
pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Zero vector helper for callers that build rows by hand.
pub fn zero_row(len: usize) -> CVec {
    DVector::from_element(len, ZERO)
}
