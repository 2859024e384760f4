//! SINR, transmit power and min-scaled-SINR evaluation.
//!
//! Every solver result is re-checked against these functions.

use serde::{Deserialize, Serialize};

use crate::channel_model::{
    all_composite_rows, all_grams, composite_channel, effective_gram, BeamformingSet, ChannelSet, PhaseProfile,
    SystemConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMat, CVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub sinr: Vec<f64>,
    pub scaled_sinr: Vec<f64>,
    pub total_power: f64,
    pub min_scaled_sinr: f64,
    /// `sinr_i − γ_i`.
    pub constraint_slacks: Vec<f64>,
}

fn ratio(signal: f64, interference: f64, noise: f64, mu: usize) -> f64 {
    let den = interference + noise;
    if den <= 0.0 {
        if signal > 0.0 {
            log::warn!("MU {mu}: zero noise and interference, SINR is unbounded");
            return f64::INFINITY;
        }
        log::warn!("MU {mu}: zero signal over zero noise; SINR defined as 0");
        return 0.0;
    }
    signal / den
}

fn check_mu(config: &SystemConfig, mu: usize) -> Result<usize> {
    let k = config.num_mus();
    if mu >= k {
        return Err(Error::IndexOutOfRange {
            what: "MU",
            index: mu,
            limit: k,
        });
    }
    Ok(config.group_of()[mu])
}

fn check_beams(config: &SystemConfig, w: &BeamformingSet) -> Result<()> {
    if w.vectors.len() != config.num_groups() || w.vectors.iter().any(|v| v.len() != config.num_bs_antennas) {
        return Err(Error::config("beamforming", "beamformer shape does not match the system"));
    }
    Ok(())
}

pub(crate) fn sinr_from_gram(gram: &CMat, w: &[CVec], group: usize, noise: f64, mu: usize) -> f64 {
    let signal = quad_form(gram, &w[group]).max(0.0);
    let interference: f64 = w
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != group)
        .map(|(_, wj)| quad_form(gram, wj).max(0.0))
        .sum();
    ratio(signal, interference, noise, mu)
}

/// SINR of MU `mu` via the Gram matrix `H_i(Φ)`.
pub fn sinr(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    w: &BeamformingSet,
    config: &SystemConfig,
    mu: usize,
) -> Result<f64> {
    let group = check_mu(config, mu)?;
    check_beams(config, w)?;
    let gram = effective_gram(channels, phase, mu)?;
    Ok(sinr_from_gram(&gram, &w.vectors, group, config.noise_powers[mu], mu))
}

/// SINR of MU `mu` by summing `|h_{i,q} w|²` over receive antennas.
pub fn sinr_per_antenna(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    w: &BeamformingSet,
    config: &SystemConfig,
    mu: usize,
) -> Result<f64> {
    let group = check_mu(config, mu)?;
    check_beams(config, w)?;
    let rows: Vec<CVec> = (0..config.mu_antennas[mu])
        .map(|q| composite_channel(channels, phase, mu, q))
        .collect::<Result<_>>()?;
    let power = |wj: &CVec| -> f64 { rows.iter().map(|r| r.dot(wj).norm_sqr()).sum() };
    let signal = power(&w.vectors[group]);
    let interference: f64 = w
        .vectors
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != group)
        .map(|(_, wj)| power(wj))
        .sum();
    Ok(ratio(signal, interference, config.noise_powers[mu], mu))
}

fn assemble(sinr: Vec<f64>, w: &BeamformingSet, config: &SystemConfig) -> SinrReport {
    let scaled_sinr: Vec<f64> = sinr.iter().zip(&config.sinr_targets).map(|(s, g)| s / g).collect();
    let constraint_slacks = sinr.iter().zip(&config.sinr_targets).map(|(s, g)| s - g).collect();
    let min_scaled_sinr = scaled_sinr.iter().copied().fold(f64::INFINITY, f64::min);
    SinrReport {
        sinr,
        scaled_sinr,
        total_power: w.total_power(),
        min_scaled_sinr,
        constraint_slacks,
    }
}

/// Full report using the Gram form.
pub fn evaluate(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    w: &BeamformingSet,
    config: &SystemConfig,
) -> Result<SinrReport> {
    check_beams(config, w)?;
    let grams = all_grams(channels, phase);
    let group_of = config.group_of();
    let sinr = (0..config.num_mus())
        .map(|i| sinr_from_gram(&grams[i], &w.vectors, group_of[i], config.noise_powers[i], i))
        .collect();
    Ok(assemble(sinr, w, config))
}

/// Full report using per-antenna sums; an independent path for cross-checks.
pub fn evaluate_per_antenna(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    w: &BeamformingSet,
    config: &SystemConfig,
) -> Result<SinrReport> {
    check_beams(config, w)?;
    let rows = all_composite_rows(channels, phase);
    let group_of = config.group_of();
    let sinr = (0..config.num_mus())
        .map(|i| {
            let power = |wj: &CVec| -> f64 { rows[i].iter().map(|r| r.dot(wj).norm_sqr()).sum() };
            let signal = power(&w.vectors[group_of[i]]);
            let interference: f64 = (0..w.vectors.len())
                .filter(|&j| j != group_of[i])
                .map(|j| power(&w.vectors[j]))
                .sum();
            ratio(signal, interference, config.noise_powers[i], i)
        })
        .collect();
    Ok(assemble(sinr, w, config))
}
