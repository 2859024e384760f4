//! Ground-truth generators for tiny instances: the single-user closed form
//! and exhaustive search over discrete phase grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alt_opt::{Problem, Scenario};
use crate::beamforming::{maxmin_with_grams, minimize_power_with_grams, BeamformingOptions};
use crate::channel_model::{
    all_grams, grid_angle, AmplitudeMode, BeamformingSet, ChannelSet, PhaseMode, PhaseProfile,
};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CVec, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserOracle {
    /// Minimal power; `∞` when infeasible.
    pub power: f64,
    pub w: CVec,
    pub feasible: bool,
}

/// Minimal power for one user served by one stream: `γσ²/λ_max(H(Φ))` with
/// `w` along the principal direction (the matched filter when `Q = 1`).
pub fn single_user_power_oracle(
    channels: &ChannelSet,
    phase: &PhaseProfile,
    gamma: f64,
    noise: f64,
) -> Result<SingleUserOracle> {
    if channels.num_mus() != 1 {
        return Err(Error::config("channels", "single-user oracle needs exactly one MU"));
    }
    let m = channels.num_bs_antennas;
    let grams = all_grams(channels, phase);
    let eig = hermitian_eigen(&grams[0]);
    let lambda = eig.values.first().copied().unwrap_or(0.0);
    if lambda <= 0.0 {
        return Ok(SingleUserOracle {
            power: f64::INFINITY,
            w: CVec::zeros(m),
            feasible: false,
        });
    }
    let power = gamma * noise / lambda;
    let w = if channels.mu_antennas[0] == 1 {
        // Row h: w = sqrt(γσ²) conj(h) / ‖h‖².
        let h = crate::channel_model::composite_channel(channels, phase, 0, 0)?;
        let n2 = h.norm_squared();
        h.map(|z| z.conj()) * C64::new((gamma * noise).sqrt() / n2, 0.0)
    } else {
        eig.vectors.column(0).into_owned() * C64::new(power.sqrt(), 0.0)
    };
    Ok(SingleUserOracle {
        power,
        w,
        feasible: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    /// Min power or max `t`; `None` when every combination is infeasible.
    pub value: Option<f64>,
    pub profile: Option<PhaseProfile>,
    pub w: Option<BeamformingSet>,
    /// Relaxation value of the inner problem at the best profile.
    pub sdr_bound: Option<f64>,
    pub evaluated: usize,
    /// Inner relaxations are tight for this system, so `value` is the grid
    /// optimum rather than a bound.
    pub certified: bool,
}

/// Largest grid the exhaustive search will enumerate.
pub const MAX_COMBINATIONS: u128 = 4096;

/// Enumerates every phase combination on the discrete grid and solves the
/// beamforming subproblem for each.
pub fn exhaustive_discrete_phase(scenario: &Scenario) -> Result<ExhaustiveResult> {
    scenario.validate()?;
    let tau = match scenario.constraints.phase_mode {
        PhaseMode::Discrete { tau } => tau,
        PhaseMode::Continuous => {
            return Err(Error::config("constraints.phase_mode", "exhaustive search needs a discrete grid"))
        }
    };
    if scenario.constraints.amplitude_mode == AmplitudeMode::FreeUnitInterval {
        return Err(Error::config("constraints.amplitude_mode", "exhaustive search needs fixed amplitudes"));
    }
    let config = &scenario.config;
    let total = config.total_irs_elements();
    let combos = (tau as u128).checked_pow(total as u32).unwrap_or(u128::MAX);
    if combos > MAX_COMBINATIONS {
        return Err(Error::CombinatorialCap {
            combinations: combos,
            cap: MAX_COMBINATIONS,
        });
    }
    let tight = config.num_groups() == 1 || (config.groups.iter().all(|g| g.len() == 1) && config.num_mus() <= 2);
    let opts = BeamformingOptions {
        trials: scenario.algorithm.trials,
        randomization: !tight,
        sdp: scenario.algorithm.sdp,
        ..BeamformingOptions::default()
    };
    let problem = scenario.algorithm.problem;
    let make_profile = |index: u128| -> PhaseProfile {
        let mut rest = index;
        let phases = config
            .irs_sizes
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|_| {
                        let m = (rest % tau as u128) as u32;
                        rest /= tau as u128;
                        grid_angle(m, tau)
                    })
                    .collect()
            })
            .collect();
        PhaseProfile {
            amplitudes: scenario.constraints.beta.clone(),
            phases,
            amplitude_mode: scenario.constraints.amplitude_mode,
            phase_mode: scenario.constraints.phase_mode,
        }
    };
    let results: Vec<Option<(f64, f64, BeamformingSet)>> = (0..combos)
        .into_par_iter()
        .map(|index| -> Result<Option<(f64, f64, BeamformingSet)>> {
            let grams = all_grams(&scenario.channels, &make_profile(index));
            let r = match problem {
                Problem::PowerQos => minimize_power_with_grams(&grams, config, &opts, None),
                Problem::MaxminQos => maxmin_with_grams(&grams, config, &opts, None),
            };
            match r {
                Ok(r) => Ok(Some((r.achieved_value, r.sdr_bound, r.w))),
                Err(Error::InfeasibleTargets) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (k, r) in results.iter().enumerate() {
        if let Some((v, _, _)) = r {
            let better = match (best, problem) {
                (None, _) => true,
                (Some((_, b)), Problem::PowerQos) => *v < b,
                (Some((_, b)), Problem::MaxminQos) => *v > b,
            };
            if better {
                best = Some((k, *v));
            }
        }
    }
    let evaluated = results.len();
    Ok(match best {
        None => ExhaustiveResult {
            value: None,
            profile: None,
            w: None,
            sdr_bound: None,
            evaluated,
            certified: tight,
        },
        Some((k, v)) => {
            let (_, bound, w) = results.into_iter().nth(k).flatten().expect("best index holds a result");
            ExhaustiveResult {
                value: Some(v),
                profile: Some(make_profile(k as u128)),
                w: Some(w),
                sdr_bound: Some(bound),
                evaluated,
                certified: tight,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::SystemConfig;

    #[test]
    fn unit_channel_oracle() {
        let config = SystemConfig::unicast(3, vec![1], 1);
        let mut ch = ChannelSet::zeros(&config);
        ch.bs_to_mu[0][0][0] = C64::new(1.0, 0.0);
        let phase = PhaseProfile::unit(&[1]);
        let o = single_user_power_oracle(&ch, &phase, 1.0, 1.0).unwrap();
        assert!(o.feasible);
        assert!((o.power - 1.0).abs() < 1e-15);
        assert!((o.w[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(o.w[1], C64::new(0.0, 0.0));

        ch.bs_to_mu[0][0][0] = C64::new(2.0, 0.0);
        let o = single_user_power_oracle(&ch, &phase, 1.0, 1.0).unwrap();
        assert!((o.power - 0.25).abs() < 1e-15);

        let dead = ChannelSet::zeros(&config);
        assert!(!single_user_power_oracle(&dead, &phase, 1.0, 1.0).unwrap().feasible);
    }
}
