//! Scenario files: JSON ingestion, dotted-path overrides and sweep axes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alt_opt::{AlgorithmOptions, Scenario, Traffic};
use crate::channel_model::{generate_channels, AmplitudeMode, ChannelModelParams, ChannelSet, FadingModel, PathGains, PhaseMode, SystemConfig};
use crate::error::{Error, Result};
use crate::phase::PhaseConstraints;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Draw channels from a fading model; gains default to 1 on every link.
    Generated {
        #[serde(default = "rayleigh")]
        fading: FadingModel,
        #[serde(default)]
        gains: Option<PathGains>,
        seed: u64,
    },
    Inline { channels: ChannelSet },
}

fn rayleigh() -> FadingModel {
    FadingModel::Rayleigh
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSpec {
    #[serde(default = "fixed_unit")]
    pub amplitude_mode: AmplitudeMode,
    #[serde(default = "continuous")]
    pub phase_mode: PhaseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<u32>,
    /// Per-surface amplitudes; required for `fixed_values`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<f64>>>,
}

fn fixed_unit() -> AmplitudeMode {
    AmplitudeMode::FixedUnit
}
fn continuous() -> PhaseKind {
    PhaseKind::Continuous
}

impl Default for ConstraintsSpec {
    fn default() -> Self {
        ConstraintsSpec {
            amplitude_mode: AmplitudeMode::FixedUnit,
            phase_mode: PhaseKind::Continuous,
            tau: None,
            beta: None,
        }
    }
}

impl ConstraintsSpec {
    pub fn realize(&self, irs_sizes: &[usize]) -> Result<PhaseConstraints> {
        let phase_mode = match (self.phase_mode, self.tau) {
            (PhaseKind::Continuous, None) => PhaseMode::Continuous,
            (PhaseKind::Continuous, Some(_)) => {
                return Err(Error::config("constraints.tau", "only meaningful for discrete phases"))
            }
            (PhaseKind::Discrete, Some(tau)) => PhaseMode::Discrete { tau },
            (PhaseKind::Discrete, None) => return Err(Error::config("constraints.tau", "required for discrete phases")),
        };
        let beta = match (self.amplitude_mode, &self.beta) {
            (AmplitudeMode::FixedValues, None) => {
                return Err(Error::config("constraints.beta", "required for fixed_values"))
            }
            (AmplitudeMode::FixedValues, Some(b)) => b.clone(),
            (_, Some(_)) => return Err(Error::config("constraints.beta", "only meaningful for fixed_values")),
            (_, None) => irs_sizes.iter().map(|&n| vec![1.0; n]).collect(),
        };
        let c = PhaseConstraints {
            amplitude_mode: self.amplitude_mode,
            phase_mode,
            beta,
        };
        c.validate(irs_sizes)?;
        Ok(c)
    }
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemConfig,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub constraints: ConstraintsSpec,
    /// Inferred from the groups when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic: Option<Traffic>,
    pub algorithm: AlgorithmOptions,
}

fn infer_traffic(config: &SystemConfig) -> Traffic {
    if config.groups.iter().all(|g| g.len() == 1) {
        Traffic::Unicast
    } else if config.groups.len() == 1 {
        Traffic::Broadcast
    } else {
        Traffic::Multicast
    }
}

impl ScenarioFile {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::InvalidConfig {
                path,
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::InvalidConfig {
                path,
                message: e.into_inner().to_string(),
            }
        })
    }

    /// Validates every block and draws the channels.
    pub fn realize(&self) -> Result<Scenario> {
        self.system.validate()?;
        let channels = match &self.channel {
            ChannelSpec::Generated { fading, gains, seed } => {
                let model = ChannelModelParams {
                    fading: *fading,
                    gains: gains.clone().unwrap_or_else(|| PathGains::uniform(&self.system, 1.0, 1.0, 1.0)),
                };
                generate_channels(&self.system, &model, *seed)?
            }
            ChannelSpec::Inline { channels } => {
                channels.check_against(&self.system)?;
                channels.clone()
            }
        };
        let constraints = self.constraints.realize(&self.system.irs_sizes)?;
        let traffic = self.traffic.unwrap_or_else(|| infer_traffic(&self.system));
        let scenario = Scenario {
            config: self.system.clone(),
            channels,
            constraints,
            traffic,
            algorithm: self.algorithm.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Returns a copy with one sweep parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut s = self.clone();
        let count = |name: &str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config(format!("sweep.{name}"), format!("{value} is not a positive integer")))
            }
        };
        let generated_only = |s: &ScenarioFile, name: &str| -> Result<()> {
            match s.channel {
                ChannelSpec::Inline { .. } => Err(Error::config(
                    format!("sweep.{name}"),
                    "changes channel dimensions; needs generated channels",
                )),
                ChannelSpec::Generated { .. } => Ok(()),
            }
        };
        match axis {
            SweepAxis::N => {
                let n = count("N")?;
                generated_only(&s, "N")?;
                if s.constraints.beta.is_some() {
                    return Err(Error::config("sweep.N", "cannot resize explicit constraints.beta"));
                }
                s.system.irs_sizes = vec![n; s.system.irs_sizes.len()];
            }
            SweepAxis::M => {
                let m = count("M")?;
                generated_only(&s, "M")?;
                s.system.num_bs_antennas = m;
            }
            SweepAxis::K => {
                let k = count("K")?;
                generated_only(&s, "K")?;
                let traffic = s.traffic.unwrap_or_else(|| infer_traffic(&s.system));
                s.system.groups = match traffic {
                    Traffic::Unicast => (0..k).map(|i| vec![i]).collect(),
                    Traffic::Broadcast => vec![(0..k).collect()],
                    Traffic::Multicast => {
                        return Err(Error::config("sweep.K", "group layout for multicast is ambiguous"))
                    }
                };
                let extend = |v: &[f64]| vec![v.first().copied().unwrap_or(1.0); k];
                s.system.mu_antennas = vec![s.system.mu_antennas.first().copied().unwrap_or(1); k];
                s.system.noise_powers = extend(&s.system.noise_powers);
                s.system.sinr_targets = extend(&s.system.sinr_targets);
                if let ChannelSpec::Generated { gains: Some(g), .. } = &mut s.channel {
                    g.bs_mu = extend(&g.bs_mu);
                    for row in &mut g.irs_mu {
                        *row = extend(row);
                    }
                }
            }
            SweepAxis::Tau => {
                let tau = count("tau")?;
                s.constraints.phase_mode = PhaseKind::Discrete;
                s.constraints.tau = Some(tau as u32);
            }
            SweepAxis::P => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::config("sweep.P", "must be nonnegative and finite"));
                }
                s.system.power_budget = value;
            }
            SweepAxis::Trials => {
                s.algorithm.trials = count("trials")?;
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    M,
    K,
    Tau,
    P,
    Trials,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "N" => SweepAxis::N,
            "M" => SweepAxis::M,
            "K" => SweepAxis::K,
            "tau" => SweepAxis::Tau,
            "P" => SweepAxis::P,
            "trials" => SweepAxis::Trials,
            other => return Err(Error::config("sweep.axis", format!("unknown axis {other:?}"))),
        })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::N => "N",
            SweepAxis::M => "M",
            SweepAxis::K => "K",
            SweepAxis::Tau => "tau",
            SweepAxis::P => "P",
            SweepAxis::Trials => "trials",
        })
    }
}

/// Sets `key` (dotted path, numeric segments index arrays) in a JSON
/// document. `raw` is parsed as JSON when possible, otherwise taken as a
/// string. Missing object members are created.
pub fn apply_override(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    if key.is_empty() {
        return Err(Error::config(key, "empty override key"));
    }
    let mut cur = doc;
    for seg in key.split('.') {
        cur = match cur {
            Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::config(key, format!("segment {seg:?} must index an array")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(key, format!("index {idx} outside array of length {len}")))?
            }
            Value::Null => {
                *cur = Value::Object(Default::default());
                match cur {
                    Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Null),
                    _ => unreachable!(),
                }
            }
            _ => return Err(Error::config(key, format!("cannot descend into a scalar at {seg:?}"))),
        };
    }
    *cur = parsed;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"num_bs_antennas": 2, "irs_sizes": [2], "groups": [[0], [1]],
                   "mu_antennas": [1, 1], "noise_powers": [1, 1], "sinr_targets": [1, 1],
                   "power_budget": 1},
        "channel": {"source": "generated", "seed": 3},
        "algorithm": {"problem": "power_qos"}
    }"#;

    #[test]
    fn minimal_file_realizes() {
        let f = ScenarioFile::from_json(MINIMAL).unwrap();
        let s = f.realize().unwrap();
        assert_eq!(s.traffic, Traffic::Unicast);
        assert_eq!(s.constraints.beta, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn errors_carry_paths() {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        apply_override(&mut v, "system.sinr_targets", "[1]").unwrap();
        let err = ScenarioFile::from_value(v).unwrap().realize().unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref path, .. } if path == "system.sinr_targets"));

        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        apply_override(&mut v, "system.extra", "1").unwrap();
        let err = ScenarioFile::from_value(v).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref path, .. } if path == "system.extra"), "{err}");

        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        apply_override(&mut v, "system.noise_powers.1", "\"loud\"").unwrap();
        let err = ScenarioFile::from_value(v).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { ref path, .. } if path == "system.noise_powers[1]"), "{err}");
    }

    #[test]
    fn axes_rewrite_fields() {
        let f = ScenarioFile::from_json(MINIMAL).unwrap();
        let k = f.with_axis(SweepAxis::K, 3.0).unwrap();
        assert_eq!(k.system.groups, vec![vec![0], vec![1], vec![2]]);
        k.realize().unwrap();
        let t = f.with_axis(SweepAxis::Tau, 4.0).unwrap();
        assert!(matches!(t.realize().unwrap().constraints.phase_mode, PhaseMode::Discrete { tau: 4 }));
        assert!(f.with_axis(SweepAxis::N, 1.5).is_err());
        assert_eq!("tau".parse::<SweepAxis>().unwrap(), SweepAxis::Tau);
    }
}
