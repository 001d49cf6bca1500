//! TOML run configuration. Noise fields carry their unit in the key
//! (`_snu` or `_msnu`) and are normalised to SNU on load.

use std::path::Path;

use cvqn::{LinkInterval, NetworkParams, RateMode, UserLink};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const BUNDLED: &str = include_str!("../configs/four_users.cfg");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub modulation_variance_snu: f64,
    pub detector_efficiency: f64,
    pub reconciliation_efficiency: f64,
    pub block_size: u64,
    pub eps_pe: f64,
    /// Default receiver noise for users that do not set their own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electronic_noise_msnu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electronic_noise_snu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splitter_consistency: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(rename = "user")]
    pub users: Vec<UserConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<RateMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<crate::Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub transmittance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_noise_snu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_noise_msnu: Option<f64>,
    /// Separate I and Q estimates; the model uses their mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_noise_iq_msnu: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electronic_noise_snu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electronic_noise_msnu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transmittance_interval: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_noise_interval_snu: Option<[f64; 2]>,
}

fn one_of(
    what: &str,
    snu: Option<f64>,
    msnu: Option<f64>,
) -> Result<Option<f64>, CliError> {
    match (snu, msnu) {
        (Some(_), Some(_)) => Err(CliError::Config(format!(
            "{what}: give either the _snu or the _msnu field, not both"
        ))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(v * 1e-3)),
        (None, None) => Ok(None),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled config parses")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn mode(&self) -> Option<RateMode> {
        self.run.as_ref().and_then(|r| r.mode)
    }

    pub fn params(&self) -> Result<NetworkParams, CliError> {
        let default_nel = one_of("electronic_noise", self.electronic_noise_snu, self.electronic_noise_msnu)?;
        let vm = self.modulation_variance_snu;
        let users = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let tag = format!("user {}", i + 1);
                let eps = match (one_of(&tag, u.excess_noise_snu, u.excess_noise_msnu)?, u.excess_noise_iq_msnu) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config(format!(
                            "{tag}: excess_noise_iq_msnu conflicts with a single excess noise value"
                        )))
                    }
                    (Some(v), None) => v,
                    (None, Some([i_, q])) => 0.5 * (i_ + q) * 1e-3,
                    (None, None) => return Err(CliError::Config(format!("{tag}: excess noise missing"))),
                };
                let nel = one_of(&tag, u.electronic_noise_snu, u.electronic_noise_msnu)?
                    .or(default_nel)
                    .ok_or_else(|| CliError::Config(format!("{tag}: electronic noise missing")))?;
                let interval = match (u.transmittance_interval, u.excess_noise_interval_snu) {
                    (Some(t), Some(e)) => Some(LinkInterval {
                        transmittance: (t[0], t[1]),
                        excess_noise: (e[0], e[1]),
                    }),
                    (None, None) => None,
                    _ => {
                        return Err(CliError::Config(format!(
                            "{tag}: transmittance_interval and excess_noise_interval_snu go together"
                        )))
                    }
                };
                Ok(UserLink {
                    transmittance: u.transmittance,
                    excess_noise: eps,
                    trusted_noise: nel,
                    interval,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let params = NetworkParams {
            modulation_variance: vm,
            users,
            detector_efficiency: self.detector_efficiency,
            beta: self.reconciliation_efficiency,
            block_size: self.block_size,
            eps_pe: self.eps_pe,
            splitter_consistency: self.splitter_consistency.unwrap_or(true),
        };
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(params)
    }

    /// Exact SNU-valued config for `params`; loading it gives back `params`.
    pub fn from_params(params: &NetworkParams) -> Self {
        Self {
            modulation_variance_snu: params.modulation_variance,
            detector_efficiency: params.detector_efficiency,
            reconciliation_efficiency: params.beta,
            block_size: params.block_size,
            eps_pe: params.eps_pe,
            splitter_consistency: (!params.splitter_consistency).then_some(false),
            users: params
                .users
                .iter()
                .map(|u| UserConfig {
                    transmittance: u.transmittance,
                    excess_noise_snu: Some(u.excess_noise),
                    electronic_noise_snu: Some(u.trusted_noise),
                    transmittance_interval: u.interval.map(|i| [i.transmittance.0, i.transmittance.1]),
                    excess_noise_interval_snu: u.interval.map(|i| [i.excess_noise.0, i.excess_noise.1]),
                    ..Default::default()
                })
                .collect(),
            ..Default::default()
        }
    }
}
