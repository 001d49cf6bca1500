use serde::{Deserialize, Serialize};

use super::confidence::{
    confidence_region, excess_noise_from_residual, transmittance_from_gain, Calibration,
    ConfidenceRegion,
};
use super::{Moments, SymbolBlock};
use crate::error::{Error, Result};
use crate::network::{LinkInterval, NetworkParams};

/// Smallest block accepted by the estimator.
pub const MIN_ESTIMATION_SYMBOLS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEstimate {
    /// 0-based user index.
    pub user: usize,
    /// `t̂ = Σ s y / Σ s²` over both quadratures.
    pub gain: f64,
    /// `σ̂² = Σ (y − t̂ s)² / 2n`.
    pub sigma2: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    pub region: ConfidenceRegion,
    pub negative_excess_noise: bool,
    pub negative_gain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: u64,
    pub eps_pe: f64,
    pub users: Vec<UserEstimate>,
}

impl EstimateReport {
    /// `base` with the estimates and their confidence intervals in place of
    /// the link parameters. Negative `ε̂` is clamped to zero.
    pub fn apply_to(&self, base: &NetworkParams) -> Result<NetworkParams> {
        if base.num_users() != self.users.len() {
            return Err(Error::Validation(format!(
                "report has {} users, parameters have {}",
                self.users.len(),
                base.num_users()
            )));
        }
        let mut out = base.clone();
        for (link, e) in out.users.iter_mut().zip(&self.users) {
            let r = &e.region;
            link.transmittance = e.transmittance.clamp(0.0, 1.0);
            link.excess_noise = e.excess_noise.max(0.0);
            link.interval = Some(LinkInterval {
                transmittance: (r.transmittance.0.clamp(0.0, 1.0), r.transmittance.1.clamp(0.0, 1.0)),
                excess_noise: (r.excess_noise.0.max(0.0), r.excess_noise.1.max(0.0)),
            });
        }
        out.block_size = self.n;
        out.eps_pe = self.eps_pe;
        out.validate()?;
        Ok(out)
    }
}

/// Estimates user `k` from pooled sufficient statistics.
pub fn estimate_from_moments(
    moments: &Moments,
    k: usize,
    eps_pe: f64,
    cal: &Calibration,
) -> Result<UserEstimate> {
    if moments.n < MIN_ESTIMATION_SYMBOLS {
        return Err(Error::Domain(format!(
            "estimation needs at least {MIN_ESTIMATION_SYMBOLS} symbols, got {}",
            moments.n
        )));
    }
    if k >= moments.num_users() {
        return Err(Error::Validation(format!(
            "user index {k} out of range for {} users",
            moments.num_users()
        )));
    }
    let ss = moments.x[(0, 0)] + moments.p[(0, 0)];
    let sy = moments.x[(0, k + 1)] + moments.p[(0, k + 1)];
    let yy = moments.x[(k + 1, k + 1)] + moments.p[(k + 1, k + 1)];
    if !(ss > 0.0) {
        return Err(Error::Domain("Alice's symbols have zero variance".into()));
    }
    let gain = sy / ss;
    let sigma2 = (yy - sy * gain) / (2.0 * moments.n as f64);
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("user {} residual variance is zero", k + 1)));
    }
    let region = confidence_region(gain, sigma2, moments.n, eps_pe, cal)?;
    let excess_noise = excess_noise_from_residual(sigma2, cal);
    Ok(UserEstimate {
        user: k,
        gain,
        sigma2,
        transmittance: transmittance_from_gain(gain, cal.detector_efficiency),
        excess_noise,
        region,
        negative_excess_noise: excess_noise < 0.0,
        negative_gain: gain < 0.0,
    })
}

/// Point estimates and confidence region for user `k` of a block.
pub fn estimate(block: &SymbolBlock, k: usize, eps_pe: f64, cal: &Calibration) -> Result<UserEstimate> {
    estimate_from_moments(&block.moments(), k, eps_pe, cal)
}

/// Estimates every user; `electronic_noise[k]` is user `k`'s calibration.
pub fn estimate_all(
    moments: &Moments,
    modulation_variance: f64,
    detector_efficiency: f64,
    electronic_noise: &[f64],
    eps_pe: f64,
) -> Result<EstimateReport> {
    if electronic_noise.len() != moments.num_users() {
        return Err(Error::Validation(format!(
            "{} calibration entries for {} users",
            electronic_noise.len(),
            moments.num_users()
        )));
    }
    let users = electronic_noise
        .iter()
        .enumerate()
        .map(|(k, &nel)| {
            let cal = Calibration {
                modulation_variance,
                detector_efficiency,
                electronic_noise: nel,
            };
            estimate_from_moments(moments, k, eps_pe, &cal)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport {
        n: moments.n,
        eps_pe,
        users,
    })
}
