//! Mutual information, Holevo bounds for the three trust models, finite-size
//! correction and per-user key rates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{condition_on_heterodyne, von_neumann_entropy, CovarianceMatrix};
use crate::network::{
    attach_trusted_detector, build_channel_output_cm, outcome_covariance, untrusted_detector_map,
    ModeRole, NetworkParams,
};
use crate::scalar::Real;
use crate::sim::confidence::{confidence_region, expected_statistics, Calibration};

/// Role assigned to the non-reference users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrustModel {
    Untrusted,
    Collaborative,
    Trusted,
}

impl TrustModel {
    pub const ALL: [TrustModel; 3] = [
        TrustModel::Untrusted,
        TrustModel::Collaborative,
        TrustModel::Trusted,
    ];
}

impl fmt::Display for TrustModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustModel::Untrusted => "untrusted",
            TrustModel::Collaborative => "collaborative",
            TrustModel::Trusted => "trusted",
        })
    }
}

impl FromStr for TrustModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "untrusted" => Ok(TrustModel::Untrusted),
            "collaborative" | "collab" => Ok(TrustModel::Collaborative),
            "trusted" => Ok(TrustModel::Trusted),
            other => Err(Error::Validation(format!("unknown trust model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// Worst-case parameters and `Δ(N)`.
    Finite,
    /// Maximum-likelihood parameters, no finite-size penalty.
    Asymptotic,
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMode::Finite => "finite",
            RateMode::Asymptotic => "asymptotic",
        })
    }
}

impl FromStr for RateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "finite" => Ok(RateMode::Finite),
            "asymptotic" => Ok(RateMode::Asymptotic),
            other => Err(Error::Validation(format!("unknown rate mode {other:?}"))),
        }
    }
}

/// Channel parameters a rate was evaluated with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstCaseUsed<T = f64> {
    MaximumLikelihood,
    Corner {
        transmittance: Vec<T>,
        excess_noise: Vec<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport<T = f64> {
    /// 0-based user index.
    pub user: usize,
    pub trust: TrustModel,
    pub mode: RateMode,
    pub mutual_information: T,
    pub holevo: T,
    pub delta_fs: T,
    /// `β I − χ − Δ` before flooring.
    pub raw_rate: T,
    /// `max(0, raw_rate)`.
    pub rate: T,
    pub non_positive: bool,
    pub worst_case: WorstCaseUsed<T>,
    pub detector_detuned: bool,
}

/// `Δ(N) = 7 √(log2(2·10¹⁰) / N)`.
pub fn delta_fs<T: Real>(n: u64) -> Result<T> {
    if n == 0 {
        return Err(Error::Domain("finite-size correction needs N >= 1".into()));
    }
    let n = T::from_u64(n).expect("block size representable");
    Ok(T::lit(7.0) * ((T::lit(2.0) * T::lit(1e10)).log2() / n).sqrt())
}

/// Substitutes the worst-case corner for every link.
///
/// Supplied intervals are used as-is; otherwise the corner comes from the
/// confidence region around the model-expected statistics with `n = N`.
pub fn worst_case_params<T: Real>(
    params: &NetworkParams<T>,
) -> Result<(NetworkParams<T>, WorstCaseUsed<T>)> {
    params.validate()?;
    let mut out = params.clone();
    let (mut etas, mut epss) = (Vec::new(), Vec::new());
    for u in out.users.iter_mut() {
        let (eta, eps) = match &u.interval {
            Some(iv) => (iv.transmittance.0, iv.excess_noise.1),
            None => {
                let cal = Calibration {
                    modulation_variance: params.modulation_variance,
                    detector_efficiency: params.detector_efficiency,
                    electronic_noise: u.trusted_noise,
                };
                if cal.modulation_variance > T::zero() {
                    let (t, s2) = expected_statistics(u, params.detector_efficiency);
                    let r = confidence_region(t, s2, params.block_size, params.eps_pe, &cal)?;
                    (r.worst_case.transmittance, r.worst_case.excess_noise)
                } else {
                    (u.transmittance, u.excess_noise)
                }
            }
        };
        u.transmittance = eta.max(T::zero()).min(T::one());
        u.excess_noise = eps.max(T::zero());
        u.interval = None;
        etas.push(u.transmittance);
        epss.push(u.excess_noise);
    }
    Ok((
        out,
        WorstCaseUsed::Corner {
            transmittance: etas,
            excess_noise: epss,
        },
    ))
}

/// Variance of `target` given `given` (Schur complement). Zero-variance
/// conditioning variables are constants and are dropped.
fn conditional_variance<T: Real>(c: &DMatrix<T>, target: usize, given: &[usize]) -> Result<T> {
    let given: Vec<usize> = given.iter().copied().filter(|&i| c[(i, i)] > T::zero()).collect();
    if given.is_empty() {
        return Ok(c[(target, target)]);
    }
    let g = c.select_rows(&given).select_columns(&given);
    let cross = c.select_rows(&given).column(target).into_owned();
    let chol = Cholesky::new(g)
        .ok_or_else(|| Error::numerical("conditioning covariance is singular", c))?;
    let x = chol.solve(&cross);
    Ok(c[(target, target)] - cross.dot(&x))
}

fn validate_conditioning(params_users: usize, k: usize, conditioned_on: &[usize]) -> Result<()> {
    if k >= params_users {
        return Err(Error::Validation(format!(
            "user index {k} out of range for {params_users} users"
        )));
    }
    let mut seen = vec![false; params_users];
    for &j in conditioned_on {
        if j >= params_users || j == k || seen[j] {
            return Err(Error::Validation(format!(
                "invalid conditioning user {j} for target {k}"
            )));
        }
        seen[j] = true;
    }
    Ok(())
}

/// `I(A : B_k | y_cond)` in bits per channel use, from the classical
/// heterodyne-outcome covariance.
pub fn mutual_information<T: Real>(
    params: &NetworkParams<T>,
    k: usize,
    conditioned_on: &[usize],
) -> Result<T> {
    validate_conditioning(params.num_users(), k, conditioned_on)?;
    let c = outcome_covariance(params)?;
    mutual_information_from_covariance(&c, k, conditioned_on)
}

pub(crate) fn mutual_information_from_covariance<T: Real>(
    c: &DMatrix<T>,
    k: usize,
    conditioned_on: &[usize],
) -> Result<T> {
    let y = k + 1;
    let given: Vec<usize> = conditioned_on.iter().map(|j| j + 1).collect();
    let var = conditional_variance(c, y, &given)?;
    let mut with_s = vec![0];
    with_s.extend(&given);
    let var_s = conditional_variance(c, y, &with_s)?;
    if !(var_s > T::zero()) || !(var > T::zero()) {
        return Err(Error::numerical("degenerate outcome variance", c));
    }
    // x and p quadratures contribute ½ log2 each and are identically distributed
    let per_quadrature = T::lit(0.5) * (var / var_s).log2();
    Ok(per_quadrature + per_quadrature)
}

fn log_det<T: Real>(m: DMatrix<T>) -> Result<T> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::numerical("covariance is not positive definite", &m))?;
    Ok(chol
        .l()
        .diagonal()
        .iter()
        .fold(T::zero(), |acc, d| acc + d.ln())
        * T::lit(2.0))
}

/// `I(A : B_1 … B_M)` directly from determinants of the outcome covariance.
pub fn joint_mutual_information<T: Real>(params: &NetworkParams<T>) -> Result<T> {
    let c = outcome_covariance(params)?;
    let m = params.num_users();
    let vm = c[(0, 0)];
    if !(vm > T::zero()) {
        return Ok(T::zero());
    }
    let idx: Vec<usize> = (1..=m).collect();
    let cyy = c.select_rows(&idx).select_columns(&idx);
    let cys = c.select_rows(&idx).column(0).into_owned();
    let cyy_s = &cyy - &cys * cys.transpose() / vm;
    let nats = (log_det(cyy)? - log_det(cyy_s)?) * T::lit(0.5);
    // two quadratures, converted to bits
    Ok(nats * T::lit(2.0) / T::lit(std::f64::consts::LN_2))
}

/// `S(state) − S(state | heterodyne of B_k behind its trusted detector)`.
/// The detector ancillae stay in the conditional state.
pub(crate) fn holevo_measuring<T: Real>(
    state: &CovarianceMatrix<T>,
    k: usize,
    efficiency: T,
    electronic_noise: T,
) -> Result<(T, bool)> {
    let before = von_neumann_entropy(state)?;
    let (with_det, _, det) = attach_trusted_detector(state, k, efficiency, electronic_noise)?;
    let after = condition_on_heterodyne(&with_det, &[ModeRole::ChannelOutput(k).label()])?;
    Ok((before - von_neumann_entropy(&after)?, det.detuned))
}

fn holevo_of<T: Real>(params: &NetworkParams<T>, k: usize, trust: TrustModel) -> Result<(T, bool)> {
    let user = params.user(k)?;
    let global = build_channel_output_cm(params)?;
    let bk = ModeRole::ChannelOutput(k).label();
    let state = match trust {
        TrustModel::Untrusted => global.reduce(&["A".to_string(), bk])?,
        TrustModel::Trusted => global,
        TrustModel::Collaborative => {
            let mut state = global;
            let mut assisting = Vec::new();
            for (j, other) in params.users.iter().enumerate().filter(|(j, _)| *j != k) {
                state = untrusted_detector_map(
                    &state,
                    j,
                    params.detector_efficiency,
                    other.trusted_noise,
                )?;
                assisting.push(ModeRole::ChannelOutput(j).label());
            }
            if assisting.is_empty() {
                state
            } else {
                condition_on_heterodyne(&state, &assisting)?
            }
        }
    };
    holevo_measuring(&state, k, params.detector_efficiency, user.trusted_noise)
}

/// Holevo bound on the reduced state `Γ_{AB_k}`.
pub fn holevo_untrusted<T: Real>(params: &NetworkParams<T>, k: usize) -> Result<T> {
    holevo_of(params, k, TrustModel::Untrusted).map(|r| r.0)
}

/// Holevo bound on the global state; the other users are excluded from Eve.
pub fn holevo_trusted<T: Real>(params: &NetworkParams<T>, k: usize) -> Result<T> {
    holevo_of(params, k, TrustModel::Trusted).map(|r| r.0)
}

/// Holevo bound on `Γ_{AB_k | y_¬k}`, conditioned on the assisting users'
/// noisy (untrusted-detector) heterodyne outcomes.
pub fn holevo_collaborative<T: Real>(params: &NetworkParams<T>, k: usize) -> Result<T> {
    holevo_of(params, k, TrustModel::Collaborative).map(|r| r.0)
}

/// Secret key rate of user `k` under the given trust model.
pub fn key_rate<T: Real>(
    params: &NetworkParams<T>,
    trust: TrustModel,
    k: usize,
    mode: RateMode,
) -> Result<KeyRateReport<T>> {
    params.validate()?;
    params.user(k)?;
    let (eval, worst_case) = match mode {
        RateMode::Finite => worst_case_params(params)?,
        RateMode::Asymptotic => (params.clone(), WorstCaseUsed::MaximumLikelihood),
    };
    key_rate_at(&eval, worst_case, trust, k, mode)
}

/// Key rate with parameters that have already been through worst-case
/// substitution (or are the ML values in asymptotic mode).
pub(crate) fn key_rate_at<T: Real>(
    eval: &NetworkParams<T>,
    worst_case: WorstCaseUsed<T>,
    trust: TrustModel,
    k: usize,
    mode: RateMode,
) -> Result<KeyRateReport<T>> {
    let others: Vec<usize> = (0..eval.num_users()).filter(|&j| j != k).collect();
    let cond: &[usize] = match trust {
        TrustModel::Collaborative => &others,
        _ => &[],
    };
    let mi = mutual_information(eval, k, cond)?;
    let (holevo, detuned) = holevo_of(eval, k, trust)?;
    let delta = match mode {
        RateMode::Finite => delta_fs(eval.block_size)?,
        RateMode::Asymptotic => T::zero(),
    };
    let raw = eval.beta * mi - holevo - delta;
    Ok(KeyRateReport {
        user: k,
        trust,
        mode,
        mutual_information: mi,
        holevo,
        delta_fs: delta,
        raw_rate: raw,
        rate: raw.max(T::zero()),
        non_positive: raw <= T::zero(),
        worst_case,
        detector_detuned: detuned,
    })
}

/// Every (user, trust model) pair, user-major, in a fixed order.
pub fn key_rate_table<T: Real>(
    params: &NetworkParams<T>,
    mode: RateMode,
) -> Result<Vec<KeyRateReport<T>>> {
    params.validate()?;
    let (eval, worst_case) = match mode {
        RateMode::Finite => worst_case_params(params)?,
        RateMode::Asymptotic => (params.clone(), WorstCaseUsed::MaximumLikelihood),
    };
    let jobs: Vec<(usize, TrustModel)> = (0..params.num_users())
        .flat_map(|k| TrustModel::ALL.into_iter().map(move |t| (k, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(k, t)| key_rate_at(&eval, worst_case.clone(), t, k, mode))
        .collect()
}
