//! Global covariance matrix of Alice and `M` receivers behind a passive
//! splitter, trusted-detector purification and the classical outcome model.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{beamsplitter, check_physicality, CovarianceMatrix};
use crate::scalar::Real;

/// Transmittance used in place of a unit-efficiency detector that still has
/// electronic noise (the purification variance diverges at exactly 1).
pub const DETUNED_EFFICIENCY_DELTA: f64 = 1e-6;

/// Confidence intervals for one link, as produced by parameter estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkInterval<T = f64> {
    pub transmittance: (T, T),
    pub excess_noise: (T, T),
}

/// One receiver branch: channel transmittance and excess noise (SNU,
/// referred to the channel output), plus the receiver's trusted electronic noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLink<T = f64> {
    pub transmittance: T,
    pub excess_noise: T,
    pub trusted_noise: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<LinkInterval<T>>,
}

impl<T: Real> UserLink<T> {
    pub fn new(transmittance: T, excess_noise: T, trusted_noise: T) -> Self {
        Self {
            transmittance,
            excess_noise,
            trusted_noise,
            interval: None,
        }
    }
}

/// All physical inputs of a key-rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<T = f64> {
    /// Gaussian modulation variance `V_M` (SNU).
    pub modulation_variance: T,
    pub users: Vec<UserLink<T>>,
    /// Trusted detector efficiency shared by all receivers.
    pub detector_efficiency: T,
    /// Reconciliation efficiency.
    pub beta: T,
    /// Number of exchanged signals `N`.
    pub block_size: u64,
    /// Parameter-estimation failure probability.
    pub eps_pe: f64,
    /// Enforce `Σ η_m ≤ 1` for a passive splitter.
    pub splitter_consistency: bool,
}

impl<T: Real> NetworkParams<T> {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, k: usize) -> Result<&UserLink<T>> {
        self.users.get(k).ok_or_else(|| {
            Error::Validation(format!(
                "user index {k} out of range for {} users",
                self.users.len()
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Validation(what));
        if !(self.modulation_variance >= T::zero()) || !self.modulation_variance.is_finite() {
            return bad(format!("modulation variance {} must be >= 0", self.modulation_variance));
        }
        if self.users.is_empty() {
            return bad("network has no users".into());
        }
        if !(self.detector_efficiency > T::zero() && self.detector_efficiency <= T::one()) {
            return bad(format!(
                "detector efficiency {} outside (0, 1]",
                self.detector_efficiency
            ));
        }
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return bad(format!("reconciliation efficiency {} outside [0, 1]", self.beta));
        }
        if self.block_size == 0 {
            return bad("block size must be positive".into());
        }
        if !(self.eps_pe > 0.0 && self.eps_pe < 0.5) {
            return bad(format!("eps_pe {} outside (0, 0.5)", self.eps_pe));
        }
        for (k, u) in self.users.iter().enumerate() {
            if !(u.transmittance >= T::zero() && u.transmittance <= T::one()) {
                return bad(format!("user {}: transmittance {} outside [0, 1]", k + 1, u.transmittance));
            }
            if !(u.excess_noise >= T::zero()) || !u.excess_noise.is_finite() {
                return bad(format!("user {}: excess noise {} is negative", k + 1, u.excess_noise));
            }
            if !(u.trusted_noise >= T::zero()) || !u.trusted_noise.is_finite() {
                return bad(format!("user {}: trusted noise {} is negative", k + 1, u.trusted_noise));
            }
            if let Some(iv) = &u.interval {
                if !(iv.transmittance.0 <= iv.transmittance.1 && iv.excess_noise.0 <= iv.excess_noise.1) {
                    return bad(format!("user {}: interval bounds are reversed", k + 1));
                }
            }
        }
        if self.splitter_consistency {
            let total = self.users.iter().fold(T::zero(), |acc, u| acc + u.transmittance);
            if total > T::one() + T::lit(1e-6) {
                return bad(format!(
                    "total transmittance {total} exceeds 1 for a passive splitter"
                ));
            }
        }
        Ok(())
    }
}

/// Role of a mode in the network covariance matrices. Users are 0-based;
/// labels are 1-based (`B1`, `D1_1`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeRole {
    Alice,
    ChannelOutput(usize),
    DetectorAncilla1(usize),
    DetectorAncilla2(usize),
}

impl ModeRole {
    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn parse(label: &str) -> Option<Self> {
        if label == "A" {
            return Some(ModeRole::Alice);
        }
        let user = |s: &str| s.parse::<usize>().ok().filter(|k| *k >= 1).map(|k| k - 1);
        if let Some(rest) = label.strip_prefix("D1_") {
            return user(rest).map(ModeRole::DetectorAncilla1);
        }
        if let Some(rest) = label.strip_prefix("D2_") {
            return user(rest).map(ModeRole::DetectorAncilla2);
        }
        label.strip_prefix('B').and_then(user).map(ModeRole::ChannelOutput)
    }
}

impl fmt::Display for ModeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeRole::Alice => write!(f, "A"),
            ModeRole::ChannelOutput(k) => write!(f, "B{}", k + 1),
            ModeRole::DetectorAncilla1(k) => write!(f, "D1_{}", k + 1),
            ModeRole::DetectorAncilla2(k) => write!(f, "D2_{}", k + 1),
        }
    }
}

/// Label ↔ index map of a network covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMap {
    roles: Vec<ModeRole>,
}

impl ModeMap {
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let roles = labels
            .iter()
            .map(|l| {
                ModeRole::parse(l.as_ref())
                    .ok_or_else(|| Error::Validation(format!("unknown mode label {:?}", l.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { roles })
    }

    pub fn index(&self, role: ModeRole) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }

    pub fn roles(&self) -> &[ModeRole] {
        &self.roles
    }
}

/// Closed-form covariance matrix of Alice's EPR mode and every channel output.
///
/// With `V = V_M + 1`: `A = V·I`, `A–B_k = √η_k √(V²−1)·Z`,
/// `B_k = (η_k V + 1 − η_k + ε_k)·I`, `B_j–B_k = √(η_j η_k)(V − 1)·I`.
pub fn build_channel_output_cm<T: Real>(params: &NetworkParams<T>) -> Result<CovarianceMatrix<T>> {
    params.validate()?;
    let m = params.num_users();
    let v = params.modulation_variance + T::one();
    let epr = (v * v - T::one()).sqrt();
    let dim = 2 * (m + 1);
    let mut g = DMatrix::zeros(dim, dim);
    let set_block = |g: &mut DMatrix<T>, a: usize, b: usize, dx: T, dp: T| {
        g[(2 * a, 2 * b)] = dx;
        g[(2 * a + 1, 2 * b + 1)] = dp;
        g[(2 * b, 2 * a)] = dx;
        g[(2 * b + 1, 2 * a + 1)] = dp;
    };

    set_block(&mut g, 0, 0, v, v);
    for (k, u) in params.users.iter().enumerate() {
        let b = k + 1;
        let eta = u.transmittance;
        let c = eta.sqrt() * epr;
        set_block(&mut g, 0, b, c, -c);
        let w = eta * v + T::one() - eta + u.excess_noise;
        set_block(&mut g, b, b, w, w);
        for (j, other) in params.users.iter().enumerate().skip(k + 1) {
            let cross = (eta * other.transmittance).sqrt() * (v - T::one());
            set_block(&mut g, b, j + 1, cross, cross);
        }
    }

    let labels: Vec<String> = std::iter::once(ModeRole::Alice)
        .chain((0..m).map(ModeRole::ChannelOutput))
        .map(|r| r.label())
        .collect();
    let cm = CovarianceMatrix::new(g, labels)?;
    let phys = check_physicality(&cm);
    if !phys.physical {
        return Err(Error::Model(format!(
            "parameters give an unphysical state (min symplectic eigenvalue {:?}): V_M={}, eta={:?}, eps={:?}",
            phys.min_symplectic_eigenvalue.map(|v| v.as_f64()),
            params.modulation_variance,
            params.users.iter().map(|u| u.transmittance.as_f64()).collect::<Vec<_>>(),
            params.users.iter().map(|u| u.excess_noise.as_f64()).collect::<Vec<_>>(),
        )));
    }
    Ok(cm)
}

/// Effective trusted-receiver model (efficiency, purification variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustedDetector<T: Real = f64> {
    pub efficiency: T,
    pub electronic_noise: T,
    /// Variance of the purifying EPR ancilla, `1 + ν_el/(1 − η_d)`.
    pub ancilla_variance: T,
    /// Set when `η_d = 1` had to be replaced by `1 − δ`.
    pub detuned: bool,
}

impl<T: Real> TrustedDetector<T> {
    pub fn new(efficiency: T, electronic_noise: T) -> Result<Self> {
        if !(efficiency > T::zero() && efficiency <= T::one()) {
            return Err(Error::Domain(format!("detector efficiency {efficiency} outside (0, 1]")));
        }
        if !(electronic_noise >= T::zero()) {
            return Err(Error::Domain(format!("electronic noise {electronic_noise} is negative")));
        }
        let mut eff = efficiency;
        let mut detuned = false;
        if eff == T::one() && electronic_noise > T::zero() {
            eff = T::one() - T::lit(DETUNED_EFFICIENCY_DELTA);
            detuned = true;
        }
        let ancilla_variance = if eff == T::one() {
            T::one()
        } else {
            T::one() + electronic_noise / (T::one() - eff)
        };
        Ok(Self {
            efficiency: eff,
            electronic_noise,
            ancilla_variance,
            detuned,
        })
    }
}

/// Purifies user `k`'s trusted receiver: appends an EPR ancilla
/// `(D1_k, D2_k)` and mixes `B_k` with `D1_k` on a beamsplitter of
/// transmittance `η_d`. The transformed `B_k` is the detected mode.
pub fn attach_trusted_detector<T: Real>(
    cm: &CovarianceMatrix<T>,
    user: usize,
    efficiency: T,
    electronic_noise: T,
) -> Result<(CovarianceMatrix<T>, ModeMap, TrustedDetector<T>)> {
    let det = TrustedDetector::new(efficiency, electronic_noise)?;
    let b = ModeRole::ChannelOutput(user).label();
    let bi = cm.index_of(&b).ok_or_else(|| {
        Error::Validation(format!("{b} is not a channel-output mode of this state"))
    })?;
    let d1 = ModeRole::DetectorAncilla1(user).label();
    let d2 = ModeRole::DetectorAncilla2(user).label();
    let ancilla = CovarianceMatrix::two_mode_squeezed(&d1, &d2, det.ancilla_variance)?;
    let joint = cm.direct_sum(&ancilla)?;
    let n = joint.dim_modes();
    let s = beamsplitter(n, bi, n - 2, det.efficiency)?;
    let out = joint.transform(&s)?;
    let map = ModeMap::from_labels(out.labels())?;
    Ok((out, map, det))
}

/// Receiver noise of an assisting user whose detector is not trusted: the
/// detector loss and electronic noise act as a plain Gaussian channel.
pub fn untrusted_detector_map<T: Real>(
    cm: &CovarianceMatrix<T>,
    user: usize,
    efficiency: T,
    electronic_noise: T,
) -> Result<CovarianceMatrix<T>> {
    let b = ModeRole::ChannelOutput(user).label();
    crate::gaussian::attenuate(
        cm,
        &b,
        efficiency,
        T::one() - efficiency + electronic_noise,
    )
}

/// Per-quadrature classical model of one heterodyne outcome:
/// `y = gain·s + n`, `Var(y) = variance`, `Var(n) = noise_variance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeModel<T: Real = f64> {
    pub gain: T,
    pub noise_variance: T,
    pub variance: T,
}

/// Heterodyne outcome statistics of user `k`, derived from the channel-output
/// covariance matrix: `Var(y) = (η_d W_k + 1 − η_d + ν_el + 1)/2` and
/// `Cov(y, s) = √(η_d η_k / 2)·V_M`.
pub fn measured_outcome_model<T: Real>(
    cm: &CovarianceMatrix<T>,
    user: usize,
    efficiency: T,
    electronic_noise: T,
) -> Result<OutcomeModel<T>> {
    if !(efficiency > T::zero() && efficiency <= T::one()) {
        return Err(Error::Domain(format!("detector efficiency {efficiency} outside (0, 1]")));
    }
    if !(electronic_noise >= T::zero()) {
        return Err(Error::Domain(format!("electronic noise {electronic_noise} is negative")));
    }
    let b = ModeRole::ChannelOutput(user).label();
    let aa = cm.block("A", "A")?[(0, 0)];
    let ab = cm.block("A", &b)?[(0, 0)];
    let w = cm.block(&b, &b)?[(0, 0)];
    let half = T::lit(0.5);
    let vm = aa - T::one();
    let gain = if vm > T::zero() {
        (efficiency * half).sqrt() * ab / (aa * aa - T::one()).sqrt()
    } else {
        T::zero()
    };
    let variance = (efficiency * w + T::one() - efficiency + electronic_noise + T::one()) * half;
    Ok(OutcomeModel {
        gain,
        noise_variance: variance - gain * gain * vm,
        variance,
    })
}

/// Joint covariance of `(s, y_1, …, y_M)` for one quadrature: Alice's symbol
/// followed by every user's heterodyne outcome. Both quadratures share it.
pub fn outcome_covariance<T: Real>(params: &NetworkParams<T>) -> Result<DMatrix<T>> {
    let cm = build_channel_output_cm(params)?;
    outcome_covariance_of(&cm, params)
}

pub(crate) fn outcome_covariance_of<T: Real>(
    cm: &CovarianceMatrix<T>,
    params: &NetworkParams<T>,
) -> Result<DMatrix<T>> {
    let m = params.num_users();
    let eta_d = params.detector_efficiency;
    let vm = params.modulation_variance;
    let mut c = DMatrix::zeros(m + 1, m + 1);
    c[(0, 0)] = vm;
    for (k, u) in params.users.iter().enumerate() {
        let model = measured_outcome_model(cm, k, eta_d, u.trusted_noise)?;
        c[(0, k + 1)] = model.gain * vm;
        c[(k + 1, 0)] = model.gain * vm;
        c[(k + 1, k + 1)] = model.variance;
        let bk = ModeRole::ChannelOutput(k).label();
        for j in (k + 1)..m {
            let bj = ModeRole::ChannelOutput(j).label();
            let cross = eta_d * cm.block(&bk, &bj)?[(0, 0)] * T::lit(0.5);
            c[(k + 1, j + 1)] = cross;
            c[(j + 1, k + 1)] = cross;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::von_neumann_entropy;

    fn params(vm: f64, links: &[(f64, f64)]) -> NetworkParams<f64> {
        NetworkParams {
            modulation_variance: vm,
            users: links.iter().map(|&(e, x)| UserLink::new(e, x, 0.0)).collect(),
            detector_efficiency: 1.0,
            beta: 0.95,
            block_size: 1_000_000_000,
            eps_pe: 1e-10,
            splitter_consistency: true,
        }
    }

    #[test]
    fn lossless_single_user_is_epr() {
        let cm = build_channel_output_cm(&params(5.0, &[(1.0, 0.0)])).unwrap();
        let epr = CovarianceMatrix::two_mode_squeezed("A", "B1", 6.0).unwrap();
        assert!((cm.matrix() - epr.matrix()).norm() < 1e-13);
        assert!(von_neumann_entropy(&cm).unwrap().abs() < 1e-9);
    }

    #[test]
    fn two_user_cross_block() {
        let cm = build_channel_output_cm(&params(5.0, &[(0.5, 0.0), (0.5, 0.0)])).unwrap();
        let cross = cm.block("B1", "B2").unwrap();
        assert!((cross[(0, 0)] - 2.5).abs() < 1e-14 && (cross[(1, 1)] - 2.5).abs() < 1e-14);
        assert_eq!(cross[(0, 1)], 0.0);
    }

    #[test]
    fn excess_noise_only_moves_own_diagonal() {
        let base = build_channel_output_cm(&params(5.0, &[(0.3, 0.01), (0.2, 0.02)])).unwrap();
        let noisy = build_channel_output_cm(&params(5.0, &[(0.3, 0.01), (0.2, 0.05)])).unwrap();
        let diff = noisy.matrix() - base.matrix();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j && i >= 4 { 0.03 } else { 0.0 };
                assert!((diff[(i, j)] - expect).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn splitter_consistency_guard() {
        let mut p = params(5.0, &[(0.6, 0.0), (0.6, 0.0)]);
        assert!(p.validate().is_err());
        p.splitter_consistency = false;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn detector_with_no_noise_and_unit_efficiency_is_identity() {
        let cm = build_channel_output_cm(&params(5.0, &[(0.4, 0.01)])).unwrap();
        let (out, map, det) = attach_trusted_detector(&cm, 0, 1.0, 0.0).unwrap();
        assert!(!det.detuned);
        assert_eq!(map.index(ModeRole::DetectorAncilla2(0)), Some(3));
        let reduced = out.reduce(&["A", "B1"]).unwrap();
        assert!((reduced.matrix() - cm.matrix()).norm() < 1e-14);
        // ancilla decoupled vacuum
        let anc = out.reduce(&["D1_1", "D2_1"]).unwrap();
        assert!((anc.matrix() - DMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn detected_vacuum_variance() {
        let vac = CovarianceMatrix::<f64>::vacuum(vec!["B1"]).unwrap();
        let (out, _, _) = attach_trusted_detector(&vac, 0, 0.68, 0.06).unwrap();
        assert!((out.block("B1", "B1").unwrap()[(0, 0)] - 1.06).abs() < 1e-14);
    }

    #[test]
    fn unit_efficiency_with_noise_is_detuned() {
        let vac = CovarianceMatrix::<f64>::vacuum(vec!["B1"]).unwrap();
        let (out, _, det) = attach_trusted_detector(&vac, 0, 1.0, 0.05).unwrap();
        assert!(det.detuned);
        assert!((out.block("B1", "B1").unwrap()[(0, 0)] - 1.05).abs() < 1e-9);
    }

    #[test]
    fn detector_argument_errors() {
        let vac = CovarianceMatrix::<f64>::vacuum(vec!["B1"]).unwrap();
        assert!(attach_trusted_detector(&vac, 0, 0.0, 0.0).is_err());
        assert!(attach_trusted_detector(&vac, 0, 0.5, -0.1).is_err());
        assert!(attach_trusted_detector(&vac, 1, 0.5, 0.0).is_err());
    }

    #[test]
    fn outcome_model_plug_in() {
        let cm = build_channel_output_cm(&params(5.0, &[(1.0, 0.0)])).unwrap();
        let m = measured_outcome_model(&cm, 0, 1.0, 0.0).unwrap();
        assert!((m.variance - 3.5).abs() < 1e-14);
        assert!((m.gain * 5.0 - 5.0 / 2f64.sqrt()).abs() < 1e-13);
        assert!((m.noise_variance - 1.0).abs() < 1e-13);
    }

    #[test]
    fn outcome_model_without_signal() {
        let cm = build_channel_output_cm(&params(5.0, &[(0.0, 0.0)])).unwrap();
        let m = measured_outcome_model(&cm, 0, 0.68, 0.06).unwrap();
        assert_eq!(m.gain, 0.0);
        assert!((m.variance - 2.06 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn mode_labels_round_trip() {
        for r in [
            ModeRole::Alice,
            ModeRole::ChannelOutput(3),
            ModeRole::DetectorAncilla1(0),
            ModeRole::DetectorAncilla2(11),
        ] {
            assert_eq!(ModeRole::parse(&r.label()), Some(r));
        }
        assert_eq!(ModeRole::parse("B0"), None);
        assert_eq!(ModeRole::parse("E"), None);
    }
}
