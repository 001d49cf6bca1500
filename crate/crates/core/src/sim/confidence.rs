//! Confidence intervals for the per-link estimators and the worst-case
//! corner consumed by the finite-size key rate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::network::UserLink;
use crate::scalar::Real;

/// `Φ⁻¹(1 − 5·10⁻¹¹)`, the one-sided quantile for `ε_PE = 10⁻¹⁰`
/// (40-digit inverse-erf evaluation).
pub const Z_EPS_PE_1E_10: f64 = 6.466_951_087_240_516;

/// One-sided standard-normal quantile at `eps_pe / 2`.
pub fn upper_quantile(eps_pe: f64) -> Result<f64> {
    if !(eps_pe > 0.0 && eps_pe < 0.5) {
        return Err(Error::Domain(format!("eps_pe {eps_pe} outside (0, 0.5)")));
    }
    if eps_pe == 1e-10 {
        return Ok(Z_EPS_PE_1E_10);
    }
    let normal = Normal::standard();
    Ok(-normal.inverse_cdf(eps_pe / 2.0))
}

/// Receiver calibration assumed known during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T = f64> {
    pub modulation_variance: T,
    pub detector_efficiency: T,
    pub electronic_noise: T,
}

/// Transmittance implied by an outcome gain `t = √(η η_d / 2)`.
pub fn transmittance_from_gain<T: Real>(gain: T, detector_efficiency: T) -> T {
    T::lit(2.0) * gain * gain / detector_efficiency
}

/// Excess noise implied by the residual variance `σ² = (2 + η_d ε + ν_el)/2`.
pub fn excess_noise_from_residual<T: Real>(sigma2: T, cal: &Calibration<T>) -> T {
    (T::lit(2.0) * sigma2 - T::lit(2.0) - cal.electronic_noise) / cal.detector_efficiency
}

/// Model-expected `(t, σ²)` for a link.
pub fn expected_statistics<T: Real>(link: &UserLink<T>, detector_efficiency: T) -> (T, T) {
    let half = T::lit(0.5);
    let t = (link.transmittance * detector_efficiency * half).sqrt();
    let sigma2 = (T::lit(2.0) + detector_efficiency * link.excess_noise + link.trusted_noise) * half;
    (t, sigma2)
}

/// Worst-case corner `(η_min, ε_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCorner<T = f64> {
    pub transmittance: T,
    pub excess_noise: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion<T = f64> {
    pub z: f64,
    pub gain_half_width: T,
    pub sigma2_half_width: T,
    pub transmittance: (T, T),
    pub excess_noise: (T, T),
    pub worst_case: WorstCorner<T>,
}

/// Half-widths `Δt = z√(σ²/(n V_M))`, `Δσ² = z σ² √(2/n)`; the corner is
/// `(t − Δt, σ² + Δσ²)` mapped back to `(η_min, ε_max)`.
pub fn confidence_region<T: Real>(
    gain: T,
    sigma2: T,
    n: u64,
    eps_pe: f64,
    cal: &Calibration<T>,
) -> Result<ConfidenceRegion<T>> {
    confidence_region_with_z(gain, sigma2, n, upper_quantile(eps_pe)?, cal)
}

/// As [`confidence_region`] with an explicit quantile.
pub fn confidence_region_with_z<T: Real>(
    gain: T,
    sigma2: T,
    n: u64,
    z: f64,
    cal: &Calibration<T>,
) -> Result<ConfidenceRegion<T>> {
    if n < 2 {
        return Err(Error::Domain(format!("confidence region needs n >= 2, got {n}")));
    }
    if !(cal.modulation_variance > T::zero()) {
        return Err(Error::Domain("confidence region needs V_M > 0".into()));
    }
    if !(sigma2 > T::zero()) {
        return Err(Error::Domain(format!("residual variance {sigma2} must be positive")));
    }
    let nf = T::from_u64(n).expect("block size representable");
    let zt = T::lit(z);
    let dt = zt * (sigma2 / (nf * cal.modulation_variance)).sqrt();
    let ds = zt * sigma2 * (T::lit(2.0) / nf).sqrt();
    let eta_d = cal.detector_efficiency;

    let t_lo = (gain - dt).max(T::zero());
    let eta_lo = transmittance_from_gain(t_lo, eta_d);
    let eta_hi = transmittance_from_gain(gain + dt, eta_d);
    let eps_lo = excess_noise_from_residual(sigma2 - ds, cal);
    let eps_hi = excess_noise_from_residual(sigma2 + ds, cal);
    Ok(ConfidenceRegion {
        z,
        gain_half_width: dt,
        sigma2_half_width: ds,
        transmittance: (eta_lo, eta_hi),
        excess_noise: (eps_lo, eps_hi),
        worst_case: WorstCorner {
            transmittance: eta_lo,
            excess_noise: eps_hi,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> Calibration<f64> {
        Calibration {
            modulation_variance: 5.04,
            detector_efficiency: 0.68,
            electronic_noise: 0.054,
        }
    }

    #[test]
    fn quantile_matches_high_precision_values() {
        // mpmath, sqrt(2)·erfinv(1 − eps_pe)
        assert_eq!(upper_quantile(1e-10).unwrap(), Z_EPS_PE_1E_10);
        assert!((upper_quantile(1e-3).unwrap() - 3.290_526_731_491_895).abs() < 1e-9);
        assert!((upper_quantile(0.05).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((upper_quantile(1.000_000_000_000_001e-10).unwrap() - Z_EPS_PE_1E_10).abs() < 1e-8);
        assert!(upper_quantile(0.0).is_err());
        assert!(upper_quantile(0.5).is_err());
    }

    #[test]
    fn corner_converges_to_point_estimate() {
        let link = UserLink::new(0.13, 0.00417, 0.054);
        let (t, s2) = expected_statistics(&link, 0.68);
        let r = confidence_region(t, s2, u64::MAX / 4, 1e-10, &cal()).unwrap();
        assert!((r.worst_case.transmittance - 0.13).abs() < 1e-8);
        assert!((r.worst_case.excess_noise - 0.00417).abs() < 3e-8);
    }

    #[test]
    fn corner_is_inside_intervals() {
        let link = UserLink::new(0.11, 0.005, 0.06);
        let (t, s2) = expected_statistics(&link, 0.68);
        let r = confidence_region(t, s2, 1_000_000, 1e-10, &cal()).unwrap();
        assert!(r.transmittance.0 <= 0.11 && 0.11 <= r.transmittance.1);
        assert!(r.excess_noise.0 <= 0.005 && 0.005 <= r.excess_noise.1);
        assert_eq!(r.worst_case.transmittance, r.transmittance.0);
        assert_eq!(r.worst_case.excess_noise, r.excess_noise.1);
    }

    #[test]
    fn argument_guards() {
        assert!(confidence_region(0.2, 1.0, 1, 1e-10, &cal()).is_err());
        assert!(confidence_region(0.2, 1.0, 100, 0.7, &cal()).is_err());
        let mut c = cal();
        c.modulation_variance = 0.0;
        assert!(confidence_region(0.2, 1.0, 100, 1e-10, &c).is_err());
    }
}
