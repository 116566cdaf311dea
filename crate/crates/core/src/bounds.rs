//! False-alarm guarantees for the GCUSUM family.
//!
//! With `q = q(theta)`, the rate functions
//!
//! ```text
//! u1 = (1 - q/2) ln((2 - q)/(1 - q)) - ln 2
//! u2 = (1 + q)/2 ln((1 + q)/q) - ln 2
//! ```
//!
//! control how fast the pooled bit fraction leaves a band around `1 - q`.
//! When `MN > ln 2 / u*` (with `u* = min(u1, u2)`), any threshold
//!
//! ```text
//! h >= N (kappa / (1 - 2 exp(-u* M N)) + M) ln(1 / eps*),   eps* = min(q, 1 - q) / 2
//! ```
//!
//! guarantees an expected false-alarm period of at least `kappa`.

use crate::error::{Error, Result};

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError { name: "q", value: q })
    }
}

/// `(u1, u2)` for `q` in `(0, 1)`.
pub fn rate_functions(q: f64) -> Result<(f64, f64)> {
    check_q(q)?;
    let ln2 = core::f64::consts::LN_2;
    let u1 = (1.0 - 0.5 * q) * libm::log((2.0 - q) / (1.0 - q)) - ln2;
    let u2 = 0.5 * (1.0 + q) * libm::log((1.0 + q) / q) - ln2;
    Ok((u1, u2))
}

/// `min(q, 1 - q) / 2`.
pub fn eps_star(q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(0.5 * q.min(1.0 - q))
}

/// `(eps1, eps2) = ((1 - q)/2, q/2)`: half-widths of the band around `1 - q`.
pub fn band_half_widths(q: f64) -> Result<(f64, f64)> {
    check_q(q)?;
    Ok((0.5 * (1.0 - q), 0.5 * q))
}

/// Smallest `MN` for which the guarantee applies (exclusive): `ln 2 / u*`.
pub fn mn_critical(q: f64) -> Result<f64> {
    let (u1, u2) = rate_functions(q)?;
    Ok(core::f64::consts::LN_2 / u1.min(u2))
}

/// `max(0, 1 - 2 exp(-u* M N))`, computed as `-expm1(ln 2 - u* M N)`.
pub fn theorem1_probability_floor(m: usize, n: usize, q: f64) -> Result<f64> {
    let (u1, u2) = rate_functions(q)?;
    let x = core::f64::consts::LN_2 - u1.min(u2) * (m as f64) * (n as f64);
    Ok((-libm::expm1(x)).max(0.0))
}

/// Minimal threshold for a false-alarm period of at least `kappa`, with a
/// feasibility flag. Infeasible `MN` is an error.
pub fn threshold_for_kappa(kappa: f64, m: usize, n: usize, q: f64) -> Result<(f64, bool)> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::DomainError { name: "kappa", value: kappa });
    }
    let critical = mn_critical(q)?;
    let mn = (m as f64) * (n as f64);
    if mn <= critical {
        return Err(Error::InfeasibleMN { mn, critical });
    }
    let floor = theorem1_probability_floor(m, n, q)?;
    let h = n as f64 * (kappa / floor + m as f64) * libm::log(1.0 / eps_star(q)?);
    Ok((h, true))
}

/// How the `q` of a certificate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMode {
    /// `q` computed from the true `theta`.
    Benchmark,
    /// `q` estimated from secure-phase bits; the guarantee is heuristic.
    Deployment,
}

impl CertificateMode {
    pub fn label(self) -> &'static str {
        match self {
            CertificateMode::Benchmark => "benchmark",
            CertificateMode::Deployment => "deployment (heuristic)",
        }
    }
}

/// Every quantity behind the false-alarm guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalseAlarmCertificate {
    pub mode: CertificateMode,
    pub q: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps_star: f64,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub upsilon_star: f64,
    pub mn_min: f64,
    pub probability_floor: f64,
    pub kappa: f64,
    pub m: usize,
    pub n: usize,
    pub h_min: f64,
}

impl FalseAlarmCertificate {
    pub fn new(mode: CertificateMode, q: f64, kappa: f64, m: usize, n: usize) -> Result<Self> {
        let (u1, u2) = rate_functions(q)?;
        let (eps1, eps2) = band_half_widths(q)?;
        let (h_min, _) = threshold_for_kappa(kappa, m, n, q)?;
        Ok(Self {
            mode,
            q,
            eps1,
            eps2,
            eps_star: eps_star(q)?,
            upsilon1: u1,
            upsilon2: u2,
            upsilon_star: u1.min(u2),
            mn_min: mn_critical(q)?,
            probability_floor: theorem1_probability_floor(m, n, q)?,
            kappa,
            m,
            n,
            h_min,
        })
    }

    /// Plug-in certificate from `ones` among `total` secure-phase bits.
    pub fn from_secure_bits(ones: u64, total: u64, kappa: f64, m: usize, n: usize) -> Result<Self> {
        let q = 1.0 - ones as f64 / total as f64;
        Self::new(CertificateMode::Deployment, q, kappa, m, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn half_q_rates() {
        let (u1, u2) = rate_functions(0.5).unwrap();
        let expect = 0.75 * libm::log(3.0) - core::f64::consts::LN_2;
        assert_abs_diff_eq!(u1, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(u2, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(u1, 0.130_812, epsilon = 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(rate_functions(0.0).is_err());
        assert!(rate_functions(1.0).is_err());
        assert!(eps_star(f64::NAN).is_err());
        assert!(rate_functions(1e-12).unwrap().1 > 10.0);
    }

    #[test]
    fn paper_scale_threshold() {
        let (h, feasible) = threshold_for_kappa(1000.0, 5000, 12, 0.5).unwrap();
        assert!(feasible);
        assert_relative_eq!(h, 12.0 * 6000.0 * libm::log(4.0), max_relative = 1e-12);
        assert_abs_diff_eq!(h, 99_813.1, epsilon = 0.1);
        assert_eq!(theorem1_probability_floor(5000, 12, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn infeasible_boundary() {
        let crit = mn_critical(0.5).unwrap();
        let mn = libm::floor(crit) as usize;
        assert!(matches!(threshold_for_kappa(10.0, mn, 1, 0.5), Err(Error::InfeasibleMN { .. })));
        assert!(threshold_for_kappa(10.0, mn + 1, 1, 0.5).is_ok());
        assert_eq!(theorem1_probability_floor(mn, 1, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn small_kappa_limit() {
        let (h, _) = threshold_for_kappa(1e-12, 100, 3, 0.3).unwrap();
        assert_relative_eq!(h, 300.0 * libm::log(1.0 / 0.15), max_relative = 1e-9);
    }

    #[test]
    fn eps_star_is_symmetric() {
        for i in 1..128 {
            let q = i as f64 / 128.0;
            assert_eq!(eps_star(q).unwrap(), eps_star(1.0 - q).unwrap());
        }
    }
}
