//! Maximum-likelihood estimators for `theta` and the attack magnitudes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::signal::BitHistory;
use crate::topology::NetworkTopology;

/// Bit sums over the secure phase and the first `K` monitoring samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SumStatistics {
    /// Secure-phase bit sum over all sensors.
    pub lambda_m: u64,
    /// Monitoring bit sum over all sensors.
    pub lambda_n: u64,
    /// Monitoring bit sum over secure sensors.
    pub lambda_s: u64,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub n_s: usize,
}

impl SumStatistics {
    pub fn from_history(history: &BitHistory, topology: &NetworkTopology, k: usize) -> Self {
        let n = topology.n_sensors();
        let m = history.secure_len();
        let mut s = Self { m, k, n, n_s: topology.n_secure(), ..Self::default() };
        for t in 1..=m {
            s.lambda_m += history.secure_row(t).iter().map(|&b| b as u64).sum::<u64>();
        }
        for t in 1..=k {
            for (j, &b) in history.monitoring_row(t).iter().enumerate() {
                s.lambda_n += b as u64;
                if topology.is_secure(j) {
                    s.lambda_s += b as u64;
                }
            }
        }
        s
    }

    pub fn is_consistent(&self) -> bool {
        self.lambda_s <= self.lambda_n
            && self.lambda_m <= (self.m * self.n) as u64
            && self.lambda_n <= (self.k * self.n) as u64
            && self.lambda_s <= (self.k * self.n_s) as u64
    }

    /// Fraction of ones among all bits, `(lambda_M + lambda_N) / ((M + K) N)`.
    pub fn unattacked_fraction(&self) -> f64 {
        (self.lambda_m + self.lambda_n) as f64 / ((self.m + self.k) * self.n) as f64
    }

    /// Fraction of ones among attack-free bits, `(lambda_M + lambda_S) / (MN + K N_S)`.
    pub fn secure_fraction(&self) -> f64 {
        (self.lambda_m + self.lambda_s) as f64 / (self.m * self.n + self.k * self.n_s) as f64
    }
}

fn nondegenerate(fraction: f64) -> Result<f64> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(fraction)
    } else {
        Err(Error::DegenerateBits { fraction })
    }
}

/// `theta` maximizing the attack-free likelihood: `tau - F^{-1}(1 - fraction)`.
pub fn theta_mle_unattacked(stats: &SumStatistics, noise: &NoiseModel, tau: f64) -> Result<f64> {
    let f = nondegenerate(stats.unattacked_fraction())?;
    Ok(tau - noise.quantile(1.0 - f))
}

/// `theta` estimated from attack-free bits only (secure phase and secure sensors).
pub fn theta_hat_a(stats: &SumStatistics, noise: &NoiseModel, tau: f64) -> Result<f64> {
    let f = nondegenerate(stats.secure_fraction())?;
    Ok(tau - noise.quantile(1.0 - f))
}

/// Unconstrained attack magnitude `tau - theta_a - F^{-1}(1 - window mean)`.
pub fn mu_tilde(theta_a: f64, window_bit_mean: f64, noise: &NoiseModel, tau: f64) -> Result<f64> {
    let w = nondegenerate(window_bit_mean)?;
    Ok(tau - theta_a - noise.quantile(1.0 - w))
}

/// Attack magnitude clamped to the floor `b`.
pub fn mu_hat(mu_tilde: f64, b: f64) -> f64 {
    mu_tilde.max(b)
}

/// `zeros ln p0 + ones ln(1 - p0)`, skipping empty terms so that `p0`
/// in `{0, 1}` is allowed when the matching count is zero.
pub fn bernoulli_loglike(zeros: f64, ones: f64, p0: f64, p1: f64) -> f64 {
    let mut s = 0.0;
    if zeros > 0.0 {
        s += zeros * libm::log(p0);
    }
    if ones > 0.0 {
        s += ones * libm::log(p1);
    }
    s
}

fn q_pair(noise: &NoiseModel, x: f64) -> (f64, f64) {
    (noise.cdf(x), noise.sf(x))
}

/// Attack-free log-likelihood of every bit in `history`.
pub fn loglike_f0(history: &BitHistory, theta: f64, noise: &NoiseModel, tau: f64) -> f64 {
    let (mut zeros, mut ones) = (0u64, 0u64);
    for t in 1..=history.secure_len() {
        count_row(history.secure_row(t), &mut zeros, &mut ones);
    }
    for t in 1..=history.monitoring_len() {
        count_row(history.monitoring_row(t), &mut zeros, &mut ones);
    }
    let (p0, p1) = q_pair(noise, tau - theta);
    bernoulli_loglike(zeros as f64, ones as f64, p0, p1)
}

fn count_row(row: &[u8], zeros: &mut u64, ones: &mut u64) {
    for &b in row {
        if b == 1 {
            *ones += 1;
        } else {
            *zeros += 1;
        }
    }
}

/// Log-likelihood when insecure sensors are shifted by `mu[j]` from
/// monitoring time `k` onward. `mu` has one entry per sensor; entries of
/// secure sensors are ignored.
pub fn loglike_f1(
    history: &BitHistory,
    topology: &NetworkTopology,
    theta: f64,
    mu: &[f64],
    k: usize,
    noise: &NoiseModel,
    tau: f64,
) -> f64 {
    let counts = AttackCounts::new(history, topology, k);
    counts.f1(theta, mu, noise, tau)
}

/// Zero/one counts feeding the attacked likelihood for a fixed candidate `k`.
struct AttackCounts {
    base_zeros: f64,
    base_ones: f64,
    insecure: Vec<usize>,
    window_ones: Vec<f64>,
    window_len: f64,
}

impl AttackCounts {
    fn new(history: &BitHistory, topology: &NetworkTopology, k: usize) -> Self {
        let n = topology.n_sensors();
        let big_k = history.monitoring_len();
        let (mut zeros, mut ones) = (0u64, 0u64);
        for t in 1..=history.secure_len() {
            count_row(history.secure_row(t), &mut zeros, &mut ones);
        }
        let mut window_ones = vec![0u64; n];
        for t in 1..=big_k {
            for (j, &b) in history.monitoring_row(t).iter().enumerate() {
                if topology.is_secure(j) || t < k {
                    if b == 1 {
                        ones += 1;
                    } else {
                        zeros += 1;
                    }
                } else {
                    window_ones[j] += b as u64;
                }
            }
        }
        let insecure: Vec<usize> = topology.insecure_sensors().collect();
        Self {
            base_zeros: zeros as f64,
            base_ones: ones as f64,
            window_ones: insecure.iter().map(|&j| window_ones[j] as f64).collect(),
            insecure,
            window_len: (big_k + 1).saturating_sub(k) as f64,
        }
    }

    fn f1(&self, theta: f64, mu: &[f64], noise: &NoiseModel, tau: f64) -> f64 {
        let (p0, p1) = q_pair(noise, tau - theta);
        let mut s = bernoulli_loglike(self.base_zeros, self.base_ones, p0, p1);
        for (i, &j) in self.insecure.iter().enumerate() {
            let c = self.window_ones[i];
            let (a0, a1) = q_pair(noise, tau - theta - mu[j]);
            s += bernoulli_loglike(self.window_len - c, c, a0, a1);
        }
        s
    }

    /// Best `mu_j >= b` for fixed `theta`: the window likelihood is unimodal
    /// in `mu_j`, so the constrained optimum is the clamped stationary point.
    fn best_mu(&self, i: usize, theta: f64, b: f64, noise: &NoiseModel, tau: f64) -> f64 {
        let c = self.window_ones[i];
        if self.window_len == 0.0 || c == 0.0 {
            return b;
        }
        if c == self.window_len {
            return f64::INFINITY;
        }
        let stationary = tau - theta - noise.quantile(1.0 - c / self.window_len);
        stationary.max(b)
    }

    fn profile(&self, theta: f64, b: f64, n: usize, noise: &NoiseModel, tau: f64) -> (f64, Vec<f64>) {
        let mut mu = vec![0.0; n];
        for (i, &j) in self.insecure.iter().enumerate() {
            mu[j] = self.best_mu(i, theta, b, noise, tau);
        }
        (self.f1(theta, &mu, noise, tau), mu)
    }
}

/// Numerical maximizer of the attacked likelihood over `theta` and `mu_j >= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub theta: f64,
    /// One entry per sensor; secure sensors carry 0. May be `+inf` when an
    /// insecure sensor reported only ones after `k`.
    pub mu: Vec<f64>,
    pub loglike: f64,
}

/// Largest instance accepted by [`mle_attack_oracle`].
pub const ORACLE_MAX_SENSORS: usize = 4;
pub const ORACLE_MAX_SAMPLES: usize = 50;

/// Exact constrained MLE at tiny scale, for testing the closed-form
/// approximations.
///
/// For fixed `theta` each `mu_j` has a closed-form constrained optimum, so
/// the search profiles `mu` out and scans `theta` over `tau +/- 6 sigma` on
/// a 400-point grid, then refines the best cell by golden-section search.
pub fn mle_attack_oracle(
    history: &BitHistory,
    topology: &NetworkTopology,
    noise: &NoiseModel,
    tau: f64,
    b: f64,
    k: usize,
) -> Result<OracleEstimate> {
    let n = topology.n_sensors();
    let len = history.secure_len() + history.monitoring_len();
    if n > ORACLE_MAX_SENSORS || len > ORACLE_MAX_SAMPLES {
        return Err(Error::OracleScaleExceeded { n, len });
    }
    if history.n_sensors() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: history.n_sensors() });
    }
    let counts = AttackCounts::new(history, topology, k);
    let sigma = noise.std_dev();
    let lo = tau - 6.0 * sigma;
    let hi = tau + 6.0 * sigma;
    const GRID: usize = 400;
    let step = (hi - lo) / (GRID - 1) as f64;

    let value = |theta: f64| counts.profile(theta, b, n, noise, tau).0;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..GRID {
        let v = value(lo + step * i as f64);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut c = (lo + step * (best_i + 1) as f64).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let (mut f1, mut f2) = (value(x1), value(x2));
    for _ in 0..200 {
        if c - a < 1e-13 {
            break;
        }
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = value(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = value(x2);
        }
    }
    let mut theta = 0.5 * (a + c);
    let (mut loglike, mut mu) = counts.profile(theta, b, n, noise, tau);
    let grid_theta = lo + step * best_i as f64;
    if best_v > loglike {
        theta = grid_theta;
        (loglike, mu) = counts.profile(theta, b, n, noise, tau);
    }
    Ok(OracleEstimate { theta, mu, loglike })
}
