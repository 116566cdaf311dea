//! Centralized detectors: the oracle CUSUM with known parameters, the
//! generalized CUSUM (GCUSUM) and the alternative statistic.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::topology::NetworkTopology;

/// One step of Page's recursion: `max(prev, 0) + increment`.
#[inline]
pub fn page_step(prev: f64, increment: f64) -> f64 {
    prev.max(0.0) + increment
}

/// CUSUM with the true `theta` and attack magnitudes.
#[derive(Debug, Clone)]
pub struct CusumOracle {
    insecure: Vec<usize>,
    // Log-likelihood ratio for bit 0 and bit 1, per insecure sensor.
    llr: Vec<[f64; 2]>,
    statistic: f64,
    h: f64,
    steps: usize,
    stopped_at: Option<usize>,
}

impl CusumOracle {
    /// `mu` has one entry per sensor (secure entries ignored).
    pub fn new(topology: &NetworkTopology, noise: &NoiseModel, theta: f64, mu: &[f64], tau: f64, h: f64) -> Self {
        let insecure: Vec<usize> = topology.insecure_sensors().collect();
        let q0 = noise.cdf(tau - theta);
        let q0c = noise.sf(tau - theta);
        let llr = insecure
            .iter()
            .map(|&j| {
                let q1 = noise.cdf(tau - theta - mu[j]);
                let q1c = noise.sf(tau - theta - mu[j]);
                [libm::log(q1 / q0), libm::log(q1c / q0c)]
            })
            .collect();
        Self { insecure, llr, statistic: 0.0, h, steps: 0, stopped_at: None }
    }

    /// Sum of the per-sensor log-likelihood ratios of one time step.
    pub fn increment(&self, bits: &[u8]) -> f64 {
        self.insecure
            .iter()
            .zip(&self.llr)
            .map(|(&j, l)| l[bits[j] as usize])
            .sum()
    }

    /// Feeds the bits of the next monitoring time; returns the statistic and
    /// whether it has reached `h` at this or an earlier step.
    pub fn step(&mut self, bits: &[u8]) -> (f64, bool) {
        self.steps += 1;
        self.statistic = page_step(self.statistic, self.increment(bits));
        if self.stopped_at.is_none() && self.statistic >= self.h {
            self.stopped_at = Some(self.steps);
        }
        (self.statistic, self.stopped_at.is_some())
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn stopping_time(&self) -> Option<usize> {
        self.stopped_at
    }
}

/// The four blocks of `Lambda_G^{(k,K)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcusumBlocks {
    /// Secure-phase bits.
    pub eta1: f64,
    /// Monitoring bits of secure sensors.
    pub eta2: f64,
    /// Insecure sensors before the candidate attack time.
    pub eta3: f64,
    /// Insecure sensors from the candidate attack time on.
    pub eta4: f64,
}

impl GcusumBlocks {
    pub fn total(&self) -> f64 {
        self.eta1 + self.eta2 + self.eta3 + self.eta4
    }
}

/// Statistics after one monitoring step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcusumOutput {
    pub k: usize,
    /// `max_k Lambda_G^{(k,K)}`.
    pub h_g: f64,
    /// Smallest maximizing candidate attack time.
    pub k_hat: usize,
    /// `eta1 + eta2 + max_k eta4`.
    pub h_a: f64,
    pub stopped_g: bool,
    pub stopped_a: bool,
}

/// Quantities shared by every candidate `k` at the current `K`.
#[derive(Debug, Clone, Copy)]
struct StepConstants {
    g1: f64,
    g2: f64,
    eta1: f64,
    eta2: f64,
    ln_fu: f64,
    ln_1m_fu: f64,
    zeta_b: f64,
    ln_zeta_b: f64,
    ln_1m_zeta_b: f64,
}

/// Centralized GCUSUM state: bit counts with prefix sums so that each
/// `Lambda_G^{(k,K)}` costs `O(N_A)`.
///
/// The plug-in estimates are `theta_u` from all bits, `theta_a` from
/// attack-free bits and `mu_j = max(mu~_j, b)` from the exact window mean
/// of sensor `j` over `k..=K`. A window of all zeros or all ones is handled
/// as the limit of the supremum over `mu_j`.
#[derive(Debug, Clone)]
pub struct GcusumSnapshot {
    n: usize,
    n_s: usize,
    insecure: Vec<usize>,
    secure_mask: Vec<bool>,
    noise: NoiseModel,
    b: f64,
    h: f64,
    m: usize,
    lambda_m: u64,
    k: usize,
    lambda_n: u64,
    lambda_s: u64,
    // prefix[t * n_a + a]: ones of insecure sensor a over monitoring times 1..=t.
    prefix: Vec<u32>,
    // prefix_all[t]: ones over all insecure sensors, times 1..=t.
    prefix_all: Vec<u64>,
    // xlnx[i] = i ln i.
    xlnx: Vec<f64>,
    stopped_g: Option<usize>,
    stopped_a: Option<usize>,
}

impl GcusumSnapshot {
    pub fn new(topology: &NetworkTopology, noise: NoiseModel, b: f64, h: f64) -> Self {
        let insecure: Vec<usize> = topology.insecure_sensors().collect();
        let n_a = insecure.len();
        Self {
            n: topology.n_sensors(),
            n_s: topology.n_secure(),
            insecure,
            secure_mask: topology.secure_mask().to_vec(),
            noise,
            b,
            h,
            m: 0,
            lambda_m: 0,
            k: 0,
            lambda_n: 0,
            lambda_s: 0,
            prefix: vec![0; n_a],
            prefix_all: vec![0],
            xlnx: vec![0.0],
            stopped_g: None,
            stopped_a: None,
        }
    }

    pub fn n_insecure(&self) -> usize {
        self.insecure.len()
    }

    /// Current monitoring time `K`.
    pub fn time(&self) -> usize {
        self.k
    }

    pub fn secure_len(&self) -> usize {
        self.m
    }

    pub fn threshold(&self) -> f64 {
        self.h
    }

    pub fn sums(&self) -> crate::estimators::SumStatistics {
        crate::estimators::SumStatistics {
            lambda_m: self.lambda_m,
            lambda_n: self.lambda_n,
            lambda_s: self.lambda_s,
            m: self.m,
            k: self.k,
            n: self.n,
            n_s: self.n_s,
        }
    }

    /// Adds one secure-phase time step. Must precede all monitoring data.
    pub fn push_secure(&mut self, bits: &[u8]) -> Result<()> {
        self.check_len(bits)?;
        if self.k > 0 {
            return Err(Error::InvalidScenario {
                field: "secure_len",
                reason: "secure bits after monitoring started",
            });
        }
        self.m += 1;
        self.lambda_m += bits.iter().map(|&b| b as u64).sum::<u64>();
        Ok(())
    }

    /// Installs secure-phase totals directly (`m` steps with `lambda_m` ones).
    pub fn set_secure_sums(&mut self, m: usize, lambda_m: u64) {
        self.m = m;
        self.lambda_m = lambda_m;
    }

    fn check_len(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n {
            Err(Error::DimensionMismatch { expected: self.n, actual: bits.len() })
        } else {
            Ok(())
        }
    }

    /// Adds the bits of monitoring time `K + 1` without evaluating anything.
    pub fn push_monitoring(&mut self, bits: &[u8]) -> Result<()> {
        self.check_len(bits)?;
        self.k += 1;
        let n_a = self.insecure.len();
        let base = self.prefix.len() - n_a;
        let mut all = *self.prefix_all.last().unwrap_or(&0);
        for (a, &j) in self.insecure.iter().enumerate() {
            let v = self.prefix[base + a] + bits[j] as u32;
            self.prefix.push(v);
            all += bits[j] as u64;
        }
        self.prefix_all.push(all);
        for (j, &bit) in bits.iter().enumerate() {
            self.lambda_n += bit as u64;
            if self.secure_mask[j] {
                self.lambda_s += bit as u64;
            }
        }
        let i = self.k as f64;
        self.xlnx.push(i * libm::log(i));
        Ok(())
    }

    /// Recomputes every count from raw rows and compares with the state.
    pub fn recount_matches(&self, secure_rows: &[&[u8]], monitoring_rows: &[&[u8]]) -> bool {
        if secure_rows.len() != self.m || monitoring_rows.len() != self.k {
            return false;
        }
        let lm: u64 = secure_rows.iter().flat_map(|r| r.iter()).map(|&b| b as u64).sum();
        let mut ln = 0u64;
        let mut ls = 0u64;
        let n_a = self.insecure.len();
        let mut run = vec![0u32; n_a];
        for (t, row) in monitoring_rows.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                ln += b as u64;
                if self.secure_mask[j] {
                    ls += b as u64;
                }
            }
            for (a, &j) in self.insecure.iter().enumerate() {
                run[a] += row[j] as u32;
                if self.prefix[(t + 1) * n_a + a] != run[a] {
                    return false;
                }
            }
        }
        lm == self.lambda_m && ln == self.lambda_n && ls == self.lambda_s
    }

    fn constants(&self) -> Result<StepConstants> {
        let n = self.n as f64;
        let mn = self.m as f64 * n;
        let k = self.k as f64;
        let lm = self.lambda_m as f64;
        let ls = self.lambda_s as f64;
        let fu = (lm + self.lambda_n as f64) / ((self.m + self.k) as f64 * n);
        let fa = (lm + ls) / (mn + k * self.n_s as f64);
        for f in [fu, fa] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::DegenerateBits { fraction: f });
            }
        }
        let g1 = libm::log((1.0 - fa) / (1.0 - fu));
        let g2 = libm::log(fa / fu);
        let eta1 = (mn - lm) * g1 + lm * g2;
        let eta2 = (k * self.n_s as f64 - ls) * g1 + ls * g2;
        // Bit-0 probability under attack when the clamp mu = b binds.
        let zeta_b = self.noise.cdf(self.noise.quantile(1.0 - fa) - self.b);
        Ok(StepConstants {
            g1,
            g2,
            eta1,
            eta2,
            ln_fu: libm::log(fu),
            ln_1m_fu: libm::log(1.0 - fu),
            zeta_b,
            ln_zeta_b: libm::log(zeta_b),
            ln_1m_zeta_b: libm::log(1.0 - zeta_b),
        })
    }

    #[inline]
    fn eta3(&self, c: &StepConstants, k: usize) -> f64 {
        let pre = self.prefix_all[k - 1] as f64;
        (((k - 1) * self.insecure.len()) as f64 - pre) * c.g1 + pre * c.g2
    }

    #[inline]
    fn eta4(&self, c: &StepConstants, k: usize) -> f64 {
        let n_a = self.insecure.len();
        let big_k = self.k;
        let len = big_k - k + 1;
        let l = len as f64;
        let hi = &self.prefix[big_k * n_a..(big_k + 1) * n_a];
        let lo = &self.prefix[(k - 1) * n_a..k * n_a];
        let threshold = c.zeta_b * l;
        let mut s = 0.0;
        for (&h, &lw) in hi.iter().zip(lo) {
            let ones = (h - lw) as usize;
            let zeros = len - ones;
            if zeros as f64 <= threshold {
                // Unclamped: the attacked bit-0 probability is the window's zero fraction.
                s += self.xlnx[zeros] + self.xlnx[ones] - self.xlnx[len];
            } else {
                if zeros > 0 {
                    s += zeros as f64 * c.ln_zeta_b;
                }
                if ones > 0 {
                    s += ones as f64 * c.ln_1m_zeta_b;
                }
            }
        }
        let win_ones = (self.prefix_all[big_k] - self.prefix_all[k - 1]) as f64;
        let win_zeros = n_a as f64 * l - win_ones;
        if win_zeros > 0.0 {
            s -= win_zeros * c.ln_1m_fu;
        }
        if win_ones > 0.0 {
            s -= win_ones * c.ln_fu;
        }
        s
    }

    /// The four blocks of `Lambda_G^{(k,K)}` at the current `K`.
    pub fn blocks(&self, k: usize) -> Result<GcusumBlocks> {
        if k == 0 || k > self.k {
            return Err(Error::InvalidScenario { field: "k", reason: "candidate must lie in 1..=K" });
        }
        let c = self.constants()?;
        Ok(GcusumBlocks { eta1: c.eta1, eta2: c.eta2, eta3: self.eta3(&c, k), eta4: self.eta4(&c, k) })
    }

    /// `Lambda_G^{(k,K)}` at the current `K`.
    pub fn statistic(&self, k: usize) -> Result<f64> {
        self.blocks(k).map(|b| b.total())
    }

    /// Evaluates `H_G`, its argmax and `H_A` at the current `K`
    /// by scanning every candidate `k`.
    pub fn evaluate(&self) -> Result<GcusumOutput> {
        if self.k == 0 {
            return Err(Error::InvalidScenario { field: "K", reason: "no monitoring data yet" });
        }
        let c = self.constants()?;
        let mut best_g = f64::NEG_INFINITY;
        let mut k_hat = 1;
        let mut best_4 = f64::NEG_INFINITY;
        for k in 1..=self.k {
            let e4 = self.eta4(&c, k);
            let lg = self.eta3(&c, k) + e4;
            if lg > best_g {
                best_g = lg;
                k_hat = k;
            }
            if e4 > best_4 {
                best_4 = e4;
            }
        }
        let base = c.eta1 + c.eta2;
        let h_g = base + best_g;
        let h_a = base + best_4;
        Ok(GcusumOutput {
            k: self.k,
            h_g,
            k_hat,
            h_a,
            stopped_g: self.stopped_g.is_some() || h_g >= self.h,
            stopped_a: self.stopped_a.is_some() || h_a >= self.h,
        })
    }

    /// Adds the next monitoring bits and evaluates both statistics.
    pub fn step(&mut self, bits: &[u8]) -> Result<GcusumOutput> {
        self.push_monitoring(bits)?;
        let out = self.evaluate()?;
        if out.stopped_g && self.stopped_g.is_none() {
            self.stopped_g = Some(self.k);
        }
        if out.stopped_a && self.stopped_a.is_none() {
            self.stopped_a = Some(self.k);
        }
        Ok(out)
    }

    /// Stopping time of the GCUSUM at the configured threshold.
    pub fn stopping_time(&self) -> Option<usize> {
        self.stopped_g
    }

    /// Stopping time of the alternative statistic at the configured threshold.
    pub fn alternative_stopping_time(&self) -> Option<usize> {
        self.stopped_a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn page_path() {
        let mut s = 0.0;
        let mut path = Vec::new();
        for inc in [-1.0, 2.0, -0.5] {
            s = page_step(s, inc);
            path.push(s);
        }
        assert_eq!(path, [-1.0, 2.0, 1.5]);
    }

    #[test]
    fn oracle_with_zero_shift_never_moves() {
        let t = NetworkTopology::cycle(3, &[0]).unwrap();
        let g = NoiseModel::standard_gaussian();
        let mut c = CusumOracle::new(&t, &g, 1.0, &[0.0; 3], 1.0, 0.5);
        for _ in 0..10 {
            let (s, stop) = c.step(&[1, 0, 1]);
            assert_eq!(s, 0.0);
            assert!(!stop);
        }
    }

    #[test]
    fn k1_statistic_equals_h_g() {
        let t = NetworkTopology::cycle(3, &[0]).unwrap();
        let mut g = GcusumSnapshot::new(&t, NoiseModel::standard_gaussian(), 0.18, 1e9);
        g.push_secure(&[1, 0, 1]).unwrap();
        g.push_secure(&[0, 0, 1]).unwrap();
        let out = g.step(&[1, 1, 0]).unwrap();
        assert_eq!(out.k_hat, 1);
        assert_abs_diff_eq!(out.h_g, g.statistic(1).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn empty_insecure_set_reduces_alternative() {
        let t = NetworkTopology::cycle(3, &[0, 1, 2]).unwrap();
        let mut g = GcusumSnapshot::new(&t, NoiseModel::standard_gaussian(), 0.2, 1e9);
        g.push_secure(&[1, 0, 1]).unwrap();
        let out = g.step(&[0, 1, 1]).unwrap();
        let b = g.blocks(1).unwrap();
        assert_eq!(b.eta3, 0.0);
        assert_eq!(b.eta4, 0.0);
        assert_abs_diff_eq!(out.h_a, b.eta1 + b.eta2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_counts_are_reported() {
        let t = NetworkTopology::cycle(2, &[0]).unwrap();
        let mut g = GcusumSnapshot::new(&t, NoiseModel::standard_gaussian(), 0.2, 1.0);
        g.push_secure(&[0, 0]).unwrap();
        assert!(matches!(g.step(&[0, 0]), Err(Error::DegenerateBits { .. })));
    }
}
