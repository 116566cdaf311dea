//! Distributed approximate GCUSUM (DAG-CUSUM).
//!
//! Every sensor keeps local estimates of the network-wide bit sums through
//! running consensus and evaluates
//!
//! ```text
//! H_D(j) = eta1_hat(j) + eta2_hat(j) + eta3_hat(j)
//! ```
//!
//! where the first two terms replace the true bit sums in the GCUSUM blocks
//! by local estimates, and `eta3_hat` aggregates the per-sensor CUSUM
//! statistics `psi_j` of the insecure sensors through a fourth consensus
//! stream. Each insecure sensor searches its own attack time, and its recent
//! bit rate is tracked with exponential weighting.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::centralized::page_step;
use crate::consensus::{ConsensusMatrices, ConsensusState, Innovations, LocalLambdaEstimates, Stream};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::topology::{NetworkTopology, WeightMatrix};

/// Bit fractions implied by local sum estimates at monitoring time `k`:
/// `(attack-free fraction, overall fraction)`.
pub fn local_fractions(est: &LocalLambdaEstimates, m: usize, k: usize, n: usize, n_s: usize) -> (f64, f64) {
    let mn = (m * n) as f64;
    let fa = (est.lambda_m_hat + est.lambda_s_hat) / (mn + (k * n_s) as f64);
    let fu = (est.lambda_m_hat + est.lambda_n_hat) / ((m + k) * n) as f64;
    (fa, fu)
}

fn positive_log(x: f64, context: &'static str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(libm::log(x))
    } else {
        Err(Error::DegenerateLogArgument { value: x, context })
    }
}

/// Local estimates of the secure-phase block and the secure-sensor block.
pub fn eta12_hat(est: &LocalLambdaEstimates, m: usize, k: usize, n: usize, n_s: usize) -> Result<(f64, f64)> {
    let (fa, fu) = local_fractions(est, m, k, n, n_s);
    let g1 = positive_log((1.0 - fa) / (1.0 - fu), "eta12: (1 - fa) / (1 - fu)")?;
    let g2 = positive_log(fa / fu, "eta12: fa / fu")?;
    let mn = (m * n) as f64;
    let eta1 = (mn - est.lambda_m_hat) * g1 + est.lambda_m_hat * g2;
    let eta2 = ((k * n_s) as f64 - est.lambda_s_hat) * g1 + est.lambda_s_hat * g2;
    Ok((eta1, eta2))
}

/// Exponentially weighted bit average after the `k`-th bit:
/// `sum_l alpha^{k-l} u_l / sum_l alpha^{k-l}`.
pub fn lambda_a_update(prev: f64, bit: u8, k: usize, alpha: f64) -> f64 {
    let ak = libm::pow(alpha, k as f64);
    let denom = 1.0 - ak;
    ((alpha - ak) / denom) * prev + ((1.0 - alpha) / denom) * bit as f64
}

/// Local log-likelihood-ratio increment of an insecure sensor at time `k`.
///
/// The attack magnitude is estimated from the weighted recent bit rate
/// `lambda_a`; when it falls below `b` the attacked bit-0 probability is
/// the one implied by a shift of exactly `b`.
#[allow(clippy::too_many_arguments)]
pub fn phi4_hat(
    est: &LocalLambdaEstimates,
    lambda_a: f64,
    bit: u8,
    m: usize,
    k: usize,
    n: usize,
    n_s: usize,
    noise: &NoiseModel,
    b: f64,
) -> Result<f64> {
    let (fa, fu) = local_fractions(est, m, k, n, n_s);
    if !(fa > 0.0 && fa < 1.0) {
        return Err(Error::DegenerateLogArgument { value: fa, context: "phi4: attack-free fraction" });
    }
    // tau - theta_a, from the attack-free bit fraction.
    let offset = noise.quantile(1.0 - fa);
    let mu_tilde = offset - noise.quantile(1.0 - lambda_a);
    let zeta = if mu_tilde >= b { 1.0 - lambda_a } else { noise.cdf(offset - b) };
    if bit == 0 {
        positive_log(zeta / (1.0 - fu), "phi4: zeta / (1 - fu)")
    } else {
        positive_log((1.0 - zeta) / fu, "phi4: (1 - zeta) / fu")
    }
}

/// `max(psi_prev, 0) + phi4`.
#[inline]
pub fn psi_update(psi_prev: f64, phi4: f64) -> f64 {
    page_step(psi_prev, phi4)
}

/// Read-out of the aggregated CUSUM stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Eta3Scaling {
    /// `e_j^T Xi`, which approximates the network total divided by `N`.
    #[default]
    Local,
    /// `N e_j^T Xi`, which approximates the network total.
    TimesN,
}

/// Gap allowed between the local and centralized first two blocks:
/// `N^2 (2 - q) / (q (1 - q)) (2 r_check + r_tilde + r_main)` with
/// `r = s^Q / (1 - s^Q)`.
pub fn theorem4_bound(n: usize, q: f64, sigma_check: f64, sigma_tilde: f64, sigma_main: f64, q_rounds: usize) -> f64 {
    let r = |s: f64| {
        let sq = libm::pow(s, q_rounds as f64);
        sq / (1.0 - sq)
    };
    let nf = n as f64;
    nf * nf * (2.0 - q) / (q * (1.0 - q)) * (2.0 * r(sigma_check) + r(sigma_tilde) + r(sigma_main))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DagSensorState {
    pub psi_hat: f64,
    pub lambda_a_hat: f64,
    pub eta1_hat: f64,
    pub eta2_hat: f64,
    pub eta3_hat: f64,
    pub h_d: f64,
    /// First monitoring time at which `h_d >= h`.
    pub stopped_at: Option<usize>,
}

impl DagSensorState {
    pub fn stopped(&self) -> bool {
        self.stopped_at.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DagConfig {
    pub noise: NoiseModel,
    pub b: f64,
    pub alpha: f64,
    pub h: f64,
    pub q_rounds: usize,
    pub eta3_scaling: Eta3Scaling,
    /// Replace all but the last few secure intervals by exact averaging.
    pub collapsed_warm_up: bool,
}

/// Every sensor of one replication, advancing in lockstep.
#[derive(Debug, Clone)]
pub struct DagCusum {
    cfg: DagConfig,
    n: usize,
    n_s: usize,
    secure_mask: Vec<bool>,
    consensus: ConsensusState,
    sensors: Vec<DagSensorState>,
    m: usize,
    k: usize,
    warm_up_done: bool,
    // Collapsed warm-up: secure bits buffered until the last intervals.
    collapsed_total: f64,
    collapsed_tail: Vec<Vec<f64>>,
    degenerate_events: u64,
    buf_main: Vec<f64>,
    buf_tilde: Vec<f64>,
    buf_xi: Vec<f64>,
}

impl DagCusum {
    pub fn new(topology: &NetworkTopology, matrices: ConsensusMatrices, cfg: DagConfig) -> Result<Self> {
        let n = topology.n_sensors();
        if matrices.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: matrices.dim() });
        }
        if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
            return Err(Error::InvalidScenario { field: "alpha", reason: "must lie strictly between 0 and 1" });
        }
        if cfg.q_rounds == 0 {
            return Err(Error::InvalidScenario { field: "q_rounds", reason: "must be at least 1" });
        }
        Ok(Self {
            cfg,
            n,
            n_s: topology.n_secure(),
            secure_mask: topology.secure_mask().to_vec(),
            consensus: ConsensusState::new(matrices, cfg.q_rounds),
            sensors: vec![DagSensorState::default(); n],
            m: 0,
            k: 0,
            warm_up_done: false,
            collapsed_total: 0.0,
            collapsed_tail: Vec::new(),
            degenerate_events: 0,
            buf_main: vec![0.0; n],
            buf_tilde: vec![0.0; n],
            buf_xi: vec![0.0; n],
        })
    }

    /// Same weight matrix on every stream.
    pub fn with_matrix(topology: &NetworkTopology, w: Arc<WeightMatrix>, cfg: DagConfig) -> Result<Self> {
        Self::new(topology, ConsensusMatrices::uniform(w), cfg)
    }

    pub fn config(&self) -> &DagConfig {
        &self.cfg
    }

    pub fn consensus(&self) -> &ConsensusState {
        &self.consensus
    }

    pub fn sensors(&self) -> &[DagSensorState] {
        &self.sensors
    }

    pub fn secure_len(&self) -> usize {
        self.m
    }

    pub fn time(&self) -> usize {
        self.k
    }

    /// Steps in which a degenerate logarithm made a sensor hold its statistic.
    pub fn degenerate_events(&self) -> u64 {
        self.degenerate_events
    }

    /// Number of trailing secure intervals kept under collapsed warm-up: enough
    /// for the neglected mixing error `s^{QT}` to fall below `1e-18`.
    fn collapsed_window(&self) -> usize {
        let s = self.consensus.matrices().check.sigma2();
        if s <= 0.0 {
            return 1;
        }
        let per = self.cfg.q_rounds as f64 * libm::log(s);
        (libm::ceil(libm::log(1e-18) / per) as usize).max(1)
    }

    /// Feeds the secure-phase bits of the next time step.
    pub fn warm_up_step(&mut self, bits: &[u8]) -> Result<()> {
        if self.warm_up_done {
            return Err(Error::InvalidScenario { field: "secure_len", reason: "warm-up already finished" });
        }
        if bits.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: bits.len() });
        }
        self.m += 1;
        let v: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        if self.cfg.collapsed_warm_up {
            self.collapsed_tail.push(v);
            if self.collapsed_tail.len() > self.collapsed_window() {
                let oldest = self.collapsed_tail.remove(0);
                self.collapsed_total += oldest.iter().sum::<f64>();
            }
            Ok(())
        } else {
            self.consensus.advance(Stream::Check, Some(&v))
        }
    }

    /// Ends the secure phase; every statistic starts at zero.
    pub fn finish_warm_up(&mut self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidScenario { field: "secure_len", reason: "must be at least 1" });
        }
        if self.cfg.collapsed_warm_up {
            // Bits older than the window are treated as perfectly averaged.
            let avg = vec![self.collapsed_total / self.n as f64; self.n];
            self.consensus.set_accumulator(Stream::Check, &avg)?;
            for v in core::mem::take(&mut self.collapsed_tail) {
                self.consensus.advance(Stream::Check, Some(&v))?;
            }
        }
        // At K = 0 both local fractions coincide, so eta1_hat = 0.
        for s in &mut self.sensors {
            *s = DagSensorState::default();
        }
        self.warm_up_done = true;
        Ok(())
    }

    /// One monitoring step at every sensor. Returns the updated states.
    pub fn step(&mut self, bits: &[u8]) -> Result<&[DagSensorState]> {
        if !self.warm_up_done {
            self.finish_warm_up()?;
        }
        if bits.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: bits.len() });
        }
        self.k += 1;
        let k = self.k;
        for j in 0..self.n {
            let u = bits[j] as f64;
            self.buf_main[j] = u;
            self.buf_tilde[j] = if self.secure_mask[j] { u } else { 0.0 };
        }
        self.consensus.advance_lambda(&Innovations {
            check: None,
            main: Some(&self.buf_main),
            tilde: Some(&self.buf_tilde),
            xi: None,
        })?;

        let (m, n, n_s) = (self.m, self.n, self.n_s);
        let noise = self.cfg.noise;
        for j in 0..n {
            let est = self.consensus.local_lambda(j);
            let s = &mut self.sensors[j];
            s.lambda_a_hat = lambda_a_update(s.lambda_a_hat, bits[j], k, self.cfg.alpha);
            match eta12_hat(&est, m, k, n, n_s) {
                Ok((e1, e2)) => {
                    s.eta1_hat = e1;
                    s.eta2_hat = e2;
                }
                Err(e) => {
                    self.degenerate_events += 1;
                    log::warn!("sensor {}: K = {}: {}; holding eta1/eta2", j + 1, k, e);
                }
            }
            self.buf_xi[j] = 0.0;
            if !self.secure_mask[j] {
                match phi4_hat(&est, s.lambda_a_hat, bits[j], m, k, n, n_s, &noise, self.cfg.b) {
                    Ok(phi) => {
                        let next = psi_update(s.psi_hat, phi);
                        self.buf_xi[j] = next - s.psi_hat;
                        s.psi_hat = next;
                    }
                    Err(e) => {
                        self.degenerate_events += 1;
                        log::warn!("sensor {}: K = {}: {}; holding psi", j + 1, k, e);
                    }
                }
            }
        }

        self.consensus.advance_xi(Some(&self.buf_xi))?;
        let xi = self.consensus.accumulator(Stream::Xi);
        let scale = match self.cfg.eta3_scaling {
            Eta3Scaling::Local => 1.0,
            Eta3Scaling::TimesN => n as f64,
        };
        for (j, s) in self.sensors.iter_mut().enumerate() {
            s.eta3_hat = scale * xi[j];
            s.h_d = s.eta1_hat + s.eta2_hat + s.eta3_hat;
            if s.stopped_at.is_none() && s.h_d >= self.cfg.h {
                s.stopped_at = Some(k);
            }
        }
        Ok(&self.sensors)
    }

    /// True once every sensor has raised an alarm.
    pub fn all_stopped(&self) -> bool {
        self.sensors.iter().all(|s| s.stopped())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_a_examples() {
        assert_eq!(lambda_a_update(0.37, 1, 1, 0.9), 1.0);
        assert_eq!(lambda_a_update(0.37, 0, 1, 0.2), 0.0);
        let l1 = lambda_a_update(0.0, 1, 1, 0.5);
        assert_abs_diff_eq!(lambda_a_update(l1, 0, 2, 0.5), 1.0 / 3.0, epsilon = 1e-15);
        let mut l = 0.0;
        for k in 1..500 {
            l = lambda_a_update(l, 1, k, 0.979);
            assert_abs_diff_eq!(l, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn psi_path() {
        let mut p = 0.0;
        let path: Vec<f64> = [-1.0, 2.0, -0.5]
            .iter()
            .map(|&x| {
                p = psi_update(p, x);
                p
            })
            .collect();
        assert_eq!(path, [-1.0, 2.0, 1.5]);
    }

    #[test]
    fn eta12_vanishes_at_k0_and_matched_fractions() {
        let est = LocalLambdaEstimates { lambda_m_hat: 600.0, lambda_n_hat: 0.0, lambda_s_hat: 0.0, error_bounds: [0.0; 3] };
        let (e1, e2) = eta12_hat(&est, 100, 0, 12, 6).unwrap();
        assert_abs_diff_eq!(e1, 0.0, epsilon = 1e-12);
        assert_eq!(e2, 0.0);
        // Equal fractions among secure-sensor and all monitoring bits.
        let est = LocalLambdaEstimates { lambda_m_hat: 600.0, lambda_n_hat: 60.0, lambda_s_hat: 30.0, error_bounds: [0.0; 3] };
        let (e1, e2) = eta12_hat(&est, 100, 10, 12, 6).unwrap();
        assert_abs_diff_eq!(e1, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e2, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_fraction_is_an_error() {
        let est = LocalLambdaEstimates { lambda_m_hat: 0.0, lambda_n_hat: 0.0, lambda_s_hat: 0.0, error_bounds: [0.0; 3] };
        assert!(matches!(eta12_hat(&est, 10, 1, 2, 1), Err(Error::DegenerateLogArgument { .. })));
    }

    #[test]
    fn phi4_branches_agree_at_the_clamp() {
        let g = NoiseModel::standard_gaussian();
        let est = LocalLambdaEstimates { lambda_m_hat: 6000.0, lambda_n_hat: 120.0, lambda_s_hat: 60.0, error_bounds: [0.0; 3] };
        let (fa, _) = local_fractions(&est, 1000, 10, 12, 6);
        let b = 0.18;
        // Choose lambda_a so that mu_tilde is exactly b.
        let lambda_a = 1.0 - g.cdf(g.quantile(1.0 - fa) - b);
        let at = phi4_hat(&est, lambda_a, 1, 1000, 10, 12, 6, &g, b).unwrap();
        let below = phi4_hat(&est, lambda_a - 1e-12, 1, 1000, 10, 12, 6, &g, b).unwrap();
        assert_abs_diff_eq!(at, below, epsilon = 1e-9);
    }

    #[test]
    fn theorem4_bound_value() {
        let v = theorem4_bound(12, 0.5, 0.6511, 0.6511, 0.6511, 10);
        let r = 0.6511f64.powi(10) / (1.0 - 0.6511f64.powi(10));
        assert_abs_diff_eq!(v, 144.0 * 1.5 / 0.25 * 4.0 * r, epsilon = 1e-9);
    }
}
