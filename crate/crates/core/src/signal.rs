//! Scenario parameters, one-bit quantization and reproducible bit streams.
//!
//! A sensor observes `x = theta + n` during the secure phase and, in the
//! monitoring phase, `x = theta + mu_j + n` once an insecure sensor is under
//! attack (`k >= t_a`). It reports the single bit `1{x > tau}`.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::topology::NetworkTopology;

/// `q(theta) = P(bit = 0 | theta) = F(tau - theta)`.
pub fn q(noise: &NoiseModel, theta: f64, tau: f64) -> f64 {
    noise.cdf(tau - theta)
}

/// `q~(theta, mu) = F(tau - theta - mu)`, the bit-0 probability under attack.
pub fn qtilde(noise: &NoiseModel, theta: f64, mu: f64, tau: f64) -> f64 {
    noise.cdf(tau - theta - mu)
}

/// Alarm threshold given directly or through a false-alarm target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    H(f64),
    /// Target expected false-alarm period; `h` follows from the bound.
    Kappa(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub theta: f64,
    pub tau: f64,
    /// Lower bound on the attack magnitude.
    pub b: f64,
    /// Attack magnitude per sensor (length `N`; entries of secure sensors are ignored).
    pub mu: Vec<f64>,
    /// First attacked monitoring sample; `None` means no attack.
    pub attack_time: Option<usize>,
    /// Secure-phase length `M`.
    pub secure_len: usize,
    /// Message-passing rounds per sampling interval.
    pub q_rounds: usize,
    /// Exponential weighting factor of the distributed detector.
    pub alpha: f64,
    pub threshold: Threshold,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Checks the scenario against a topology. Sensor numbers in errors are 1-based.
    pub fn validate(&self, topology: &NetworkTopology) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidScenario { field, reason });
        if !self.theta.is_finite() {
            return bad("theta", "must be finite");
        }
        if !self.tau.is_finite() {
            return bad("tau", "must be finite");
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad("b", "must be a positive finite number");
        }
        if self.mu.len() != topology.n_sensors() {
            return Err(Error::DimensionMismatch {
                expected: topology.n_sensors(),
                actual: self.mu.len(),
            });
        }
        for j in topology.insecure_sensors() {
            let mu = self.mu[j];
            if !(mu >= self.b) || !mu.is_finite() {
                return Err(Error::AttackBelowFloor { sensor: j + 1, mu, b: self.b });
            }
        }
        if self.attack_time == Some(0) {
            return bad("attack_time", "must be at least 1");
        }
        if self.secure_len == 0 {
            return bad("secure_len", "must be at least 1");
        }
        if self.q_rounds == 0 {
            return bad("q_rounds", "must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", "must lie strictly between 0 and 1");
        }
        match self.threshold {
            Threshold::H(h) if !(h >= 0.0) => bad("h", "must be non-negative"),
            Threshold::Kappa(k) if !(k > 0.0 && k.is_finite()) => bad("kappa", "must be positive"),
            _ => Ok(()),
        }
    }

    /// Whether sensor `j` reports attacked data at monitoring time `k`.
    pub fn is_attacked(&self, topology: &NetworkTopology, sensor: usize, k: usize) -> bool {
        !topology.is_secure(sensor) && self.attack_time.is_some_and(|ta| k >= ta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Secure,
    Monitoring,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Secure => "secure",
            Phase::Monitoring => "monitoring",
        }
    }
}

/// Time index within a phase: `m` in `1..=M` or `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeIndex {
    Secure(usize),
    Monitoring(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitRecord {
    pub phase: Phase,
    /// 1-based index within the phase.
    pub time: usize,
    /// 0-based sensor index.
    pub sensor: usize,
    pub bit: u8,
}

/// Uniform draw on the open interval `(0, 1)` from 52 random bits.
#[inline]
pub fn uniform_open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Draws a noise sample by inverse transform.
pub fn sample_noise<R: RngCore + ?Sized>(noise: &NoiseModel, rng: &mut R) -> f64 {
    noise.quantile(uniform_open01(rng))
}

/// Generates one quantized observation.
///
/// The noise is drawn by inverse transform from a uniform `U`; since `F` is
/// strictly increasing, `theta + shift + F^{-1}(U) > tau` is decided as
/// `U > F(tau - theta - shift)`, which avoids evaluating the quantile.
pub fn sample_bit<R: RngCore + ?Sized>(
    config: &ScenarioConfig,
    noise: &NoiseModel,
    topology: &NetworkTopology,
    sensor: usize,
    time: TimeIndex,
    rng: &mut R,
) -> u8 {
    let shift = match time {
        TimeIndex::Monitoring(k) if config.is_attacked(topology, sensor, k) => config.mu[sensor],
        _ => 0.0,
    };
    let p0 = noise.cdf(config.tau - config.theta - shift);
    (uniform_open01(rng) > p0) as u8
}

/// Bits of one replication: the secure phase (`M x N`) and the monitoring
/// phase (`K x N`), both stored row-major by time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitHistory {
    n: usize,
    secure: Vec<u8>,
    monitoring: Vec<u8>,
}

impl BitHistory {
    pub fn new(n_sensors: usize) -> Self {
        Self { n: n_sensors, secure: Vec::new(), monitoring: Vec::new() }
    }

    pub fn n_sensors(&self) -> usize {
        self.n
    }

    pub fn secure_len(&self) -> usize {
        if self.n == 0 { 0 } else { self.secure.len() / self.n }
    }

    pub fn monitoring_len(&self) -> usize {
        if self.n == 0 { 0 } else { self.monitoring.len() / self.n }
    }

    pub fn push_secure(&mut self, bits: &[u8]) -> Result<()> {
        self.check_row(bits)?;
        self.secure.extend_from_slice(bits);
        Ok(())
    }

    pub fn push_monitoring(&mut self, bits: &[u8]) -> Result<()> {
        self.check_row(bits)?;
        self.monitoring.extend_from_slice(bits);
        Ok(())
    }

    fn check_row(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: bits.len() });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidScenario { field: "bit", reason: "bits must be 0 or 1" });
        }
        Ok(())
    }

    /// Secure bits at time `m` (1-based).
    pub fn secure_row(&self, m: usize) -> &[u8] {
        &self.secure[(m - 1) * self.n..m * self.n]
    }

    /// Monitoring bits at time `k` (1-based).
    pub fn monitoring_row(&self, k: usize) -> &[u8] {
        &self.monitoring[(k - 1) * self.n..k * self.n]
    }

    /// Keeps only the first `k` monitoring samples.
    pub fn truncate_monitoring(&mut self, k: usize) {
        self.monitoring.truncate(k * self.n);
    }

    /// All bits as records, secure phase first, each in time-then-sensor order.
    pub fn records(&self) -> impl Iterator<Item = BitRecord> + '_ {
        let n = self.n.max(1);
        let sec = self.secure.iter().enumerate().map(move |(i, &bit)| BitRecord {
            phase: Phase::Secure,
            time: i / n + 1,
            sensor: i % n,
            bit,
        });
        let mon = self.monitoring.iter().enumerate().map(move |(i, &bit)| BitRecord {
            phase: Phase::Monitoring,
            time: i / n + 1,
            sensor: i % n,
            bit,
        });
        sec.chain(mon)
    }

    /// Rebuilds a history from records in any order; every (phase, time,
    /// sensor) cell up to the largest time must be present exactly once.
    pub fn from_records(n_sensors: usize, records: &[BitRecord]) -> Result<Self> {
        let mut m_len = 0;
        let mut k_len = 0;
        for r in records {
            if r.sensor >= n_sensors {
                return Err(Error::InvalidScenario { field: "sensor", reason: "index out of range" });
            }
            if r.time == 0 {
                return Err(Error::InvalidScenario { field: "time", reason: "times are 1-based" });
            }
            if r.bit > 1 {
                return Err(Error::InvalidScenario { field: "bit", reason: "bits must be 0 or 1" });
            }
            match r.phase {
                Phase::Secure => m_len = m_len.max(r.time),
                Phase::Monitoring => k_len = k_len.max(r.time),
            }
        }
        const UNSET: u8 = u8::MAX;
        let mut secure = vec![UNSET; m_len * n_sensors];
        let mut monitoring = vec![UNSET; k_len * n_sensors];
        for r in records {
            let slot = match r.phase {
                Phase::Secure => &mut secure[(r.time - 1) * n_sensors + r.sensor],
                Phase::Monitoring => &mut monitoring[(r.time - 1) * n_sensors + r.sensor],
            };
            if *slot != UNSET {
                return Err(Error::InvalidScenario { field: "bit", reason: "duplicate record" });
            }
            *slot = r.bit;
        }
        if secure.iter().chain(&monitoring).any(|&b| b == UNSET) {
            return Err(Error::InvalidScenario { field: "bit", reason: "missing records" });
        }
        Ok(Self { n: n_sensors, secure, monitoring })
    }
}

/// Supplier of bits to the detectors, one time step at a time.
pub trait BitSource {
    fn n_sensors(&self) -> usize;
    /// Writes the secure-phase bits of time `m` into `out`.
    fn secure_bits(&mut self, m: usize, out: &mut [u8]);
    /// Writes monitoring bits of time `k`; returns `false` once exhausted.
    fn monitoring_bits(&mut self, k: usize, out: &mut [u8]) -> bool;
}

/// Which experiment a replication belongs to; keeps attacked and attack-free
/// runs on disjoint random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Attacked,
    Null,
}

/// Stream number of one (replication, run, phase, sensor) combination.
pub fn stream_id(replication: u64, run: RunKind, phase: Phase, sensor: usize) -> u64 {
    let tag: u64 = match (run, phase) {
        (RunKind::Attacked, Phase::Secure) => 0,
        (RunKind::Attacked, Phase::Monitoring) => 1,
        (RunKind::Null, Phase::Secure) => 2,
        (RunKind::Null, Phase::Monitoring) => 3,
    };
    (replication << 20) | (tag << 16) | (sensor as u64 & 0xFFFF)
}

/// Independent ChaCha8 stream for one sensor and phase.
pub fn sensor_rng(master_seed: u64, replication: u64, run: RunKind, phase: Phase, sensor: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(replication, run, phase, sensor));
    rng
}

/// Simulated bits with one random stream per sensor and phase.
#[derive(Debug, Clone)]
pub struct SimulatedBits {
    p0_secure: Vec<f64>,
    p0_attacked: Vec<f64>,
    attack_time: Option<usize>,
    secure_rngs: Vec<ChaCha8Rng>,
    monitoring_rngs: Vec<ChaCha8Rng>,
}

impl SimulatedBits {
    pub fn new(
        config: &ScenarioConfig,
        noise: &NoiseModel,
        topology: &NetworkTopology,
        replication: u64,
        run: RunKind,
    ) -> Self {
        let n = topology.n_sensors();
        let base = q(noise, config.theta, config.tau);
        let p0_attacked = (0..n)
            .map(|j| {
                if topology.is_secure(j) {
                    base
                } else {
                    qtilde(noise, config.theta, config.mu[j], config.tau)
                }
            })
            .collect();
        let attack_time = match run {
            RunKind::Attacked => config.attack_time,
            RunKind::Null => None,
        };
        let rngs = |phase| {
            (0..n)
                .map(|j| sensor_rng(config.master_seed, replication, run, phase, j))
                .collect()
        };
        Self {
            p0_secure: vec![base; n],
            p0_attacked,
            attack_time,
            secure_rngs: rngs(Phase::Secure),
            monitoring_rngs: rngs(Phase::Monitoring),
        }
    }
}

impl BitSource for SimulatedBits {
    fn n_sensors(&self) -> usize {
        self.p0_secure.len()
    }

    fn secure_bits(&mut self, _m: usize, out: &mut [u8]) {
        for ((o, rng), &p0) in out.iter_mut().zip(&mut self.secure_rngs).zip(&self.p0_secure) {
            *o = (uniform_open01(rng) > p0) as u8;
        }
    }

    fn monitoring_bits(&mut self, k: usize, out: &mut [u8]) -> bool {
        let attacked = self.attack_time.is_some_and(|ta| k >= ta);
        let probs = if attacked { &self.p0_attacked } else { &self.p0_secure };
        for ((o, rng), &p0) in out.iter_mut().zip(&mut self.monitoring_rngs).zip(probs) {
            *o = (uniform_open01(rng) > p0) as u8;
        }
        true
    }
}

/// Replays a recorded history instead of drawing random bits.
#[derive(Debug, Clone)]
pub struct ReplayBits<'a> {
    history: &'a BitHistory,
}

impl<'a> ReplayBits<'a> {
    pub fn new(history: &'a BitHistory) -> Self {
        Self { history }
    }
}

impl BitSource for ReplayBits<'_> {
    fn n_sensors(&self) -> usize {
        self.history.n_sensors()
    }

    fn secure_bits(&mut self, m: usize, out: &mut [u8]) {
        out.copy_from_slice(self.history.secure_row(m));
    }

    fn monitoring_bits(&mut self, k: usize, out: &mut [u8]) -> bool {
        if k > self.history.monitoring_len() {
            return false;
        }
        out.copy_from_slice(self.history.monitoring_row(k));
        true
    }
}

/// Draws `m` secure rows and `k` monitoring rows from a source.
pub fn record_history<S: BitSource + ?Sized>(source: &mut S, m: usize, k: usize) -> BitHistory {
    let n = source.n_sensors();
    let mut h = BitHistory::new(n);
    let mut row = vec![0u8; n];
    for t in 1..=m {
        source.secure_bits(t, &mut row);
        h.secure.extend_from_slice(&row);
    }
    for t in 1..=k {
        if !source.monitoring_bits(t, &mut row) {
            break;
        }
        h.monitoring.extend_from_slice(&row);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scenario(n: usize) -> ScenarioConfig {
        ScenarioConfig {
            theta: 1.0,
            tau: 1.0,
            b: 0.18,
            mu: vec![0.2; n],
            attack_time: Some(10),
            secure_len: 100,
            q_rounds: 10,
            alpha: 0.979,
            threshold: Threshold::H(10.0),
            master_seed: 7,
        }
    }

    #[test]
    fn q_values() {
        let g = NoiseModel::standard_gaussian();
        assert_abs_diff_eq!(q(&g, 1.0, 1.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(qtilde(&g, 1.0, 0.2, 1.0), 0.420_740_290_560_897, epsilon = 1e-12);
        assert_eq!(qtilde(&g, 0.3, 0.0, 1.1), q(&g, 0.3, 1.1));
        assert!(qtilde(&g, 0.3, 0.01, 1.1) < q(&g, 0.3, 1.1));
    }

    #[test]
    fn infinite_threshold_gives_zero_bits() {
        let t = NetworkTopology::cycle(4, &[]).unwrap();
        let mut c = scenario(4);
        c.tau = f64::INFINITY;
        let g = NoiseModel::standard_gaussian();
        let mut rng = sensor_rng(1, 0, RunKind::Attacked, Phase::Monitoring, 0);
        for k in 1..200 {
            assert_eq!(sample_bit(&c, &g, &t, 0, TimeIndex::Monitoring(k), &mut rng), 0);
        }
    }

    #[test]
    fn validation_names_offending_sensor() {
        let t = NetworkTopology::cycle(4, &[0, 1]).unwrap();
        let mut c = scenario(4);
        c.mu[3] = 0.1;
        assert_eq!(c.validate(&t), Err(Error::AttackBelowFloor { sensor: 4, mu: 0.1, b: 0.18 }));
        // Secure sensors are exempt.
        let mut c = scenario(4);
        c.mu[0] = 0.0;
        assert!(c.validate(&t).is_ok());
        c.alpha = 1.0;
        assert!(c.validate(&t).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let t = NetworkTopology::cycle(3, &[0]).unwrap();
        let c = scenario(3);
        let g = NoiseModel::standard_gaussian();
        let a = record_history(&mut SimulatedBits::new(&c, &g, &t, 5, RunKind::Attacked), 50, 50);
        let b = record_history(&mut SimulatedBits::new(&c, &g, &t, 5, RunKind::Attacked), 50, 50);
        let other = record_history(&mut SimulatedBits::new(&c, &g, &t, 6, RunKind::Attacked), 50, 50);
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn replay_roundtrips_records() {
        let t = NetworkTopology::cycle(3, &[1]).unwrap();
        let c = scenario(3);
        let g = NoiseModel::standard_gaussian();
        let h = record_history(&mut SimulatedBits::new(&c, &g, &t, 0, RunKind::Null), 7, 9);
        let recs: Vec<_> = h.records().collect();
        assert_eq!(recs.len(), 3 * 16);
        let back = BitHistory::from_records(3, &recs).unwrap();
        assert_eq!(back, h);
        let again = record_history(&mut ReplayBits::new(&back), 7, 20);
        assert_eq!(again, h);
    }

    #[test]
    fn incomplete_records_are_rejected() {
        let recs = [
            BitRecord { phase: Phase::Secure, time: 1, sensor: 0, bit: 1 },
            BitRecord { phase: Phase::Secure, time: 2, sensor: 1, bit: 0 },
        ];
        assert!(BitHistory::from_records(2, &recs).is_err());
    }

    #[test]
    fn uniform_stays_inside_open_interval() {
        struct Fixed(u64);
        impl RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                self.0 as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0
            }
            fn fill_bytes(&mut self, _dst: &mut [u8]) {}
        }
        assert!(uniform_open01(&mut Fixed(0)) > 0.0);
        assert!(uniform_open01(&mut Fixed(u64::MAX)) < 1.0);
    }
}
