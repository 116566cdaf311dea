#![allow(dead_code)]

use dagcusum_core::signal::BitHistory;
use dagcusum_core::{NetworkTopology, NoiseModel};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unif(r: &mut ChaCha8Rng) -> f64 {
    (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn below(r: &mut ChaCha8Rng, n: usize) -> usize {
    (r.next_u64() % n as u64) as usize
}

/// Random connected graph: a random spanning tree plus extra random edges.
pub fn random_connected(r: &mut ChaCha8Rng, n: usize, extra: usize, secure: &[usize]) -> NetworkTopology {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((below(r, v), v));
    }
    for _ in 0..extra {
        let a = below(r, n);
        let b = below(r, n);
        if a != b {
            edges.push((a, b));
        }
    }
    NetworkTopology::new(n, &edges, secure).unwrap()
}

/// Random bit history where each bit is 1 with probability `p`.
pub fn random_history(r: &mut ChaCha8Rng, n: usize, m: usize, k: usize, p: f64) -> BitHistory {
    let mut h = BitHistory::new(n);
    for _ in 0..m {
        let row: Vec<u8> = (0..n).map(|_| (unif(r) < p) as u8).collect();
        h.push_secure(&row).unwrap();
    }
    for _ in 0..k {
        let row: Vec<u8> = (0..n).map(|_| (unif(r) < p) as u8).collect();
        h.push_monitoring(&row).unwrap();
    }
    h
}

/// Natural log of the probability of `bit` when bit 0 has probability
/// `F(x)`, evaluated one bit at a time.
pub fn ln_bit(noise: &NoiseModel, x: f64, bit: u8) -> f64 {
    if bit == 0 { noise.cdf(x).ln() } else { noise.sf(x).ln() }
}

/// Attacked log-likelihood summed bit by bit.
pub fn per_bit_f1(
    h: &BitHistory,
    t: &NetworkTopology,
    theta: f64,
    mu: &[f64],
    k: usize,
    noise: &NoiseModel,
    tau: f64,
) -> f64 {
    let mut s = 0.0;
    for m in 1..=h.secure_len() {
        for &b in h.secure_row(m) {
            s += ln_bit(noise, tau - theta, b);
        }
    }
    for i in 1..=h.monitoring_len() {
        for (j, &b) in h.monitoring_row(i).iter().enumerate() {
            let shift = if !t.is_secure(j) && i >= k { mu[j] } else { 0.0 };
            // An infinite shift makes one bit value certain.
            if shift.is_infinite() {
                assert_eq!(b, (shift > 0.0) as u8);
                continue;
            }
            s += ln_bit(noise, tau - theta - shift, b);
        }
    }
    s
}

pub fn per_bit_f0(h: &BitHistory, theta: f64, noise: &NoiseModel, tau: f64) -> f64 {
    let mut s = 0.0;
    for m in 1..=h.secure_len() {
        for &b in h.secure_row(m) {
            s += ln_bit(noise, tau - theta, b);
        }
    }
    for i in 1..=h.monitoring_len() {
        for &b in h.monitoring_row(i) {
            s += ln_bit(noise, tau - theta, b);
        }
    }
    s
}

/// `Lambda_G^{(k,K)}` straight from the definitions: plug-in estimates
/// computed from raw bit counts, then per-bit log-likelihoods.
pub fn per_bit_lambda_g(h: &BitHistory, t: &NetworkTopology, k: usize, noise: &NoiseModel, tau: f64, b: f64) -> f64 {
    let big_k = h.monitoring_len();
    let (mut all_ones, mut all_bits) = (0.0, 0.0);
    let (mut free_ones, mut free_bits) = (0.0, 0.0);
    for m in 1..=h.secure_len() {
        for &u in h.secure_row(m) {
            all_ones += u as f64;
            all_bits += 1.0;
            free_ones += u as f64;
            free_bits += 1.0;
        }
    }
    for i in 1..=big_k {
        for (j, &u) in h.monitoring_row(i).iter().enumerate() {
            all_ones += u as f64;
            all_bits += 1.0;
            if t.is_secure(j) {
                free_ones += u as f64;
                free_bits += 1.0;
            }
        }
    }
    let theta_u = tau - noise.quantile(1.0 - all_ones / all_bits);
    let theta_a = tau - noise.quantile(1.0 - free_ones / free_bits);
    let n = t.n_sensors();
    let mut mu = vec![0.0; n];
    for j in t.insecure_sensors() {
        let ones: f64 = (k..=big_k).map(|i| h.monitoring_row(i)[j] as f64).sum();
        let w = ones / (big_k - k + 1) as f64;
        mu[j] = if w == 1.0 {
            f64::INFINITY
        } else if w == 0.0 {
            b
        } else {
            (tau - theta_a - noise.quantile(1.0 - w)).max(b)
        };
    }
    per_bit_f1(h, t, theta_a, &mu, k, noise, tau) - per_bit_f0(h, theta_u, noise, tau)
}

pub fn brute_max_suffix(incs: &[f64]) -> f64 {
    (0..incs.len()).map(|k| incs[k..].iter().sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
}
