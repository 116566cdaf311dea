mod common;

use std::sync::Arc;

use common::*;
use dagcusum_core::dag::{lambda_a_update, phi4_hat, psi_update, theorem4_bound};
use dagcusum_core::signal::q;
use dagcusum_core::{
    build_laplacian_weights, page_step, ConsensusMatrices, ConsensusState, DagConfig, DagCusum, Eta3Scaling,
    GcusumSnapshot, LocalLambdaEstimates, NetworkTopology, NoiseModel, Stream, WeightMatrix,
};
use proptest::prelude::*;

fn cfg(q_rounds: usize) -> DagConfig {
    DagConfig {
        noise: NoiseModel::standard_gaussian(),
        b: 0.18,
        alpha: 0.979,
        h: f64::INFINITY,
        q_rounds,
        eta3_scaling: Eta3Scaling::Local,
        collapsed_warm_up: false,
    }
}

fn bits_row(r: &mut rand_chacha::ChaCha8Rng, n: usize, p1: &[f64]) -> Vec<u8> {
    (0..n).map(|j| (unif(r) < p1[j]) as u8).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn page_recursion_equals_exhaustive_max(incs in prop::collection::vec(-5.0f64..5.0, 1..=20)) {
        let mut s = f64::NEG_INFINITY;
        for (i, &x) in incs.iter().enumerate() {
            s = if i == 0 { x } else { page_step(s, x) };
            let brute = brute_max_suffix(&incs[..=i]);
            prop_assert!((s - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn frozen_psi_equals_exhaustive_max(incs in prop::collection::vec(-3.0f64..3.0, 1..=20)) {
        let mut psi = 0.0;
        for (i, &x) in incs.iter().enumerate() {
            psi = psi_update(psi, x);
            prop_assert!((psi - brute_max_suffix(&incs[..=i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn lambda_a_matches_weighted_average(bits in prop::collection::vec(0u8..=1, 1..60), alpha in 0.05f64..0.995) {
        let mut l = 0.0;
        for (i, &b) in bits.iter().enumerate() {
            l = lambda_a_update(l, b, i + 1, alpha);
            let k = i + 1;
            let (mut num, mut den) = (0.0, 0.0);
            for (t, &u) in bits[..k].iter().enumerate() {
                let w = alpha.powi((k - 1 - t) as i32);
                num += w * u as f64;
                den += w;
            }
            prop_assert!((l - num / den).abs() < 1e-10);
        }
    }
}

#[test]
fn two_sensor_hand_example() {
    // Sensor 2 has psi path (0, 1, 3): innovations (1, 2). Exact averaging.
    let w = Arc::new(WeightMatrix::averaging(2));
    let mut s = ConsensusState::new(ConsensusMatrices::uniform(w), 1);
    s.advance_xi(Some(&[0.0, 1.0])).unwrap();
    s.advance_xi(Some(&[0.0, 2.0])).unwrap();
    assert_eq!(s.accumulator(Stream::Xi), &[1.5, 1.5]);
}

#[test]
fn single_sensor_reduces_to_local_cusum() {
    let t = NetworkTopology::new(1, &[], &[]).unwrap();
    let w = Arc::new(WeightMatrix::averaging(1));
    let c = cfg(3);
    let mut d = DagCusum::with_matrix(&t, w, c).unwrap();
    let mut r = rng(21);
    let m = 300;
    let mut lambda_m = 0.0;
    for _ in 0..m {
        let row = bits_row(&mut r, 1, &[0.5]);
        lambda_m += row[0] as f64;
        d.warm_up_step(&row).unwrap();
    }
    d.finish_warm_up().unwrap();
    let (mut psi, mut la, mut lambda_n) = (0.0, 0.0, 0.0);
    for k in 1..=80 {
        let p1 = if k >= 20 { 0.8 } else { 0.5 };
        let row = bits_row(&mut r, 1, &[p1]);
        lambda_n += row[0] as f64;
        let st = d.step(&row).unwrap()[0];
        la = lambda_a_update(la, row[0], k, c.alpha);
        let est = LocalLambdaEstimates { lambda_m_hat: lambda_m, lambda_n_hat: lambda_n, lambda_s_hat: 0.0, error_bounds: [0.0; 3] };
        let phi = phi4_hat(&est, la, row[0], m, k, 1, 0, &c.noise, c.b).unwrap();
        psi = psi_update(psi, phi);
        assert!((st.psi_hat - psi).abs() < 1e-9, "k {k}");
        assert!((st.eta3_hat - psi).abs() < 1e-9);
        assert!((st.lambda_a_hat - la).abs() < 1e-12);
    }
}

#[test]
fn exact_averaging_recovers_centralized_blocks_and_telescopes() {
    let n = 6;
    let t = NetworkTopology::cycle(n, &[0, 2, 4]).unwrap();
    let w = Arc::new(WeightMatrix::averaging(n));
    let mut d = DagCusum::with_matrix(&t, w, cfg(1)).unwrap();
    let mut g = GcusumSnapshot::new(&t, NoiseModel::standard_gaussian(), 0.18, f64::INFINITY);
    let mut r = rng(22);
    for _ in 0..400 {
        let row = bits_row(&mut r, n, &[0.5; 6]);
        d.warm_up_step(&row).unwrap();
        g.push_secure(&row).unwrap();
    }
    d.finish_warm_up().unwrap();
    for k in 1..=120 {
        let p1: Vec<f64> = (0..n).map(|j| if k >= 30 && j % 2 == 1 { 0.6 } else { 0.5 }).collect();
        let row = bits_row(&mut r, n, &p1);
        g.push_monitoring(&row).unwrap();
        let states = d.step(&row).unwrap().to_vec();
        let blocks = g.blocks(1).unwrap();
        for s in &states {
            assert!((s.eta1_hat - blocks.eta1).abs() < 1e-8, "k {k}");
            assert!((s.eta2_hat - blocks.eta2).abs() < 1e-8, "k {k}");
        }
        let total_psi: f64 = states.iter().map(|s| s.psi_hat).sum();
        let total_eta3: f64 = states.iter().map(|s| s.eta3_hat).sum();
        assert!((total_eta3 - total_psi).abs() < 1e-9);
    }
}

#[test]
fn times_n_scaling_multiplies_read_out() {
    let n = 4;
    let t = NetworkTopology::cycle(n, &[0, 2]).unwrap();
    let w = Arc::new(build_laplacian_weights(&t).unwrap());
    let mut a = DagCusum::with_matrix(&t, w.clone(), cfg(4)).unwrap();
    let mut b = DagCusum::with_matrix(&t, w, DagConfig { eta3_scaling: Eta3Scaling::TimesN, ..cfg(4) }).unwrap();
    let mut r = rng(23);
    for _ in 0..200 {
        let row = bits_row(&mut r, n, &[0.5; 4]);
        a.warm_up_step(&row).unwrap();
        b.warm_up_step(&row).unwrap();
    }
    for _ in 0..50 {
        let row = bits_row(&mut r, n, &[0.6; 4]);
        let sa = a.step(&row).unwrap().to_vec();
        let sb = b.step(&row).unwrap().to_vec();
        for (x, y) in sa.iter().zip(&sb) {
            assert!((4.0 * x.eta3_hat - y.eta3_hat).abs() < 1e-9);
        }
    }
}

#[test]
fn local_blocks_stay_within_the_consensus_gap_bound() {
    let n = 12;
    let secure: Vec<usize> = (0..n).step_by(2).collect();
    let t = NetworkTopology::circulant(n, 2, &secure).unwrap();
    let w = Arc::new(build_laplacian_weights(&t).unwrap());
    let q_rounds = 10;
    let s2 = w.sigma2();
    let mut d = DagCusum::with_matrix(&t, w, cfg(q_rounds)).unwrap();
    let mut g = GcusumSnapshot::new(&t, NoiseModel::standard_gaussian(), 0.18, f64::INFINITY);
    let mut r = rng(24);
    let m = 1000;
    let (mut ones, mut total) = (0.0, 0.0);
    for _ in 0..m {
        let row = bits_row(&mut r, n, &[0.5; 12]);
        ones += row.iter().map(|&b| b as f64).sum::<f64>();
        total += n as f64;
        d.warm_up_step(&row).unwrap();
        g.push_secure(&row).unwrap();
    }
    let q_plug = 1.0 - ones / total;
    let bound = 2.0 * theorem4_bound(n, q_plug, s2, s2, s2, q_rounds);
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        let p1: Vec<f64> = (0..n).map(|j| if k >= 10 && j % 2 == 1 { 0.58 } else { 0.5 }).collect();
        let row = bits_row(&mut r, n, &p1);
        g.push_monitoring(&row).unwrap();
        let blocks = g.blocks(1).unwrap();
        for s in d.step(&row).unwrap() {
            worst = worst.max((s.eta1_hat - blocks.eta1).abs() + (s.eta2_hat - blocks.eta2).abs());
        }
    }
    assert!(worst <= bound, "{worst} > {bound}");
}

fn phi4_expectation(p1: f64, lambda_a: f64, est: &LocalLambdaEstimates, m: usize, k: usize, b: f64) -> f64 {
    let g = NoiseModel::standard_gaussian();
    let f0 = phi4_hat(est, lambda_a, 0, m, k, 12, 6, &g, b).unwrap();
    let f1 = phi4_hat(est, lambda_a, 1, m, k, 12, 6, &g, b).unwrap();
    (1.0 - p1) * f0 + p1 * f1
}

#[test]
fn phi4_drifts_down_without_attack_and_up_under_strong_attack() {
    let g = NoiseModel::standard_gaussian();
    let (theta, tau, m, k) = (1.0, 1.0, 1000, 50);
    let q0 = q(&g, theta, tau);
    let p1 = 1.0 - q0;
    // Exact sums under no attack.
    let est = LocalLambdaEstimates {
        lambda_m_hat: (m * 12) as f64 * p1,
        lambda_n_hat: (k * 12) as f64 * p1,
        lambda_s_hat: (k * 6) as f64 * p1,
        error_bounds: [0.0; 3],
    };
    let e = phi4_expectation(p1, p1, &est, m, k, 0.18);
    assert!(e < 0.0, "{e}");
    // Strong attack on the six insecure sensors since time 1.
    let mu = 2.0;
    let pa = g.sf(tau - theta - mu);
    let est = LocalLambdaEstimates {
        lambda_m_hat: (m * 12) as f64 * p1,
        lambda_n_hat: (k * 6) as f64 * p1 + (k * 6) as f64 * pa,
        lambda_s_hat: (k * 6) as f64 * p1,
        error_bounds: [0.0; 3],
    };
    let e = phi4_expectation(pa, pa, &est, m, k, 0.18);
    assert!(e > 0.0, "{e}");
}
