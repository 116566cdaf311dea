use dagcusum_core::bounds::{band_half_widths, eps_star, mn_critical};
use dagcusum_core::{rate_functions, theorem1_probability_floor, threshold_for_kappa, CertificateMode, FalseAlarmCertificate};

/// Maximizes a concave function of `c > 0` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    f(0.5 * (lo + hi))
}

/// Legendre transforms of the centered bit-0 indicator (`X`) and its
/// negation (`Y`) at the band half-widths.
fn legendre_rates(q: f64) -> (f64, f64) {
    let (eps1, eps2) = band_half_widths(q).unwrap();
    let ln_phi_x = |c: f64| (q * (c * (q - 1.0)).exp() + (1.0 - q) * (c * q).exp()).ln();
    let ln_phi_y = |c: f64| (q * (c * (1.0 - q)).exp() + (1.0 - q) * (-c * q).exp()).ln();
    let u1 = golden_max(|c| eps2 * c - ln_phi_x(c), 0.0, 60.0);
    let u2 = golden_max(|c| eps1 * c - ln_phi_y(c), 0.0, 60.0);
    (u1, u2)
}

#[test]
fn closed_form_rates_match_legendre_transform() {
    for i in 1..=20 {
        let q = i as f64 / 21.0;
        let (u1, u2) = rate_functions(q).unwrap();
        let (l1, l2) = legendre_rates(q);
        assert!((u1 - l1).abs() < 1e-6, "q {q}: {u1} vs {l1}");
        assert!((u2 - l2).abs() < 1e-6, "q {q}: {u2} vs {l2}");
    }
}

#[test]
fn rates_are_positive() {
    for i in 1..100 {
        let (u1, u2) = rate_functions(i as f64 / 100.0).unwrap();
        assert!(u1 > 0.0 && u2 > 0.0);
    }
}

#[test]
fn threshold_grows_linearly_in_kappa() {
    let q = 0.4;
    let (h1, _) = threshold_for_kappa(100.0, 1000, 12, q).unwrap();
    let (h2, _) = threshold_for_kappa(200.0, 1000, 12, q).unwrap();
    let (h3, _) = threshold_for_kappa(300.0, 1000, 12, q).unwrap();
    assert!(((h3 - h2) - (h2 - h1)).abs() < 1e-6 * h3);
    let slope = 12.0 * (1.0 / eps_star(q).unwrap()).ln() / theorem1_probability_floor(1000, 12, q).unwrap();
    assert!(((h2 - h1) / 100.0 - slope).abs() < 1e-9 * slope);
}

#[test]
fn certificate_fields_are_consistent() {
    let c = FalseAlarmCertificate::new(CertificateMode::Benchmark, 0.5, 1000.0, 5000, 12).unwrap();
    assert!((c.h_min - 99_813.1).abs() < 0.1);
    assert_eq!(c.upsilon_star, c.upsilon1.min(c.upsilon2));
    assert!((c.mn_min - mn_critical(0.5).unwrap()).abs() < 1e-12);
    assert!((c.mn_min - 5.2987).abs() < 1e-3);
    let d = FalseAlarmCertificate::from_secure_bits(30_000, 60_000, 1000.0, 5000, 12).unwrap();
    assert_eq!(d.mode, CertificateMode::Deployment);
    assert!(d.mode.label().contains("heuristic"));
    assert_eq!(d.h_min, c.h_min);
}
