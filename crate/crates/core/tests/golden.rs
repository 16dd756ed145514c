#![allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]

// Values frozen from an independent 40-digit series evaluation of the
// Poissonized moments, summing E f(ξ) term by term.

use multinomial_tails::kernels::{moment_summary, Kernel, LevelDistribution, Method, MomentSummary, PdsFrame};
use multinomial_tails::model::MultinomialModel;
use multinomial_tails::tail::{correction_coeffs, Side, TailConfig, TailEngine};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

struct Golden {
    mean: f64,
    tau: f64,
    raw_variance: f64,
    variance: f64,
    beta3: f64,
    mu0: f64,
}

fn check(s: &MomentSummary, n: u64, g: &Golden, tol: f64) {
    assert!(rel(s.mean, g.mean) < tol, "A_N {} vs {}", s.mean, g.mean);
    assert!(rel(s.tau, g.tau) < tol, "τ {} vs {}", s.tau, g.tau);
    assert!(rel(s.raw_variance, g.raw_variance) < tol, "σ̃² {} vs {}", s.raw_variance, g.raw_variance);
    assert!(rel(s.variance, g.variance) < tol, "σ² {} vs {}", s.variance, g.variance);
    assert!(rel(s.beta3, g.beta3) < tol, "β₃ {} vs {}", s.beta3, g.beta3);
    let mu0 = correction_coeffs(s, n, 1).unwrap().mu0;
    assert!(rel(mu0, g.mu0) < tol, "μ₀ {} vs {}", mu0, g.mu0);
}

#[test]
fn chi_square_uniform_1024_512() {
    let m = MultinomialModel::uniform(1024, 512).unwrap();
    let s = moment_summary(&m, &Kernel::chi_square(), Method::Series).unwrap();
    let g = Golden {
        mean: 512.0,
        tau: 0.5,
        raw_variance: 1280.0,
        variance: 1024.0,
        beta3: 5120.0,
        mu0: 5.0 / 192.0,
    };
    check(&s, 1024, &g, 1e-12);
}

#[test]
fn empty_cells_uniform_1024_512() {
    let m = MultinomialModel::uniform(1024, 512).unwrap();
    let s = moment_summary(&m, &Kernel::count_exact(0), Method::Auto).unwrap();
    let g = Golden {
        mean: 69.291_665_017_145_69,
        tau: -0.135_335_283_236_612_69,
        raw_variance: 512.0 * (-2f64).exp() * (1.0 - (-2f64).exp()),
        variance: 41.158_843_684_049_997,
        beta3: 12.813_865_535_828_457,
        mu0: 0.008_087_870_039_815_564_6,
    };
    check(&s, 1024, &g, 1e-12);
}

#[test]
fn log_likelihood_uniform_1024_512() {
    let m = MultinomialModel::uniform(1024, 512).unwrap();
    let s = moment_summary(&m, &Kernel::pds(0.0).unwrap(), Method::Series).unwrap();
    let g = Golden {
        mean: 583.374_766_943_714_9,
        tau: -0.047_001_269_403_260_234,
        raw_variance: 1143.283_198_295_057_5,
        variance: 1141.021_060_105_727_2,
        beta3: 3024.399_099_992_487_6,
        mu0: 0.013_078_181_468_973_522,
    };
    check(&s, 1024, &g, 1e-11);
}

#[test]
fn freeman_tukey_uniform_1024_512() {
    let m = MultinomialModel::uniform(1024, 512).unwrap();
    let s = moment_summary(&m, &Kernel::pds(-0.5).unwrap(), Method::Series).unwrap();
    let g = Golden {
        mean: 841.990_719_528_441_3,
        tau: -0.683_943_935_203_611_4,
        raw_variance: 3572.169_519_104_906,
        variance: 3093.163_509_247_061,
        beta3: 10_615.913_024_144_982,
        mu0: 0.010_284_940_515_426_077,
    };
    check(&s, 1024, &g, 1e-11);
}

#[test]
fn fractional_d_on_explicit_model() {
    let m = MultinomialModel::new(10, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let s = moment_summary(&m, &Kernel::pds(2.0 / 3.0).unwrap(), Method::Series).unwrap();
    let g = Golden {
        mean: 3.984_846_373_004_091_8,
        tau: 0.270_865_382_041_049_36,
        raw_variance: 8.028_360_174_694_648,
        variance: 7.294_679_622_812_212,
        beta3: 30.470_185_255_569_691,
        mu0: 0.257_759_398_845_603_84,
    };
    check(&s, 10, &g, 1e-11);
}

#[test]
fn unfilled_cells_with_random_levels() {
    let levels = LevelDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
    let m = MultinomialModel::uniform(50, 100).unwrap();
    let s = moment_summary(&m, &Kernel::unfilled(levels), Method::Auto).unwrap();
    let g = Golden {
        mean: 57.620_412_672_700_175,
        tau: -0.394_244_928_813_211_73,
        raw_variance: 24.419_293_106_977_506,
        variance: 16.647_839_912_230_787,
        beta3: -3.821_460_079_063_253_4,
        mu0: -0.009_376_510_411_896_334_9,
    };
    check(&s, 50, &g, 1e-11);
}

#[test]
fn empty_cells_tiny_model_mean() {
    let m = MultinomialModel::uniform(2, 2).unwrap();
    let s = moment_summary(&m, &Kernel::count_exact(0), Method::Auto).unwrap();
    assert!(rel(s.mean, 2.0 * (-1f64).exp()) < 1e-15);
    assert!((s.mean - 0.73576).abs() < 5e-6);
}

#[test]
fn frames_share_the_standardized_statistic() {
    // h_C = s(h_P − kx + k′np) is affine in x, so σ² and β₃ scale by s², s³
    let m = MultinomialModel::new(40, vec![0.05, 0.15, 0.3, 0.5]).unwrap();
    for d in [-0.5, 0.5, 1.0, 2.0] {
        let c = moment_summary(&m, &Kernel::pds_in(d, PdsFrame::Cressie).unwrap(), Method::Series).unwrap();
        let p = moment_summary(&m, &Kernel::pds_in(d, PdsFrame::Power).unwrap(), Method::Series).unwrap();
        let s = 2.0 / (d * (d + 1.0));
        assert!(rel(c.variance, s * s * p.variance) < 1e-10, "d = {d}");
        assert!(rel(c.beta3, s * s * s * p.beta3) < 1e-9, "d = {d}");
    }
}

#[test]
fn engine_end_to_end() {
    let m = MultinomialModel::uniform(1024, 512).unwrap();
    let e = TailEngine::new(&m, &Kernel::chi_square(), &TailConfig::default()).unwrap();
    let r = e.tail(1.0, Side::Upper).unwrap();
    assert!((r.p_first_order - 0.158_655_3).abs() < 1e-7);
    assert!(rel(r.p_corrected, r.p_first_order * (5.0f64 / 192.0).exp()) < 1e-12);
    assert!(r.in_zone);
    assert_eq!(e.with_order(0).tail(1.0, Side::Upper).unwrap().p_corrected, r.p_first_order);
}
