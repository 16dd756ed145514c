use proptest::prelude::*;

use multinomial_tails::kernels::{moment_summary, Kernel, LevelDistribution, Method};
use multinomial_tails::model::MultinomialModel;
use multinomial_tails::oracle::{
    composition_count, conditioned_poisson_pmf, enumerate_distribution, exact_chi_square_moments,
    exact_count_moments, multinomial_pmf, DEFAULT_CAP,
};
use multinomial_tails::poisson::{central_moment, expect_fn, poisson_pmf};
use multinomial_tails::serial::bin_word_bits;
use multinomial_tails::tail::{tail_probability, CorrectionCoeffs, Side, Zone, ZoneRule};

fn small_model() -> impl Strategy<Value = MultinomialModel> {
    (1u64..9, prop::collection::vec(0.05f64..1.0, 2..5)).prop_filter_map("enumerable", |(n, w)| {
        let total: f64 = w.iter().sum();
        let m = MultinomialModel::new(n, w.iter().map(|x| x / total).collect()).ok()?;
        (composition_count(n, m.cells()) <= 1e4).then_some(m)
    })
}

fn compositions(n: u64, cells: usize) -> Vec<Vec<u64>> {
    if cells == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, cells - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (-0.9f64..3.0).prop_map(|d| Kernel::pds(d).unwrap()),
        Just(Kernel::chi_square()),
        (0u64..4).prop_map(Kernel::count_exact),
        (1u64..4).prop_map(|r| Kernel::count_at_least(r).unwrap()),
        Just(Kernel::Collisions),
        prop::collection::vec(0.01f64..1.0, 2..4).prop_map(|w| {
            let t: f64 = w.iter().sum();
            Kernel::unfilled(LevelDistribution::new(w.iter().map(|x| x / t).collect()).unwrap())
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditional_poisson_identity(m in small_model()) {
        for c in compositions(m.n(), m.cells()) {
            let a = multinomial_pmf(&m, &c).unwrap();
            let b = conditioned_poisson_pmf(&m, &c).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn enumeration_is_normalized_and_matches_exact_moments(m in small_model()) {
        let rates: Vec<f64> = m.rates().collect();
        let chi = Kernel::chi_square();
        let law = enumerate_distribution(&m, &|c| chi.statistic(&rates, c).unwrap(), DEFAULT_CAP).unwrap();
        let total: f64 = law.probs.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let (mean, var) = exact_chi_square_moments(&m);
        prop_assert!((law.mean() - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        prop_assert!((law.variance() - var).abs() <= 1e-8 * var.abs().max(1.0));
        for r in 0..=2u64.min(m.n()) {
            let k = Kernel::count_exact(r);
            let law = enumerate_distribution(&m, &|c| k.statistic(&rates, c).unwrap(), DEFAULT_CAP).unwrap();
            let (mean, var) = exact_count_moments(&m, r).unwrap();
            prop_assert!((law.mean() - mean).abs() <= 1e-12);
            prop_assert!((law.variance() - var).abs() <= 1e-11);
        }
    }

    #[test]
    fn variance_identity(m in small_model(), k in kernel()) {
        let s = moment_summary(&m, &k, Method::Series).unwrap();
        let n = m.n() as f64;
        let lhs = s.variance;
        let rhs = s.raw_variance - n * s.tau * s.tau;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * s.raw_variance.max(1e-300));
        prop_assert!(s.variance <= s.raw_variance * (1.0 + 1e-12));
    }

    #[test]
    fn central_moments_match_series(v in 2usize..=10, lambda in 0.05f64..30.0) {
        let rec = central_moment(v, lambda).unwrap();
        let ser = expect_fn(|k| (k as f64 - lambda).powi(v as i32), lambda, 1e-15).unwrap();
        prop_assert!(((rec - ser) / rec).abs() <= 1e-10);
    }

    #[test]
    fn pmf_partial_sums(lambda in 0.01f64..100.0) {
        let top = (lambda + 20.0 * lambda.sqrt() + 60.0) as u64;
        let s: f64 = (0..=top).map(|l| poisson_pmf(l, lambda).unwrap()).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn first_order_tail_decreases(a in 0.0f64..5.0, b in 0.0f64..5.0) {
        prop_assume!(a < b);
        let s = moment_summary(&MultinomialModel::uniform(20, 5).unwrap(), &Kernel::chi_square(), Method::Series).unwrap();
        let zone = Zone { upsilon: 10.0, rule: ZoneRule::Chi2SparseDense, nu: 0.0, w: 10.0 };
        let pa = tail_probability(a, Side::Upper, &s, &CorrectionCoeffs::NONE, &zone, 0.5).unwrap();
        let pb = tail_probability(b, Side::Upper, &s, &CorrectionCoeffs::NONE, &zone, 0.5).unwrap();
        prop_assert!(pb.p_corrected < pa.p_corrected);
    }

    #[test]
    fn binning_is_unbiased_at_eight_bits(cells in 1u64..=256) {
        let mut hits = vec![0u64; cells as usize];
        for w in 0..256u64 {
            if let Some(c) = bin_word_bits(w, cells, 8) {
                hits[c as usize] += 1;
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 256 / cells));
    }
}
