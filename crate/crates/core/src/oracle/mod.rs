//! Ground truth for small models: exact probabilities, exact laws of
//! statistics by enumeration, exact occupancy moments, and Monte Carlo
//! tail estimates.

use std::f64::consts::PI;

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::model::MultinomialModel;
use crate::poisson::{ln_pmf, stirlerr, CompensatedSum};

mod enumerate;
mod mc;

pub use enumerate::{composition_count, enumerate_distribution, ExactDistribution, DEFAULT_CAP};
pub use mc::{
    mc_exceedance, mc_tail_estimate, sample_counts, simulate_statistics, trial_rng, wilson_interval, MIN_TRIALS,
    McEstimate, MultinomialSampler, TrialRng,
};

fn check_counts(model: &MultinomialModel, counts: &[u64]) -> Result<()> {
    if counts.len() != model.cells() {
        return Err(Error::Domain(format!(
            "{} counts for a model with {} cells",
            counts.len(),
            model.cells()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total != model.n() {
        return Err(Error::Domain(format!(
            "counts sum to {total}, the model has n = {}",
            model.n()
        )));
    }
    Ok(())
}

/// `n! / (m_1! ⋯ m_N!) · p_1^{m_1} ⋯ p_N^{m_N}`.
pub fn multinomial_pmf(model: &MultinomialModel, counts: &[u64]) -> Result<f64> {
    check_counts(model, counts)?;
    let mut ln = CompensatedSum::new();
    ln.add(ln_factorial(model.n()));
    for (&m, &p) in counts.iter().zip(model.probs()) {
        if m > 0 {
            ln.add(m as f64 * p.ln() - ln_factorial(m));
        }
    }
    Ok(ln.value().exp())
}

/// `Π π_{m_j}(np_j) / π_n(n)`: the independent Poisson vector conditioned
/// on its total being `n`.
pub fn conditioned_poisson_pmf(model: &MultinomialModel, counts: &[u64]) -> Result<f64> {
    check_counts(model, counts)?;
    let mut ln = CompensatedSum::new();
    for (&m, rate) in counts.iter().zip(model.rates()) {
        ln.add(ln_pmf(m, rate));
    }
    let n = model.n();
    ln.add(-ln_pmf(n, n as f64));
    Ok(ln.value().exp())
}

/// `ν_n = n! e^n / (2π n^n √n)`, which tends to `1/√(2π)`.
pub fn nu_n_constant(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("ν_n is defined for n >= 1".into()));
    }
    Ok(stirlerr(n).exp() / (2.0 * PI).sqrt())
}

/// Exact `(E μ_r, Var μ_r)` for the number of cells holding exactly `r` items.
pub fn exact_count_moments(model: &MultinomialModel, r: u64) -> Result<(f64, f64)> {
    let n = model.n();
    if r > n {
        return Err(Error::Domain(format!("r = {r} exceeds n = {n}")));
    }
    let groups: Vec<(f64, f64)> = {
        let nf = n as f64;
        model
            .rate_groups()
            .into_iter()
            .map(|(rate, mult)| (rate / nf, mult as f64))
            .collect()
    };
    let rf = r as f64;
    let ln_choose = ln_factorial(n) - ln_factorial(r) - ln_factorial(n - r);
    // P{η_m = r}
    let single = |p: f64| (ln_choose + rf * p.ln() + (n - r) as f64 * (-p).ln_1p()).exp();
    // P{η_m = r, η_k = r}
    let joint = |p: f64, q: f64| -> f64 {
        if 2 * r > n {
            return 0.0;
        }
        let rest = n - 2 * r;
        let free = 1.0 - p - q;
        if rest > 0 && free <= 0.0 {
            return 0.0;
        }
        let mut ln = ln_factorial(n) - 2.0 * ln_factorial(r) - ln_factorial(rest)
            + rf * (p.ln() + q.ln());
        if rest > 0 {
            ln += rest as f64 * free.ln();
        }
        ln.exp()
    };
    let singles: Vec<f64> = groups.iter().map(|&(p, _)| single(p)).collect();
    let mut mean = CompensatedSum::new();
    let mut var = CompensatedSum::new();
    for (i, &(p, mi)) in groups.iter().enumerate() {
        let qi = singles[i];
        mean.add(mi * qi);
        var.add(mi * qi * (1.0 - qi));
        for (j, &(q, mj)) in groups.iter().enumerate() {
            let pairs = if i == j { mi * (mi - 1.0) } else { mi * mj };
            if pairs > 0.0 {
                var.add(pairs * (joint(p, q) - qi * singles[j]));
            }
        }
    }
    Ok((mean.value(), var.value()))
}

/// Exact `(E χ², Var χ²)` of Pearson's statistic:
/// `N − 1` and `2(N − 1) + (Σ 1/p_m − N² − 2N + 2)/n`.
pub fn exact_chi_square_moments(model: &MultinomialModel) -> (f64, f64) {
    let cells = model.cells() as f64;
    let inv: CompensatedSum = model.probs().iter().map(|p| 1.0 / p).collect();
    let var = 2.0 * (cells - 1.0) + (inv.value() - cells * cells - 2.0 * cells + 2.0) / model.n() as f64;
    (cells - 1.0, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_examples() {
        let m = MultinomialModel::uniform(2, 2).unwrap();
        assert!((multinomial_pmf(&m, &[1, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((multinomial_pmf(&m, &[2, 0]).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(multinomial_pmf(&m, &[1, 0]), Err(Error::Domain(_))));
        assert!(multinomial_pmf(&m, &[1, 1, 0]).is_err());
        assert!((conditioned_poisson_pmf(&m, &[1, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((conditioned_poisson_pmf(&m, &[0, 2]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stirling_constant() {
        let e = std::f64::consts::E;
        assert!((nu_n_constant(1).unwrap() - e / (2.0 * PI)).abs() < 1e-15);
        let ten = nu_n_constant(10).unwrap();
        let series = (1.0 + 1.0 / 120.0) / (2.0 * PI).sqrt();
        assert!((ten - series).abs() < 0.01);
        assert!(nu_n_constant(0).is_err());
    }

    #[test]
    fn count_moment_examples() {
        let m = MultinomialModel::uniform(2, 2).unwrap();
        let (mean0, var0) = exact_count_moments(&m, 0).unwrap();
        assert!((mean0 - 0.5).abs() < 1e-15);
        assert!((var0 - 0.25).abs() < 1e-15);
        assert!((exact_count_moments(&m, 1).unwrap().0 - 1.0).abs() < 1e-15);
        let m = MultinomialModel::new(5, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let total: f64 = (0..=5).map(|r| exact_count_moments(&m, r).unwrap().0).sum();
        assert!((total - 4.0).abs() < 1e-13);
        assert!(exact_count_moments(&m, 6).is_err());
    }
}
