//! Closed-form first and second moments.
//!
//! Exact forms (valid for every model) exist for integer-index power
//! divergences, the count statistics and, on uniform models, the
//! unfilled-cell statistic. The very sparse power-divergence forms are
//! leading-order asymptotics and are never used as a cross-check.

use std::f64::consts::LN_2;

use super::{level_tau, Kernel, PdsFrame, PowerDivergence};
use crate::error::{Error, Result};
use crate::model::{MultinomialModel, Regime, RegimeTag};
use crate::poisson::{central_moment, poisson_pmf, poisson_sf, CompensatedSum, MAX_MOMENT_ORDER};

/// Largest integer index served by the polynomial closed forms.
const MAX_INTEGER_INDEX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Moments {
    pub mean: f64,
    pub tau: f64,
    pub raw_variance: f64,
    pub variance: f64,
}

impl Moments {
    fn from_sums(mean: f64, cov: f64, raw_variance: f64, n: f64) -> Self {
        let tau = cov / n;
        Self {
            mean,
            tau,
            raw_variance,
            variance: raw_variance - n * tau * tau,
        }
    }
}

/// Exact Poissonized moments, or `None` when the family has no closed form.
pub(super) fn exact_moments(model: &MultinomialModel, kernel: &Kernel) -> Option<Result<Moments>> {
    match kernel {
        Kernel::Pds(p) => {
            let d = p.d();
            if d.fract() != 0.0 || !(1.0..=MAX_INTEGER_INDEX).contains(&d) {
                return None;
            }
            if d == 1.0 && p.frame() == PdsFrame::Cressie {
                return Some(Ok(chi_square(model)));
            }
            Some(integer_pds(model, *p))
        }
        Kernel::CountExact { r } => Some(count_exact(model, *r)),
        Kernel::CountAtLeast { r } => Some(count_at_least(model, *r)),
        Kernel::Collisions => Some(collisions(model)),
        Kernel::Unfilled { levels } => {
            if !model.is_uniform() {
                return None;
            }
            let cells = model.cells() as f64;
            let lam = model.lambda();
            Some(level_tau(levels, lam).map(|(t, dt)| {
                let raw = cells * t * (1.0 - t);
                Moments {
                    mean: cells * t,
                    tau: dt,
                    raw_variance: raw,
                    variance: cells * (t * (1.0 - t) - lam * dt * dt),
                }
            }))
        }
    }
}

/// `A_N = N`, `τ_n = 1/λ_n`, `σ̃_N² = Σ 1/np_m + 2N`,
/// `σ_N² = 2N + Σ (1/np_m − 1/λ_n)`.
fn chi_square(model: &MultinomialModel) -> Moments {
    let cells = model.cells() as f64;
    let lam = model.lambda();
    let inv: CompensatedSum = model.rates().map(|r| 1.0 / r).collect();
    let excess: CompensatedSum = model.rates().map(|r| 1.0 / r - 1.0 / lam).collect();
    Moments {
        mean: cells,
        tau: 1.0 / lam,
        raw_variance: inv.value() + 2.0 * cells,
        variance: 2.0 * cells + excess.value(),
    }
}

/// Integer `d`: expand `h` as a polynomial in `y = x − np` and take Poisson
/// central moments termwise.
fn integer_pds(model: &MultinomialModel, p: PowerDivergence) -> Result<Moments> {
    let d = p.d() as usize;
    let top = d + 1;
    if 2 * top + 1 > MAX_MOMENT_ORDER {
        return Err(Error::Unsupported(format!("index {d} is too large for closed forms")));
    }
    let binom = |k: usize, j: usize| -> f64 {
        (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
    };
    let n = model.n() as f64;
    let (mut mean, mut cov, mut raw) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (lam, mult) in model.rate_groups() {
        // h(λ + y) = Σ_j a_j y^j
        let mut a = vec![0.0; top + 1];
        for (j, slot) in a.iter_mut().enumerate() {
            let c = binom(top, j);
            *slot = match p.frame() {
                PdsFrame::Power => c * lam.powi(1 - j as i32),
                PdsFrame::Bare => c * lam.powi((top - j) as i32),
                // x^{d+1}/λ^d − (d+1)x + dλ drops the j ≤ 1 terms
                PdsFrame::Cressie if j >= 2 => 2.0 * c * lam.powi(1 - j as i32) / (d * top) as f64,
                PdsFrame::Cressie => 0.0,
            };
        }
        let mu = (0..=2 * top + 1)
            .map(|v| central_moment(v, lam))
            .collect::<Result<Vec<_>>>()?;
        let m = mult as f64;
        let e1: f64 = (0..=top).map(|j| a[j] * mu[j]).sum();
        let c: f64 = (0..=top).map(|j| a[j] * mu[j + 1]).sum();
        let mut v = 0.0;
        for j in 1..=top {
            for k in 1..=top {
                v += a[j] * a[k] * (mu[j + k] - mu[j] * mu[k]);
            }
        }
        mean.add(m * e1);
        cov.add(m * c);
        raw.add(m * v);
    }
    Ok(Moments::from_sums(mean.value(), cov.value(), raw.value(), n))
}

/// `A_rN = Σ π_r(np_m)`, `τ_rN = n⁻¹ Σ (r − np_m) π_r(np_m)`,
/// `σ̃_rN² = Σ π_r(1 − π_r)`.
fn count_exact(model: &MultinomialModel, r: u64) -> Result<Moments> {
    let (mut mean, mut cov, mut raw) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (lam, mult) in model.rate_groups() {
        let m = mult as f64;
        let pi = poisson_pmf(r, lam)?;
        mean.add(m * pi);
        cov.add(m * (r as f64 - lam) * pi);
        raw.add(m * pi * (1.0 - pi));
    }
    Ok(Moments::from_sums(mean.value(), cov.value(), raw.value(), model.n() as f64))
}

/// `w_r`: `q = P{ξ ≥ r}`, `cov(I{ξ ≥ r}, ξ) = np π_{r−1}(np)`; `w_1 = N − μ_0`.
fn count_at_least(model: &MultinomialModel, r: u64) -> Result<Moments> {
    if r == 0 {
        return Err(Error::Domain("at-least counts need r >= 1".into()));
    }
    let (mut mean, mut cov, mut raw) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for (lam, mult) in model.rate_groups() {
        let m = mult as f64;
        let q = poisson_sf(r, lam)?;
        mean.add(m * q);
        cov.add(m * lam * poisson_pmf(r - 1, lam)?);
        raw.add(m * q * (1.0 - q));
    }
    Ok(Moments::from_sums(mean.value(), cov.value(), raw.value(), model.n() as f64))
}

/// `C_n = μ_0 − (n − N)`: mean and `τ` shift, variance of `ξ + I{ξ = 0}`.
fn collisions(model: &MultinomialModel) -> Result<Moments> {
    let empty = count_exact(model, 0)?;
    let mut raw = CompensatedSum::new();
    for (lam, mult) in model.rate_groups() {
        let pi0 = poisson_pmf(0, lam)?;
        raw.add(mult as f64 * (lam - 2.0 * lam * pi0 + pi0 * (1.0 - pi0)));
    }
    let n = model.n() as f64;
    let shift = n - model.cells() as f64;
    Ok(Moments::from_sums(empty.mean + shift, n * (empty.tau + 1.0), raw.value(), n))
}

/// Leading-order moments of power divergences in the very sparse regime.
pub(super) fn asymptotic_moments(
    model: &MultinomialModel,
    kernel: &Kernel,
    regime: Regime,
) -> Result<Moments> {
    let Kernel::Pds(p) = kernel else {
        return Err(Error::Unsupported(format!(
            "no closed form for {} on this model",
            kernel.label()
        )));
    };
    if regime.tag != RegimeTag::VerySparse {
        return Err(Error::Unsupported(format!(
            "no closed form for {} in the {:?} regime",
            kernel.label(),
            regime.tag
        )));
    }
    let d = p.d();
    let n = model.n() as f64;
    let lam = model.lambda();
    let power = match p.frame() {
        PdsFrame::Bare => {
            if !regime.uniform {
                return Err(Error::Unsupported(
                    "the bare power kernel has closed forms on uniform models only".into(),
                ));
            }
            return Ok(if d == 0.0 {
                let s2 = 8.0 * LN_2 * LN_2 * n * lam;
                with_tau(2.0 * LN_2 * n * lam, s2, s2, n)
            } else {
                with_tau(n, n, 2.0 * (2f64.powf(d) - 1.0).powi(2) * n * lam, n)
            });
        }
        _ => power_very_sparse(model, d, regime.uniform),
    };
    Ok(match p.frame() {
        PdsFrame::Cressie => to_cressie(power, d, n),
        _ => power,
    })
}

fn with_tau(mean: f64, raw_variance: f64, variance: f64, n: f64) -> Moments {
    // τ from the variance identity, so that σ² = σ̃² − nτ² holds exactly
    let tau = ((raw_variance - variance).max(0.0) / n).sqrt();
    Moments {
        mean,
        tau,
        raw_variance,
        variance,
    }
}

/// `h = np (x/np)^{d+1}` (or `2x ln(x/np)`), with `P_jN(a) = Σ p_m^{j−a}`.
fn power_very_sparse(model: &MultinomialModel, d: f64, uniform: bool) -> Moments {
    let n = model.n() as f64;
    let lam = model.lambda();
    if d == 0.0 {
        if uniform {
            // 2x ln(x/λ) = 2x ln x − 2x ln λ on a uniform model
            let s2 = 8.0 * LN_2 * LN_2 * n * lam;
            return with_tau(
                2.0 * LN_2 * n * lam - 2.0 * n * lam.ln(),
                4.0 * n * lam.ln().powi(2),
                s2,
                n,
            );
        }
        // Z = −ln np_m with probability p_m
        let ez: CompensatedSum = model
            .probs()
            .iter()
            .map(|&p| -p * (n * p).ln())
            .collect();
        let ez2: CompensatedSum = model
            .probs()
            .iter()
            .map(|&p| p * (n * p).ln().powi(2))
            .collect();
        let (ez, ez2) = (ez.value(), ez2.value());
        return with_tau(2.0 * n * ez, 4.0 * n * ez2, 4.0 * n * (ez2 - ez * ez), n);
    }
    let pjn = |j: i32, a: f64| -> f64 {
        let s: CompensatedSum = model.probs().iter().map(|&p| p.powf(j as f64 - a)).collect();
        s.value()
    };
    let (p1d, p12d, p2d, p22d) = (pjn(1, d), pjn(1, 2.0 * d), pjn(2, d), pjn(2, 2.0 * d));
    let mean = n.powf(1.0 - d) * p1d;
    let raw = n.powf(1.0 - 2.0 * d) * p12d;
    let two_d = 2f64.powf(d);
    let variance = n.powf(1.0 - 2.0 * d) * (p12d - p1d * p1d)
        + 2.0
            * n.powf(2.0 * (1.0 - d))
            * ((two_d * two_d - 1.0) * p22d - 2.0 * (two_d - 1.0) * p1d * p2d);
    with_tau(mean, raw, variance, n)
}

/// Maps power-frame moments through `h_C = s (h_P − k x + k' np)`.
fn to_cressie(p: Moments, d: f64, n: f64) -> Moments {
    let (s, k, k_prime) = if d == 0.0 {
        (1.0, 2.0, 2.0)
    } else {
        (2.0 / (d * (d + 1.0)), d + 1.0, d)
    };
    Moments {
        mean: s * (p.mean - (k - k_prime) * n),
        tau: s * (p.tau - k),
        raw_variance: s * s * (p.raw_variance - 2.0 * k * n * p.tau + k * k * n),
        variance: s * s * p.variance,
    }
}
