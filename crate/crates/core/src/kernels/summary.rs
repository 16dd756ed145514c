use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::closed::{asymptotic_moments, exact_moments, Moments};
use super::Kernel;
use crate::error::{invalid, Error, Result};
use crate::model::{classify_regime, MultinomialModel, RegimeThresholds};
use crate::poisson::{expect_fn_multi, CompensatedSum, SERIES_TOL};

const CROSS_CHECK_TOL: f64 = 1e-8;

/// Poissonized moments of `R_N`.
///
/// With `ξ_m ~ Poi(np_m)` independent and
/// `g_m(x) = h_m(x) − E h_m(ξ_m) − τ_n (x − np_m)`:
///
/// ```text
/// A_N  = Σ E h_m(ξ_m)            τ_n = n⁻¹ Σ cov(h_m(ξ_m), ξ_m)
/// σ̃_N² = Σ Var h_m(ξ_m)          σ_N² = Σ E g_m²(ξ_m) = σ̃_N² − n τ_n²
/// β_lN = Σ E g_m^l(ξ_m)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    #[serde(rename = "A_N")]
    pub mean: f64,
    #[serde(rename = "tau_n")]
    pub tau: f64,
    #[serde(rename = "sigma_tilde_sq")]
    pub raw_variance: f64,
    #[serde(rename = "sigma_sq")]
    pub variance: f64,
    #[serde(rename = "beta_3N")]
    pub beta3: f64,
    #[serde(rename = "beta_4N")]
    pub beta4: f64,
    /// `Σ (E g_m²(ξ_m))²`.
    pub g2_sq_sum: f64,
    /// `Σ E g_m²(ξ_m)(ξ_m − np_m)`.
    pub g2_cross_sum: f64,
}

impl MomentSummary {
    /// `σ_N`.
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `(r − A_N) / σ_N`.
    pub fn standardize(&self, r: f64) -> f64 {
        (r - self.mean) / self.sd()
    }

    /// `A_N + x σ_N`.
    pub fn threshold(&self, x: f64) -> f64 {
        self.mean + x * self.sd()
    }
}

/// How the first two moments are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Per-cell Poisson series; always available.
    Series,
    /// Closed forms for the family and regime. Cumulants `β_3N`, `β_4N`
    /// still come from the series.
    ClosedForm,
    /// Series, checked against an exact closed form whenever one exists.
    #[default]
    Auto,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "series" => Ok(Method::Series),
            "closed" | "closed_form" | "closed-form" => Ok(Method::ClosedForm),
            "auto" => Ok(Method::Auto),
            _ => Err(invalid("method", format!("unknown method {s:?}"))),
        }
    }
}

pub fn moment_summary(
    model: &MultinomialModel,
    kernel: &Kernel,
    method: Method,
) -> Result<MomentSummary> {
    let series = series_summary(model, kernel)?;
    match method {
        Method::Series => Ok(series),
        Method::Auto => {
            if let Some(exact) = exact_moments(model, kernel) {
                cross_check(&series, &exact?, model.n())?;
            }
            Ok(series)
        }
        Method::ClosedForm => {
            let closed = match exact_moments(model, kernel) {
                Some(exact) => exact?,
                None => {
                    let regime = classify_regime(model, &RegimeThresholds::default());
                    asymptotic_moments(model, kernel, regime)?
                }
            };
            Ok(MomentSummary {
                mean: closed.mean,
                tau: closed.tau,
                raw_variance: closed.raw_variance,
                variance: closed.variance,
                ..series
            })
        }
    }
}

fn cross_check(series: &MomentSummary, closed: &Moments, n: u64) -> Result<()> {
    let spread = closed.raw_variance.abs();
    let fields = [
        ("A_N", series.mean, closed.mean, spread.sqrt()),
        ("tau_n", series.tau, closed.tau, (spread / n as f64).sqrt()),
        ("sigma_tilde_sq", series.raw_variance, closed.raw_variance, spread),
        ("sigma_sq", series.variance, closed.variance, spread),
    ];
    for (what, s, c, floor) in fields {
        if (s - c).abs() > CROSS_CHECK_TOL * c.abs().max(floor) {
            return Err(Error::CrossCheck {
                what,
                series: s,
                closed: c,
            });
        }
    }
    Ok(())
}

fn series_summary(model: &MultinomialModel, kernel: &Kernel) -> Result<MomentSummary> {
    let n = model.n() as f64;
    let groups = model.rate_groups();

    // Pass 1: E h and cov(h, ξ) per distinct rate.
    let mut means = Vec::with_capacity(groups.len());
    let mut cov = CompensatedSum::new();
    for &(lam, mult) in &groups {
        let [e1, c] = expect_fn_multi(
            |k| {
                let h = kernel.value(k, lam);
                [h, h * (k as f64 - lam)]
            },
            lam,
            SERIES_TOL,
        )?;
        means.push(e1);
        cov.add(mult as f64 * c);
    }
    let tau = cov.value() / n;

    // Pass 2: central quantities of h and of g.
    let mut mean = CompensatedSum::new();
    let mut raw = CompensatedSum::new();
    let mut var = CompensatedSum::new();
    let mut b3 = CompensatedSum::new();
    let mut b4 = CompensatedSum::new();
    let mut g2sq = CompensatedSum::new();
    let mut cross = CompensatedSum::new();
    for (&(lam, mult), &e1) in groups.iter().zip(&means) {
        let powers = |dev: f64, y: f64| {
            let g = dev - tau * y;
            let g2 = g * g;
            [dev * dev, g2, g2 * g, g2 * g2, g2 * y]
        };
        let [v, eg2, eg3, eg4, eg2y] = if kernel.is_randomized() {
            // the cell contribution is Bernoulli(q(x)) given x
            expect_fn_multi(
                |k| {
                    let q = kernel.value(k, lam);
                    let y = k as f64 - lam;
                    let one = powers(1.0 - e1, y);
                    let zero = powers(-e1, y);
                    std::array::from_fn(|i| q * one[i] + (1.0 - q) * zero[i])
                },
                lam,
                SERIES_TOL,
            )?
        } else {
            expect_fn_multi(
                |k| powers(kernel.value(k, lam) - e1, k as f64 - lam),
                lam,
                SERIES_TOL,
            )?
        };
        let m = mult as f64;
        mean.add(m * e1);
        raw.add(m * v);
        var.add(m * eg2);
        b3.add(m * eg3);
        b4.add(m * eg4);
        g2sq.add(m * eg2 * eg2);
        cross.add(m * eg2y);
    }
    Ok(MomentSummary {
        mean: mean.value(),
        tau,
        raw_variance: raw.value(),
        variance: var.value(),
        beta3: b3.value(),
        beta4: b4.value(),
        g2_sq_sum: g2sq.value(),
        g2_cross_sum: cross.value(),
    })
}
