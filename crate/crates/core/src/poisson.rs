//! Poisson probabilities, moments and expectations.
//!
//! Everything here is a pure function of its arguments. The two coefficient
//! tables (central-moment coefficients and Stirling numbers of the second
//! kind) are built once on first use and are read-only afterwards.
//!
//! Central moments of `ξ ~ Poi(λ)` are polynomials in `λ`:
//!
//! ```text
//! μ_v(λ) = E(ξ − λ)^v = v! Σ_{l=1}^{⌊v/2⌋} c_{l,v} λ^l,
//! (v+1) c_{l,v+1} = l c_{l,v} + c_{l−1,v−1},
//! ```
//!
//! and raw moments are Touchard polynomials, `Eξ^k = Σ_l S(k, l) λ^l`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Largest moment order served from the cached tables. `v!` stays finite
/// for every order up to this bound.
pub const MAX_MOMENT_ORDER: usize = 150;

/// Default relative tolerance used by series evaluations inside the crate.
pub const SERIES_TOL: f64 = 1e-15;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Poisson rate must be finite and positive, got {lambda}"
        )))
    }
}

/// `ln l! − [(l + ½) ln l − l + ½ ln 2π]`, the Stirling remainder.
pub(crate) fn stirlerr(l: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = l as f64;
    if l <= 15 {
        // ln l! is tabulated exactly here and the cancellation stays small
        return ln_factorial(l) - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if l > 500 {
        return (S0 - S1 / nn) / n;
    }
    if l > 80 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if l > 35 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// `x ln(x/m) + m − x`, without cancellation when `x ≈ m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        return s;
    }
    x * (x / m).ln() + m - x
}

/// `ln π_l(λ)` without argument checks, by the saddle-point split
/// `−stirlerr(l) − bd0(l, λ) − ½ ln(2πl)`.
#[inline]
pub(crate) fn ln_pmf(l: u64, lambda: f64) -> f64 {
    if l == 0 {
        return -lambda;
    }
    let x = l as f64;
    -stirlerr(l) - bd0(x, lambda) - 0.5 * (2.0 * PI * x).ln()
}

/// `π_l(λ) = λ^l e^{−λ} / l!`, evaluated in log space.
pub fn poisson_pmf(l: u64, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    Ok(ln_pmf(l, lambda).exp())
}

/// `P{ξ ≥ r}` for `ξ ~ Poi(λ)`, summing whichever side avoids cancellation.
pub fn poisson_sf(r: u64, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    if r == 0 {
        return Ok(1.0);
    }
    if r as f64 > lambda {
        let mut term = ln_pmf(r, lambda).exp();
        let mut sum = CompensatedSum::new();
        let mut k = r;
        while term > 0.0 {
            sum.add(term);
            if term <= 1e-17 * sum.value() {
                break;
            }
            k += 1;
            term *= lambda / k as f64;
        }
        Ok(sum.value())
    } else {
        let below: CompensatedSum = (0..r).map(|l| ln_pmf(l, lambda).exp()).collect();
        Ok((1.0 - below.value()).max(0.0))
    }
}

/// Coefficients `c_{l,v}`, `l = 1..=⌊v/2⌋`, of the central moment `μ_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralMomentTable {
    pub order: usize,
    /// `coeffs[l - 1] = c_{l,v}`.
    pub coeffs: Vec<f64>,
}

impl CentralMomentTable {
    /// `μ_v(λ) = v! Σ c_{l,v} λ^l`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let v_fact = ln_factorial(self.order as u64).exp();
        // Horner over l = ⌊v/2⌋..1; the polynomial has no constant term.
        let poly = self
            .coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| (acc + c) * lambda);
        v_fact * poly
    }

    /// `c_{l,v}` for `1 ≤ l ≤ ⌊v/2⌋`, zero otherwise.
    pub fn coeff(&self, l: usize) -> f64 {
        if l == 0 || l > self.coeffs.len() {
            0.0
        } else {
            self.coeffs[l - 1]
        }
    }
}

// rows[v][l] = c_{l,v} for l = 0..=⌊v/2⌋ (index 0 is zero except for v = 0).
fn central_rows() -> &'static [Vec<f64>] {
    static ROWS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(MAX_MOMENT_ORDER + 1);
        rows.push(vec![1.0]); // μ_0 = 1
        rows.push(vec![0.0]); // μ_1 = 0
        for v in 1..MAX_MOMENT_ORDER {
            // (v+1) c_{l,v+1} = l c_{l,v} + c_{l−1,v−1}; entries past a row's
            // end are zero, which yields the odd-v boundary rule
            // (v+1) c_{⌊(v+1)/2⌋,v+1} = c_{⌊(v−1)/2⌋,v−1}.
            let top = v.div_ceil(2);
            let prev = &rows[v];
            let prev2 = &rows[v - 1];
            let at = |row: &Vec<f64>, l: usize| row.get(l).copied().unwrap_or(0.0);
            let mut next = vec![0.0; top + 1];
            for (l, slot) in next.iter_mut().enumerate().skip(1) {
                *slot = (l as f64 * at(prev, l) + at(prev2, l - 1)) / (v + 1) as f64;
            }
            rows.push(next);
        }
        rows
    })
}

/// Coefficient table of `μ_v` built by the three-term recursion.
pub fn central_moment_coeffs(v: usize) -> Result<CentralMomentTable> {
    if v < 2 {
        return Err(Error::Domain(format!(
            "central moment coefficient tables start at order 2, got {v}"
        )));
    }
    if v > MAX_MOMENT_ORDER {
        return Err(Error::Domain(format!(
            "moment order {v} exceeds the supported maximum {MAX_MOMENT_ORDER}"
        )));
    }
    Ok(CentralMomentTable {
        order: v,
        coeffs: central_rows()[v][1..].to_vec(),
    })
}

/// `μ_v(λ) = E(ξ − λ)^v` for `ξ ~ Poi(λ)`.
pub fn central_moment(v: usize, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    match v {
        0 => Ok(1.0),
        1 => Ok(0.0),
        _ => Ok(central_moment_coeffs(v)?.eval(lambda)),
    }
}

fn stirling_rows() -> &'static [Vec<f64>] {
    static ROWS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(MAX_MOMENT_ORDER + 1);
        rows.push(vec![1.0]);
        for k in 1..=MAX_MOMENT_ORDER {
            let prev = &rows[k - 1];
            let mut next = vec![0.0; k + 1];
            for l in 1..=k {
                let keep = if l < prev.len() { l as f64 * prev[l] } else { 0.0 };
                next[l] = keep + prev[l - 1];
            }
            rows.push(next);
        }
        rows
    })
}

/// Stirling number of the second kind `S(k, l)`.
pub fn stirling2(k: usize, l: usize) -> Result<f64> {
    if k > MAX_MOMENT_ORDER {
        return Err(Error::Domain(format!(
            "order {k} exceeds the supported maximum {MAX_MOMENT_ORDER}"
        )));
    }
    Ok(stirling_rows()[k].get(l).copied().unwrap_or(0.0))
}

/// `Eξ^k` for `ξ ~ Poi(λ)`.
///
/// The coefficients `k!·c_{l,k}` of the raw-moment polynomial are the
/// Stirling numbers `S(k, l)`; the test suite checks this against direct
/// series summation.
pub fn raw_moment(k: usize, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    if k > MAX_MOMENT_ORDER {
        return Err(Error::Domain(format!(
            "order {k} exceeds the supported maximum {MAX_MOMENT_ORDER}"
        )));
    }
    let row = &stirling_rows()[k];
    Ok(row.iter().rev().fold(0.0, |acc, &s| acc * lambda + s))
}

/// Index past which the tail of `π_k(λ)` decays super-geometrically.
fn tail_start(lambda: f64) -> f64 {
    lambda + 10.0 * lambda.sqrt() + 50.0
}

fn iteration_cap(lambda: f64) -> u64 {
    (2.0 * lambda + 100.0 * lambda.sqrt() + 1000.0).ceil() as u64
}

/// Below this index every `π_k(λ)` is smaller than `e^{-800}` relative to the mode.
fn head_start(lambda: f64) -> u64 {
    let lo = lambda - 40.0 * lambda.sqrt() - 40.0;
    if lo > 0.0 {
        lo.floor() as u64
    } else {
        0
    }
}

/// Evaluates `D` expectations `E φ_i(ξ)` in one pass over the Poisson law.
///
/// Summation stops once `k` is past `λ + 10√λ + 50` and every running term
/// is at most `tol` times its accumulated sum in magnitude. Indices so far
/// below the mode that `π_k(λ)` underflows are skipped.
pub fn expect_fn_multi<const D: usize, F>(mut phi: F, lambda: f64, tol: f64) -> Result<[f64; D]>
where
    F: FnMut(u64) -> [f64; D],
{
    check_rate(lambda)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut acc = [CompensatedSum::new(); D];
    let start = tail_start(lambda);
    let cap = iteration_cap(lambda);
    let mut k = head_start(lambda);
    loop {
        let w = ln_pmf(k, lambda).exp();
        let vals = phi(k);
        let mut small = true;
        for (sum, &v) in acc.iter_mut().zip(vals.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "Poisson expectation",
                    k,
                });
            }
            let term = v * w;
            sum.add(term);
            if term.abs() > tol * sum.value().abs() {
                small = false;
            }
        }
        if small && (k as f64) > start {
            break;
        }
        k += 1;
        if k > cap {
            return Err(Error::NoConvergence {
                what: "Poisson expectation",
                cap,
            });
        }
    }
    Ok(acc.map(|s| s.value()))
}

/// `E φ(ξ)` for `ξ ~ Poi(λ)` by truncated series summation.
///
/// The caller guarantees that `|φ(k)|` grows at most geometrically in `k`.
/// A non-finite `φ(k)` aborts with [`Error::NonFinite`] carrying `k`.
pub fn expect_fn<F>(mut phi: F, lambda: f64, tol: f64) -> Result<f64>
where
    F: FnMut(u64) -> f64,
{
    expect_fn_multi(|k| [phi(k)], lambda, tol).map(|[v]| v)
}

/// `E φ(ξ) = Σ_v λ^v / v! · Δ^v φ(0)`, truncated after `max_order`.
///
/// Intended for small rates (`λ < 1`), where it gives an evaluation path
/// independent of the Poisson weights.
pub fn expect_fn_forward_diff<F>(phi: F, lambda: f64, max_order: usize) -> Result<f64>
where
    F: Fn(u64) -> f64,
{
    check_rate(lambda)?;
    if max_order < 1 {
        return Err(Error::Domain("max_order must be at least 1".into()));
    }
    let values: Vec<f64> = (0..=max_order as u64).map(&phi).collect();
    let mut total = CompensatedSum::new();
    let mut weight = 1.0; // λ^v / v!
    for v in 0..=max_order {
        // Δ^v φ(0) = Σ_l C(v, l) (−1)^l φ(v − l)
        let mut diff = CompensatedSum::new();
        let mut binom = 1.0;
        for l in 0..=v {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            diff.add(sign * binom * values[v - l]);
            binom = binom * (v - l) as f64 / (l + 1) as f64;
        }
        total.add(weight * diff.value());
        weight *= lambda / (v + 1) as f64;
    }
    Ok(total.value())
}
