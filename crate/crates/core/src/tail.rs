//! Cramér-type tail approximations
//! `P{R_N > A_N + xσ_N} ≈ (1 − Φ(x)) exp{M(x)}` and their validity zones.
//!
//! `M(u) = u³(μ_0 + μ_1 u)`, truncated by the correction order, with
//! `μ_0 = β_3N / 6σ_N³` and
//!
//! ```text
//! μ_1 = β_4N/24σ⁴ − β_3N²/8σ⁶ + (Σ E g_m²(ξ_m)(ξ_m − np_m))²/nσ⁴ − Σ (E g_m²)²/8σ⁴.
//! ```
//!
//! The third term of `μ_1` is used exactly as it is usually printed; it is
//! not dimensionally homogeneous with the others, which is why order 2 is
//! opt-in.
//!
//! # Zones
//!
//! The theory states zones as `x = o(Υ_n)`. [`zone_bound`] picks the first
//! matching row below and returns the numeric `Υ_n`; a result is flagged
//! in-zone when `x ≤ zone_fraction · Υ_n`. Helper quantities:
//! `K_n(a, b) = (n^{1−b} p_max^{−b})^{1/(1+max(1,a))}`,
//! `k_n = ⌊min(1/p_max, K_n(a_1, b_1), K_n(a_2, b_2))⌋`,
//! `∇_n = max(1, 1/(n p_min))`, `d* = max(0, d)`. "Bounded" means
//! `1/B ≤ N p_min ≤ N p_max ≤ B` with `B = cell_ratio_bound`.
//!
//! | rule | kernel | regime | `Υ_n` | `ν` | `W_n` |
//! |---|---|---|---|---|---|
//! | `chi2-sparse-dense` | χ² | sparse, dense | `min(N^{1/6}, p_max^{−1/4})` | 1 | `σ³/(σ̃²∇_n)` |
//! | `chi2-very-sparse` | χ² | very sparse, non-uniform | `min(W^{1/3}, √k_n)`, `(a,b) ∈ {(2,0), (1,1)}` | 1 | `σ³/(σ̃²∇_n)` |
//! | `pds-sparse-light` | `d ≤ 0` | sparse | `√N` | 0 | `σ³/σ̃²` |
//! | `pds-sparse-heavy` | `d > 0` | sparse | `min(N^{1/6}, N^{1/(2(1+2d))})` | `d` | `√N` |
//! | `pds-dense` | any `d` | dense | `min(N^{1/6}, p_max^{−1/4})` | 1 | `√N` |
//! | `pds-very-sparse-uniform` | any `d` | very sparse, uniform | `min(√k_n, (nλ³)^{1/(2(1+2d*))})`, `(a,b) = (0,0)` | `d*` | `(nλ³)^{1/2}` |
//! | `pds-very-sparse` | any `d` | very sparse | `min(√k_n, W^{1/(1+2d*)})`, `(a,b) = (0,0)` | `d*` | `σ³(np_min)^d/σ̃²`, or `σ³/(σ̃²\|ln np_min\|)` at `d = 0` |
//! | `count-central` | `μ_r`, `w_r`, `C_n` | sparse, bounded | `√N` | 0 | `σ³/σ̃²` |
//! | `count-left` | `μ_r`, `w_r`, `C_n` | very sparse, bounded | `n^{1/4}` | 0 | `σ³/σ̃²` |
//! | `count-right` | `μ_r`, `w_r`, `C_n` | dense, bounded | `min(W, √k_n)`, `(a,b) = (0,2)` | 0 | `σ³/σ̃²` |
//! | `count-general` | `μ_r`, `w_r`, `C_n` | any | `min(W, √k_n)`, `(a,b) ∈ {(0,0), (1,2)}` | 0 | `σ³/σ̃²` |
//! | `unfilled-central` | `Φ_N` | sparse, uniform | `√N` | 0 | `σ³/σ̃²` |
//! | `unfilled-left` | `Φ_N` | very sparse, uniform | `n^{1/4}` | 0 | `σ³/σ̃²` |
//! | `unfilled-right` | `Φ_N` | dense, uniform | `min(W, √k_n)`, `(a,b) = (0,2)` | 0 | `σ³/σ̃²` |
//!
//! χ² moments for the χ² rows are taken in the centered frame `(x − np)²/np`;
//! the other power-divergence rows use the power frame `np(x/np)^{d+1}`.
//! The unfilled-cell statistic has no rule on non-uniform models.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{moment_summary, Kernel, Method, MomentSummary, PdsFrame};
use crate::model::{classify_regime, MultinomialModel, RegimeTag, RegimeThresholds};
use crate::normal;

/// Default fraction of `Υ_n` below which results are flagged in-zone.
pub const DEFAULT_ZONE_FRACTION: f64 = 0.5;

/// Constant of the correction-size bound `|M(x)| ≤ c|x|³/W^{1/(1+2ν)}`.
pub const CORRECTION_BOUND_CONSTANT: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `P{R_N > A_N + xσ_N}`.
    Upper,
    /// `P{R_N < A_N − xσ_N}`.
    Lower,
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Side::Upper),
            "lower" => Ok(Side::Lower),
            _ => Err(invalid("side", format!("expected upper or lower, got {s:?}"))),
        }
    }
}

/// Leading coefficients of `M(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionCoeffs {
    pub mu0: f64,
    pub mu1: f64,
    /// Number of `μ` terms used: 0 gives `M ≡ 0`.
    pub order: u8,
}

impl CorrectionCoeffs {
    pub const NONE: CorrectionCoeffs = CorrectionCoeffs {
        mu0: 0.0,
        mu1: 0.0,
        order: 0,
    };

    /// `M(u)`.
    pub fn exponent(&self, u: f64) -> f64 {
        match self.order {
            0 => 0.0,
            1 => u * u * u * self.mu0,
            _ => u * u * u * (self.mu0 + self.mu1 * u),
        }
    }
}

pub fn correction_coeffs(summary: &MomentSummary, n: u64, order: u8) -> Result<CorrectionCoeffs> {
    if order > 2 {
        return Err(invalid("order", format!("correction order must be 0, 1 or 2, got {order}")));
    }
    let s2 = summary.variance;
    if !(s2 > 0.0) {
        return Err(Error::DegenerateVariance(s2));
    }
    let s4 = s2 * s2;
    let s3 = s2 * s2.sqrt();
    let b3 = summary.beta3;
    let mu0 = b3 / (6.0 * s3);
    let mu1 = summary.beta4 / (24.0 * s4) - b3 * b3 / (8.0 * s4 * s2)
        + summary.g2_cross_sum.powi(2) / (n as f64 * s4)
        - summary.g2_sq_sum / (8.0 * s4);
    if !(mu0.is_finite() && mu1.is_finite()) {
        return Err(Error::NonFinite {
            what: "correction coefficients",
            k: 0,
        });
    }
    Ok(CorrectionCoeffs { mu0, mu1, order })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoneRule {
    Chi2SparseDense,
    Chi2VerySparse,
    PdsSparseLight,
    PdsSparseHeavy,
    PdsDense,
    PdsVerySparseUniform,
    PdsVerySparse,
    CountCentral,
    CountLeft,
    CountRight,
    CountGeneral,
    UnfilledCentral,
    UnfilledLeft,
    UnfilledRight,
}

impl ZoneRule {
    pub fn id(&self) -> &'static str {
        match self {
            ZoneRule::Chi2SparseDense => "chi2-sparse-dense",
            ZoneRule::Chi2VerySparse => "chi2-very-sparse",
            ZoneRule::PdsSparseLight => "pds-sparse-light",
            ZoneRule::PdsSparseHeavy => "pds-sparse-heavy",
            ZoneRule::PdsDense => "pds-dense",
            ZoneRule::PdsVerySparseUniform => "pds-very-sparse-uniform",
            ZoneRule::PdsVerySparse => "pds-very-sparse",
            ZoneRule::CountCentral => "count-central",
            ZoneRule::CountLeft => "count-left",
            ZoneRule::CountRight => "count-right",
            ZoneRule::CountGeneral => "count-general",
            ZoneRule::UnfilledCentral => "unfilled-central",
            ZoneRule::UnfilledLeft => "unfilled-left",
            ZoneRule::UnfilledRight => "unfilled-right",
        }
    }
}

impl std::fmt::Display for ZoneRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Deviation zone selected for a (model, kernel) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    /// `Υ_n`.
    pub upsilon: f64,
    pub rule: ZoneRule,
    /// Cumulant growth index `ν`.
    pub nu: f64,
    /// `W_n`.
    pub w: f64,
}

impl Zone {
    /// `c |x|³ / W^{1/(1+2ν)}`.
    pub fn correction_bound(&self, x: f64) -> f64 {
        CORRECTION_BOUND_CONSTANT * x.abs().powi(3) / self.w.powf(1.0 / (1.0 + 2.0 * self.nu))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub thresholds: RegimeThresholds,
    /// `B` in `1/B ≤ N p_m ≤ B`.
    pub cell_ratio_bound: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        Self {
            thresholds: RegimeThresholds::default(),
            cell_ratio_bound: 10.0,
        }
    }
}

/// `K_n(a, b)`.
pub fn k_big(n: u64, p_max: f64, a: u32, b: i32) -> f64 {
    let a_bar = a.max(1) as f64;
    ((n as f64).powi(1 - b) * p_max.powi(-b)).powf(1.0 / (1.0 + a_bar))
}

/// `k_n = ⌊min(1/p_max, K_n(a_i, b_i))⌋` over the given pairs.
pub fn k_small(model: &MultinomialModel, pairs: &[(u32, i32)]) -> f64 {
    let p_max = model.p_max();
    pairs
        .iter()
        .map(|&(a, b)| k_big(model.n(), p_max, a, b))
        .fold(1.0 / p_max, f64::min)
        .floor()
}

pub fn zone_bound(
    model: &MultinomialModel,
    kernel: &Kernel,
    summary: &MomentSummary,
    config: &ZoneConfig,
) -> Result<Zone> {
    let regime = classify_regime(model, &config.thresholds);
    let n = model.n() as f64;
    let cells = model.cells() as f64;
    let p_max = model.p_max();
    let zone = |upsilon: f64, rule, nu: f64, w: f64| -> Result<Zone> {
        if !(w > 0.0 && w.is_finite()) || !(upsilon >= 0.0) {
            return Err(Error::DegenerateVariance(summary.variance));
        }
        Ok(Zone { upsilon, rule, nu, w })
    };
    let plain_w = |s: &MomentSummary| s.variance.powf(1.5) / s.raw_variance;

    match kernel {
        Kernel::Pds(p) => {
            let d = p.d();
            let d_star = d.max(0.0);
            let frame_summary = |frame: PdsFrame| -> Result<MomentSummary> {
                if p.frame() == frame {
                    Ok(*summary)
                } else {
                    moment_summary(model, &Kernel::Pds(p.with_frame(frame)), Method::Series)
                }
            };
            let chi2_w = |s: &MomentSummary| plain_w(s) / model.nabla();
            match regime.tag {
                RegimeTag::Sparse | RegimeTag::Dense if d == 1.0 => {
                    let s = frame_summary(PdsFrame::Cressie)?;
                    zone(
                        cells.powf(1.0 / 6.0).min(p_max.powf(-0.25)),
                        ZoneRule::Chi2SparseDense,
                        1.0,
                        chi2_w(&s),
                    )
                }
                RegimeTag::VerySparse if regime.uniform => {
                    let lam = model.lambda();
                    let nl3 = n * lam.powi(3);
                    let k = k_small(model, &[(0, 0)]);
                    zone(
                        k.sqrt().min(nl3.powf(1.0 / (2.0 * (1.0 + 2.0 * d_star)))),
                        ZoneRule::PdsVerySparseUniform,
                        d_star,
                        nl3.sqrt(),
                    )
                }
                RegimeTag::VerySparse if d == 1.0 => {
                    let s = frame_summary(PdsFrame::Cressie)?;
                    let w = chi2_w(&s);
                    let k = k_small(model, &[(2, 0), (1, 1)]);
                    zone(w.cbrt().min(k.sqrt()), ZoneRule::Chi2VerySparse, 1.0, w)
                }
                RegimeTag::VerySparse => {
                    let s = frame_summary(PdsFrame::Power)?;
                    let np_min = n * model.p_min();
                    let w = if d == 0.0 {
                        s.variance.powf(1.5) / (s.raw_variance * np_min.ln().abs())
                    } else {
                        s.variance.powf(1.5) * np_min.powf(d) / s.raw_variance
                    };
                    let k = k_small(model, &[(0, 0)]);
                    zone(
                        k.sqrt().min(w.powf(1.0 / (1.0 + 2.0 * d_star))),
                        ZoneRule::PdsVerySparse,
                        d_star,
                        w,
                    )
                }
                RegimeTag::Sparse if d <= 0.0 => {
                    let s = frame_summary(PdsFrame::Power)?;
                    zone(cells.sqrt(), ZoneRule::PdsSparseLight, 0.0, plain_w(&s))
                }
                RegimeTag::Sparse => zone(
                    cells
                        .powf(1.0 / 6.0)
                        .min(cells.powf(1.0 / (2.0 * (1.0 + 2.0 * d)))),
                    ZoneRule::PdsSparseHeavy,
                    d,
                    cells.sqrt(),
                ),
                RegimeTag::Dense => zone(
                    cells.powf(1.0 / 6.0).min(p_max.powf(-0.25)),
                    ZoneRule::PdsDense,
                    1.0,
                    cells.sqrt(),
                ),
            }
        }
        Kernel::CountExact { .. } | Kernel::CountAtLeast { .. } | Kernel::Collisions => {
            let w = plain_w(summary);
            let b = config.cell_ratio_bound;
            let bounded = cells * model.p_min() >= 1.0 / b && cells * p_max <= b;
            match regime.tag {
                RegimeTag::Sparse if bounded => zone(cells.sqrt(), ZoneRule::CountCentral, 0.0, w),
                RegimeTag::VerySparse if bounded => {
                    zone(n.powf(0.25), ZoneRule::CountLeft, 0.0, w)
                }
                RegimeTag::Dense if bounded => {
                    let k = k_small(model, &[(0, 2)]);
                    zone(w.min(k.sqrt()), ZoneRule::CountRight, 0.0, w)
                }
                _ => {
                    let k = k_small(model, &[(0, 0), (1, 2)]);
                    zone(w.min(k.sqrt()), ZoneRule::CountGeneral, 0.0, w)
                }
            }
        }
        Kernel::Unfilled { .. } => {
            if !regime.uniform {
                return Err(Error::Unsupported(
                    "unfilled-cell zones are defined for uniform models only".into(),
                ));
            }
            let w = plain_w(summary);
            match regime.tag {
                RegimeTag::Sparse => zone(cells.sqrt(), ZoneRule::UnfilledCentral, 0.0, w),
                RegimeTag::VerySparse => zone(n.powf(0.25), ZoneRule::UnfilledLeft, 0.0, w),
                RegimeTag::Dense => {
                    let k = k_small(model, &[(0, 2)]);
                    zone(w.min(k.sqrt()), ZoneRule::UnfilledRight, 0.0, w)
                }
            }
        }
    }
}

/// One tail approximation with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub x: f64,
    pub side: Side,
    /// `A_N ± xσ_N`.
    pub threshold: f64,
    /// `1 − Φ(x)`.
    pub p_first_order: f64,
    /// `M(x)` on the upper side, `M(−x)` on the lower side.
    pub correction_exponent: f64,
    pub p_corrected: f64,
    /// `Υ_n`.
    pub zone: f64,
    pub in_zone: bool,
    pub regime_rule: ZoneRule,
    /// True when `p_first_order · e^M` exceeded 1 and was clamped.
    pub clamped: bool,
    /// `(x + 1)/Υ_n`, the order of the relative error.
    pub error_scale: f64,
    /// `c|x|³/W^{1/(1+2ν)}`.
    pub correction_bound: f64,
    pub correction_bound_ok: bool,
}

pub fn tail_probability(
    x: f64,
    side: Side,
    summary: &MomentSummary,
    coeffs: &CorrectionCoeffs,
    zone: &Zone,
    zone_fraction: f64,
) -> Result<TailResult> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(Error::Domain(format!("x must be finite and non-negative, got {x}")));
    }
    if !(zone_fraction > 0.0) {
        return Err(invalid("zone_fraction", format!("must be positive, got {zone_fraction}")));
    }
    let sd = summary.sd();
    let (threshold, exponent) = match side {
        Side::Upper => (summary.mean + x * sd, coeffs.exponent(x)),
        Side::Lower => (summary.mean - x * sd, coeffs.exponent(-x)),
    };
    // Φ(−x) = 1 − Φ(x)
    let p_first_order = normal::upper_tail(x);
    let raw = p_first_order * exponent.exp();
    let clamped = raw > 1.0;
    let correction_bound = zone.correction_bound(x);
    let in_zone = x <= zone_fraction * zone.upsilon;
    Ok(TailResult {
        x,
        side,
        threshold,
        p_first_order,
        correction_exponent: exponent,
        p_corrected: raw.min(1.0),
        zone: zone.upsilon,
        in_zone,
        regime_rule: zone.rule,
        clamped,
        error_scale: (x + 1.0) / zone.upsilon,
        correction_bound,
        correction_bound_ok: exponent.abs() <= correction_bound,
    })
}

/// `−x²/2`, the leading term of `ln P{R_N > A_N + xσ_N}`.
pub fn log_tail_asymptote(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_infinite() {
        return Err(Error::Domain(format!("x must be finite and positive, got {x}")));
    }
    Ok(-0.5 * x * x)
}

/// Settings for [`TailEngine`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub order: u8,
    pub zone_fraction: f64,
    pub method: Method,
    pub zone: ZoneConfig,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            order: 1,
            zone_fraction: DEFAULT_ZONE_FRACTION,
            method: Method::Auto,
            zone: ZoneConfig::default(),
        }
    }
}

/// Summary, coefficients and zone of one (model, kernel) pair, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEngine {
    pub summary: MomentSummary,
    pub coeffs: CorrectionCoeffs,
    pub zone: Zone,
    pub zone_fraction: f64,
}

impl TailEngine {
    pub fn new(model: &MultinomialModel, kernel: &Kernel, config: &TailConfig) -> Result<Self> {
        let summary = moment_summary(model, kernel, config.method)?;
        let coeffs = correction_coeffs(&summary, model.n(), config.order)?;
        let zone = zone_bound(model, kernel, &summary, &config.zone)?;
        Ok(Self {
            summary,
            coeffs,
            zone,
            zone_fraction: config.zone_fraction,
        })
    }

    pub fn tail(&self, x: f64, side: Side) -> Result<TailResult> {
        tail_probability(x, side, &self.summary, &self.coeffs, &self.zone, self.zone_fraction)
    }

    /// Same engine with another correction order.
    pub fn with_order(&self, order: u8) -> Self {
        Self {
            coeffs: CorrectionCoeffs { order, ..self.coeffs },
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_summary() -> MomentSummary {
        MomentSummary {
            mean: 10.0,
            tau: 0.0,
            raw_variance: 4.0,
            variance: 4.0,
            beta3: 0.0,
            beta4: 0.0,
            g2_sq_sum: 0.0,
            g2_cross_sum: 0.0,
        }
    }

    fn wide_zone() -> Zone {
        Zone {
            upsilon: 100.0,
            rule: ZoneRule::CountCentral,
            nu: 0.0,
            w: 100.0,
        }
    }

    #[test]
    fn first_order_values() {
        let s = dummy_summary();
        let z = wide_zone();
        let r = tail_probability(0.0, Side::Upper, &s, &CorrectionCoeffs::NONE, &z, 0.5).unwrap();
        assert_eq!(r.p_corrected, 0.5);
        assert_eq!(r.threshold, 10.0);
        let r = tail_probability(1.0, Side::Upper, &s, &CorrectionCoeffs::NONE, &z, 0.5).unwrap();
        assert!((r.p_corrected - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert_eq!(r.threshold, 12.0);
        let lo = tail_probability(1.0, Side::Lower, &s, &CorrectionCoeffs::NONE, &z, 0.5).unwrap();
        assert_eq!(lo.p_corrected, r.p_corrected);
        assert_eq!(lo.threshold, 8.0);
    }

    #[test]
    fn corrected_value() {
        let coeffs = CorrectionCoeffs {
            mu0: 0.01,
            mu1: 0.0,
            order: 1,
        };
        let r = tail_probability(2.0, Side::Upper, &dummy_summary(), &coeffs, &wide_zone(), 0.5).unwrap();
        assert!((r.correction_exponent - 0.08).abs() < 1e-16);
        assert!((r.p_corrected - 0.024_644_9).abs() < 1e-7);
        let lo = tail_probability(2.0, Side::Lower, &dummy_summary(), &coeffs, &wide_zone(), 0.5).unwrap();
        assert!((lo.correction_exponent + 0.08).abs() < 1e-16);
    }

    #[test]
    fn coefficients_from_summary() {
        let mut s = dummy_summary();
        s.variance = 1.0;
        s.beta3 = 6.0;
        let c = correction_coeffs(&s, 10, 1).unwrap();
        assert_eq!(c.mu0, 1.0);
        s.beta3 = 0.0;
        assert_eq!(correction_coeffs(&s, 10, 1).unwrap().mu0, 0.0);
        s.variance = 0.0;
        assert!(matches!(correction_coeffs(&s, 10, 1), Err(Error::DegenerateVariance(_))));
        assert!(correction_coeffs(&dummy_summary(), 10, 3).is_err());
    }

    #[test]
    fn clamping_and_domain() {
        let coeffs = CorrectionCoeffs {
            mu0: 1.0,
            mu1: 0.0,
            order: 1,
        };
        let r = tail_probability(3.0, Side::Upper, &dummy_summary(), &coeffs, &wide_zone(), 0.5).unwrap();
        assert!(r.clamped);
        assert_eq!(r.p_corrected, 1.0);
        assert!(tail_probability(-1.0, Side::Upper, &dummy_summary(), &coeffs, &wide_zone(), 0.5).is_err());
        assert!(tail_probability(f64::NAN, Side::Upper, &dummy_summary(), &coeffs, &wide_zone(), 0.5).is_err());
    }

    #[test]
    fn log_asymptote() {
        assert_eq!(log_tail_asymptote(3.0).unwrap(), -4.5);
        assert_eq!(log_tail_asymptote(1.0).unwrap(), -0.5);
        assert!(log_tail_asymptote(0.0).is_err());
        let x = 6.0;
        let exact = normal::upper_tail(x).ln();
        let approx = -x * x / 2.0 - (x * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!(((exact - approx) / exact).abs() < 0.03);
    }

    #[test]
    fn chi_square_zone_example() {
        let m = MultinomialModel::uniform(1024, 512).unwrap();
        let k = Kernel::chi_square();
        let s = moment_summary(&m, &k, Method::Series).unwrap();
        let z = zone_bound(&m, &k, &s, &ZoneConfig::default()).unwrap();
        assert_eq!(z.rule, ZoneRule::Chi2SparseDense);
        assert!((z.upsilon - 2.828_427_124_746_19).abs() < 1e-12);
        assert!((z.w - 25.6).abs() < 1e-9);
        let doubled = MultinomialModel::uniform(2048, 1024).unwrap();
        let s2 = moment_summary(&doubled, &k, Method::Series).unwrap();
        let z2 = zone_bound(&doubled, &k, &s2, &ZoneConfig::default()).unwrap();
        assert!((z2.upsilon / z.upsilon - 2f64.powf(1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn pds_sparse_uniform_d1_is_sixth_root() {
        let m = MultinomialModel::uniform(1000, 500).unwrap();
        let k = Kernel::pds_in(1.0, PdsFrame::Power).unwrap();
        let s = moment_summary(&m, &k, Method::Series).unwrap();
        let z = zone_bound(&m, &k, &s, &ZoneConfig::default()).unwrap();
        assert!((z.upsilon - 500f64.powf(1.0 / 6.0)).abs() < 1e-12);
        let k = Kernel::pds_in(2.0, PdsFrame::Power).unwrap();
        let s = moment_summary(&m, &k, Method::Series).unwrap();
        let z = zone_bound(&m, &k, &s, &ZoneConfig::default()).unwrap();
        assert_eq!(z.rule, ZoneRule::PdsSparseHeavy);
        assert!((z.upsilon - 500f64.powf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn empty_cells_very_sparse_zone() {
        let m = MultinomialModel::uniform(1000, 10_000).unwrap();
        let k = Kernel::count_exact(0);
        let s = moment_summary(&m, &k, Method::Series).unwrap();
        let z = zone_bound(&m, &k, &s, &ZoneConfig::default()).unwrap();
        assert_eq!(z.rule, ZoneRule::CountLeft);
        assert!((z.upsilon - 1000f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn k_helpers() {
        assert!((k_big(10_000, 0.5, 0, 0) - 100.0).abs() < 1e-9);
        assert!((k_big(100, 0.01, 1, 1) - 10.0).abs() < 1e-9);
        let m = MultinomialModel::uniform(10_000, 100).unwrap();
        assert_eq!(k_small(&m, &[(0, 0)]), 100.0);
    }
}
