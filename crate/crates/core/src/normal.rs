//! Standard normal tail functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

/// Above this point the upper tail is evaluated through its logarithm.
const LOG_PATH_CUTOFF: f64 = 8.0;

/// Two-sided 99% standard normal quantile, `Φ^{-1}(0.995)`.
#[allow(clippy::excessive_precision)]
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// `φ(x)`.
pub fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `1 − Φ(x)`.
pub fn upper_tail(x: f64) -> f64 {
    if x > LOG_PATH_CUTOFF {
        ln_upper_tail(x).exp()
    } else {
        0.5 * erfc(x * FRAC_1_SQRT_2)
    }
}

/// `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    upper_tail(-x)
}

/// `ln(1 − Φ(x))`, finite for every finite `x`.
pub fn ln_upper_tail(x: f64) -> f64 {
    if x <= LOG_PATH_CUTOFF {
        return (0.5 * erfc(x * FRAC_1_SQRT_2)).ln();
    }
    -0.5 * x * x - (x * (2.0 * PI).sqrt()).ln() + (x * mills_ratio(x)).ln()
}

/// `(1 − Φ(x)) / φ(x)` by backward evaluation of the Laplace continued
/// fraction `1/(x + 1/(x + 2/(x + 3/(x + …))))`; accurate for `x ≥ 8`.
fn mills_ratio(x: f64) -> f64 {
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_constant() {
        assert!((cdf(Z_99) - 0.995).abs() < 1e-15);
    }

    #[test]
    fn log_path_is_continuous() {
        let below = ln_upper_tail(LOG_PATH_CUTOFF);
        let above = ln_upper_tail(LOG_PATH_CUTOFF + 1e-9);
        assert!((below - above).abs() < 1e-7);
        assert!(ln_upper_tail(60.0).is_finite());
        assert_eq!(upper_tail(0.0), 0.5);
    }
}
