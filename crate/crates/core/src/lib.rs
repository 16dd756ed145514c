//! Moments and Cramér-type large-deviation approximations for separable
//! statistics of a multinomial sample.
//!
//! A statistic `R_N = Σ h_m(η_m)` of the cell counts `η_1, …, η_N` of `n`
//! items thrown into `N` cells is standardized with moments computed under
//! Poissonization, and its tails are approximated by `1 − Φ(x)` times an
//! exponential correction that is valid in a zone `x ≤ Υ` depending on the
//! statistic and on how sparse the model is.
//!
//! ```
//! use multinomial_tails::{MultinomialModel, Kernel, TailEngine, TailConfig, Side};
//!
//! let model = MultinomialModel::uniform(1024, 512)?;
//! let engine = TailEngine::new(&model, &Kernel::chi_square(), &TailConfig::default())?;
//! let r = engine.tail(1.0, Side::Upper)?;
//! assert!((r.p_first_order - 0.158_655_3).abs() < 1e-7);
//! # Ok::<(), multinomial_tails::Error>(())
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod poisson;
pub mod serial;
pub mod tail;

pub use error::{Error, Result};
pub use kernels::{moment_summary, Kernel, LevelDistribution, Method, MomentSummary, PdsFrame, PowerDivergence};
pub use model::{build_model, classify_regime, ModelSpec, MultinomialModel, Regime, RegimeTag, RegimeThresholds};
pub use tail::{correction_coeffs, zone_bound, CorrectionCoeffs, Side, TailConfig, TailEngine, TailResult, Zone, ZoneConfig, ZoneRule};
