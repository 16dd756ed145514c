//! Cell kernels `h_m(x)` and the Poissonized moment summaries of the
//! statistics `R_N = h_1(η_1) + ⋯ + h_N(η_N)` they define.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

mod closed;
mod levels;
mod summary;

pub use levels::{
    level_tau, read_levels_csv, unfilled_sparse_expansion, write_levels_csv, LevelDistribution,
    SparseExpansion,
};
pub use summary::{moment_summary, Method, MomentSummary};

/// Below this magnitude `d` is treated as the log-likelihood limit `d = 0`.
pub const LOG_LIMIT_EPS: f64 = 1e-8;

/// Affine normalization of a power-divergence kernel. All three give the
/// same standardized statistic on a uniform model; the first two give the
/// same standardized statistic on every model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdsFrame {
    /// `2/(d(d+1)) [np(x/np)^{d+1} − (d+1)x + d·np]`, summing to `CR_N(d)`;
    /// `(x − np)²/np` at `d = 1`, `2[x ln(x/np) − x + np]` at `d = 0`.
    #[default]
    Cressie,
    /// `np (x/np)^{d+1}`, or `2x ln(x/np)` at `d = 0`.
    Power,
    /// `x^{d+1}`, or `2x ln x` at `d = 0`.
    Bare,
}

impl FromStr for PdsFrame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cressie" | "cr" => Ok(PdsFrame::Cressie),
            "power" | "r" => Ok(PdsFrame::Power),
            "bare" => Ok(PdsFrame::Bare),
            _ => Err(invalid("kernel", format!("unknown power-divergence frame {s:?}"))),
        }
    }
}

impl fmt::Display for PdsFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PdsFrame::Cressie => "cressie",
            PdsFrame::Power => "power",
            PdsFrame::Bare => "bare",
        })
    }
}

/// Power-divergence kernel with index `d > −1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPds", into = "RawPds")]
pub struct PowerDivergence {
    d: f64,
    frame: PdsFrame,
}

#[derive(Serialize, Deserialize)]
struct RawPds {
    d: f64,
    #[serde(default)]
    frame: PdsFrame,
}

impl TryFrom<RawPds> for PowerDivergence {
    type Error = Error;
    fn try_from(raw: RawPds) -> Result<Self> {
        PowerDivergence::new(raw.d, raw.frame)
    }
}

impl From<PowerDivergence> for RawPds {
    fn from(p: PowerDivergence) -> Self {
        RawPds {
            d: p.d,
            frame: p.frame,
        }
    }
}

impl PowerDivergence {
    pub fn new(d: f64, frame: PdsFrame) -> Result<Self> {
        if !(d.is_finite() && d > -1.0) {
            return Err(invalid("d", format!("power-divergence index must exceed -1, got {d}")));
        }
        let d = if d.abs() < LOG_LIMIT_EPS { 0.0 } else { d };
        Ok(Self { d, frame })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn frame(&self) -> PdsFrame {
        self.frame
    }

    /// Same index in another frame.
    pub fn with_frame(&self, frame: PdsFrame) -> Self {
        Self { d: self.d, frame }
    }

    /// `h(x)` for a cell with Poisson rate `np`.
    pub fn value(&self, x: u64, np: f64) -> f64 {
        let d = self.d;
        let xf = x as f64;
        match self.frame {
            PdsFrame::Cressie => {
                if d == 1.0 {
                    let y = xf - np;
                    y * y / np
                } else if x == 0 {
                    2.0 * np / (d + 1.0)
                } else if d == 0.0 {
                    2.0 * (xf * (xf / np).ln() - xf + np)
                } else {
                    // x[(x/np)^d − 1] − d(x − np), scaled by 2/(d(d+1))
                    let core = xf * (d * (xf / np).ln()).exp_m1() - d * (xf - np);
                    2.0 * core / (d * (d + 1.0))
                }
            }
            PdsFrame::Power => {
                if x == 0 {
                    0.0
                } else if d == 0.0 {
                    2.0 * xf * (xf / np).ln()
                } else {
                    np * (xf / np).powf(d + 1.0)
                }
            }
            PdsFrame::Bare => {
                if x == 0 {
                    0.0
                } else if d == 0.0 {
                    2.0 * xf * xf.ln()
                } else {
                    xf.powf(d + 1.0)
                }
            }
        }
    }
}

/// A statistic family, given by its cell kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// Power-divergence statistic; `d = 1` is Pearson's χ², `d = 0` the
    /// log-likelihood ratio, `d = −1/2` Freeman–Tukey.
    Pds(PowerDivergence),
    /// `μ_r`, the number of cells holding exactly `r` items.
    #[serde(rename = "count")]
    CountExact { r: u64 },
    /// `w_r`, the number of cells holding at least `r ≥ 1` items.
    #[serde(rename = "atleast")]
    CountAtLeast { r: u64 },
    /// `C_n = Σ (η_m − 1)^+ = μ_0 − (n − N)`.
    Collisions,
    /// `Φ_N`, the number of cells whose count stays below an independent
    /// random level `ν_m`.
    Unfilled { levels: LevelDistribution },
}

impl Kernel {
    /// Power divergence in the Cressie–Read normalization.
    pub fn pds(d: f64) -> Result<Self> {
        Ok(Kernel::Pds(PowerDivergence::new(d, PdsFrame::Cressie)?))
    }

    pub fn pds_in(d: f64, frame: PdsFrame) -> Result<Self> {
        Ok(Kernel::Pds(PowerDivergence::new(d, frame)?))
    }

    pub fn chi_square() -> Self {
        Kernel::Pds(PowerDivergence {
            d: 1.0,
            frame: PdsFrame::Cressie,
        })
    }

    pub fn count_exact(r: u64) -> Self {
        Kernel::CountExact { r }
    }

    pub fn count_at_least(r: u64) -> Result<Self> {
        if r == 0 {
            return Err(invalid("r", "at-least counts need r >= 1 (w_0 = N always)"));
        }
        Ok(Kernel::CountAtLeast { r })
    }

    pub fn unfilled(levels: LevelDistribution) -> Self {
        Kernel::Unfilled { levels }
    }

    /// Mean of the cell contribution given `x` items in a cell with rate `np`.
    /// Deterministic for every family except [`Kernel::Unfilled`], where it is
    /// the Bernoulli mean `P{ν > x}`.
    pub fn value(&self, x: u64, np: f64) -> f64 {
        match self {
            Kernel::Pds(p) => p.value(x, np),
            Kernel::CountExact { r } => (x == *r) as u8 as f64,
            Kernel::CountAtLeast { r } => (x >= *r) as u8 as f64,
            Kernel::Collisions => x.saturating_sub(1) as f64,
            Kernel::Unfilled { levels } => levels.exceedance(x),
        }
    }

    /// True when the cell contribution is random given the count.
    pub fn is_randomized(&self) -> bool {
        matches!(self, Kernel::Unfilled { .. })
    }

    /// `R_N` for a vector of counts. Rates are `n p_m`.
    pub fn statistic(&self, rates: &[f64], counts: &[u64]) -> Result<f64> {
        if self.is_randomized() {
            return Err(Error::Unsupported(
                "the unfilled-cell statistic depends on random levels, not on counts alone".into(),
            ));
        }
        if rates.len() != counts.len() {
            return Err(Error::Domain(format!(
                "{} counts for {} cells",
                counts.len(),
                rates.len()
            )));
        }
        Ok(counts
            .iter()
            .zip(rates)
            .map(|(&x, &np)| self.value(x, np))
            .sum())
    }

    /// Short label such as `pds(1,cressie)` or `count(0)`.
    pub fn label(&self) -> String {
        match self {
            Kernel::Pds(p) => format!("pds({},{})", p.d, p.frame),
            Kernel::CountExact { r } => format!("count({r})"),
            Kernel::CountAtLeast { r } => format!("atleast({r})"),
            Kernel::Collisions => "collisions".into(),
            Kernel::Unfilled { .. } => "unfilled".into(),
        }
    }
}

/// `x ↦ h(x)` for one cell of probability `cell_prob` among `n` observations.
pub fn kernel_mean_fn(
    kernel: &Kernel,
    cell_prob: f64,
    n: u64,
) -> Result<impl Fn(u64) -> f64 + '_> {
    if !(cell_prob > 0.0 && cell_prob < 1.0) {
        return Err(Error::Domain(format!(
            "cell probability must lie in (0, 1), got {cell_prob}"
        )));
    }
    let np = n as f64 * cell_prob;
    Ok(move |x| kernel.value(x, np))
}

/// Parses `pds:<d>[:frame]`, `count:<r>`, `atleast:<r>`, `collisions` and
/// `unfilled:<levels-csv-path>`.
impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(2, ':');
        let family = parts.next().unwrap_or_default().trim();
        let arg = parts.next().map(str::trim);
        let need = |what: &str| invalid("kernel", format!("{family} needs {what}, as in {family}:<{what}>"));
        match (family, arg) {
            ("pds", Some(arg)) => {
                let (d, frame) = match arg.split_once(':') {
                    Some((d, frame)) => (d, frame.parse()?),
                    None => (arg, PdsFrame::Cressie),
                };
                let d: f64 = parse_number(d)?;
                Kernel::pds_in(d, frame)
            }
            ("chisq" | "chi2", None) => Ok(Kernel::chi_square()),
            ("count", Some(r)) => Ok(Kernel::count_exact(parse_number(r)?)),
            ("atleast", Some(r)) => Kernel::count_at_least(parse_number(r)?),
            ("collisions", None) => Ok(Kernel::Collisions),
            ("unfilled", Some(path)) => {
                let file = std::fs::File::open(path)?;
                Ok(Kernel::unfilled(read_levels_csv(file)?))
            }
            ("pds", None) => Err(need("d")),
            ("count" | "atleast", None) => Err(need("r")),
            ("unfilled", None) => Err(need("levels-file")),
            _ => Err(invalid("kernel", format!("unrecognized kernel {s:?}"))),
        }
    }
}

fn parse_number<T: FromStr>(s: &str) -> Result<T> {
    // allow simple fractions such as -1/2
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (
            a.trim().parse().map_err(|_| bad_number(s))?,
            b.trim().parse().map_err(|_| bad_number(s))?,
        );
        return (a / b).to_string().parse().map_err(|_| bad_number(s));
    }
    s.parse().map_err(|_| bad_number(s))
}

fn bad_number(s: &str) -> Error {
    invalid("kernel", format!("not a number: {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_frames() {
        let np = 2.0;
        let cr = PowerDivergence::new(1.0, PdsFrame::Cressie).unwrap();
        let pw = cr.with_frame(PdsFrame::Power);
        for x in 0..10u64 {
            let xf = x as f64;
            assert_eq!(cr.value(x, np), (xf - np).powi(2) / np);
            assert!((pw.value(x, np) - xf * xf / np).abs() < 1e-13);
        }
    }

    #[test]
    fn cressie_matches_power_up_to_affine_shift() {
        for d in [-0.5, 0.3, 2.0, 2.5] {
            let cr = PowerDivergence::new(d, PdsFrame::Cressie).unwrap();
            let pw = cr.with_frame(PdsFrame::Power);
            let np = 1.7;
            for x in 0..20u64 {
                let xf = x as f64;
                let want = 2.0 / (d * (d + 1.0)) * (pw.value(x, np) - (d + 1.0) * xf + d * np);
                let got = cr.value(x, np);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "d={d} x={x}");
            }
        }
    }

    #[test]
    fn freeman_tukey_form() {
        let ft = PowerDivergence::new(-0.5, PdsFrame::Cressie).unwrap();
        for x in 0..12u64 {
            let want = 4.0 * ((x as f64).sqrt() - 3.0f64.sqrt()).powi(2);
            assert!((ft.value(x, 3.0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn log_limit() {
        let small = PowerDivergence::new(1e-9, PdsFrame::Power).unwrap();
        assert_eq!(small.d(), 0.0);
        assert_eq!(small.value(0, 2.0), 0.0);
        assert!((small.value(4, 2.0) - 8.0 * 2f64.ln()).abs() < 1e-14);
        let cr = small.with_frame(PdsFrame::Cressie);
        assert!((cr.value(0, 2.0) - 4.0).abs() < 1e-15);
        // continuity in d
        let near = PowerDivergence::new(1e-6, PdsFrame::Cressie).unwrap();
        for x in 0..8u64 {
            assert!((near.value(x, 2.0) - cr.value(x, 2.0)).abs() < 1e-5);
        }
        assert!(PowerDivergence::new(-1.0, PdsFrame::Power).is_err());
    }

    #[test]
    fn count_kernels() {
        let k = Kernel::count_exact(0);
        assert_eq!(k.value(0, 1.0), 1.0);
        assert_eq!(k.value(3, 1.0), 0.0);
        assert_eq!(Kernel::Collisions.value(0, 1.0), 0.0);
        assert_eq!(Kernel::Collisions.value(4, 1.0), 3.0);
        let u = Kernel::unfilled(LevelDistribution::constant(1).unwrap());
        let f = kernel_mean_fn(&u, 0.5, 4).unwrap();
        assert_eq!((f(0), f(1), f(5)), (1.0, 0.0, 0.0));
        assert!(Kernel::count_at_least(0).is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!("pds:1".parse::<Kernel>().unwrap(), Kernel::chi_square());
        assert_eq!(
            "pds:-1/2:power".parse::<Kernel>().unwrap(),
            Kernel::pds_in(-0.5, PdsFrame::Power).unwrap()
        );
        assert_eq!("count:2".parse::<Kernel>().unwrap(), Kernel::count_exact(2));
        assert_eq!("collisions".parse::<Kernel>().unwrap(), Kernel::Collisions);
        for bad in ["pds", "pds:x", "pds:-1", "count:-1", "atleast:0", "nope", "pds:1:weird"] {
            assert!(bad.parse::<Kernel>().is_err(), "{bad}");
        }
    }

    #[test]
    fn json_round_trip() {
        let kernels = [
            Kernel::chi_square(),
            Kernel::pds_in(0.0, PdsFrame::Bare).unwrap(),
            Kernel::count_exact(0),
            Kernel::count_at_least(2).unwrap(),
            Kernel::Collisions,
            Kernel::unfilled(LevelDistribution::new(vec![0.5, 0.25, 0.25]).unwrap()),
        ];
        for k in kernels {
            let text = serde_json::to_string(&k).unwrap();
            assert_eq!(serde_json::from_str::<Kernel>(&text).unwrap(), k, "{text}");
        }
        let k: Kernel = serde_json::from_str(r#"{"family": "pds", "d": 1.0}"#).unwrap();
        assert_eq!(k, Kernel::chi_square());
        assert!(serde_json::from_str::<Kernel>(r#"{"family": "pds", "d": -2.0}"#).is_err());
    }
}
