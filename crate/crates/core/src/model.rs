//! The multinomial model `M(n, N, P)` and its regime classification.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poisson::CompensatedSum;

const SUM_TOL: f64 = 1e-12;
const UNIFORM_TOL: f64 = 1e-12;

/// `n` observations allocated into `N = probs.len()` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MultinomialModel {
    n: u64,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    n: u64,
    probs: Vec<f64>,
}

impl TryFrom<RawModel> for MultinomialModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        MultinomialModel::new(raw.n, raw.probs)
    }
}

impl From<MultinomialModel> for RawModel {
    fn from(m: MultinomialModel) -> Self {
        RawModel {
            n: m.n,
            probs: m.probs,
        }
    }
}

impl MultinomialModel {
    /// Validates an explicit probability vector.
    pub fn new(n: u64, probs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "at least one observation is required"));
        }
        if probs.len() < 2 {
            return Err(invalid("N", format!("need at least 2 cells, got {}", probs.len())));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(invalid("probs", format!("cell {i} has non-positive probability {p}")));
        }
        let total: CompensatedSum = probs.iter().copied().collect();
        if (total.value() - 1.0).abs() > SUM_TOL {
            return Err(invalid(
                "probs",
                format!("probabilities sum to {} instead of 1", total.value()),
            ));
        }
        Ok(Self { n, probs })
    }

    pub fn uniform(n: u64, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(invalid("N", format!("need at least 2 cells, got {cells}")));
        }
        Self::new(n, vec![1.0 / cells as f64; cells])
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `λ_n = n / N`.
    pub fn lambda(&self) -> f64 {
        self.n as f64 / self.cells() as f64
    }

    pub fn p_max(&self) -> f64 {
        self.probs.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::MAX, f64::min)
    }

    /// `∇_n = max(1, 1/(n p_min))`.
    pub fn nabla(&self) -> f64 {
        (1.0 / (self.n as f64 * self.p_min())).max(1.0)
    }

    /// True when all cell probabilities agree to relative tolerance `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let hi = self.p_max();
        hi - self.p_min() <= UNIFORM_TOL * hi
    }

    /// Poisson rates `n p_m`, one per cell.
    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n as f64;
        self.probs.iter().map(move |p| n * p)
    }

    /// Distinct Poisson rates with their multiplicities, in ascending order.
    /// Cells with bitwise-equal probabilities share one entry.
    pub fn rate_groups(&self) -> Vec<(f64, usize)> {
        let mut sorted = self.probs.clone();
        sorted.sort_by(f64::total_cmp);
        let n = self.n as f64;
        let mut groups: Vec<(f64, usize)> = Vec::new();
        let mut last: Option<f64> = None;
        for p in sorted {
            if last.is_some_and(|q| q.to_bits() == p.to_bits()) {
                groups.last_mut().expect("group exists").1 += 1;
            } else {
                groups.push((n * p, 1));
                last = Some(p);
            }
        }
        groups
    }
}

/// Builder input for a model; also the JSON model-spec file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Uniform {
        n: u64,
        #[serde(rename = "N", alias = "cells")]
        cells: usize,
    },
    /// `p_m ∝ m^{−α}`, `α ∈ [0, 1)`.
    #[serde(rename = "powerlaw", alias = "power_law")]
    PowerLaw {
        n: u64,
        #[serde(rename = "N", alias = "cells")]
        cells: usize,
        alpha: f64,
    },
    /// `p_m = N^{−1}(1 + δ ℓ_m)` with `Σ ℓ_m = 0`.
    Perturbed {
        n: u64,
        delta: f64,
        ell: Vec<f64>,
    },
    Explicit {
        n: u64,
        probs: Vec<f64>,
    },
}

impl ModelSpec {
    /// `N^{−1} Σ ℓ_m²` for perturbed specs.
    pub fn ell_sq(&self) -> Option<f64> {
        match self {
            ModelSpec::Perturbed { ell, .. } => {
                let s: CompensatedSum = ell.iter().map(|l| l * l).collect();
                Some(s.value() / ell.len() as f64)
            }
            _ => None,
        }
    }
}

/// Builds and validates a model from its spec.
pub fn build_model(spec: &ModelSpec) -> Result<MultinomialModel> {
    match spec {
        ModelSpec::Uniform { n, cells } => MultinomialModel::uniform(*n, *cells),
        ModelSpec::PowerLaw { n, cells, alpha } => {
            let (n, cells, alpha) = (*n, *cells, *alpha);
            if !(0.0..1.0).contains(&alpha) {
                return Err(invalid("alpha", format!("must lie in [0, 1), got {alpha}")));
            }
            if cells < 2 {
                return Err(invalid("N", format!("need at least 2 cells, got {cells}")));
            }
            let scale = (1.0 - alpha) / (cells as f64).powf(1.0 - alpha);
            let raw: Vec<f64> = (1..=cells)
                .map(|m| scale * (m as f64).powf(-alpha))
                .collect();
            // the finite-N weights do not sum to one
            let total: CompensatedSum = raw.iter().copied().collect();
            let total = total.value();
            MultinomialModel::new(n, raw.into_iter().map(|w| w / total).collect())
        }
        ModelSpec::Perturbed { n, delta, ell } => {
            let cells = ell.len();
            if cells < 2 {
                return Err(invalid("N", format!("need at least 2 cells, got {cells}")));
            }
            if !delta.is_finite() || ell.iter().any(|l| !l.is_finite()) {
                return Err(invalid("delta", "perturbation must be finite"));
            }
            let sum: CompensatedSum = ell.iter().copied().collect();
            let scale = ell.iter().map(|l| l.abs()).sum::<f64>().max(1.0);
            if sum.value().abs() > SUM_TOL * scale {
                return Err(invalid(
                    "ell",
                    format!("perturbation directions must sum to 0, got {}", sum.value()),
                ));
            }
            if let Some((i, l)) = ell.iter().enumerate().find(|(_, l)| 1.0 + delta * **l <= 0.0) {
                return Err(invalid(
                    "delta",
                    format!("1 + delta * ell[{i}] = {} is not positive", 1.0 + delta * l),
                ));
            }
            let base = 1.0 / cells as f64;
            MultinomialModel::new(*n, ell.iter().map(|l| base * (1.0 + delta * l)).collect())
        }
        ModelSpec::Explicit { n, probs } => MultinomialModel::new(*n, probs.clone()),
    }
}

/// Discrete stand-in for the asymptotic regimes `λ_n → ∞`, `λ_n → λ`, `λ_n → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    Sparse,
    Dense,
    VerySparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub uniform: bool,
}

/// Cutoffs on the extreme cell rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Dense when `n p_min` is at least this.
    pub dense: f64,
    /// Very sparse when `n p_max` is at most this.
    pub very_sparse: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            dense: 10.0,
            very_sparse: 0.2,
        }
    }
}

pub fn classify_regime(model: &MultinomialModel, thresholds: &RegimeThresholds) -> Regime {
    let n = model.n() as f64;
    let tag = if n * model.p_min() >= thresholds.dense {
        RegimeTag::Dense
    } else if n * model.p_max() <= thresholds.very_sparse {
        RegimeTag::VerySparse
    } else {
        RegimeTag::Sparse
    };
    Regime {
        tag,
        uniform: model.is_uniform(),
    }
}

/// Reads a probability vector: one value per line, blank lines and `#`
/// comments ignored.
pub fn read_probs_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut probs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        let p: f64 = field
            .parse()
            .map_err(|_| Error::Parse(format!("record {}: not a number: {field:?}", line + 1)))?;
        probs.push(p);
    }
    Ok(probs)
}

/// One probability per line at 17 significant digits.
pub fn write_probs_csv(probs: &[f64]) -> String {
    let mut out = String::with_capacity(probs.len() * 24);
    for p in probs {
        out.push_str(&format!("{p:.16e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scalars() {
        let m = build_model(&ModelSpec::Uniform { n: 1024, cells: 512 }).unwrap();
        assert_eq!(m.lambda(), 2.0);
        assert_eq!(m.p_max(), 1.0 / 512.0);
        assert_eq!(m.p_min(), 1.0 / 512.0);
        assert_eq!(m.nabla(), 1.0);
        assert!(m.is_uniform());
        assert_eq!(m.rate_groups(), vec![(2.0, 512)]);
    }

    #[test]
    fn perturbed_by_construction() {
        let spec = ModelSpec::Perturbed {
            n: 100,
            delta: 0.1,
            ell: vec![1.0, -1.0, 1.0, -1.0],
        };
        let m = build_model(&spec).unwrap();
        let want = [0.275, 0.225, 0.275, 0.225];
        for (p, w) in m.probs().iter().zip(want) {
            assert!((p - w).abs() < 1e-15);
        }
        assert_eq!(spec.ell_sq(), Some(1.0));
        assert!(!m.is_uniform());
    }

    #[test]
    fn power_law_weights() {
        let m = build_model(&ModelSpec::PowerLaw {
            n: 100,
            cells: 4,
            alpha: 0.5,
        })
        .unwrap();
        let raw: Vec<f64> = (1..=4).map(|k| 0.25 / (k as f64).sqrt()).collect();
        let total: f64 = raw.iter().sum();
        for (p, r) in m.probs().iter().zip(&raw) {
            assert!((p - r / total).abs() < 1e-15);
        }
        // α = 0 is the uniform model
        let flat = build_model(&ModelSpec::PowerLaw {
            n: 10,
            cells: 5,
            alpha: 0.0,
        })
        .unwrap();
        assert!(flat.is_uniform());
    }

    #[test]
    fn validation_errors_name_the_field() {
        let cases = [
            (ModelSpec::Uniform { n: 0, cells: 4 }, "n"),
            (ModelSpec::Uniform { n: 3, cells: 1 }, "N"),
            (
                ModelSpec::PowerLaw {
                    n: 3,
                    cells: 4,
                    alpha: 1.0,
                },
                "alpha",
            ),
            (
                ModelSpec::Perturbed {
                    n: 3,
                    delta: 0.1,
                    ell: vec![1.0, 1.0],
                },
                "ell",
            ),
            (
                ModelSpec::Perturbed {
                    n: 3,
                    delta: 2.0,
                    ell: vec![1.0, -1.0],
                },
                "delta",
            ),
            (
                ModelSpec::Explicit {
                    n: 3,
                    probs: vec![0.5, 0.6],
                },
                "probs",
            ),
            (
                ModelSpec::Explicit {
                    n: 3,
                    probs: vec![1.0, 0.0],
                },
                "probs",
            ),
        ];
        for (spec, field) in cases {
            match build_model(&spec) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{spec:?}"),
                other => panic!("{spec:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn regimes() {
        let t = RegimeThresholds::default();
        let r = classify_regime(&MultinomialModel::uniform(1024, 512).unwrap(), &t);
        assert_eq!(r, Regime { tag: RegimeTag::Sparse, uniform: true });
        let r = classify_regime(&MultinomialModel::uniform(100_000, 100).unwrap(), &t);
        assert_eq!(r.tag, RegimeTag::Dense);
        let r = classify_regime(&MultinomialModel::uniform(100, 10_000).unwrap(), &t);
        assert_eq!(r.tag, RegimeTag::VerySparse);
        assert!(r.uniform);
    }

    #[test]
    fn json_spec_format() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{"family": "powerlaw", "n": 2048, "N": 512, "alpha": 0.5}"#)
                .unwrap();
        assert_eq!(
            spec,
            ModelSpec::PowerLaw {
                n: 2048,
                cells: 512,
                alpha: 0.5
            }
        );
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = build_model(&ModelSpec::PowerLaw {
            n: 50,
            cells: 37,
            alpha: 0.3,
        })
        .unwrap();
        let text = write_probs_csv(m.probs());
        let back = read_probs_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), m.cells());
        for (a, b) in back.iter().zip(m.probs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(read_probs_csv("0.5\nabc\n".as_bytes()).is_err());
        let with_comments = read_probs_csv("# header\n0.25\n\n0.75\n".as_bytes()).unwrap();
        assert_eq!(with_comments, vec![0.25, 0.75]);
    }
}
