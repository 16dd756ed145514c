use std::io::Read;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};
use crate::poisson::{expect_fn_multi, CompensatedSum, SERIES_TOL};

const SUM_TOL: f64 = 1e-12;

/// Law of the fill level `ν` of a cell, stored as a dense pmf on `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LevelDistribution {
    pmf: Vec<f64>,
    // exceed[l] = P{ν > l}
    exceed: Vec<f64>,
}

impl TryFrom<Vec<f64>> for LevelDistribution {
    type Error = Error;
    fn try_from(pmf: Vec<f64>) -> Result<Self> {
        Self::new(pmf)
    }
}

impl From<LevelDistribution> for Vec<f64> {
    fn from(levels: LevelDistribution) -> Self {
        levels.pmf
    }
}

impl LevelDistribution {
    /// `pmf[l] = P{ν = l}`.
    pub fn new(mut pmf: Vec<f64>) -> Result<Self> {
        if let Some((l, p)) = pmf
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(invalid("levels", format!("P{{ν = {l}}} = {p} is not a probability")));
        }
        while pmf.len() > 1 && pmf.last() == Some(&0.0) {
            pmf.pop();
        }
        let total: CompensatedSum = pmf.iter().copied().collect();
        if (total.value() - 1.0).abs() > SUM_TOL {
            return Err(invalid(
                "levels",
                format!("level probabilities sum to {} instead of 1", total.value()),
            ));
        }
        if pmf.len() < 2 {
            return Err(invalid("levels", "P{ν = 0} must be below 1"));
        }
        let mut exceed = vec![0.0; pmf.len()];
        let mut tail = CompensatedSum::new();
        for l in (0..pmf.len() - 1).rev() {
            tail.add(pmf[l + 1]);
            exceed[l] = tail.value();
        }
        Ok(Self { pmf, exceed })
    }

    /// The constant level `ν ≡ level`.
    pub fn constant(level: usize) -> Result<Self> {
        let mut pmf = vec![0.0; level + 1];
        pmf[level] = 1.0;
        Self::new(pmf)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `P{ν = l}`.
    pub fn prob(&self, l: u64) -> f64 {
        usize::try_from(l)
            .ok()
            .and_then(|l| self.pmf.get(l))
            .copied()
            .unwrap_or(0.0)
    }

    /// `P{ν > x}`: the probability that a cell holding `x` items is unfilled.
    pub fn exceedance(&self, x: u64) -> f64 {
        usize::try_from(x)
            .ok()
            .and_then(|x| self.exceed.get(x))
            .copied()
            .unwrap_or(0.0)
    }

    /// `β_0 = P{ν = 0}`.
    pub fn beta0(&self) -> f64 {
        self.pmf[0]
    }

    /// `G`, the smallest positive level with positive mass.
    pub fn min_positive_level(&self) -> usize {
        (1..self.pmf.len())
            .find(|&l| self.pmf[l] > 0.0)
            .expect("β_0 < 1 guarantees a positive level")
    }

    /// `α(G) = P{ν = G} / G!`.
    pub fn alpha(&self) -> f64 {
        let g = self.min_positive_level();
        self.pmf[g] / ln_factorial(g as u64).exp()
    }

    /// Largest level with positive mass.
    pub fn max_level(&self) -> usize {
        self.pmf.len() - 1
    }
}

/// `(τ(λ), τ'(λ))` with `τ(λ) = Σ π_l(λ) P{ν > l}` and
/// `τ'(λ) = −Σ π_l(λ) P{ν = l + 1}`.
pub fn level_tau(levels: &LevelDistribution, lambda: f64) -> Result<(f64, f64)> {
    let [tau, neg_slope] = expect_fn_multi(
        |k| [levels.exceedance(k), levels.prob(k + 1)],
        lambda,
        SERIES_TOL,
    )?;
    Ok((tau, -neg_slope))
}

/// Leading-order small-`λ` behaviour of the unfilled-cell statistic, per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseExpansion {
    /// `1 − β_0 − α(G) λ^G`.
    pub tau: f64,
    /// `A_N / N ≈ 1 − β_0`.
    pub mean_per_cell: f64,
    /// `σ_N² / N ≈ β_0 (1 − β_0)`.
    pub variance_per_cell: f64,
}

impl SparseExpansion {
    /// `(A_N, σ_N²)` for `cells` cells.
    pub fn totals(&self, cells: usize) -> (f64, f64) {
        let n = cells as f64;
        (n * self.mean_per_cell, n * self.variance_per_cell)
    }
}

pub fn unfilled_sparse_expansion(levels: &LevelDistribution, lambda: f64) -> Result<SparseExpansion> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!(
            "the small-rate expansion needs 0 < λ < 1, got {lambda}"
        )));
    }
    let b0 = levels.beta0();
    let g = levels.min_positive_level() as i32;
    Ok(SparseExpansion {
        tau: 1.0 - b0 - levels.alpha() * lambda.powi(g),
        mean_per_cell: 1.0 - b0,
        variance_per_cell: b0 * (1.0 - b0),
    })
}

/// Reads `l,P{ν=l}` rows; missing levels have probability zero.
pub fn read_levels_csv<R: Read>(reader: R) -> Result<LevelDistribution> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut pmf: Vec<f64> = Vec::new();
    let mut seen: Vec<bool> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "levels row {}: expected `level,probability`, got {} fields",
                row + 1,
                rec.len()
            )));
        }
        let level: usize = rec[0]
            .parse()
            .map_err(|_| Error::Parse(format!("levels row {}: bad level {:?}", row + 1, &rec[0])))?;
        let p: f64 = rec[1].parse().map_err(|_| {
            Error::Parse(format!("levels row {}: bad probability {:?}", row + 1, &rec[1]))
        })?;
        if level >= pmf.len() {
            pmf.resize(level + 1, 0.0);
            seen.resize(level + 1, false);
        }
        if seen[level] {
            return Err(invalid("levels", format!("level {level} listed twice")));
        }
        seen[level] = true;
        pmf[level] = p;
    }
    LevelDistribution::new(pmf)
}

pub fn write_levels_csv(levels: &LevelDistribution) -> String {
    levels
        .pmf()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(l, p)| format!("{l},{p:.16e}\n"))
        .collect()
}
