use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};
use crate::model::MultinomialModel;
use crate::poisson::CompensatedSum;

/// Default cap on the number of compositions visited.
pub const DEFAULT_CAP: u64 = 2_000_000;

/// Statistic values within this relative distance share one atom.
const MERGE_TOL: f64 = 1e-12;

/// Compositions whose probability falls below this are dropped.
const UNDERFLOW: f64 = 1e-300;

/// `C(n + N − 1, N − 1)`, as a float since it overflows quickly.
pub fn composition_count(n: u64, cells: usize) -> f64 {
    ln_binomial(n + cells as u64 - 1, cells as u64 - 1).exp().round()
}

/// Exact law of a statistic: sorted distinct values and their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn mean(&self) -> f64 {
        let s: CompensatedSum = self.support.iter().zip(&self.probs).map(|(v, p)| v * p).collect();
        s.value()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let s: CompensatedSum = self
            .support
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| (v - mean).powi(2) * p)
            .collect();
        s.value()
    }

    /// `P{X > t}`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        let s: CompensatedSum = self
            .support
            .iter()
            .zip(&self.probs)
            .filter(|(v, _)| **v > t)
            .map(|(_, p)| *p)
            .collect();
        s.value()
    }

    /// `P{X < t}`.
    pub fn lower_tail(&self, t: f64) -> f64 {
        let s: CompensatedSum = self
            .support
            .iter()
            .zip(&self.probs)
            .filter(|(v, _)| **v < t)
            .map(|(_, p)| *p)
            .collect();
        s.value()
    }

    /// Rows `value,probability`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["value", "probability"])?;
        for (v, p) in self.support.iter().zip(&self.probs) {
            w.write_record([format!("{v:.17e}"), format!("{p:.17e}")])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Visits every composition of `n` into `N` parts and tabulates the law of
/// `statistic(counts)`.
pub fn enumerate_distribution(
    model: &MultinomialModel,
    statistic: &dyn Fn(&[u64]) -> f64,
    cap: u64,
) -> Result<ExactDistribution> {
    let n = model.n();
    let cells = model.cells();
    let count = composition_count(n, cells);
    if count > cap as f64 {
        return Err(Error::TooLarge { count, cap });
    }
    let ln_fact: Vec<f64> = (0..=n).map(ln_factorial).collect();
    let ln_p: Vec<f64> = model.probs().iter().map(|p| p.ln()).collect();

    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(count as usize);
    let mut c = vec![0u64; cells];
    c[0] = n;
    loop {
        let mut ln = ln_fact[n as usize];
        for (&m, &lp) in c.iter().zip(&ln_p) {
            if m > 0 {
                ln += m as f64 * lp - ln_fact[m as usize];
            }
        }
        let prob = ln.exp();
        if prob >= UNDERFLOW {
            let value = statistic(&c);
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "enumerated statistic",
                    k: atoms.len() as u64,
                });
            }
            atoms.push((value, prob));
        }
        // next composition in colexicographic order
        let i = c.iter().position(|&v| v > 0).expect("a composition of n >= 1 has a positive part");
        if i == cells - 1 {
            break;
        }
        let v = c[i];
        c[i] = 0;
        c[0] = v - 1;
        c[i + 1] += 1;
    }

    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut support: Vec<f64> = Vec::new();
    let mut probs: Vec<CompensatedSum> = Vec::new();
    for (value, prob) in atoms {
        match support.last() {
            Some(&anchor) if (value - anchor).abs() <= MERGE_TOL * anchor.abs().max(1.0) => {
                probs.last_mut().expect("paired with support").add(prob);
            }
            _ => {
                support.push(value);
                let mut s = CompensatedSum::new();
                s.add(prob);
                probs.push(s);
            }
        }
    }
    Ok(ExactDistribution {
        support,
        probs: probs.iter().map(CompensatedSum::value).collect(),
    })
}
