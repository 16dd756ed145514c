use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::{Kernel, MomentSummary};
use crate::model::MultinomialModel;
use crate::normal::Z_99;
use crate::poisson::CompensatedSum;
use crate::tail::Side;

/// Minimum number of trials accepted by the tail estimators.
pub const MIN_TRIALS: u64 = 1000;

/// Trials per work unit. Work units, not threads, define the reduction
/// order, so results do not depend on the worker count.
const CHUNK: u64 = 2048;

pub type TrialRng = ChaCha8Rng;

/// Generator for trial `index` under `seed`: the seed picks the key, the
/// index picks the stream.
pub fn trial_rng(seed: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sequential conditional-binomial multinomial sampler.
#[derive(Debug, Clone)]
pub struct MultinomialSampler {
    n: u64,
    // cond[j] = p_j / (p_j + ⋯ + p_N)
    cond: Vec<f64>,
}

impl MultinomialSampler {
    pub fn new(model: &MultinomialModel) -> Self {
        let probs = model.probs();
        let mut cond = vec![1.0; probs.len()];
        let mut rest = CompensatedSum::new();
        for j in (0..probs.len()).rev() {
            rest.add(probs[j]);
            cond[j] = (probs[j] / rest.value()).min(1.0);
        }
        Self { n: model.n(), cond }
    }

    pub fn cells(&self) -> usize {
        self.cond.len()
    }

    /// Writes one draw into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u64]) {
        let last = self.cond.len() - 1;
        let mut remaining = self.n;
        for (j, slot) in out[..last].iter_mut().enumerate() {
            let x = if remaining == 0 {
                0
            } else {
                Binomial::new(remaining, self.cond[j])
                    .expect("conditional probabilities lie in [0, 1]")
                    .sample(rng)
            };
            *slot = x;
            remaining -= x;
        }
        out[last] = remaining;
    }
}

/// One multinomial draw, reproducible from `seed`.
pub fn sample_counts(model: &MultinomialModel, seed: u64) -> Vec<u64> {
    let sampler = MultinomialSampler::new(model);
    let mut out = vec![0; model.cells()];
    sampler.sample_into(&mut trial_rng(seed, 0), &mut out);
    out
}

/// Draws `R_N` for one trial. Unfilled-cell kernels draw the levels after
/// the counts from the same generator.
fn draw_statistic(kernel: &Kernel, rates: &[f64], counts: &[u64], rng: &mut TrialRng) -> f64 {
    match kernel {
        Kernel::Unfilled { levels } => {
            let pmf = levels.pmf();
            counts
                .iter()
                .filter(|&&x| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut level = pmf.len() - 1;
                    for (l, p) in pmf.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            level = l;
                            break;
                        }
                    }
                    x < level as u64
                })
                .count() as f64
        }
        _ => counts.iter().zip(rates).map(|(&x, &np)| kernel.value(x, np)).sum(),
    }
}

/// Simulates `trials` draws and evaluates every kernel on each, sharing the
/// samples. Returns one vector of values per kernel, in trial order.
pub fn simulate_statistics(
    model: &MultinomialModel,
    kernels: &[Kernel],
    trials: u64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let sampler = MultinomialSampler::new(model);
    let rates: Vec<f64> = model.rates().collect();
    let chunks = trials.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            let mut counts = vec![0u64; sampler.cells()];
            let mut out = vec![Vec::with_capacity((hi - lo) as usize); kernels.len()];
            for t in lo..hi {
                let mut rng = trial_rng(seed, t);
                sampler.sample_into(&mut rng, &mut counts);
                for (k, vals) in kernels.iter().zip(out.iter_mut()) {
                    vals.push(draw_statistic(k, &rates, &counts, &mut rng));
                }
            }
            out
        })
        .collect();
    let mut values = vec![Vec::with_capacity(trials as usize); kernels.len()];
    for chunk in per_chunk {
        for (all, part) in values.iter_mut().zip(chunk) {
            all.extend(part);
        }
    }
    values
}

/// Wilson score interval for `hits` successes in `trials`, at normal quantile `z`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Empirical tail frequencies with Wilson 99% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub x_values: Vec<f64>,
    pub side: Side,
    /// Statistic thresholds the exceedances were counted against.
    pub thresholds: Vec<f64>,
    pub hits: Vec<u64>,
    pub tail_estimates: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Builds the estimate from simulated values; `x_values` label the
    /// thresholds in the output.
    pub fn from_values(
        values: &[f64],
        x_values: Vec<f64>,
        thresholds: Vec<f64>,
        side: Side,
        seed: u64,
    ) -> Self {
        let trials = values.len() as u64;
        let hits: Vec<u64> = thresholds
            .iter()
            .map(|&t| {
                values
                    .iter()
                    .filter(|&&v| match side {
                        Side::Upper => v > t,
                        Side::Lower => v < t,
                    })
                    .count() as u64
            })
            .collect();
        let (ci_low, ci_high) = hits.iter().map(|&h| wilson_interval(h, trials, Z_99)).unzip();
        Self {
            tail_estimates: hits.iter().map(|&h| h as f64 / trials as f64).collect(),
            x_values,
            side,
            thresholds,
            hits,
            ci_low,
            ci_high,
            trials,
            seed,
        }
    }

    /// Half-width of the interval at index `i`.
    pub fn half_width(&self, i: usize) -> f64 {
        0.5 * (self.ci_high[i] - self.ci_low[i])
    }

    /// Rows `x,threshold,estimate,ci_low,ci_high`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "threshold", "estimate", "ci_low", "ci_high"])?;
        for i in 0..self.x_values.len() {
            w.write_record([
                self.x_values[i].to_string(),
                self.thresholds[i].to_string(),
                self.tail_estimates[i].to_string(),
                self.ci_low[i].to_string(),
                self.ci_high[i].to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(invalid("trials", format!("need at least {MIN_TRIALS}, got {trials}")));
    }
    Ok(())
}

/// `P{R_N > t}` (or `< t`) for raw statistic thresholds.
pub fn mc_exceedance(
    model: &MultinomialModel,
    kernel: &Kernel,
    thresholds: &[f64],
    side: Side,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_trials(trials)?;
    let values = simulate_statistics(model, std::slice::from_ref(kernel), trials, seed);
    Ok(McEstimate::from_values(
        &values[0],
        thresholds.to_vec(),
        thresholds.to_vec(),
        side,
        seed,
    ))
}

/// Empirical `P{R_N > A_N + xσ_N}` (or `P{R_N < A_N − xσ_N}`) per `x`.
pub fn mc_tail_estimate(
    model: &MultinomialModel,
    kernel: &Kernel,
    summary: &MomentSummary,
    x_list: &[f64],
    side: Side,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_trials(trials)?;
    let thresholds = standardized_thresholds(summary, x_list, side);
    let values = simulate_statistics(model, std::slice::from_ref(kernel), trials, seed);
    Ok(McEstimate::from_values(&values[0], x_list.to_vec(), thresholds, side, seed))
}

pub(crate) fn standardized_thresholds(summary: &MomentSummary, x_list: &[f64], side: Side) -> Vec<f64> {
    x_list
        .iter()
        .map(|&x| match side {
            Side::Upper => summary.threshold(x),
            Side::Lower => summary.threshold(-x),
        })
        .collect()
}
