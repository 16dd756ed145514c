//! Sparse serial tests of a stream of 64-bit words.
//!
//! Each word is mapped to one of `N` cells without bias, the first `n`
//! accepted words are tallied, and four occupancy statistics of the
//! resulting counts are compared with their null laws under the uniform
//! multinomial model: Pearson's χ², the log-likelihood ratio, the number of
//! empty cells `μ_0` and the number of collisions `C_n`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::Kernel;
use crate::model::MultinomialModel;
use crate::oracle::{composition_count, enumerate_distribution};
use crate::tail::{Side, TailConfig, TailEngine};

/// Default number of cells, `2^16`.
pub const DEFAULT_CELLS: u64 = 1 << 16;

/// Exact laws are attached when the model has at most this many compositions.
pub const EXACT_LIMIT: u64 = 10_000;

/// Maps a `bits`-bit word to a cell, or `None` when it falls in the rejected
/// top slice `w ≥ ⌊2^bits / N⌋ · N`.
pub fn bin_word_bits(word: u64, cells: u64, bits: u32) -> Option<u64> {
    debug_assert!(bits <= 64 && cells >= 1);
    let space = 1u128 << bits;
    let limit = space / cells as u128 * cells as u128;
    ((word as u128) < limit).then(|| word % cells)
}

/// [`bin_word_bits`] for full 64-bit words.
pub fn bin_word(word: u64, cells: u64) -> Option<u64> {
    bin_word_bits(word, cells, 64)
}

/// SplitMix64 output for a counter value; `splitmix64(0), splitmix64(1), …`
/// is a counter-mode stream.
pub fn splitmix64(counter: u64) -> u64 {
    let mut z = counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Little-endian 64-bit words from a byte stream; a trailing partial word
/// is dropped.
pub fn words_from_reader<R: Read>(reader: R) -> impl Iterator<Item = std::io::Result<u64>> {
    let mut reader = std::io::BufReader::new(reader);
    std::iter::from_fn(move || {
        let mut buf = [0u8; 8];
        let mut filled = 0;
        while filled < 8 {
            match reader.read(&mut buf[filled..]) {
                Ok(0) => return None,
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(u64::from_le_bytes(buf)))
    })
}

/// Cell counts of the first `n` accepted words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub counts: Vec<u64>,
    pub words_consumed: u64,
    pub words_rejected: u64,
}

pub fn tally_words<I>(words: I, cells: u64, n: u64) -> Result<Tally>
where
    I: IntoIterator<Item = std::io::Result<u64>>,
{
    let mut counts = vec![0u64; cells as usize];
    let (mut consumed, mut accepted) = (0u64, 0u64);
    let mut words = words.into_iter();
    while accepted < n {
        let Some(word) = words.next() else {
            return Err(Error::Exhausted {
                consumed,
                accepted,
                needed: n,
            });
        };
        let word = word?;
        consumed += 1;
        if let Some(cell) = bin_word(word, cells) {
            counts[cell as usize] += 1;
            accepted += 1;
        }
    }
    Ok(Tally {
        counts,
        words_consumed: consumed,
        words_rejected: consumed - accepted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerialConfig {
    pub cells: u64,
    pub n: u64,
    /// Significance level for the `reject` flag, applied to both tails.
    pub alpha: f64,
    pub tail: TailConfig,
}

impl SerialConfig {
    /// `N` cells and `n = 2N` draws.
    pub fn with_cells(cells: u64) -> Self {
        Self {
            cells,
            n: 2 * cells,
            alpha: 1e-3,
            tail: TailConfig::default(),
        }
    }
}

impl Default for SerialConfig {
    fn default() -> Self {
        Self::with_cells(DEFAULT_CELLS)
    }
}

/// One statistic of a serial test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialStatistic {
    pub name: String,
    pub value: f64,
    #[serde(rename = "A_N")]
    pub mean: f64,
    #[serde(rename = "sigma_N")]
    pub sd: f64,
    /// `(value − A_N) / σ_N`.
    pub x: f64,
    /// Approximate `P{R_N > value}`.
    pub p_upper: f64,
    /// Approximate `P{R_N < value}`.
    pub p_lower: f64,
    /// Whether `|x|` lies inside the fraction of the validity zone; the
    /// corrected approximation is used only there.
    pub in_zone: bool,
    pub regime_rule: String,
    /// Exact `P{R_N > value}` and `P{R_N ≥ value}` on enumerable models.
    pub exact_upper: Option<f64>,
    pub exact_upper_inclusive: Option<f64>,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialReport {
    #[serde(rename = "N")]
    pub cells: u64,
    pub n: u64,
    pub words_consumed: u64,
    pub words_rejected: u64,
    pub statistics: Vec<SerialStatistic>,
}

/// The four statistics, by report name.
pub fn serial_kernels() -> Vec<(&'static str, Kernel)> {
    vec![
        ("chi_square", Kernel::chi_square()),
        ("log_likelihood", Kernel::pds(0.0).expect("d = 0 is valid")),
        ("empty_cells", Kernel::count_exact(0)),
        ("collisions", Kernel::Collisions),
    ]
}

/// Runs the serial test on a word stream.
pub fn serial_test<I>(words: I, config: &SerialConfig) -> Result<SerialReport>
where
    I: IntoIterator<Item = std::io::Result<u64>>,
{
    if config.cells < 2 {
        return Err(invalid("N", format!("need at least 2 cells, got {}", config.cells)));
    }
    if config.n == 0 {
        return Err(invalid("n", "need at least one draw"));
    }
    let model = MultinomialModel::uniform(config.n, config.cells as usize)?;
    let tally = tally_words(words, config.cells, config.n)?;
    let statistics = evaluate_counts(&model, &tally.counts, config)?;
    Ok(SerialReport {
        cells: config.cells,
        n: config.n,
        words_consumed: tally.words_consumed,
        words_rejected: tally.words_rejected,
        statistics,
    })
}

/// Evaluates the four statistics on given counts.
pub fn evaluate_counts(
    model: &MultinomialModel,
    counts: &[u64],
    config: &SerialConfig,
) -> Result<Vec<SerialStatistic>> {
    let rates: Vec<f64> = model.rates().collect();
    let enumerable = composition_count(model.n(), model.cells()) <= EXACT_LIMIT as f64;
    let mut out = Vec::new();
    for (name, kernel) in serial_kernels() {
        let value = kernel.statistic(&rates, counts)?;
        let engine = TailEngine::new(model, &kernel, &config.tail)?;
        let summary = engine.summary;
        let sd = summary.sd();
        let x = (value - summary.mean) / sd;
        let (near, far) = if x >= 0.0 {
            (Side::Upper, Side::Lower)
        } else {
            (Side::Lower, Side::Upper)
        };
        let r = engine.tail(x.abs(), near)?;
        let p_near = if r.in_zone { r.p_corrected } else { r.p_first_order };
        let (p_upper, p_lower) = match far {
            Side::Lower => (p_near, 1.0 - p_near),
            Side::Upper => (1.0 - p_near, p_near),
        };
        let (exact_upper, exact_upper_inclusive) = if enumerable {
            let law = enumerate_distribution(
                model,
                &|c| kernel.statistic(&rates, c).expect("deterministic kernel"),
                EXACT_LIMIT,
            )?;
            let strict = law.upper_tail(value);
            let tol = 1e-12 * value.abs().max(1.0);
            (Some(strict), Some(law.upper_tail(value - tol)))
        } else {
            (None, None)
        };
        out.push(SerialStatistic {
            name: name.to_string(),
            value,
            mean: summary.mean,
            sd,
            x,
            p_upper,
            p_lower,
            in_zone: r.in_zone,
            regime_rule: r.regime_rule.id().to_string(),
            exact_upper,
            exact_upper_inclusive,
            reject: p_upper.min(p_lower) < config.alpha,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_binning_is_exactly_balanced() {
        for cells in [2u64, 3, 5, 6, 7, 10, 100, 255, 256] {
            let mut hits = vec![0u64; cells as usize];
            for w in 0..256u64 {
                if let Some(c) = bin_word_bits(w, cells, 8) {
                    hits[c as usize] += 1;
                }
            }
            let each = 256 / cells;
            assert!(hits.iter().all(|&h| h == each), "N={cells}: {hits:?}");
        }
    }

    #[test]
    fn full_width_rejection_slice() {
        assert_eq!(bin_word(u64::MAX, 1 << 16), Some(0xFFFF));
        // 2^64 mod 3 = 1, so only the very last word is rejected
        assert_eq!(bin_word(u64::MAX, 3), None);
        assert_eq!(bin_word(u64::MAX - 1, 3), Some((u64::MAX - 1) % 3));
    }

    #[test]
    fn short_stream_reports_consumption() {
        let words = (0..5u64).map(Ok);
        match tally_words(words, 4, 10) {
            Err(Error::Exhausted {
                consumed,
                accepted,
                needed,
            }) => assert_eq!((consumed, accepted, needed), (5, 5, 10)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reads_little_endian_words() {
        let bytes: Vec<u8> = [1u64, 2, 3].iter().flat_map(|w| w.to_le_bytes()).chain([9u8]).collect();
        let words: Vec<u64> = words_from_reader(&bytes[..]).map(|w| w.unwrap()).collect();
        assert_eq!(words, vec![1, 2, 3]);
    }

    #[test]
    fn two_cells_two_draws() {
        let config = SerialConfig {
            cells: 2,
            n: 2,
            ..SerialConfig::default()
        };
        let report = serial_test([0u64, 1].into_iter().map(Ok), &config).unwrap();
        let chi = &report.statistics[0];
        assert_eq!(chi.value, 0.0);
        assert!((chi.exact_upper.unwrap() - 0.5).abs() < 1e-15);
        assert!((chi.exact_upper_inclusive.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_stream_is_rejected() {
        let config = SerialConfig::with_cells(1 << 10);
        let report = serial_test(std::iter::repeat(12345u64).map(Ok), &config).unwrap();
        let coll = report.statistics.iter().find(|s| s.name == "collisions").unwrap();
        assert_eq!(coll.value, (config.n - 1) as f64);
        assert!(coll.p_upper < 1e-6 && coll.reject);
    }
}
