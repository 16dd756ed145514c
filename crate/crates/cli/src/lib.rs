//! Argument parsing, report types and subcommand drivers for `mntail`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use multinomial_tails::kernels::{moment_summary, Kernel, Method, MomentSummary, PdsFrame};
use multinomial_tails::model::{
    build_model, classify_regime, read_probs_csv, ModelSpec, MultinomialModel, Regime, RegimeThresholds,
};
use multinomial_tails::oracle::{
    composition_count, enumerate_distribution, mc_tail_estimate, ExactDistribution, DEFAULT_CAP, MIN_TRIALS,
};
use multinomial_tails::serial::{serial_test, words_from_reader, SerialConfig, SerialReport};
use multinomial_tails::tail::{CorrectionCoeffs, Side, TailConfig, TailEngine, TailResult, Zone};
use multinomial_tails::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status for an error: 2 for configuration problems, 3 for
/// unsupported (kernel, regime) combinations, 4 for exhausted input.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. }
        | Error::Domain(_)
        | Error::Parse(_)
        | Error::TooLarge { .. }
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        Error::Unsupported(_) | Error::DegenerateVariance(_) => 3,
        Error::Exhausted { .. } => 4,
        _ => 1,
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "mntail", version, about = "Moments and tail approximations for multinomial statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write to this file instead of standard output.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poissonized moment summary of a statistic.
    Moments(MomentsArgs),
    /// First-order and corrected tail probabilities on a grid of x.
    Tail(TailArgs),
    /// Exact law of a statistic on a small model.
    Enumerate(EnumerateArgs),
    /// Tail approximations against Monte Carlo (or exact) tail frequencies.
    Simulate(SimulateArgs),
    /// Sparse serial test of a stream of little-endian 64-bit words.
    Rngtest(RngtestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFamily {
    Uniform,
    Powerlaw,
    Perturbed,
    File,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelFamily::Uniform)]
    pub model: ModelFamily,
    /// Number of observations.
    #[arg(long)]
    pub n: u64,
    /// Number of cells N.
    #[arg(long)]
    pub cells: Option<usize>,
    /// Power-law exponent, in [0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Perturbation size δ.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Perturbation directions ℓ, comma separated, summing to zero.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ell: Option<Vec<f64>>,
    /// One probability per line.
    #[arg(long)]
    pub probs_file: Option<PathBuf>,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<ModelSpec> {
        let need_cells = || self.cells.ok_or_else(|| invalid("cells", "required for this model"));
        Ok(match self.model {
            ModelFamily::Uniform => ModelSpec::Uniform {
                n: self.n,
                cells: need_cells()?,
            },
            ModelFamily::Powerlaw => ModelSpec::PowerLaw {
                n: self.n,
                cells: need_cells()?,
                alpha: self.alpha.ok_or_else(|| invalid("alpha", "required for the power-law model"))?,
            },
            ModelFamily::Perturbed => {
                let ell = self.ell.clone().ok_or_else(|| invalid("ell", "required for the perturbed model"))?;
                if let Some(c) = self.cells {
                    if c != ell.len() {
                        return Err(invalid("cells", format!("{c} cells but {} ell entries", ell.len())));
                    }
                }
                ModelSpec::Perturbed {
                    n: self.n,
                    delta: self.delta.ok_or_else(|| invalid("delta", "required for the perturbed model"))?,
                    ell,
                }
            }
            ModelFamily::File => {
                let path = self
                    .probs_file
                    .as_ref()
                    .ok_or_else(|| invalid("probs-file", "required for --model file"))?;
                let probs = read_probs_csv(File::open(path)?)?;
                ModelSpec::Explicit { n: self.n, probs }
            }
        })
    }

    pub fn build(&self) -> Result<MultinomialModel> {
        build_model(&self.spec()?)
    }
}

fn parse_kernel(s: &str) -> std::result::Result<Kernel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// pds:<d>[:cressie|power|bare], chisq, count:<r>, atleast:<r>, collisions, unfilled:<levels-file>
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Kernel,
    /// series, closed or auto.
    #[arg(long, value_parser = parse_method, default_value = "auto")]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Upper,
    Lower,
    Both,
}

impl SideArg {
    fn sides(self) -> Vec<Side> {
        match self {
            SideArg::Upper => vec![Side::Upper],
            SideArg::Lower => vec![Side::Lower],
            SideArg::Both => vec![Side::Upper, Side::Lower],
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TailOptions {
    /// Standardized deviations, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SideArg::Upper)]
    pub side: SideArg,
    /// Number of terms of the correction series.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub order: u8,
    /// Fraction of the zone bound inside which results count as in-zone.
    #[arg(long, default_value_t = multinomial_tails::tail::DEFAULT_ZONE_FRACTION)]
    pub zone_fraction: f64,
}

impl TailOptions {
    fn config(&self, method: Method) -> Result<TailConfig> {
        if self.x.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("x", "every grid point must be finite and non-negative"));
        }
        if !(self.zone_fraction > 0.0) {
            return Err(invalid("zone-fraction", "must be positive"));
        }
        Ok(TailConfig {
            order: self.order,
            zone_fraction: self.zone_fraction,
            method,
            ..TailConfig::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub tail: TailOptions,
}

#[derive(Debug, Clone, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Kernel,
    /// Largest number of compositions to visit.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub tail: TailOptions,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Models with at most this many compositions use the exact law instead of simulation.
    #[arg(long, default_value_t = 10_000)]
    pub exact_limit: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RngtestArgs {
    /// Word stream, or '-' for standard input.
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value_t = multinomial_tails::serial::DEFAULT_CELLS)]
    pub cells: u64,
    /// Accepted words to tally; defaults to 2N.
    #[arg(long)]
    pub n: Option<u64>,
    /// Level for the reject flag, per tail.
    #[arg(long, default_value_t = 1e-3)]
    pub significance: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub order: u8,
    #[arg(long, default_value_t = multinomial_tails::tail::DEFAULT_ZONE_FRACTION)]
    pub zone_fraction: f64,
}

/// Scalars describing the model a report was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub n: u64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub lambda: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub regime: Regime,
}

impl ModelInfo {
    pub fn of(model: &MultinomialModel) -> Self {
        Self {
            n: model.n(),
            cells: model.cells(),
            lambda: model.lambda(),
            p_min: model.p_min(),
            p_max: model.p_max(),
            regime: classify_regime(model, &RegimeThresholds::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePair {
    /// `CR_N(d)`.
    pub cressie: MomentSummary,
    /// `R_N^d = Σ np_m (η_m/np_m)^{d+1}`.
    pub power: MomentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub model: ModelInfo,
    pub kernel: Kernel,
    pub method: Method,
    pub summary: MomentSummary,
    /// Both affine frames of a power-divergence statistic.
    pub frames: Option<FramePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub model: ModelInfo,
    pub kernel: Kernel,
    pub summary: MomentSummary,
    pub coeffs: CorrectionCoeffs,
    pub zone: Zone,
    pub zone_fraction: f64,
    pub rows: Vec<TailResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerateReport {
    pub model: ModelInfo,
    pub kernel: Kernel,
    pub compositions: f64,
    pub distribution: ExactDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Mc,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub x: f64,
    pub side: Side,
    pub threshold: f64,
    pub approximation: f64,
    pub p_first_order: f64,
    pub in_zone: bool,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `(approximation − estimate)` over the interval half-width; absent
    /// for exact references.
    pub z_discrepancy: Option<f64>,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub model: ModelInfo,
    pub kernel: Kernel,
    pub order: u8,
    pub trials: Option<u64>,
    pub seed: u64,
    pub rows: Vec<SimulateRow>,
}

pub fn run_moments(args: &MomentsArgs) -> Result<MomentsReport> {
    let model = args.model.build()?;
    let kernel = &args.kernel.kernel;
    let method = args.kernel.method;
    let summary = moment_summary(&model, kernel, method)?;
    let frames = match kernel {
        Kernel::Pds(p) => {
            let frame = |f: PdsFrame| moment_summary(&model, &Kernel::Pds(p.with_frame(f)), method);
            Some(FramePair {
                cressie: frame(PdsFrame::Cressie)?,
                power: frame(PdsFrame::Power)?,
            })
        }
        _ => None,
    };
    Ok(MomentsReport {
        model: ModelInfo::of(&model),
        kernel: kernel.clone(),
        method,
        summary,
        frames,
    })
}

pub fn run_tail(args: &TailArgs) -> Result<TailReport> {
    let model = args.model.build()?;
    let config = args.tail.config(args.kernel.method)?;
    let engine = TailEngine::new(&model, &args.kernel.kernel, &config)?;
    let mut rows = Vec::new();
    for side in args.tail.side.sides() {
        for &x in &args.tail.x {
            rows.push(engine.tail(x, side)?);
        }
    }
    Ok(TailReport {
        model: ModelInfo::of(&model),
        kernel: args.kernel.kernel.clone(),
        summary: engine.summary,
        coeffs: engine.coeffs,
        zone: engine.zone,
        zone_fraction: engine.zone_fraction,
        rows,
    })
}

fn exact_law(model: &MultinomialModel, kernel: &Kernel, cap: u64) -> Result<ExactDistribution> {
    if kernel.is_randomized() {
        return Err(Error::Unsupported(format!(
            "{} has random levels; its exact law is not a function of the counts",
            kernel.label()
        )));
    }
    let rates: Vec<f64> = model.rates().collect();
    enumerate_distribution(model, &|c| kernel.statistic(&rates, c).expect("deterministic kernel"), cap)
}

pub fn run_enumerate(args: &EnumerateArgs) -> Result<EnumerateReport> {
    let model = args.model.build()?;
    let distribution = exact_law(&model, &args.kernel, args.cap)?;
    Ok(EnumerateReport {
        model: ModelInfo::of(&model),
        kernel: args.kernel.clone(),
        compositions: composition_count(model.n(), model.cells()),
        distribution,
    })
}

pub fn run_simulate(args: &SimulateArgs) -> Result<SimulateReport> {
    if args.trials < MIN_TRIALS {
        return Err(invalid("trials", format!("need at least {MIN_TRIALS}, got {}", args.trials)));
    }
    let model = args.model.build()?;
    let kernel = &args.kernel.kernel;
    let config = args.tail.config(args.kernel.method)?;
    let engine = TailEngine::new(&model, kernel, &config)?;
    let exact = (composition_count(model.n(), model.cells()) <= args.exact_limit as f64 && !kernel.is_randomized())
        .then(|| exact_law(&model, kernel, args.exact_limit))
        .transpose()?;
    let mut rows = Vec::new();
    for side in args.tail.side.sides() {
        let approx: Vec<TailResult> = args.tail.x.iter().map(|&x| engine.tail(x, side)).collect::<Result<_>>()?;
        match &exact {
            Some(law) => {
                for r in approx {
                    let p = match side {
                        Side::Upper => law.upper_tail(r.threshold),
                        Side::Lower => law.lower_tail(r.threshold),
                    };
                    rows.push(row(&r, p, p, p, None, Reference::Exact));
                }
            }
            None => {
                let est = mc_tail_estimate(&model, kernel, &engine.summary, &args.tail.x, side, args.trials, args.seed)?;
                for (i, r) in approx.iter().enumerate() {
                    let z = (r.p_corrected - est.tail_estimates[i]) / est.half_width(i);
                    rows.push(row(
                        r,
                        est.tail_estimates[i],
                        est.ci_low[i],
                        est.ci_high[i],
                        Some(z),
                        Reference::Mc,
                    ));
                }
            }
        }
    }
    Ok(SimulateReport {
        model: ModelInfo::of(&model),
        kernel: kernel.clone(),
        order: args.tail.order,
        trials: exact.is_none().then_some(args.trials),
        seed: args.seed,
        rows,
    })
}

fn row(r: &TailResult, estimate: f64, ci_low: f64, ci_high: f64, z: Option<f64>, reference: Reference) -> SimulateRow {
    SimulateRow {
        x: r.x,
        side: r.side,
        threshold: r.threshold,
        approximation: r.p_corrected,
        p_first_order: r.p_first_order,
        in_zone: r.in_zone,
        estimate,
        ci_low,
        ci_high,
        z_discrepancy: z,
        reference,
    }
}

pub fn run_rngtest(args: &RngtestArgs) -> Result<SerialReport> {
    let reader: Box<dyn Read> = if args.input == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(File::open(&args.input)?)
    };
    if !(args.significance > 0.0 && args.significance < 1.0) {
        return Err(invalid("significance", "must lie in (0, 1)"));
    }
    let config = SerialConfig {
        cells: args.cells,
        n: args.n.unwrap_or(2 * args.cells),
        alpha: args.significance,
        tail: TailConfig {
            order: args.order,
            zone_fraction: args.zone_fraction,
            ..TailConfig::default()
        },
    };
    serial_test(words_from_reader(reader), &config)
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    csv_bytes(w)
}

fn moments_csv(report: &MomentsReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "frame", "A_N", "tau_n", "sigma_tilde_sq", "sigma_sq", "beta_3N", "beta_4N", "regime",
    ])?;
    let regime = serde_json::to_value(report.model.regime.tag)?;
    let regime = regime.as_str().unwrap_or_default().to_string();
    let mut emit = |frame: &str, s: &MomentSummary| {
        w.write_record([
            frame.to_string(),
            s.mean.to_string(),
            s.tau.to_string(),
            s.raw_variance.to_string(),
            s.variance.to_string(),
            s.beta3.to_string(),
            s.beta4.to_string(),
            regime.clone(),
        ])
    };
    match &report.frames {
        Some(f) => {
            emit("cressie", &f.cressie)?;
            emit("power", &f.power)?;
        }
        None => emit("", &report.summary)?,
    }
    csv_bytes(w)
}

fn emit<T: Serialize>(format: Format, value: &T, csv: impl FnOnce(&T) -> Result<Vec<u8>>) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(value)?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => csv(value),
    }
}

/// Runs a parsed command line and returns the rendered output.
pub fn render(cli: &Cli) -> Result<Vec<u8>> {
    let f = cli.format;
    match &cli.command {
        Command::Moments(a) => emit(f, &run_moments(a)?, moments_csv),
        Command::Tail(a) => emit(f, &run_tail(a)?, |r| rows_csv(&r.rows)),
        Command::Enumerate(a) => emit(f, &run_enumerate(a)?, |r| Ok(r.distribution.to_csv()?.into_bytes())),
        Command::Simulate(a) => emit(f, &run_simulate(a)?, |r| rows_csv(&r.rows)),
        Command::Rngtest(a) => emit(f, &run_rngtest(a)?, |r| rows_csv(&r.statistics)),
    }
}

/// Parses, runs and writes; returns the process exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render().ansi());
            return code;
        }
    };
    let result = render(&cli).and_then(|bytes| match &cli.output {
        Some(path) => std::fs::write(path, bytes).map_err(Error::from),
        None => stdout.write_all(&bytes).map_err(Error::from),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "mntail: {e}");
            exit_code(&e)
        }
    }
}
