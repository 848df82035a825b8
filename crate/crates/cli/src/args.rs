use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sabr_core::hagan::HaganBracket;
use sabr_core::mc::{CvVolMode, SigmaScheme};

#[derive(Debug, Parser)]
#[command(name = "sabr", version, about = "SABR implied volatility toolkit")]
pub struct Cli {
    /// JSON file with default options; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for simulation (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hagan vs Monte Carlo implied vols across strikes.
    Smile(SmileArgs),
    /// Generate a training dataset and its manifest.
    Generate(GenerateArgs),
    /// Train one or more architectures on a dataset.
    Train(TrainArgs),
    /// Evaluate trained models: accuracy, stress suite, maturity sweep.
    Evaluate(EvaluateArgs),
    /// Corrected implied vol of a single point.
    Price(PriceArgs),
    /// Inference latency against Monte Carlo.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvVolArg {
    InitialAlpha,
    EffectiveAtm,
}

impl From<CvVolArg> for CvVolMode {
    fn from(v: CvVolArg) -> Self {
        match v {
            CvVolArg::InitialAlpha => CvVolMode::InitialAlpha,
            CvVolArg::EffectiveAtm => CvVolMode::EffectiveAtm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaSchemeArg {
    LogExact,
    EulerStrict,
}

impl From<SigmaSchemeArg> for SigmaScheme {
    fn from(v: SigmaSchemeArg) -> Self {
        match v {
            SigmaSchemeArg::LogExact => SigmaScheme::LogExact,
            SigmaSchemeArg::EulerStrict => SigmaScheme::EulerStrict,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BracketArg {
    Numerator,
    Denominator,
}

impl From<BracketArg> for HaganBracket {
    fn from(v: BracketArg) -> Self {
        match v {
            BracketArg::Numerator => HaganBracket::Numerator,
            BracketArg::Denominator => HaganBracket::Denominator,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitModeArg {
    ByRow,
    ByConfig,
}

/// Monte Carlo options shared by the simulating commands.
#[derive(Debug, Clone, Args, Default)]
pub struct McArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps_per_year: Option<f64>,
    #[arg(long, value_enum)]
    pub cv_vol: Option<CvVolArg>,
    #[arg(long, value_enum)]
    pub sigma_scheme: Option<SigmaSchemeArg>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ConfigArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub f0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SmileArgs {
    #[command(flatten)]
    pub params: ConfigArgs,
    /// `start:step:end` in units of F0, or a comma-separated list of
    /// absolute strikes.
    #[arg(long)]
    pub strikes: Option<String>,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long, value_enum)]
    pub hagan_bracket: Option<BracketArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of parameter configurations (11 rows each).
    #[arg(long)]
    pub configs: Option<usize>,
    #[arg(long, value_enum)]
    pub split_mode: Option<SplitModeArg>,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// ndn, geonn, resnn, georesnn, a comma-separated list, or `all`.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON files.
    #[arg(long, num_args = 1.., required = true)]
    pub model: Vec<PathBuf>,
    /// Maturities of the sweep, comma-separated.
    #[arg(long)]
    pub maturities: Option<String>,
    /// Bucket whose median parameters anchor the maturity sweep.
    #[arg(long)]
    pub sweep_bucket: Option<String>,
    /// Assign regions by fixed moneyness band instead of grid sign.
    #[arg(long)]
    pub moneyness_band: Option<f64>,
    /// Also run the latency benchmark with this many points.
    #[arg(long)]
    pub bench_points: Option<usize>,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub params: ConfigArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    pub mc: McArgs,
}
