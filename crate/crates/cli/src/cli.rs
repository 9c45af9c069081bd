use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mixnorm::limits::{Corollary, Regime, Size};
use mixnorm::mixed_norm::MixedNormSpec;
use mixnorm::Exponent;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "mixnorm", version, about = "Volumes, sampling and limit laws for mixed-norm balls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Volume and normalized radius of a mixed-norm ball.
    Volume(VolumeArgs),
    /// Mixed norm of a given matrix or tensor.
    Norm(NormArgs),
    /// Uniform draws from B_{p,q}^{m,n}, streamed one record per draw.
    Sample(SampleArgs),
    /// Threshold constant A of a corollary.
    Threshold(ThresholdArgs),
    /// Weak limit law of a regime and its CDF at given points.
    Limit(LimitArgs),
    /// Limit of the intersection volume at a dilation t.
    Critical(CriticalArgs),
    /// Monte Carlo intersection volume V^{m,n}(t).
    Intersect(IntersectArgs),
    /// Intersection volumes over a grid of (m, n, t).
    Sweep(SweepArgs),
    /// Statistical check of a limit theorem, corollary or coordinate limit.
    Verify(VerifyArgs),
}

pub fn exponent(s: &str) -> Result<Exponent, String> {
    s.parse::<Exponent>().map_err(|e| e.to_string())
}

pub fn size(s: &str) -> Result<Size, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(Size::Unbounded);
    }
    match t.parse::<u64>() {
        Ok(k) if k >= 1 => Ok(Size::Finite(k)),
        _ => Err(format!("expected a positive integer or \"inf\", got {s:?}")),
    }
}

fn spec(s: &str) -> Result<MixedNormSpec, String> {
    s.parse::<MixedNormSpec>().map_err(|e| e.to_string())
}

fn default_workers() -> u64 {
    std::thread::available_parallelism().map(|n| n.get() as u64).unwrap_or(1)
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output encoding: text, csv or json.
    #[arg(long, default_value = "text")]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Master seed; every random stream of the run derives from it.
    #[arg(long)]
    pub seed: u64,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, env = "MIXNORM_THREADS", default_value_t = default_workers(),
          value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
}

#[derive(Debug, Clone, Args)]
pub struct Geometry {
    #[arg(long, value_parser = exponent)]
    pub p1: Exponent,
    #[arg(long, value_parser = exponent)]
    pub q1: Exponent,
    #[arg(long, value_parser = exponent)]
    pub p2: Exponent,
    #[arg(long, value_parser = exponent)]
    pub q2: Exponent,
}

#[derive(Debug, Clone, Args)]
pub struct VolumeArgs {
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, value_parser = exponent)]
    pub p: Option<Exponent>,
    #[arg(long, value_parser = exponent)]
    pub q: Option<Exponent>,
    /// Order-k norm as "p1:n1,p2:n2,...", innermost level first.
    #[arg(long, alias = "order-k", value_parser = spec, conflicts_with_all = ["m", "n", "p", "q"])]
    pub spec: Option<MixedNormSpec>,
    /// Report natural logarithms instead of values.
    #[arg(long)]
    pub log: bool,
    /// Also report the recursive and explicit log-volumes and their difference.
    #[arg(long)]
    pub verbose: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct NormArgs {
    #[arg(long, value_parser = exponent)]
    pub p: Option<Exponent>,
    #[arg(long, value_parser = exponent)]
    pub q: Option<Exponent>,
    /// Matrix rows separated by ';', entries by ',', e.g. "1,2;3,4".
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    /// File with one matrix row per line (comma separated, '#' comments).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Order-k norm as "p1:n1,p2:n2,..."; the tensor comes from --values.
    #[arg(long, alias = "order-k", value_parser = spec)]
    pub spec: Option<MixedNormSpec>,
    /// Tensor entries in row-major order of the spec dimensions.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long, value_parser = exponent)]
    pub p: Exponent,
    #[arg(long, value_parser = exponent)]
    pub q: Exponent,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Number of independent draws.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[command(flatten)]
    pub run: RunArgs,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ThetaArgs {
    /// Seed for estimating E‖Θ_1‖ when it is not known exactly.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cone-measure draws for estimating E‖Θ_1‖.
    #[arg(long, default_value_t = 1_000_000)]
    pub theta_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value = "cor-1-7")]
    pub corollary: Corollary,
    #[command(flatten)]
    pub geometry: Geometry,
    /// Row length; needed by cor-1-6.
    #[arg(long, value_parser = size, default_value = "inf")]
    pub n: Size,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    #[arg(long)]
    pub regime: Regime,
    #[command(flatten)]
    pub geometry: Geometry,
    #[arg(long, value_parser = size)]
    pub m: Size,
    #[arg(long, value_parser = size)]
    pub n: Size,
    /// Points at which to evaluate the limit CDF.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
    pub x: Vec<f64>,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CriticalArgs {
    #[arg(long)]
    pub corollary: Corollary,
    #[command(flatten)]
    pub geometry: Geometry,
    #[arg(long, value_parser = size, default_value = "inf")]
    pub m: Size,
    #[arg(long, value_parser = size, default_value = "inf")]
    pub n: Size,
    /// Dilation t.
    #[arg(long, conflicts_with = "t_factor", required_unless_present = "t_factor")]
    pub t: Option<f64>,
    /// Dilation as a multiple of 1/A.
    #[arg(long)]
    pub t_factor: Option<f64>,
    /// The limit M entering the threshold value of cor-1-8 when q1 != q2.
    #[arg(long, allow_hyphen_values = true)]
    pub big_m: Option<f64>,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IntersectArgs {
    #[command(flatten)]
    pub geometry: Geometry,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Dilation of the second ball.
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub corollary: Corollary,
    #[command(flatten)]
    pub geometry: Geometry,
    /// Comma-separated row counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    /// Comma-separated row lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Dilations as multiples of 1/A.
    #[arg(long, value_delimiter = ',', default_value = "0.8,1,1.25")]
    pub t_factors: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub theta_samples: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub big_m: Option<f64>,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// thm-c, thm-d-a, thm-d-b, thm-d-c, thm-e-a, thm-e-b, thm-e-c, prop-ss,
    /// cor-1-6, cor-1-7, cor-1-8, pmb-a (row norms) or pmb-b (entries).
    #[arg(long)]
    pub regime: String,
    /// Exponents; each defaults to a value satisfying the regime's hypotheses.
    #[arg(long, value_parser = exponent)]
    pub p1: Option<Exponent>,
    #[arg(long, value_parser = exponent)]
    pub q1: Option<Exponent>,
    #[arg(long, value_parser = exponent)]
    pub p2: Option<Exponent>,
    #[arg(long, value_parser = exponent)]
    pub q2: Option<Exponent>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub theta_samples: usize,
    /// Fixed KS threshold; by default 1.63/√N + --ks-bias.
    #[arg(long, conflicts_with = "ks_bias")]
    pub ks_threshold: Option<f64>,
    /// Finite-size allowance added to the null KS threshold.
    #[arg(long, default_value_t = 0.0)]
    pub ks_bias: f64,
    /// Allowed |V(t) − limit| for corollary checks.
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
    /// Dilations as multiples of 1/A for corollary checks.
    #[arg(long, value_delimiter = ',', default_value = "0.8,1,1.25")]
    pub t_factors: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub big_m: Option<f64>,
    /// Rows tested by pmb checks.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Columns tested by pmb-b.
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}
