//! Command-line surface.  Every subcommand's arguments double as its flat
//! JSON config schema: keys are the long flag names.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "critkill", version, about = "Critical-killing heat kernel laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Result file; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Result format; inferred from the output extension by default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Plot-data file (x y err per line) for commands that produce one.
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,

    /// Worker threads; 0 or absent uses the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate critical constants and their inverse maps.
    Constants(ConstantsArgs),
    /// Principal-value cross-validation of the operator identities.
    Oracle(OracleArgs),
    /// Monte Carlo survival probability and decay-exponent fit.
    Survival(SurvivalArgs),
    /// Monte Carlo heat-kernel factorization ratios on a point grid.
    Factorize(FactorizeArgs),
    /// Duhamel series against the exact grid semigroup.
    Series(SeriesArgs),
    /// Random stress test of the 3P inequality.
    Threep(ThreepArgs),
    /// Rerun the configuration embedded in a result file.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants(_) => "constants",
            Command::Oracle(_) => "oracle",
            Command::Survival(_) => "survival",
            Command::Factorize(_) => "factorize",
            Command::Series(_) => "series",
            Command::Threep(_) => "threep",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConstantsArgs {
    /// amplitude, gamma, c-boundary, h-profile or c-origin.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponents (s for h-profile), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    /// Uniform grid `lo,hi,n` appended to the exponents.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p_range: Option<Vec<f64>>,
    /// Map killing amplitudes to the boundary exponent instead.
    #[arg(long)]
    #[serde(default)]
    pub invert_boundary: bool,
    /// Map killing amplitudes to the origin exponent instead.
    #[arg(long)]
    #[serde(default)]
    pub invert_origin: bool,
    /// Killing amplitudes for the inverse maps, comma separated.
    #[arg(long = "C1", alias = "c1", value_delimiter = ',')]
    pub c1: Option<Vec<f64>>,
    /// Reference table; defaults to $CRITKILL_GOLDEN_DIR/golden_constants.csv,
    /// then to the table built into the binary.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OracleArgs {
    /// quick, standard or thorough.
    #[arg(long)]
    pub preset: Option<String>,
    /// Largest accepted relative error.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Monte Carlo knobs shared by the stochastic commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct McArgs {
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub c_step: Option<f64>,
    #[arg(long)]
    pub base_fraction: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// weight or thinning.
    #[arg(long)]
    pub killing: Option<String>,
    #[arg(long)]
    pub weight_cutoff: Option<f64>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SurvivalArgs {
    /// ball, half-space, punctured or whole.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target exponent; sets the killing amplitude.
    #[arg(long)]
    pub p: Option<f64>,
    /// Extra killing amplitude on top of the killed process.
    #[arg(long = "C1", alias = "c1")]
    pub c1: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Fit the decay exponent along a ray.
    #[arg(long)]
    #[serde(default)]
    pub fit: bool,
    #[arg(long)]
    pub ray_points: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FactorizeArgs {
    /// ball or punctured.
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long = "C1", alias = "c1")]
    pub c1: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Radii of the grid points, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Angle between the x and y rays.
    #[arg(long)]
    pub angle: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SeriesArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Amplitude of κ = C1 δ^{-α}; the critical amplitude by default.
    #[arg(long = "C1", alias = "c1")]
    pub c1: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Series is truncated at the first K with ‖p^{K+1}‖ below this.
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Largest accepted sup-norm error of the truncated sum.
    #[arg(long)]
    pub err_tol: Option<f64>,
    /// Also write the exact semigroup matrix as CSV.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ThreepArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Result file whose header holds the configuration.
    pub from: PathBuf,
}
