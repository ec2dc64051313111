//! Command-line flags and their translation into experiment inputs.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nepv::experiment::{ProblemSpec, Settings, Spacing, SweepParam};
use nepv::problems::{GpeParams, KohnShamParams, Potential};

#[derive(Debug, Parser)]
#[command(
    name = "nepv",
    version,
    about = "SCF runs and local convergence-rate analysis for NEPv benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the (level-shifted) SCF iteration and write its history.
    Solve(SolveArgs),
    /// Report convergence-rate estimates at a computed solution.
    Rates(RatesArgs),
    /// Evaluate the rate estimates over a grid of α, β or σ.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    /// Single-particle Kohn–Sham model on a 1-D grid.
    Ks,
    /// Rotating Gross–Pitaevskii model on a 2-D grid.
    Gpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PotentialKind {
    /// (x² + y²)/2
    Radial,
    /// (x² + 100y²)/2
    Nonradial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParamArg {
    Alpha,
    Beta,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpacingArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "ks")]
    pub problem: ProblemKind,
    /// Kohn–Sham grid size.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Kohn–Sham number of wanted eigenvectors.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Kohn–Sham coupling strength.
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    /// GPE grid points per axis.
    #[arg(long = "grid-n", default_value_t = 10)]
    pub grid_n: usize,
    /// GPE half-width of the square domain.
    #[arg(long, default_value_t = 1.0)]
    pub ell: f64,
    /// GPE angular velocity.
    #[arg(long, default_value_t = 0.85)]
    pub omega: f64,
    /// GPE interaction strength.
    #[arg(long, default_value_t = 3.5)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "radial")]
    pub potential: PotentialKind,
}

impl ProblemArgs {
    pub fn spec(&self) -> ProblemSpec {
        match self.problem {
            ProblemKind::Ks => ProblemSpec::KohnSham(KohnShamParams {
                n: self.n,
                k: self.k,
                alpha: self.alpha,
            }),
            ProblemKind::Gpe => ProblemSpec::Gpe(GpeParams {
                grid_points: self.grid_n,
                half_width: self.ell,
                omega: self.omega,
                beta: self.beta,
                potential: match self.potential {
                    PotentialKind::Radial => Potential::Radial,
                    PotentialKind::Nonradial => Potential::NonRadial,
                },
            }),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Level shift; 0 runs the plain SCF.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 5000)]
    pub max_iter: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Start from a seeded random basis instead of the problem's default guess.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Saved solution to measure subspace errors against.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Write the final basis as a saved solution when the run converges.
    #[arg(long = "save-solution")]
    pub save_solution: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Seed of the random start used for the observed rate.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Seed of the random start used for observed rates.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "sweep-param", value_enum)]
    pub sweep_param: SweepParamArg,
    /// First grid value; defaults to 0 for α and β.
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Last grid value; defaults to 1 for α.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    /// Number of grid points; 41 for α and β, 100 for σ by default.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Grid spacing; logarithmic for positive σ ranges by default.
    #[arg(long, value_enum)]
    pub spacing: Option<SpacingArg>,
}

impl SweepArgs {
    pub fn param(&self) -> SweepParam {
        match self.sweep_param {
            SweepParamArg::Alpha => SweepParam::Alpha,
            SweepParamArg::Beta => SweepParam::Beta,
            SweepParamArg::Sigma => SweepParam::Sigma,
        }
    }

    /// Resolved `(from, to, steps, spacing)`.
    pub fn grid(&self) -> Result<(f64, f64, usize, Spacing)> {
        let param = self.param();
        let from = match (self.from, param) {
            (Some(v), _) => v,
            (None, SweepParam::Alpha | SweepParam::Beta) => 0.0,
            (None, SweepParam::Sigma) => bail!("--from is required for sigma sweeps"),
        };
        let to = match (self.to, param) {
            (Some(v), _) => v,
            (None, SweepParam::Alpha) => 1.0,
            (None, _) => bail!("--to is required for {} sweeps", param.as_str()),
        };
        let steps = self.steps.unwrap_or(match param {
            SweepParam::Sigma => 100,
            _ => 41,
        });
        let spacing = match self.spacing {
            Some(SpacingArg::Linear) => Spacing::Linear,
            Some(SpacingArg::Log) => Spacing::Log,
            None if param == SweepParam::Sigma && from > 0.0 && to > 0.0 => Spacing::Log,
            None => Spacing::Linear,
        };
        Ok((from, to, steps, spacing))
    }
}

impl RunArgs {
    pub fn settings(&self, seed: u64) -> Settings {
        Settings {
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
            ..Settings::default()
        }
    }
}
