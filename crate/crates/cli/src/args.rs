use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsadmm::lvggms::Grouping;
use gsadmm::{SpecialCase, Variant};

#[derive(Debug, Parser)]
#[command(name = "gsadmm", version, about = "GS-ADMM solves, sweeps, stepsize regions and certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve and write its convergence history.
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// Run a β or (τ, s) sweep and write one table row per setting.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Sample the stepsize regions on a grid.
    #[command(allow_negative_numbers = true)]
    Region(RegionArgs),
    /// Record a trajectory and check the convergence certificates along it.
    #[command(allow_negative_numbers = true)]
    Certify(CertifyArgs),
    /// Write a problem instance bundle.
    #[command(allow_negative_numbers = true)]
    Generate(GenerateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Sweep(_) => "sweep",
            Command::Region(_) => "region",
            Command::Certify(_) => "certify",
            Command::Generate(_) => "generate",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Solve(a) => &a.output,
            Command::Sweep(a) => &a.output,
            Command::Region(a) => &a.output,
            Command::Certify(a) => &a.output,
            Command::Generate(a) => &a.output,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    /// Latent variable Gaussian graphical model selection.
    Lvggms,
    /// Random strongly convex quadratic fixture with a known solution.
    Quad,
    /// Problem manifest given by --file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::I => Grouping::VariantI,
            GroupingArg::II => Grouping::VariantII,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    XFirst,
    YFirst,
}

impl From<OrderArg> for Variant {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::XFirst => Variant::XFirst,
            OrderArg::YFirst => Variant::YFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    None,
    A,
    B,
}

impl From<CaseArg> for SpecialCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::None => SpecialCase::None,
            CaseArg::A => SpecialCase::A,
            CaseArg::B => SpecialCase::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FStar {
    Auto,
    Value(f64),
    None,
}

fn parse_fstar(s: &str) -> Result<FStar, String> {
    match s {
        "auto" => Ok(FStar::Auto),
        "none" => Ok(FStar::None),
        v => v
            .parse::<f64>()
            .map(FStar::Value)
            .map_err(|_| format!("expected auto, none or a number, got {v:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Problem family [default: lvggms; quad for certify].
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// Problem manifest (--problem file) or LVGGMS instance.json from `generate`.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Dimension: matrix size for LVGGMS, constraint rows for quad.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of x-blocks of the quadratic fixture.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Number of y-blocks of the quadratic fixture.
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// LVGGMS block grouping: I is x=(X,S), y=L; II is x=X, y=(S,L).
    #[arg(long, value_enum, default_value_t = GroupingArg::I)]
    pub variant: GroupingArg,
    /// Which group is updated first.
    #[arg(long, value_enum, default_value_t = OrderArg::XFirst)]
    pub order: OrderArg,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, value_enum, default_value_t = CaseArg::None)]
    pub special_case: CaseArg,
    /// Penalty parameter [default: 0.06 for LVGGMS, 1 otherwise].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.17)]
    pub s: f64,
    /// Proximal weight of the x-group [default depends on problem and case].
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Proximal weight of the y-group [default depends on problem and case].
    #[arg(long)]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct StopArgs {
    /// IER threshold.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol_cer: f64,
    /// OER threshold, used only when a reference objective is set.
    #[arg(long, default_value_t = 1e-5)]
    pub tol_oer: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Reference objective F*: auto, a value, or none.
    #[arg(long, default_value = "none", value_parser = parse_fstar)]
    pub fstar: FStar,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for within-group blocks; 1 runs serially.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Beta,
    Steps,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated β values [default: 11 values from 0.5 down to 0.004].
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<String>,
    /// Comma-separated `tau:s` pairs [default: 36 built-in pairs, all in G].
    #[arg(long, allow_hyphen_values = true)]
    pub pairs: Option<String>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    #[arg(long, default_value_t = -1.5)]
    pub tau_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub tau_max: f64,
    #[arg(long, default_value_t = -1.5)]
    pub s_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s_max: f64,
    /// Samples per axis.
    #[arg(long, default_value_t = 701)]
    pub resolution: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Length of the recorded trajectory.
    #[arg(long, default_value_t = 501)]
    pub steps: usize,
    /// Steps used to approximate the LVGGMS solution.
    #[arg(long, default_value_t = 5000)]
    pub wstar_iters: usize,
    /// Perturb the correction matrix; the run must then fail.
    #[arg(long, hide = true)]
    pub corrupt_m: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = ProblemKind::Lvggms)]
    pub problem: ProblemKind,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of off-diagonal entries drawn for the sparse precision matrix.
    #[arg(long, default_value_t = 0.001)]
    pub density: f64,
    /// Samples per dimension.
    #[arg(long, default_value_t = 10)]
    pub sample_factor: usize,
    #[arg(long, default_value_t = 0.005)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.05)]
    pub mu: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}
