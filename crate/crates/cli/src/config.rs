use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use clap::{Args, FromArgMatches, Parser, Subcommand, ValueEnum};
use hardylab::certificates::InequalityId;
use serde::{Deserialize, Serialize};

/// Top-level command line.
#[derive(Parser, Debug)]
#[command(name = "hardylab", version, about = "Sharp Hardy constants: eigensolvers, certificates and potentials")]
pub struct Cli {
    #[command(flatten)]
    pub globals: Globals,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Globals {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// One unit of work: a command with its parameters plus the seed and
/// tolerance overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Solve for kappa with both root finders.
    Kappa(KappaArgs),
    /// Logarithmic special functions.
    Speclog(SpeclogArgs),
    /// Conformal map identities.
    Conformal(ConformalArgs),
    /// Spherical-cap eigenpair.
    CapEig(CapEigArgs),
    /// Radial annulus constant, closed form against the 1D solve.
    #[command(name = "annulus-1d")]
    #[serde(rename = "annulus-1d")]
    Annulus1d(Annulus1dArgs),
    /// FEM Hardy constant of the annulus with a boundary pole.
    Annulus(AnnulusArgs),
    /// Near-extremal half-ball quotient.
    Sharpness(SharpnessArgs),
    /// Seeded random trials for an inequality.
    Verify(VerifyArgs),
    /// Bracket for the annulus threshold and the auxiliary inequality.
    TauBounds(TauBoundsArgs),
    /// Separated-variables bound for the cone-cut domain.
    Counterexample(CounterexampleArgs),
    /// Divergence identity of the half-ball vector field.
    Divcheck(DivcheckArgs),
    /// Integrability test for a potential.
    Subcritical(SubcriticalArgs),
    /// Upper bounds for the best constant in front of a potential.
    Crv(CrvArgs),
    /// Sobolev constant bounds for a cone.
    ConeSobolev(ConeSobolevArgs),
    /// Ground-state substitution identity.
    GroundstateCheck(GroundstateArgs),
    /// Run a TOML or JSON list of commands.
    #[serde(skip)]
    Batch(BatchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kappa(_) => "kappa",
            Command::Speclog(_) => "speclog",
            Command::Conformal(_) => "conformal",
            Command::CapEig(_) => "cap-eig",
            Command::Annulus1d(_) => "annulus-1d",
            Command::Annulus(_) => "annulus",
            Command::Sharpness(_) => "sharpness",
            Command::Verify(_) => "verify",
            Command::TauBounds(_) => "tau-bounds",
            Command::Counterexample(_) => "counterexample",
            Command::Divcheck(_) => "divcheck",
            Command::Subcritical(_) => "subcritical",
            Command::Crv(_) => "crv",
            Command::ConeSobolev(_) => "cone-sobolev",
            Command::GroundstateCheck(_) => "groundstate-check",
            Command::Batch(_) => "batch",
        }
    }

    /// Whether the command draws random samples.
    pub fn seeded(&self) -> bool {
        matches!(self, Command::Verify(_) | Command::Conformal(_) | Command::Divcheck(_))
    }
}

/// Values of every argument left at its default.
fn clap_defaults<T: Args + FromArgMatches>() -> T {
    let cmd = T::augment_args(clap::Command::new("defaults"));
    let m = cmd.try_get_matches_from(["defaults"]).expect("every argument has a default");
    T::from_arg_matches(&m).expect("defaults parse")
}

macro_rules! defaults_from_clap {
    ($($t:ty),* $(,)?) => {
        $(impl Default for $t {
            fn default() -> Self {
                clap_defaults()
            }
        })*
    };
}

defaults_from_clap!(
    KappaArgs,
    EvalArgs,
    DerivativesArgs,
    CheckArgs,
    CapEigArgs,
    Annulus1dArgs,
    AnnulusArgs,
    SharpnessArgs,
    VerifyArgs,
    TauBoundsArgs,
    CounterexampleArgs,
    DivcheckArgs,
    SubcriticalArgs,
    CrvArgs,
    ConeSobolevArgs,
    GroundstateArgs,
);

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct KappaArgs {}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeclogArgs {
    #[command(subcommand)]
    pub action: SpeclogAction,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum SpeclogAction {
    /// `X_k(t)`, the product `X_1...X_k`, `eta(t)` and `B(t)`.
    Eval(EvalArgs),
    Kappa(KappaArgs),
    /// Closed-form derivatives against finite differences on a log grid.
    Derivatives(DerivativesArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalArgs {
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DerivativesArgs {
    /// Largest `k` whose `X_k` derivative is probed.
    #[arg(long, default_value_t = 6)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1.0 - 1e-6)]
    pub t_max: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConformalArgs {
    #[command(subcommand)]
    pub action: ConformalAction,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum ConformalAction {
    /// Random-sample identities plus energy invariance under pullback.
    Check(CheckArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CheckArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Cone,
    Example,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CapEigArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Opening angle of the cap.
    #[arg(long, default_value_t = FRAC_PI_2)]
    pub theta: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Example)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Intervals on the coarsest grid.
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Annulus1dArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 10.0)]
    pub b: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct AnnulusArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 100.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Write the base mesh as plain text.
    #[arg(long)]
    pub mesh_dump: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SharpnessArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Random,
    Sharpness,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    #[arg(long, default_value = "halfball-logseries")]
    pub inequality: InequalityId,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Half-ball radius.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Number of logarithmic terms for halfball-mlogs.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Outer radius of the domain ids.
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = FamilyArg::Random)]
    pub family: FamilyArg,
    /// Offset of the sharpness family exponent.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sobolev_c: f64,
    /// Report the largest Sobolev constant all trials accept.
    #[arg(long)]
    pub probe_c: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TauBoundsArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.3)]
    pub theta: f64,
    /// Exterior ball radius; half the threshold radius when omitted.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Side of an extra `(theta, rho)` sweep grid; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub grid: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DivcheckArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long = "R", default_value_t = 1.0)]
    #[serde(rename = "R")]
    pub big_r: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialArg {
    Power,
    Logweighted,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SubcriticalArgs {
    #[arg(long, value_enum, default_value_t = PotentialArg::Logweighted)]
    pub family: PotentialArg,
    #[arg(long, default_value_t = 2.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CrvArgs {
    #[arg(long, value_enum, default_value_t = PotentialArg::Logweighted)]
    pub family: PotentialArg,
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub s: f64,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Radius of the ball the probe is restricted to.
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConeSobolevArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Opening angle of the cone.
    #[arg(long, default_value_t = FRAC_PI_2)]
    pub theta: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GroundstateArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// Scale of the logarithmic factors.
    #[arg(long, default_value_t = 1.0)]
    pub d_tilde: f64,
    /// Outer radius of the domain.
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Bump center on the positive `x_n` axis.
    #[arg(long, default_value_t = 0.5)]
    pub center: f64,
    #[arg(long, default_value_t = 0.05)]
    pub inner: f64,
    #[arg(long, default_value_t = 0.3)]
    pub outer: f64,
    #[arg(long, default_value_t = 1e4)]
    pub amplitude: f64,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct BatchArgs {
    /// TOML file with `[[run]]` tables, or JSON (by extension) with a list
    /// or a `run` list.
    pub file: PathBuf,
}
