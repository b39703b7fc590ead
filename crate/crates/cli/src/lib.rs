//! Command implementations behind the `lyapflex` binary.
//!
//! Each subcommand produces its whole output as a string, so the binary only
//! decides where to write it and which exit code to return.

use std::fmt::Write as _;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lyapflex_core::acip::{
    birkhoff_lambda_abs, exact_invariant_density, lambda_from_density, ulam_stationary,
    DEFAULT_BURN_IN,
};
use lyapflex_core::exponents::exponent_pair;
use lyapflex_core::mme::{lambda_max_by_cylinders, MAX_LEVEL};
use lyapflex_core::realize::realize;
use lyapflex_core::smoothing::{alpha_sweep, Profile, SweepConfig};
use lyapflex_core::{CircleMap, Error, FamilyParams, PiecewiseLinearCircleMap};

pub const SCHEMA_VERSION: &str = "1";

pub const ULAM_L1_TOLERANCE: f64 = 1e-3;
pub const ULAM_LAMBDA_TOLERANCE: f64 = 1e-4;
pub const CYLINDER_TOLERANCE: f64 = 1e-8;
pub const BIRKHOFF_STANDARD_ERRORS: f64 = 4.0;
/// Deepest cylinder level picked automatically.
pub const DEFAULT_MAX_CYLINDER_LEVEL: u32 = 22;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lyapflex",
    version,
    about = "Expanding circle maps with prescribed Lyapunov exponents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a family member with lambda_abs = a and lambda_max = b.
    Realize(RealizeArgs),
    /// Closed-form exponents of a family member.
    Exponents(ParamArgs),
    /// Plateaus of the invariant density.
    Density(DensityArgs),
    /// Exponents of smoothed maps for a list of blend radii (CSV).
    Sweep(SweepArgs),
    /// Sampled map graph or density for plotting (CSV).
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RealizeArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// 0: closed forms; 1: add Ulam and cylinders; 2: add Birkhoff.
    #[arg(long = "verify", default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub verify: u8,
    /// Required when --verify is 2.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1 << 14)]
    pub bins: usize,
    /// Cylinder level; defaults to max(n, k) + 1, capped at 22.
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Record wall-clock timings (the report is then no longer reproducible byte for byte).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(
        long,
        required_unless_present = "one_minus_u",
        conflicts_with = "one_minus_u"
    )]
    pub u: Option<f64>,
    #[arg(long)]
    pub one_minus_u: Option<f64>,
    #[arg(long)]
    pub k: u32,
    #[arg(
        long,
        required_unless_present = "one_minus_v",
        conflicts_with = "one_minus_v"
    )]
    pub v: Option<f64>,
    #[arg(long)]
    pub one_minus_v: Option<f64>,
}

impl ParamArgs {
    pub fn params(&self) -> lyapflex_core::Result<FamilyParams> {
        let frac = |value: Option<f64>, complement: Option<f64>| match (value, complement) {
            (_, Some(c)) => lyapflex_core::Fraction::from_complement(c),
            (Some(x), None) => lyapflex_core::Fraction::from_value(x),
            (None, None) => Err(Error::InvalidParameter("missing parameter".into())),
        };
        FamilyParams::from_fractions(
            self.n,
            frac(self.u, self.one_minus_u)?,
            self.k,
            frac(self.v, self.one_minus_v)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Cubic,
    Quintic,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4])]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 1 << 14)]
    pub bins: usize,
    #[arg(long, default_value_t = 20)]
    pub level: u32,
    #[arg(long, value_enum, default_value_t = ProfileArg::Cubic)]
    pub profile: ProfileArg,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotWhat {
    Map,
    Density,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub what: PlotWhat,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

/// Rendered output of a command and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(output: String) -> Self {
        Outcome {
            output,
            exit_code: EXIT_OK,
        }
    }
}

/// Maps a library error to the exit code it should produce.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_)
        | Error::Domain(_)
        | Error::InvalidTargets(_)
        | Error::AlphaTooLarge { .. } => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Targets {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsBlock {
    pub n: u32,
    pub u: f64,
    pub one_minus_u: f64,
    pub k: u32,
    pub v: f64,
    pub one_minus_v: f64,
}

impl From<&FamilyParams> for ParamsBlock {
    fn from(p: &FamilyParams) -> Self {
        ParamsBlock {
            n: p.n(),
            u: p.u().value(),
            one_minus_u: p.u().complement(),
            k: p.k(),
            v: p.v().value(),
            one_minus_v: p.v().complement(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentsBlock {
    pub lambda_abs: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub realize: f64,
    pub ulam_l1: f64,
    pub ulam_lambda_abs: f64,
    pub cylinders: f64,
    pub birkhoff_standard_errors: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UlamBlock {
    pub bins: usize,
    pub estimate: f64,
    pub l1_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffBlock {
    pub samples: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub estimate: f64,
    pub standard_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylindersBlock {
    pub level: u32,
    pub estimate: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Verification {
    /// Closed-form exponents of the parameters the double-precision map
    /// actually encodes; differs from the realized pair when a steep piece
    /// is only a few ulps long.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_encoding: Option<ExponentsBlock>,
    /// Why the map could not be built, if it could not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ulam: Option<UlamBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub birkhoff: Option<BirkhoffBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinders: Option<CylindersBlock>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub realize_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ulam_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinders_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub birkhoff_ms: Option<f64>,
}

/// Result of `lyapflex realize`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub targets: Targets,
    pub params: ParamsBlock,
    pub closed_form: ExponentsBlock,
    pub residuals: ExponentsBlock,
    pub iterations: usize,
    pub tolerances: Tolerances,
    pub verification: Verification,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn cmd_realize(args: &RealizeArgs) -> Result<(Report, i32), Error> {
    if args.verify >= 2 && args.seed.is_none() {
        return Err(Error::InvalidParameter(
            "--seed is required with --verify 2".into(),
        ));
    }
    let clock = Instant::now();
    let result = realize(args.a, args.b, args.tol)?;
    let mut timing = Timing {
        realize_ms: millis(clock),
        ..Timing::default()
    };
    let p = result.params;
    let mut verification = Verification::default();

    let built = if args.verify >= 1 {
        match PiecewiseLinearCircleMap::family(&p).and_then(|m| Ok((m, p.representable()?))) {
            Ok(built) => Some(built),
            Err(err) => {
                verification.unavailable = Some(err.to_string());
                None
            }
        }
    } else {
        None
    };

    if let Some((map, encoded)) = built {
        let pair = exponent_pair(&encoded)?;
        verification.map_encoding = Some(ExponentsBlock {
            lambda_abs: pair.lambda_abs,
            lambda_max: pair.lambda_max,
        });
        let clock = Instant::now();
        let q = ulam_stationary(&map, args.bins, 1e-13)?;
        let estimate = lambda_from_density(&map, &q);
        let l1_error = q.l1_distance(&exact_invariant_density(&p));
        verification.ulam = Some(UlamBlock {
            bins: args.bins,
            estimate,
            l1_error,
            passed: l1_error <= ULAM_L1_TOLERANCE
                && (estimate - args.a).abs() <= ULAM_LAMBDA_TOLERANCE,
        });
        timing.ulam_ms = Some(millis(clock));

        let clock = Instant::now();
        let level = args
            .level
            .unwrap_or((p.n().max(p.k()) + 1).min(DEFAULT_MAX_CYLINDER_LEVEL))
            .min(MAX_LEVEL);
        let estimate = lambda_max_by_cylinders(&map, level)?;
        verification.cylinders = Some(CylindersBlock {
            level,
            estimate,
            passed: (estimate - args.b).abs() <= CYLINDER_TOLERANCE,
        });
        timing.cylinders_ms = Some(millis(clock));

        if args.verify >= 2 {
            let seed = args.seed.unwrap_or_default();
            let clock = Instant::now();
            let est = birkhoff_lambda_abs(&map, args.samples, args.iterations, args.burn_in, seed)?;
            let allowed = (BIRKHOFF_STANDARD_ERRORS * est.standard_error).max(1e-12);
            verification.birkhoff = Some(BirkhoffBlock {
                samples: args.samples,
                iterations: args.iterations,
                burn_in: args.burn_in,
                seed,
                estimate: est.estimate,
                standard_error: est.standard_error,
                passed: (est.estimate - args.a).abs() <= allowed,
            });
            timing.birkhoff_ms = Some(millis(clock));
        }
    }

    let residuals_ok = result.residuals.0 <= args.tol && result.residuals.1 <= args.tol;
    let passed = residuals_ok
        && verification.unavailable.is_none()
        && verification.ulam.as_ref().is_none_or(|b| b.passed)
        && verification.cylinders.as_ref().is_none_or(|b| b.passed)
        && verification.birkhoff.as_ref().is_none_or(|b| b.passed);
    let report = Report {
        schema_version: SCHEMA_VERSION.into(),
        targets: Targets {
            a: args.a,
            b: args.b,
        },
        params: (&p).into(),
        closed_form: ExponentsBlock {
            lambda_abs: result.achieved.lambda_abs,
            lambda_max: result.achieved.lambda_max,
        },
        residuals: ExponentsBlock {
            lambda_abs: result.residuals.0,
            lambda_max: result.residuals.1,
        },
        iterations: result.iterations,
        tolerances: Tolerances {
            realize: args.tol,
            ulam_l1: ULAM_L1_TOLERANCE,
            ulam_lambda_abs: ULAM_LAMBDA_TOLERANCE,
            cylinders: CYLINDER_TOLERANCE,
            birkhoff_standard_errors: BIRKHOFF_STANDARD_ERRORS,
        },
        verification,
        passed,
        timing: args.timing.then_some(timing),
    };
    let code = if passed { EXIT_OK } else { EXIT_TOLERANCE };
    Ok((report, code))
}

pub fn cmd_exponents(args: &ParamArgs) -> Result<Outcome, Error> {
    let pair = exponent_pair(&args.params()?)?;
    Ok(Outcome::ok(to_json(&ExponentsBlock {
        lambda_abs: pair.lambda_abs,
        lambda_max: pair.lambda_max,
    })))
}

#[derive(Debug, Serialize)]
struct Plateau {
    left: f64,
    right: f64,
    value: f64,
}

#[derive(Debug, Serialize)]
struct DensityOutput {
    plateaus: Vec<Plateau>,
    integral: f64,
}

fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cmd_density(args: &DensityArgs) -> Result<Outcome, Error> {
    let q = exact_invariant_density(&args.params.params()?);
    let plateaus: Vec<Plateau> = q
        .plateaus()
        .map(|(left, right, value)| Plateau { left, right, value })
        .collect();
    let output = match args.format {
        Format::Json => to_json(&DensityOutput {
            plateaus,
            integral: q.integral(),
        }),
        Format::Csv => {
            let mut s = String::from("left,right,value\n");
            for p in plateaus {
                let _ = writeln!(
                    s,
                    "{},{},{}",
                    csv_float(p.left),
                    csv_float(p.right),
                    csv_float(p.value)
                );
            }
            s
        }
    };
    Ok(Outcome::ok(output))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Outcome, Error> {
    let params = args.params.params()?;
    let config = SweepConfig {
        bins: args.bins,
        level: args.level,
        profile: match args.profile {
            ProfileArg::Cubic => Profile::Cubic,
            ProfileArg::Quintic => Profile::Quintic,
        },
        ..SweepConfig::default()
    };
    let alphas: Vec<f64> = args.alphas.iter().copied().filter(|&a| a != 0.0).collect();
    let rows = alpha_sweep(&params, &alphas, &config)?;
    let exact = (rows[0].lambda_abs, rows[0].lambda_max);
    let mut s =
        String::from("alpha,lambda_abs_est,lambda_max_est,lambda_abs_exact,lambda_max_exact\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            csv_float(r.alpha),
            csv_float(r.lambda_abs),
            csv_float(r.lambda_max),
            csv_float(exact.0),
            csv_float(exact.1)
        );
    }
    Ok(Outcome::ok(s))
}

pub fn cmd_plot_data(args: &PlotArgs) -> Result<Outcome, Error> {
    if args.samples == 0 {
        return Err(Error::InvalidParameter("--samples must be positive".into()));
    }
    let params = args.params.params()?;
    let map = PiecewiseLinearCircleMap::family(&params)?;
    let density = exact_invariant_density(&params);
    let mut s = String::from("x,value\n");
    for i in 0..args.samples {
        let x = i as f64 / args.samples as f64;
        let value = match args.what {
            PlotWhat::Map => map.eval(x)?,
            PlotWhat::Density => density.value_at(x),
        };
        let _ = writeln!(s, "{},{}", csv_float(x), csv_float(value));
    }
    Ok(Outcome::ok(s))
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, Error> {
    match &cli.command {
        Command::Realize(args) => {
            let (report, exit_code) = cmd_realize(args)?;
            Ok(Outcome {
                output: to_json(&report),
                exit_code,
            })
        }
        Command::Exponents(args) => cmd_exponents(args),
        Command::Density(args) => cmd_density(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::PlotData(args) => cmd_plot_data(args),
    }
}

/// Output path selected by the command, if any.
pub fn out_path(cli: &Cli) -> Option<&std::path::Path> {
    match &cli.command {
        Command::Realize(a) => a.out.as_deref(),
        Command::Density(a) => a.out.as_deref(),
        Command::Sweep(a) => a.out.as_deref(),
        Command::PlotData(a) => a.out.as_deref(),
        Command::Exponents(_) => None,
    }
}
