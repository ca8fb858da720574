//! Command-line front end: Madelung constants, potential grids, Green
//! function values, naive partial sums, and the verification suite.
//!
//! Exit codes: 0 success, 1 numerical failure (diagnostic JSON on
//! stderr), 2 usage error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use madelung_core::{
    ewald_madelung, field_grid, finite_part_epsilon, finite_part_subtracted, madelung_2d,
    naive_partial_sums, psi_integral, run_verification, CrystalFamily, CrystalSpec,
    LengthConvention, MadelungError, MadelungResult, OrderingKind, QuadratureConfig, SumOrdering,
    TorusPoint, TWO_D_EXACT_FORM,
};

#[derive(Parser)]
#[command(
    name = "madelung",
    version,
    about = "Madelung constants and electrostatic potentials of hypercubic crystals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Madelung constant of a crystal.
    Madelung(MadelungArgs),
    /// Sample the electrostatic potential on a grid over one unit cell.
    PotentialGrid(GridArgs),
    /// Evaluate the torus Green function at given points.
    Psi(PsiArgs),
    /// Running partial sums of the naive lattice series (order-dependence
    /// diagnostic).
    PartialSums(SumArgs),
    /// Run the full invariant suite and emit a machine-readable report.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Nacl,
    Cscl,
}

impl From<FamilyArg> for CrystalFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Nacl => CrystalFamily::NaCl,
            FamilyArg::Cscl => CrystalFamily::CsCl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    HalfPeriod,
    CellSide,
    NearestNeighbour,
}

impl From<ConventionArg> for LengthConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::HalfPeriod => LengthConvention::HalfPeriod,
            ConventionArg::CellSide => LengthConvention::CellSide,
            ConventionArg::NearestNeighbour => LengthConvention::NearestNeighbour,
        }
    }
}

/// Crystal selection shared by most subcommands. Exactly one length flag
/// may be given; each names its convention. With none, the half-period
/// defaults to 1.
#[derive(Args)]
struct SpecArgs {
    /// Crystal family.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Dimension n >= 1.
    #[arg(long)]
    dim: usize,
    /// Half-period a (the cell side is 2a).
    #[arg(long, conflicts_with_all = ["cell_side", "d_nn", "length"])]
    a: Option<f64>,
    /// Cell side 2a.
    #[arg(long, conflicts_with_all = ["a", "d_nn", "length"])]
    cell_side: Option<f64>,
    /// Nearest-neighbour separation (a for NaCl, a*sqrt(n) for CsCl).
    #[arg(long, conflicts_with_all = ["a", "cell_side", "length"])]
    d_nn: Option<f64>,
    /// Length value interpreted per --convention.
    #[arg(long, requires = "convention")]
    length: Option<f64>,
    /// Convention naming how --length is interpreted.
    #[arg(long, value_enum, requires = "length")]
    convention: Option<ConventionArg>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<CrystalSpec, String> {
        let (length, convention) = match (self.a, self.cell_side, self.d_nn, self.length) {
            (Some(a), None, None, None) => (a, LengthConvention::HalfPeriod),
            (None, Some(side), None, None) => (side, LengthConvention::CellSide),
            (None, None, Some(d), None) => (d, LengthConvention::NearestNeighbour),
            (None, None, None, Some(len)) => (
                len,
                self.convention.expect("clap enforces the pairing").into(),
            ),
            (None, None, None, None) => (1.0, LengthConvention::HalfPeriod),
            _ => return Err("give at most one length parameter".into()),
        };
        CrystalSpec::new(self.family.into(), self.dim, length, convention)
            .map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Subtracted,
    EpsilonLimit,
    ClosedForm2d,
    EwaldOracle,
}

#[derive(Args)]
struct QuadArgs {
    /// Absolute quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    abs_tol: f64,
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
}

impl QuadArgs {
    fn config(&self) -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            ..QuadratureConfig::default()
        }
    }
}

#[derive(Args)]
struct MadelungArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Evaluation method; defaults to subtracted for n >= 3 and
    /// closed-form-2d for n = 2.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Cutoff for the epsilon-limit method.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Ewald splitting parameter for the oracle method.
    #[arg(long, default_value_t = 1.0)]
    splitting: f64,
    #[command(flatten)]
    quad: QuadArgs,
    /// Also write the JSON result to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Grid points per axis (>= 4).
    #[arg(long, default_value_t = 16)]
    resolution: usize,
    #[arg(long, value_enum, default_value_t = GridFormat::Csv)]
    format: GridFormat,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args)]
struct PsiArgs {
    /// Dimension n >= 1.
    #[arg(long)]
    dim: usize,
    /// Half-period a.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Evaluation point as comma-separated coordinates; repeatable.
    #[arg(long = "point", required = true)]
    points: Vec<String>,
    #[command(flatten)]
    quad: QuadArgs,
    /// Also write the JSON result to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderingArg {
    Cubes,
    Spheres,
}

#[derive(Args)]
struct SumArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value_t = OrderingArg::Cubes)]
    ordering: OrderingArg,
    /// Largest shell radius (<= 200).
    #[arg(long, default_value_t = 40.0)]
    radius_max: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Also write the JSON report to this file.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Madelung(args) => cmd_madelung(args),
        Command::PotentialGrid(args) => cmd_grid(args),
        Command::Psi(args) => cmd_psi(args),
        Command::PartialSums(args) => cmd_sums(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Numerical(err)) => {
            let diag = serde_json::json!({
                "schema": 1,
                "error": err.to_string(),
                "kind": error_kind(&err),
            });
            eprintln!("{diag}");
            ExitCode::from(1)
        }
    }
}

enum CmdError {
    Usage(String),
    Numerical(MadelungError),
}

impl From<MadelungError> for CmdError {
    fn from(e: MadelungError) -> Self {
        CmdError::Numerical(e)
    }
}

fn error_kind(e: &MadelungError) -> &'static str {
    match e {
        MadelungError::Domain(_) => "domain",
        MadelungError::Singularity(_) => "singularity",
        MadelungError::Unsupported(_) => "unsupported",
        MadelungError::Accuracy { .. } => "accuracy",
        MadelungError::SelfCheck(_) => "self-check",
        MadelungError::Io(_) => "io",
    }
}

fn emit(text: &str, output: &Option<PathBuf>) -> Result<(), CmdError> {
    println!("{text}");
    if let Some(path) = output {
        std::fs::write(path, format!("{text}\n")).map_err(MadelungError::Io)?;
    }
    Ok(())
}

fn result_json(result: &MadelungResult, exact_form: bool) -> String {
    let mut value = serde_json::json!({ "schema": 1 });
    let body = serde_json::to_value(result).expect("serializable result");
    let map = value.as_object_mut().unwrap();
    for (k, v) in body.as_object().unwrap() {
        map.insert(k.clone(), v.clone());
    }
    if exact_form {
        map.insert("exact_form".into(), serde_json::json!(TWO_D_EXACT_FORM));
    }
    serde_json::to_string(&value).expect("valid JSON")
}

fn cmd_madelung(args: MadelungArgs) -> Result<ExitCode, CmdError> {
    let spec = args.spec.resolve().map_err(CmdError::Usage)?;
    let method = args.method.unwrap_or(if spec.n == 2 {
        MethodArg::ClosedForm2d
    } else {
        MethodArg::Subtracted
    });
    // Guard the known-unsupported combinations as usage errors.
    match (spec.n, method) {
        (2, MethodArg::Subtracted | MethodArg::EpsilonLimit) => {
            return Err(CmdError::Usage(
                "the two-dimensional finite part is ambiguous (the regularization shifts by \
                 log(A2/A1) with the arbitrary horizon); use --method closed-form-2d"
                    .into(),
            ));
        }
        (2, MethodArg::EwaldOracle) => {
            return Err(CmdError::Usage(
                "the Ewald oracle needs n >= 3; use --method closed-form-2d".into(),
            ));
        }
        (n, MethodArg::ClosedForm2d) if n != 2 => {
            return Err(CmdError::Usage(format!(
                "--method closed-form-2d applies to --dim 2 only, got --dim {n}"
            )));
        }
        _ => {}
    }
    let cfg = args.quad.config();
    let result = match method {
        MethodArg::Subtracted => finite_part_subtracted(&spec, &cfg)?,
        MethodArg::EpsilonLimit => finite_part_epsilon(&spec, args.eps, &cfg)?,
        MethodArg::ClosedForm2d => madelung_2d(&spec)?,
        MethodArg::EwaldOracle => ewald_madelung(&spec, args.splitting, &cfg)?,
    };
    emit(&result_json(&result, spec.n == 2), &args.output)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_grid(args: GridArgs) -> Result<ExitCode, CmdError> {
    let spec = args.spec.resolve().map_err(CmdError::Usage)?;
    let field = field_grid(&spec, args.resolution, &args.quad.config())?;
    let text = match args.format {
        GridFormat::Csv => {
            let mut buf = Vec::new();
            field.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("CSV is UTF-8")
        }
        GridFormat::Json => {
            let mut s = serde_json::to_string(&field.to_json()).expect("valid JSON");
            s.push('\n');
            s
        }
    };
    match &args.output {
        Some(path) => std::fs::write(path, &text).map_err(MadelungError::Io)?,
        None => {
            print!("{text}");
            std::io::stdout().flush().map_err(MadelungError::Io)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_psi(args: PsiArgs) -> Result<ExitCode, CmdError> {
    if args.dim < 1 {
        return Err(CmdError::Usage("--dim must be at least 1".into()));
    }
    let cfg = args.quad.config();
    let mut rows = Vec::new();
    for text in &args.points {
        let coords: Result<Vec<f64>, _> =
            text.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|e| CmdError::Usage(format!("bad --point {text:?}: {e}")))?;
        if coords.len() != args.dim {
            return Err(CmdError::Usage(format!(
                "--point {text:?} has {} coordinates, expected {}",
                coords.len(),
                args.dim
            )));
        }
        let point = TorusPoint::new(&coords, args.a)?;
        let green = psi_integral(&point, &cfg)?;
        rows.push(serde_json::json!({
            "x": point.coords(),
            "psi": green.value,
            "error_estimate": green.error_estimate,
        }));
    }
    let out = serde_json::json!({
        "schema": 1,
        "n": args.dim,
        "a": args.a,
        "normalization": "zero-mean",
        "points": rows,
    });
    emit(
        &serde_json::to_string(&out).expect("valid JSON"),
        &args.output,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sums(args: SumArgs) -> Result<ExitCode, CmdError> {
    let spec = args.spec.resolve().map_err(CmdError::Usage)?;
    let ordering = SumOrdering {
        kind: match args.ordering {
            OrderingArg::Cubes => OrderingKind::ExpandingCubes,
            OrderingArg::Spheres => OrderingKind::ExpandingSpheres,
        },
        radius_max: args.radius_max,
    };
    let sums = naive_partial_sums(&spec, &ordering)?;
    let mut text = String::from("radius,partial_sum\n");
    for (r, s) in &sums {
        text.push_str(&format!("{r},{s}\n"));
    }
    match &args.output {
        Some(path) => std::fs::write(path, &text).map_err(MadelungError::Io)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CmdError> {
    let outcomes = run_verification();
    let mut all_passed = true;
    for o in &outcomes {
        let status = if o.passed { "pass" } else { "FAIL" };
        eprintln!("[{status}] {} ({:.2}s) {}", o.name, o.seconds, o.detail);
        all_passed &= o.passed;
    }
    let report = serde_json::json!({
        "schema": 1,
        "passed": all_passed,
        "checks": outcomes.iter().map(|o| serde_json::json!({
            "name": o.name,
            "passed": o.passed,
            "detail": o.detail,
        })).collect::<Vec<_>>(),
    });
    emit(
        &serde_json::to_string(&report).expect("valid JSON"),
        &args.output,
    )?;
    if all_passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
