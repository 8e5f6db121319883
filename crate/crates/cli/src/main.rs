//! `isopara`: synthesize, classify and verify isoparametric fields from the
//! command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isopara_core::classify::{classify, ClassifyConfig};
use isopara_core::fields::sampling::sample_points;
use isopara_core::fields::{jet, make_field, operators, CanonicalField, FieldSpec, GridField, JetMode, ScalarField};
use isopara_core::moments::{heuristic_guess, invert_moments, MomentSystem};
use isopara_core::profile::{forward_map, inverse_map, synth_g, Profile, TransformParams, ViscTransform};
use isopara_core::verify::{run_suite, Suite, SuiteConfig};
use isopara_core::Error;

#[derive(Parser)]
#[command(name = "isopara", version, about = "Synthesis, classification and verification of isoparametric fields")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "ISOPARA_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a field spec, write its canonical form and optionally sample it.
    Synthesize {
        /// Field spec (.json).
        #[arg(long)]
        spec: PathBuf,
        /// Output path for the canonical spec; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of sample points written to --csv.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Sample table with columns x1..xn, u, gradnorm, laplacian, onelap.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Classify a field at a probe point.
    Classify {
        /// Field spec (.json) or sampled grid (.csv).
        #[arg(long)]
        field: PathBuf,
        /// Probe point, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        at: Vec<f64>,
        /// Jet computation; defaults to analytic for specs and fd for grids.
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Finite-difference step.
        #[arg(long)]
        h: Option<f64>,
        /// Eigenvalue grouping tolerance before finite-difference widening.
        #[arg(long)]
        tol: Option<f64>,
        /// Number of reconstruction residual samples.
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// Output path for the report; standard output if absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a check suite on a canonical field; exits 1 if any check fails.
    Verify {
        /// Canonical field spec (.json).
        #[arg(long)]
        field: PathBuf,
        /// Check suite to run.
        #[arg(long)]
        suite: SuiteArg,
        /// Number of sample points.
        #[arg(long, default_value_t = 32)]
        samples: usize,
        /// Jet computation used by the checks.
        #[arg(long, default_value = "analytic")]
        mode: ModeArg,
        /// Finite-difference step.
        #[arg(long)]
        h: Option<f64>,
        /// Output path for the suite report; standard output if absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Recover eigenvalues from power sums C_k = sum_i d_i kappa_i^k.
    InvertMoments {
        /// Power sums C_1..C_m, comma separated.
        #[arg(long = "C", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        moments: Vec<f64>,
        /// Multiplicities d_1..d_m, comma separated.
        #[arg(long = "d", value_delimiter = ',', required = true)]
        mults: Vec<usize>,
        /// Initial eigenvalue estimates; a heuristic guess if absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        guess: Option<Vec<f64>>,
        /// Residual tolerance, relative to the largest |C_k|.
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
    },
    /// Evaluate a profile map at one argument.
    Profile {
        /// Profile spec (.json).
        #[arg(long)]
        spec: PathBuf,
        /// Map to evaluate.
        #[arg(long)]
        op: ProfileOp,
        /// Cylinder rank; planes if absent.
        #[arg(long)]
        k: Option<usize>,
        /// Constant C1 of the cylinder profile.
        #[arg(long = "C1")]
        c1: Option<f64>,
        /// Argument of the map.
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Flow,
    HessianEvolution,
    Harmonic,
    Isoparametric,
    Cartan,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Flow => Suite::Flow,
            SuiteArg::HessianEvolution => Suite::HessianEvolution,
            SuiteArg::Harmonic => Suite::Harmonic,
            SuiteArg::Isoparametric => Suite::Isoparametric,
            SuiteArg::Cartan => Suite::Cartan,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileOp {
    #[value(name = "F")]
    F,
    #[value(name = "Fk")]
    Fk,
    #[value(name = "U")]
    U,
    #[value(name = "Uk")]
    Uk,
    #[value(name = "g")]
    G,
    #[value(name = "G")]
    BigG,
}

/// Why a command stopped early.
enum Failure {
    /// Malformed input: exit code 2.
    Input(anyhow::Error),
    /// A computation or check failed: exit code 1.
    Failed(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let is_input = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<Error>(),
                Some(Error::Parse(_) | Error::InvalidSpec(_) | Error::DimensionMismatch { .. } | Error::RankOutOfRange { .. })
            )
        });
        if is_input {
            Failure::Input(e)
        } else {
            Failure::Failed(e)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Synthesize { spec, out, samples, csv } => synthesize(&spec, out.as_deref(), samples, csv.as_deref(), cli.seed),
        Command::Classify { field, at, mode, h, tol, samples, report } => {
            classify_cmd(&field, &at, mode, h, tol, samples, report.as_deref(), cli.seed)
        }
        Command::Verify { field, suite, samples, mode, h, report } => {
            verify_cmd(&field, suite.into(), samples, jet_mode(mode, h), report.as_deref(), cli.seed)
        }
        Command::InvertMoments { moments, mults, guess, tol } => invert_cmd(moments, mults, guess, tol),
        Command::Profile { spec, op, k, c1, at } => profile_cmd(&spec, op, k, c1, at),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(anyhow!("cannot read {}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(Failure::Failed),
        None => print_line(text),
    }
}

/// Write one line to standard output; a closed pipe is not an error.
fn print_line(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Failed(anyhow!("cannot write output: {e}"))),
        _ => Ok(()),
    }
}

fn load_spec(path: &Path) -> Result<CanonicalField, Failure> {
    let text = read_input(path)?;
    let spec = FieldSpec::from_json(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(make_field(&spec).with_context(|| format!("in {}", path.display()))?)
}

fn is_grid(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn jet_mode(mode: ModeArg, h: Option<f64>) -> JetMode {
    match mode {
        ModeArg::Analytic => JetMode::Analytic,
        ModeArg::Fd => JetMode::Fd { h },
    }
}

fn synthesize(spec: &Path, out: Option<&Path>, samples: usize, csv_path: Option<&Path>, seed: u64) -> Outcome {
    let field = load_spec(spec)?;
    emit(out, &field.to_spec().to_json()?)?;
    if let Some(path) = csv_path {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = sample_points(&mut rng, &field, samples);
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display())).map_err(Failure::Failed)?;
        let n = field.dim();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend(["u", "gradnorm", "laplacian", "onelap"].map(String::from));
        w.write_record(&header).context("csv").map_err(Failure::Failed)?;
        for x in &points {
            let ops = operators(&jet(&field, x, JetMode::Analytic)?)?;
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            for v in [field.value(x), ops.gradnorm, ops.laplacian, ops.onelap] {
                row.push(format!("{v:.16e}"));
            }
            w.write_record(&row).context("csv").map_err(Failure::Failed)?;
        }
        w.flush().context("csv").map_err(Failure::Failed)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn classify_cmd(
    path: &Path,
    at: &[f64],
    mode: Option<ModeArg>,
    h: Option<f64>,
    tol: Option<f64>,
    samples: usize,
    report: Option<&Path>,
    seed: u64,
) -> Outcome {
    let x0 = DVector::from_column_slice(at);
    let mut cfg = ClassifyConfig { residual_samples: samples, seed, ..ClassifyConfig::default() };
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(Failure::Input(anyhow!("--tol must be positive")));
        }
        cfg.group_tol = t;
    }
    let rep = if is_grid(path) {
        if matches!(mode, Some(ModeArg::Analytic)) {
            return Err(Failure::Input(anyhow!("grid fields have no analytic jets; use --mode fd")));
        }
        let grid = GridField::from_path(path).with_context(|| format!("in {}", path.display()))?;
        if grid.dim() != x0.len() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: x0.len() }.into());
        }
        classify(&grid, &x0, &cfg.with_mode(JetMode::Fd { h }))?
    } else {
        let field = load_spec(path)?;
        if field.dim() != x0.len() {
            return Err(Error::DimensionMismatch { expected: field.dim(), found: x0.len() }.into());
        }
        classify(&field, &x0, &cfg.with_mode(jet_mode(mode.unwrap_or(ModeArg::Analytic), h)))?
    };
    emit(report, &rep.to_json()?)
}

fn verify_cmd(path: &Path, suite: Suite, samples: usize, mode: JetMode, report: Option<&Path>, seed: u64) -> Outcome {
    if is_grid(path) {
        return Err(Failure::Input(anyhow!("verify needs a canonical field spec (.json), not a grid")));
    }
    let field = load_spec(path)?;
    let cfg = SuiteConfig { seed, samples, mode, ..SuiteConfig::default() };
    let rep = run_suite(&field, suite, &cfg)?;
    emit(report, &serde_json::to_string_pretty(&rep).context("report")?)?;
    if rep.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Failed(anyhow!("checks out of tolerance: {}", failed.join(", "))))
    }
}

fn invert_cmd(moments: Vec<f64>, mults: Vec<usize>, guess: Option<Vec<f64>>, tol: f64) -> Outcome {
    let scale = moments.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let sys = MomentSystem::new(mults, moments)?;
    let y0 = guess.unwrap_or_else(|| heuristic_guess(&sys));
    let kappas = invert_moments(&sys, &y0, tol * scale)?;
    let items: Vec<String> = kappas.iter().map(|v| v.to_string()).collect();
    print_line(&format!("{{\"kappas\":[{}]}}", items.join(",")))
}

fn profile_cmd(path: &Path, op: ProfileOp, k: Option<usize>, c1: Option<f64>, at: f64) -> Outcome {
    let text = read_input(path)?;
    let profile: Profile = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("in {}", path.display()))?;
    let params = match (k, c1) {
        (None, None) => TransformParams::Plane,
        (Some(k), Some(c)) => TransformParams::cylinder(k, c)?,
        _ => return Err(Failure::Input(anyhow!("--k and --C1 must be given together"))),
    };
    let needs_cylinder = matches!(op, ProfileOp::Fk | ProfileOp::Uk);
    if needs_cylinder && params == TransformParams::Plane {
        return Err(Failure::Input(anyhow!("Fk and Uk need --k and --C1")));
    }
    let value = match op {
        ProfileOp::F => profile.primitive(at)?,
        ProfileOp::Fk => forward_map(&profile, &params, at)?,
        ProfileOp::U => profile.inverse_primitive(at)?,
        ProfileOp::Uk => inverse_map(&profile, &params, at)?,
        ProfileOp::G => synth_g(&profile, &params, at)?,
        ProfileOp::BigG => {
            let base = profile.base();
            let p = profile.clone();
            let g = move |t: f64| synth_g(&p, &params, t).unwrap_or(f64::NAN);
            ViscTransform::new(profile, g, base, base)?.value(at)?
        }
    };
    print_line(&value.to_string())
}
