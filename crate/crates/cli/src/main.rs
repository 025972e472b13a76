mod defaults;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use gllab_core::curvature::scal_revolution_jet;
use gllab_core::deform::{
    fixture_family, flatten_homotopy, match_bounds, torpedo_match_homotopy, verify_flatten, verify_match, Fixture,
    FlattenGrid, MatchGrid,
};
use gllab_core::glcurve::{build_gl_family, select_parameters_with, verify_gl_family};
use gllab_core::numerics::linspace;
use gllab_core::suite::{oracle_agreement, verify_identities};
use gllab_core::torpedo::{build_torpedo, profile_samples, validate_torpedo};
use gllab_core::CurvatureReport;
use serde::Serialize;
use serde_json::json;

use output::Envelope;

/// Build warped-product metrics and bent tubes, check their scalar
/// curvature, and export JSON reports with CSV samples for plotting.
///
/// Defaults are read from defaults.json and shown below each flag.
/// GLLAB_THREADS caps the worker threads.
#[derive(Parser, Debug)]
#[command(name = "gllab", version)]
struct Cli {
    /// Seed for randomized instances
    #[arg(long, global = true)]
    seed: u64,

    /// Samples kept per report in the JSON output (0 keeps all)
    #[arg(long, global = true)]
    keep: usize,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build the torpedo warping function and validate it
    Torpedo(TorpedoArgs),
    /// Build the bent-tube curve family and check the curvature bound
    Curve(CurveArgs),
    /// Run the flattening homotopy on a fixture family
    Flatten(DeformArgs),
    /// Flatten a fixture family, then deform it into the torpedo
    MatchTorpedo(DeformArgs),
    /// Run the cross-module identity suite
    VerifyIdentities(OutArgs),
    /// Compare the trace formula with the finite-difference oracle
    OracleCompare(OracleArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// JSON report path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TorpedoArgs {
    /// Neck radius
    #[arg(long)]
    delta: f64,
    /// Width of the concave transition
    #[arg(long)]
    eps: f64,
    /// Dimension of the sphere factor
    #[arg(long)]
    k: usize,
    /// Profile samples written to the CSV
    #[arg(long)]
    samples: usize,
    #[command(flatten)]
    out: OutArgs,
    /// CSV of profile samples
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long)]
    k: usize,
    /// Allowed drop of the curvature below the base value
    #[arg(long)]
    eta: f64,
    /// Largest inner width of the tube
    #[arg(long)]
    eps0: f64,
    /// Smallest length of the horizontal run
    #[arg(long)]
    ell: f64,
    /// Starting radius
    #[arg(long)]
    r0: f64,
    /// Second fundamental form constant (0 for the model case)
    #[arg(long)]
    c: f64,
    /// Scalar curvature of the base
    #[arg(long, allow_negative_numbers = true)]
    base_scal: f64,
    /// Force the bend exponent instead of 2/(k-2) + 1
    #[arg(long)]
    force_a: Option<f64>,
    /// Number of lambda values in [0, 1]
    #[arg(long)]
    lambdas: usize,
    /// Samples per curve
    #[arg(long)]
    samples: usize,
    #[command(flatten)]
    out: OutArgs,
    /// CSV of curve samples
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DeformArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    delta: f64,
    /// Fixture family: all_torpedo or blended
    #[arg(long, value_parser = parse_fixture)]
    fixture: Fixture,
    /// Grid sizes as LAMBDAS,XS,TS
    #[arg(long, value_parser = parse_grid)]
    grid: [usize; 3],
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Random diagonal paths besides the conformal tori
    #[arg(long)]
    paths: usize,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_fixture(s: &str) -> Result<Fixture, String> {
    Fixture::parse(s).ok_or_else(|| format!("unknown fixture `{s}` (expected all_torpedo or blended)"))
}

fn parse_grid(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad grid entry `{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [l, x, t] if l >= 2 && x >= 2 && t >= 2 => Ok([l, x, t]),
        _ => Err(format!("grid must be three sizes >= 2, got `{s}`")),
    }
}

#[derive(Serialize)]
struct CurveRow {
    lambda: f64,
    s: f64,
    y: f64,
    r: f64,
    theta: f64,
    kappa: f64,
    sigma_model: f64,
}

type RunResult = Result<(serde_json::Value, Vec<CurvatureReport>), Box<dyn std::error::Error>>;

fn torpedo(a: &TorpedoArgs) -> RunResult {
    let spec = build_torpedo(a.delta, a.eps)?;
    let report = validate_torpedo(&spec.f, a.delta, a.k);
    if let Some(path) = &a.csv {
        output::write_csv(&profile_samples(&spec, a.k, a.samples)?, path)?;
    }
    let params = json!({
        "delta": a.delta,
        "eps": a.eps,
        "k": a.k,
        "r_cyl": spec.r_cyl,
        "r_bar": spec.r_bar(),
    });
    Ok((params, vec![report]))
}

fn curve(a: &CurveArgs) -> RunResult {
    let params = select_parameters_with(a.k, a.eta, a.eps0, a.ell, a.r0, a.c, a.base_scal, a.force_a)?;
    let fam = build_gl_family(&params, &linspace(0.0, 1.0, a.lambdas.max(2)))?;
    let report = verify_gl_family(&fam, a.k, a.c, a.base_scal, a.samples);
    if let Some(path) = &a.csv {
        let mut rows = Vec::new();
        for cv in &fam.curves {
            for smp in cv.samples(a.samples) {
                let j = smp.jet;
                rows.push(CurveRow {
                    lambda: cv.lambda,
                    s: smp.s,
                    y: j.y,
                    r: j.r,
                    theta: j.theta,
                    kappa: j.kappa,
                    sigma_model: scal_revolution_jet(&j, a.k, a.base_scal).unwrap_or(f64::NAN),
                });
            }
        }
        output::write_csv(&rows, path)?;
    }
    let params = json!({
        "force_a": a.force_a,
        "lambdas": a.lambdas,
        "samples": a.samples,
        "constants": params,
        "r_inf": fam.r_inf,
        "length_achieved": fam.length_achieved,
        "retries": fam.retries,
    });
    Ok((params, vec![report]))
}

fn flatten(a: &DeformArgs) -> RunResult {
    let (fam, bounds) = fixture_family(a.fixture, a.k, a.delta)?;
    let hom = flatten_homotopy(&fam, &bounds)?;
    let [lambdas, xs, ts] = a.grid;
    let report = verify_flatten(&hom, FlattenGrid { lambdas, xs, ts })?;
    let params = json!({
        "k": a.k,
        "delta": a.delta,
        "fixture": a.fixture.name(),
        "grid": a.grid,
        "bounds": bounds,
        "constants": hom.constants,
    });
    Ok((params, vec![report]))
}

fn match_torpedo(a: &DeformArgs) -> RunResult {
    let (fam, bounds) = fixture_family(a.fixture, a.k, a.delta)?;
    let hom = flatten_homotopy(&fam, &bounds)?;
    let [lambdas, xs, ts] = a.grid;
    let flat_report = verify_flatten(&hom, FlattenGrid { lambdas, xs, ts })?;
    let mb = match_bounds(&bounds)?;
    let m = torpedo_match_homotopy(&hom.flattened_family(), &mb)?;
    let (core, collar) = verify_match(&m, MatchGrid { lambdas, xs, ts })?;
    let params = json!({
        "k": a.k,
        "delta": a.delta,
        "fixture": a.fixture.name(),
        "grid": a.grid,
        "flatten_bounds": bounds,
        "match_bounds": mb,
        "theta_nodes": m.theta_nodes,
        "beta": m.beta,
        "r_inf": m.r_inf,
    });
    Ok((params, vec![flat_report, core, collar]))
}

fn identities(seed: u64) -> RunResult {
    let suite = verify_identities(seed)?;
    let checks: Vec<_> = suite
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "cases": c.cases, "max_error": c.max_error, "tolerance": c.tolerance}))
        .collect();
    let reports = suite.checks.iter().map(|c| c.to_report()).collect();
    Ok((json!({ "checks": checks }), reports))
}

fn oracle(seed: u64, a: &OracleArgs) -> RunResult {
    let check = oracle_agreement(seed, a.paths)?;
    let params = json!({
        "paths": a.paths,
        "cases": check.cases,
        "max_error": check.max_error,
        "tolerance": check.tolerance,
    });
    Ok((params, vec![check.to_report()]))
}

fn init_threads() {
    let Ok(v) = std::env::var("GLLAB_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("gllab: could not size the thread pool: {e}");
            }
        }
        _ => eprintln!("gllab: ignoring GLLAB_THREADS={v:?} (expected a positive integer)"),
    }
}

fn main() -> ExitCode {
    let matches = defaults::apply(Cli::command()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    init_threads();

    let (result, out) = match &cli.command {
        Cmd::Torpedo(a) => (torpedo(a), &a.out),
        Cmd::Curve(a) => (curve(a), &a.out),
        Cmd::Flatten(a) => (flatten(a), &a.out),
        Cmd::MatchTorpedo(a) => (match_torpedo(a), &a.out),
        Cmd::VerifyIdentities(a) => (identities(cli.seed), a),
        Cmd::OracleCompare(a) => (oracle(cli.seed, a), &a.out),
    };
    let (params, reports) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("gllab: {e}");
            return ExitCode::from(1);
        }
    };
    output::summarize(&reports);
    let reports = reports.into_iter().map(|r| r.thinned(cli.keep)).collect();
    let env = Envelope::new(cli.seed, params, reports);
    if let Err(e) = output::write_report(&env, out.out.as_deref()) {
        eprintln!("gllab: cannot write report: {e}");
        return ExitCode::from(1);
    }
    if env.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
