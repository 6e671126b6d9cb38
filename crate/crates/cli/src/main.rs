use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kyfan_tilt::par::Exec;
use kyfan_tilt::report::{self, ProblemFile, RunFlags, EXIT_INPUT};
use kyfan_tilt::spectral::MatrixJson;
use kyfan_tilt::validate::{run_oracle_validate, Suite};
use kyfan_tilt::Error;
use serde::Serialize;

/// Tilt-stability analysis for Ky-Fan κ-norm regularized problems.
///
/// Exit codes: 0 Stable, 1 Unstable, 2 Inconclusive, 3 input or precondition error.
#[derive(Parser)]
#[command(name = "kyfan-tilt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for witness search, sampling and probes (overrides the problem file).
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override `name=value`; also accepted as `--tol.<name> <value>`.
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
    /// Run every parallel section sequentially.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Clone)]
struct VerdictArgs {
    /// Number of random degenerate-block rotations of the SVD pair to cross-check.
    #[arg(long)]
    rotation_samples: Option<usize>,
    /// Run the empirical tilt probe.
    #[arg(long)]
    probe: bool,
    /// Write the probe rows as CSV (implies --probe).
    #[arg(long)]
    probe_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: stationarity, certificate, Υ, verdict.
    Analyze {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        verdict: VerdictArgs,
        /// Evaluate the second subderivative along this many random directions and their hull projections.
        #[arg(long, default_value_t = 0)]
        d2_samples: usize,
        /// Attach wall-clock timings (makes the report non-reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Second subderivative of the Ky-Fan norm at X̄ along G.
    D2 {
        problem: PathBuf,
        /// Direction G as a matrix file.
        g: PathBuf,
        /// Subgradient Γ as a matrix file (default −ν∇ϑ(X̄)).
        #[arg(long)]
        gamma: Option<PathBuf>,
        /// Also evaluate the frame-based formula and the epi-quotient oracle.
        #[arg(long)]
        cross_check: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Membership of Γ in the subdifferential at X̄ (exit 0 member, 1 not a member).
    SubgradCheck {
        problem: PathBuf,
        /// Subgradient Γ as a matrix file (default −ν∇ϑ(X̄)).
        #[arg(long)]
        gamma: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Υ and the tilt verdict only.
    Tilt {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        verdict: VerdictArgs,
    },
    /// Seeded cross-validation suites (exit 1 on any failure).
    OracleValidate {
        /// Suite to run; repeat for several (formulas, subgrad, prox, quotient). Default: all.
        #[arg(long = "suite", value_parser = parse_suite)]
        suites: Vec<Suite>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per suite.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value.parse().map_err(|e| format!("bad value for {name}: {e}"))?;
    Ok((name.to_string(), value))
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::parse(s).ok_or_else(|| format!("unknown suite `{s}`"))
}

/// Rewrite `--tol.<name> <v>` and `--tol.<name>=<v>` into `--tol <name>=<v>`.
fn normalize_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.strip_prefix("--tol.") {
            Some(rest) if rest.contains('=') => {
                out.push("--tol".into());
                out.push(rest.into());
            }
            Some(rest) => {
                out.push("--tol".into());
                let v = it.next().unwrap_or_default();
                out.push(format!("{rest}={v}"));
            }
            None => out.push(a),
        }
    }
    out
}

#[derive(Serialize)]
struct ErrorReport {
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    pointer: Option<String>,
    message: String,
}

fn error_json(e: &Error) -> String {
    let (kind, pointer) = match e {
        Error::Schema { pointer, .. } => ("schema", Some(pointer.clone())),
        Error::Dimension(_) => ("dimension", None),
        Error::NotSubgradient(_) => ("not_subgradient", None),
        Error::Precondition(_) => ("precondition", None),
        Error::NotSymmetric(_) => ("not_symmetric", None),
        Error::NonFinite(_) => ("non_finite", None),
        Error::NonConvergence { .. } => ("non_convergence", None),
        _ => ("numeric", None),
    };
    let body = ErrorReport { error: ErrorBody { kind, pointer, message: e.to_string() } };
    serde_json::to_string_pretty(&body).expect("error serializes") + "\n"
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Schema { pointer: "/".into(), message: format!("{}: {e}", path.display()) })
}

fn load_problem(path: &Path) -> Result<ProblemFile, Error> {
    ProblemFile::parse(&read(path)?)
}

fn load_matrix(path: &Path) -> Result<MatrixJson, Error> {
    report::parse_json(&read(path)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Schema { pointer: "/".into(), message: format!("{}: {e}", p.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn flags(common: &Common, verdict: Option<&VerdictArgs>) -> RunFlags {
    RunFlags {
        tol_overrides: common.tol.clone(),
        seed: common.seed,
        rotation_samples: verdict.and_then(|v| v.rotation_samples),
        probe: verdict.is_some_and(|v| v.probe || v.probe_csv.is_some()),
        exec: exec(common.sequential),
        ..RunFlags::default()
    }
}

fn write_csv(path: Option<&PathBuf>, probe: Option<&kyfan_tilt::oracle::ProbeResult>) -> Result<(), Error> {
    if let (Some(p), Some(r)) = (path, probe) {
        std::fs::write(p, r.to_csv()).map_err(|e| Error::Schema { pointer: "/".into(), message: format!("{}: {e}", p.display()) })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, (Error, Option<PathBuf>)> {
    match cli.command {
        Command::Analyze { problem, common, verdict, d2_samples, timings } => {
            let out = common.out.clone();
            let wrap = |e| (e, out.clone());
            let p = load_problem(&problem).map_err(wrap)?;
            let f = RunFlags { d2_samples, timings, ..flags(&common, Some(&verdict)) };
            let rep = report::run_analyze(&p, &f).map_err(wrap)?;
            write_csv(verdict.probe_csv.as_ref(), rep.oracle.as_ref()).map_err(wrap)?;
            emit(out.as_deref(), &rep.to_json()).map_err(wrap)?;
            Ok(rep.exit_code)
        }
        Command::Tilt { problem, common, verdict } => {
            let out = common.out.clone();
            let wrap = |e| (e, out.clone());
            let p = load_problem(&problem).map_err(wrap)?;
            let rep = report::run_tilt(&p, &flags(&common, Some(&verdict))).map_err(wrap)?;
            write_csv(verdict.probe_csv.as_ref(), rep.oracle.as_ref()).map_err(wrap)?;
            emit(out.as_deref(), &json(&rep)).map_err(wrap)?;
            Ok(rep.exit_code)
        }
        Command::D2 { problem, g, gamma, cross_check, common } => {
            let out = common.out.clone();
            let wrap = |e| (e, out.clone());
            let p = load_problem(&problem).map_err(wrap)?;
            let g = load_matrix(&g).map_err(wrap)?;
            let gamma = gamma.as_deref().map(load_matrix).transpose().map_err(wrap)?;
            let rep = report::run_d2(&p, &g, gamma.as_ref(), cross_check, &flags(&common, None)).map_err(wrap)?;
            emit(out.as_deref(), &json(&rep)).map_err(wrap)?;
            Ok(0)
        }
        Command::SubgradCheck { problem, gamma, common } => {
            let out = common.out.clone();
            let wrap = |e| (e, out.clone());
            let p = load_problem(&problem).map_err(wrap)?;
            let gamma = gamma.as_deref().map(load_matrix).transpose().map_err(wrap)?;
            let rep = report::run_subgrad_check(&p, gamma.as_ref(), &flags(&common, None)).map_err(wrap)?;
            emit(out.as_deref(), &json(&rep)).map_err(wrap)?;
            Ok(if rep.member { 0 } else { 1 })
        }
        Command::OracleValidate { suites, seed, count, json: as_json, out, sequential } => {
            let rep = run_oracle_validate(&suites, seed, count, exec(sequential));
            let text = if as_json { json(&rep) } else { rep.to_table() };
            emit(out.as_deref(), &text).map_err(|e| (e, None))?;
            Ok(if rep.passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(normalize_args(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err((e, out)) => {
            eprintln!("error: {e}");
            let _ = emit(out.as_deref(), &error_json(&e));
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_flags_are_rewritten() {
        let args = ["x", "--tol.cone", "1e-6", "--tol.margin=2e-8", "--seed", "3"].map(String::from);
        assert_eq!(normalize_args(args), ["x", "--tol", "cone=1e-6", "--tol", "margin=2e-8", "--seed", "3"]);
    }

    #[test]
    fn tol_values_parse() {
        assert_eq!(parse_tol("cone=1e-6").unwrap(), ("cone".to_string(), 1e-6));
        assert!(parse_tol("cone").is_err());
    }
}
