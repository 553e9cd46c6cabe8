//! `tipscan` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod oracle;
mod output;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tipscan_core::bifurcation::{lambda_star_with_policy, sweep_surface, tipping_rate, BifurcationError};
use tipscan_core::hullscan::hull_report;
use tipscan_core::pullback::classify;

use crate::config::RunConfig;
use crate::output::{num, opt_num, write_text};

#[derive(Parser, Debug)]
#[command(
    name = "tipscan",
    version,
    about = "Tipping analysis for scalar nonautonomous Riccati equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Case A/B/C verdict of the configured equation.
    Classify(CommonArgs),
    /// Bifurcation value lambda* of the configured equation.
    LambdaStar(CommonArgs),
    /// Rates c at which lambda*(c) changes sign.
    TippingRate(CommonArgs),
    /// lambda* over the (c, second axis) grid.
    Sweep(CommonArgs),
    /// Shifted-forcing scan of the step limit.
    HullScan(CommonArgs),
    /// Built-in analytic oracle suite.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Json
    }

    fn json(self) -> bool {
        self != Format::Csv
    }
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

enum Failure {
    Config(String),
    Numerical(BifurcationError),
}

impl From<BifurcationError> for Failure {
    fn from(e: BifurcationError) -> Self {
        Failure::Numerical(e)
    }
}

impl From<tipscan_core::pullback::PullbackError> for Failure {
    fn from(e: tipscan_core::pullback::PullbackError) -> Self {
        Failure::Numerical(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("cannot write output: {e}"))
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (jobs, out) = match &cli.command {
        Command::OracleCheck(a) => (a.jobs, a.out.clone()),
        Command::Classify(a)
        | Command::LambdaStar(a)
        | Command::TippingRate(a)
        | Command::Sweep(a)
        | Command::HullScan(a) => (a.jobs, Some(a.out.clone())),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = pool.install(|| dispatch(&cli.command));
    match result {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            if let Some(dir) = out {
                let body = json!({ "error": error_kind(&e), "message": e.to_string() });
                let _ = fs::create_dir_all(&dir);
                let _ = write_text(&dir.join("error.json"), &pretty(&body));
            }
            EXIT_NUMERICAL
        }
    }
}

fn error_kind(e: &BifurcationError) -> &'static str {
    use tipscan_core::ivp::IvpError;
    use tipscan_core::pullback::PullbackError;
    match e {
        BifurcationError::BracketFailure { .. } => "BracketFailure",
        BifurcationError::NoBracket { .. } => "NoBracket",
        BifurcationError::NoSignChange { .. } => "NoSignChange",
        BifurcationError::HypothesisViolated(_) => "HypothesisViolated",
        BifurcationError::InvalidInput(_) => "InvalidInput",
        BifurcationError::Coeff(_) => "CoefficientError",
        BifurcationError::Pullback(PullbackError::Ivp(IvpError::StepUnderflow { .. })) => "StepUnderflow",
        BifurcationError::Pullback(PullbackError::Ivp(IvpError::TooManySteps { .. })) => "TooManySteps",
        BifurcationError::Pullback(_) => "PullbackError",
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn load(args: &CommonArgs) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = RunConfig::parse(&text).map_err(Failure::Config)?.with_defaults();
    fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("effective_config.json"), &pretty(&cfg))?;
    Ok(cfg)
}

fn dispatch(command: &Command) -> Result<i32, Failure> {
    match command {
        Command::Classify(a) => cmd_classify(a),
        Command::LambdaStar(a) => cmd_lambda_star(a),
        Command::TippingRate(a) => cmd_tipping_rate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::HullScan(a) => cmd_hull_scan(a),
        Command::OracleCheck(a) => Ok(oracle::run_suite(a.out.as_deref())?),
    }
}

fn cmd_classify(a: &CommonArgs) -> Result<i32, Failure> {
    let cfg = load(a)?;
    let problem = cfg.single_problem()?;
    let hp = cfg.solver.horizons.horizons(&problem.transition)?;
    let c = classify(&problem, &hp, &cfg.solver.ivp)?;
    let summary = c.summary();
    println!("{} gap={}", c.verdict, opt_num(c.gap));
    if a.format.json() {
        write_text(&a.out.join("classification.json"), &pretty(&summary))?;
    }
    if a.format.csv() {
        output::write_trace(&a.out.join("attractor.csv"), &c.attractor_trace)?;
        output::write_trace(&a.out.join("repeller.csv"), &c.repeller_trace)?;
        write_text(&a.out.join("classify.gp"), output::CLASSIFY_GP)?;
    }
    Ok(0)
}

fn cmd_lambda_star(a: &CommonArgs) -> Result<i32, Failure> {
    let cfg = load(a)?;
    let problem = cfg.single_problem()?;
    let res = lambda_star_with_policy(&problem, &cfg.solver.bisection, &cfg.solver.horizons, &cfg.solver.ivp)?;
    println!("lambda* = {}", num(res.lambda_star));
    if a.format.json() {
        write_text(&a.out.join("lambda_star.json"), &pretty(&res))?;
    }
    if a.format.csv() {
        let (lo, hi) = res.endpoint_verdicts;
        let body = format!(
            "lambda_star,bracket_lo,bracket_hi,iterations,verdict_lo,verdict_hi\n{},{},{},{},{},{}\n",
            num(res.lambda_star),
            num(res.bracket.0),
            num(res.bracket.1),
            res.iterations,
            lo.verdict,
            hi.verdict
        );
        write_text(&a.out.join("lambda_star.csv"), &body)?;
    }
    Ok(0)
}

fn cmd_tipping_rate(a: &CommonArgs) -> Result<i32, Failure> {
    let cfg = load(a)?;
    let search = cfg
        .tipping
        .clone()
        .ok_or_else(|| Failure::Config("tipping-rate needs a \"tipping\" section".into()))?;
    let roots = match tipping_rate(
        &cfg.model(),
        cfg.fixed_second(),
        &search,
        &cfg.solver.horizons,
        &cfg.solver.ivp,
    ) {
        Ok(r) => r,
        Err(BifurcationError::NoSignChange { signs }) => {
            println!("no sign change of lambda* in [{}, {}]", search.c_lo, search.c_hi);
            if a.format.json() {
                let body = json!({ "outcome": "no_sign_change", "signs": signs });
                write_text(&a.out.join("tipping.json"), &pretty(&body))?;
            }
            if a.format.csv() {
                write_text(
                    &a.out.join("tipping.csv"),
                    "c,bracket_lo,bracket_hi,crossing,transversal\n",
                )?;
            }
            return Ok(0);
        }
        Err(e) => return Err(e.into()),
    };
    for r in &roots {
        println!("c0 = {} ({:?})", num(r.c), r.crossing);
    }
    if a.format.json() {
        let body = json!({ "outcome": "roots", "roots": roots });
        write_text(&a.out.join("tipping.json"), &pretty(&body))?;
    }
    if a.format.csv() {
        let mut body = String::from("c,bracket_lo,bracket_hi,crossing,transversal\n");
        for r in &roots {
            let crossing = serde_json::to_value(r.crossing).expect("serializable");
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                num(r.c),
                num(r.bracket.0),
                num(r.bracket.1),
                crossing.as_str().unwrap_or_default(),
                r.transversal
            ));
        }
        write_text(&a.out.join("tipping.csv"), &body)?;
    }
    Ok(0)
}

fn cmd_sweep(a: &CommonArgs) -> Result<i32, Failure> {
    let cfg = load(a)?;
    let axis1 = cfg.c_grid().map_err(Failure::Config)?;
    let axis2 = cfg.second_grid().map_err(Failure::Config)?;
    let progress = |done: usize, total: usize| eprintln!("cell {done}/{total} done");
    let surface = sweep_surface(
        &cfg.model(),
        &axis1,
        &axis2,
        cfg.second_axis(0.0),
        &cfg.solver.bisection,
        &cfg.solver.horizons,
        &cfg.solver.ivp,
        &progress,
    );
    let failed = surface.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see the error column");
    }
    if a.format.csv() {
        write_text(&a.out.join("surface.csv"), &output::surface_csv(&surface))?;
        write_text(&a.out.join("surface.gp"), output::SURFACE_GP)?;
    }
    if a.format.json() {
        write_text(&a.out.join("surface.json"), &pretty(&surface))?;
    }
    Ok(0)
}

fn cmd_hull_scan(a: &CommonArgs) -> Result<i32, Failure> {
    let cfg = load(a)?;
    let s_grid = cfg.s_grid().map_err(Failure::Config)?;
    let report = hull_report(
        &cfg.problem.forcing,
        &cfg.problem.transition,
        &s_grid,
        cfg.hull.c,
        cfg.hull.band,
        &cfg.solver.bisection,
        &cfg.solver.horizons,
        &cfg.hull.horizons,
        &cfg.solver.ivp,
    )?;
    println!("outcome: {:?}", report.outcome);
    if a.format.csv() {
        write_text(&a.out.join("hull.csv"), &output::hull_csv(&report))?;
        write_text(&a.out.join("hull.gp"), output::HULL_GP)?;
    }
    if a.format.json() {
        write_text(&a.out.join("hull.json"), &pretty(&report))?;
    }
    Ok(0)
}
