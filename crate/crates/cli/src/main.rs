use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use opf_decomp::json::parse_json;
use opf_decomp::matpower::parse_matpower_with_notes;
use opf_decomp::output::{to_json, write_trace, CentralFile, ReportFile};
use opf_decomp::toys::{parse_problem, run_scenario, scenario_ids};
use opf_decomp::{IoError, IoResult};
use opf_decomp_core::{
    lookup_setting, run, solve_centralized, AlgoParams, Network, RunOptions, RunStatus, Variant,
};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "opf-decomp",
    version,
    about = "Component-based dual decomposition for AC optimal power flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a distributed solve and write report.json and trace.csv.
    Solve(SolveArgs),
    /// Run the centralized solve and write central.json.
    Central(CentralArgs),
    /// Run an appendix toy scenario (or `all`) and write its CSV data.
    Toys(ToysArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value = "a3")]
    variant: String,
    /// Parameter setting A..T; excludes the explicit parameter flags.
    #[arg(long, conflicts_with_all = ["nu", "rho_pq", "rho_vtheta", "alpha_i", "alpha_ij"])]
    setting: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    rho_pq: Option<f64>,
    #[arg(long)]
    rho_vtheta: Option<f64>,
    #[arg(long)]
    alpha_i: Option<f64>,
    #[arg(long)]
    alpha_ij: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    /// Worker threads for subproblem rounds (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Keep every n-th trace row.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Start each line subproblem from its previous solution instead of the flat start.
    #[arg(long)]
    warm_start_previous: bool,
    /// Write 0 in the wall_ms column so traces are reproducible byte for byte.
    #[arg(long)]
    no_wall_clock: bool,
    #[arg(long)]
    gnuplot_hints: bool,
}

#[derive(Args)]
struct CentralArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ToysArgs {
    /// `a` or `b`
    which: String,
    /// Scenario id such as fig8a, or `all`.
    scenario: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    gnuplot_hints: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OPF_DD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::from(EXIT_OK)
                }
                _ => ExitCode::from(EXIT_INPUT),
            };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Central(args) => cmd_central(args),
        Command::Toys(args) => cmd_toys(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn case_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn load_case(path: &Path) -> IoResult<(Network, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        IoError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (net, notes) = if is_json {
        (parse_json(&text)?, Vec::new())
    } else {
        let parsed = parse_matpower_with_notes(&text)?;
        (parsed.network, parsed.notes)
    };
    info!(
        "loaded {}: {} buses, {} generators, {} branches",
        path.display(),
        net.n_buses(),
        net.n_generators(),
        net.n_branches()
    );
    Ok((net, notes))
}

fn params_from_args(args: &SolveArgs) -> IoResult<(AlgoParams, Option<char>)> {
    let variant: Variant = args.variant.parse()?;
    if let Some(s) = &args.setting {
        let setting = lookup_setting(s)?;
        return Ok((setting.params(variant, args.eps), Some(setting.name)));
    }
    let require = |value: Option<f64>, flag: &str| {
        value.ok_or_else(|| IoError::SchemaViolation {
            path: flag.to_string(),
            message: format!(
                "required for variant {} unless --setting is given",
                variant.name()
            ),
        })
    };
    let nu = require(args.nu, "--nu")?;
    let alpha_i = require(args.alpha_i, "--alpha-i")?;
    let alpha_ij = require(args.alpha_ij, "--alpha-ij")?;
    let rho_vth = match variant {
        Variant::A1 => args.rho_vtheta.unwrap_or(0.0),
        _ => require(args.rho_vtheta, "--rho-vtheta")?,
    };
    let rho_pq = match variant {
        Variant::A3 => require(args.rho_pq, "--rho-pq")?,
        _ => args.rho_pq.unwrap_or(0.0),
    };
    let params = AlgoParams {
        variant,
        nu,
        rho_pq,
        rho_vth,
        alpha_i,
        alpha_ij,
        epsilon: args.eps,
    };
    params.validate()?;
    Ok((params, None))
}

fn create_out(dir: &Path) -> IoResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        IoError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", dir.display()),
        ))
    })
}

fn cmd_solve(args: SolveArgs) -> IoResult<u8> {
    let (params, setting) = params_from_args(&args)?;
    let (net, mut notes) = load_case(&args.case)?;
    create_out(&args.out)?;
    let opts = RunOptions {
        max_iter: args.max_iter,
        thin: args.thin.max(1),
        workers: args.workers,
        warm_start_previous: args.warm_start_previous,
        wall_clock: !args.no_wall_clock,
        ..RunOptions::default()
    };
    let outcome = run(&net, &params, &opts)?;
    let report = &outcome.report;
    if report.line_soft_failures > 0 {
        let msg = format!(
            "{} line subproblems stopped before reaching the KKT tolerance",
            report.line_soft_failures
        );
        warn!("{msg}");
        notes.push(msg);
    }
    let name = case_name(&args.case);
    let file = ReportFile::new(&name, report, setting, notes);
    std::fs::write(args.out.join("report.json"), to_json(&file) + "\n")?;
    let trace = std::fs::File::create(args.out.join("trace.csv"))?;
    write_trace(std::io::BufWriter::new(trace), &outcome.trace)?;

    println!(
        "case={name} variant={} setting={} iters={} ro_gap={} amd_gap={}",
        params.variant.name(),
        setting.map_or_else(|| "-".to_string(), |c| c.to_string()),
        report.iterations,
        report.ro_gap,
        report.amd_gap
    );
    if args.gnuplot_hints {
        println!(
            "# gnuplot\nset datafile separator ','\nset key autotitle columnhead\nset logscale y\nplot '{}' using 1:2 with lines",
            args.out.join("trace.csv").display()
        );
    }
    Ok(match report.status {
        RunStatus::Converged => EXIT_OK,
        RunStatus::MaxIterExceeded | RunStatus::Diverged => {
            eprintln!("run stopped without converging: {}", report.status.as_str());
            EXIT_NOT_CONVERGED
        }
    })
}

fn cmd_central(args: CentralArgs) -> IoResult<u8> {
    let (net, notes) = load_case(&args.case)?;
    create_out(&args.out)?;
    let sol = match solve_centralized(&net, None, args.tol) {
        Ok(sol) => sol,
        Err(e @ opf_decomp_core::Error::SolverDiverged(_)) => {
            eprintln!("error: {e}");
            return Ok(EXIT_NOT_CONVERGED);
        }
        Err(e) => return Err(e.into()),
    };
    let name = case_name(&args.case);
    let file = CentralFile::new(&name, &sol, net.base_mva(), notes);
    std::fs::write(args.out.join("central.json"), to_json(&file) + "\n")?;
    println!(
        "case={name} status={} cost={} max_violation={:e}",
        file.status, sol.cost, sol.max_violation
    );
    Ok(if file.status == "converged" {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn cmd_toys(args: ToysArgs) -> IoResult<u8> {
    let problem = parse_problem(&args.which)?;
    let ids: Vec<&str> = if args.scenario.eq_ignore_ascii_case("all") {
        scenario_ids(problem).to_vec()
    } else {
        vec![args.scenario.as_str()]
    };
    create_out(&args.out)?;
    let mut all_passed = true;
    for id in ids {
        let report = run_scenario(problem, id)?;
        let file = std::fs::File::create(args.out.join(report.file_name()))?;
        report.write_csv(std::io::BufWriter::new(file))?;
        println!("{}", report.status_line());
        if args.gnuplot_hints {
            println!("# gnuplot\n{}", report.gnuplot_hint());
        }
        all_passed &= report.passed;
    }
    Ok(if all_passed {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}
