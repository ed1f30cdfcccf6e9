//! `drem-observer`: run adaptive-observer simulations from the command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (`check-kappa`: bound satisfied) |
//! | 1 | `check-kappa`: bound violated |
//! | 2 | a run stopped early on the divergence guard or an integration fault |
//! | 3 | usage, configuration or I/O error |

mod config;
mod plot;
mod report;
mod run_args;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drem_core::diagnostics::{kappa_bound_check, summarize};
use drem_core::model::BUILTIN_NAMES;
use drem_core::sim::compare_rho_sweep;
use drem_core::trace_csv::{write_trace_csv, TraceShape};
use drem_core::{builtin_scenario, run, ObserverVariant, Termination};

use run_args::RunArgs;

pub const EXIT_KAPPA_FAIL: u8 = 1;
pub const EXIT_RUN_ABORTED: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<drem_core::Error> for CliError {
    fn from(e: drem_core::Error) -> Self {
        CliError::config(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "drem-observer",
    version,
    about = "Adaptive observers with dynamic regressor extension and mixing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write the trace and a summary.
    Simulate(SimulateArgs),
    /// Check the forgetting-rate bound kappa > rho (p/4) psi_sup^2.
    CheckKappa(CheckKappaArgs),
    /// Run the redesigned observer once per feedback gain.
    SweepRho(SweepArgs),
    /// Write a gnuplot script for a trace CSV.
    Plot(PlotArgs),
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// prop1 or prop2.
    #[arg(long)]
    observer: Option<ObserverVariant>,
    /// Feedback gain of the prop2 observer.
    #[arg(long)]
    rho: Option<f64>,
    /// Trace CSV path; the summary goes to `<out>.summary.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckKappaArgs {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    rho: f64,
    /// Parameter dimension.
    #[arg(long)]
    p: usize,
    #[arg(long = "psi-sup")]
    psi_sup: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated feedback gains, e.g. `0,1,10`.
    #[arg(long = "rho-list", allow_hyphen_values = true)]
    rho_list: String,
    /// Optional CSV copy of the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Script path; the script renders to the same path with a `.png` extension.
    #[arg(long)]
    out: PathBuf,
}

fn color_enabled() -> bool {
    std::io::stdout().is_terminal() && std::env::var_os("NO_COLOR").map_or(true, |v| v.is_empty())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn write_all(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Exit code for a finished run.
fn termination_code(t: &Termination) -> u8 {
    match t {
        Termination::Completed => 0,
        Termination::Diverged { .. } | Termination::Fault { .. } => EXIT_RUN_ABORTED,
        // the scenario declared a wrong bound on Psi
        Termination::PsiBoundViolated { .. } => EXIT_CONFIG,
    }
}

fn simulate(args: SimulateArgs) -> Result<u8, CliError> {
    let mut resolved = args.run.resolve()?;
    if let Some(v) = args.observer {
        resolved.sim.variant = v;
    }
    if let Some(rho) = args.rho {
        resolved.sim.gains.rho_gain = rho;
    }
    resolved.sim.validate()?;

    let mut csv_out = create(&args.out)?;
    let summary_path = PathBuf::from(format!("{}.summary.txt", args.out.display()));
    let mut summary_out = create(&summary_path)?;

    let trace = run(&resolved.sim)?;
    let shape = TraceShape {
        n_x: trace.dims.n_x,
        p: trace.dims.p,
    };
    write_trace_csv(&mut csv_out, shape, &trace.rows)?;
    csv_out
        .flush()
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", args.out.display())))?;

    let scenario = &resolved.sim.scenario;
    let summary = summarize(
        &trace,
        &scenario.certificate,
        scenario.model.psi_sup(),
        resolved.pe_window_t,
        resolved.pe_level,
    );
    summary_out
        .write_all(report::render(&trace, &summary, false).as_bytes())
        .and_then(|_| summary_out.flush())
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", summary_path.display())))?;
    print!("{}", report::render(&trace, &summary, color_enabled()));
    if !trace.termination.is_completed() {
        eprintln!("drem-observer: run stopped early: {}", trace.termination);
    }
    Ok(termination_code(&trace.termination))
}

fn check_kappa(args: CheckKappaArgs) -> Result<u8, CliError> {
    let CheckKappaArgs { kappa, rho, p, psi_sup } = args;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(CliError::config(format!("--kappa must be positive, got {kappa}")));
    }
    if !(rho >= 0.0 && rho.is_finite() && psi_sup >= 0.0 && psi_sup.is_finite()) {
        return Err(CliError::config("--rho and --psi-sup must be finite and non-negative"));
    }
    if p == 0 {
        return Err(CliError::config("--p must be at least 1"));
    }
    let bound = kappa_bound_check(kappa, rho, p, psi_sup);
    println!("{}", report::kappa_line(&bound, color_enabled()));
    println!("margin={:.16e}", bound.margin);
    Ok(if bound.pass { 0 } else { EXIT_KAPPA_FAIL })
}

fn parse_rho_list(text: &str) -> Result<Vec<f64>, CliError> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.iter().all(|s| s.is_empty()) {
        return Err(CliError::config("--rho-list is empty"));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| CliError::config(format!("invalid rho value `{s}` in --rho-list")))
        })
        .collect()
}

fn sweep_rho(args: SweepArgs) -> Result<u8, CliError> {
    let rhos = parse_rho_list(&args.rho_list)?;
    let mut resolved = args.run.resolve()?;
    resolved.sim.variant = ObserverVariant::Prop2;
    let mut csv_out = args.out.as_deref().map(create).transpose()?;

    let entries = compare_rho_sweep(&resolved.sim, &rhos)?;
    let table = report::sweep_table(&entries);
    print!("{table}");
    if let (Some(w), Some(path)) = (csv_out.as_mut(), args.out.as_deref()) {
        w.write_all(report::sweep_csv(&entries).as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    }
    let worst = entries
        .iter()
        .map(|e| termination_code(&e.trace.termination))
        .max()
        .unwrap_or(0);
    for e in entries.iter().filter(|e| !e.trace.termination.is_completed()) {
        eprintln!("drem-observer: rho = {}: {}", e.rho, e.trace.termination);
    }
    Ok(worst)
}

fn plot_cmd(args: PlotArgs) -> Result<u8, CliError> {
    let text =
        std::fs::read_to_string(&args.csv).map_err(|e| CliError::config(format!("cannot read {}: {e}", args.csv.display())))?;
    let png = args.out.with_extension("png");
    let script = plot::script(&text, &args.csv.to_string_lossy(), &png.to_string_lossy())?;
    write_all(&args.out, &script)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn list_scenarios() -> Result<u8, CliError> {
    println!(
        "{:<6} {:>4} {:>4} {:>4} {:>4} {:>8} {:>8}",
        "name", "n_x", "n_u", "n_y", "p", "psi_sup", "t_final"
    );
    for name in BUILTIN_NAMES {
        let s = builtin_scenario(name)?;
        let d = s.model.dims();
        println!(
            "{:<6} {:>4} {:>4} {:>4} {:>4} {:>8} {:>8}",
            name,
            d.n_x,
            d.n_u,
            d.n_y,
            d.p,
            s.model.psi_sup(),
            s.t_final
        );
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::CheckKappa(a) => check_kappa(a),
        Command::SweepRho(a) => sweep_rho(a),
        Command::Plot(a) => plot_cmd(a),
        Command::ListScenarios => list_scenarios(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("drem-observer: error: {e}");
            ExitCode::from(e.code)
        }
    }
}
