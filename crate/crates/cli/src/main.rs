use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use backflow_core::optimizer::MIN_BUDGET;
use backflow_core::transport::{CellRule, DEFAULT_MARGINAL_CELLS};
use backflow_lab::commands::{run_detect, run_export_marginals, run_optimize, run_transport, TransportArgs};
use backflow_lab::{configure_threads, scenario, CliResult, Failure};
use clap::{Parser, Subcommand};

/// Detect and quantify quantum backflow under finite-precision phase-space measurement.
///
/// Scenario files are JSON with SI units. Set BACKFLOW_THREADS to cap parallelism.
/// Exit status: 0 success, 1 usage or input error, 2 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "backflow-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan the query window and report where the quantum current beats the classical bound.
    Detect {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Worst-case strip mass over all couplings of two measured marginals.
    Transport {
        /// Position marginal CSV with header `x_m,density_per_m`.
        x_csv: PathBuf,
        /// Momentum marginal CSV with header `p_kg_m_per_s,density_per_kg_m_per_s`.
        p_csv: PathBuf,
        /// Detection level in metres.
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        /// Classical horizon in seconds.
        #[arg(long)]
        dt: f64,
        /// Particle mass in kg.
        #[arg(long)]
        mass: f64,
        /// Split position cells at the strip edges instead of testing cell centres.
        #[arg(long)]
        split_cells: bool,
        /// Also write the report and a manifest here; the report always goes to stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Search the scenario's state family for the largest backflow violation.
    Optimize {
        scenario: PathBuf,
        #[arg(long, default_value_t = 400)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Write the smoothed position and momentum marginals at one time as CSV.
    ExportMarginals {
        scenario: PathBuf,
        /// Time in seconds.
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_MARGINAL_CELLS)]
        cells: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

// a closed pipe downstream is not an error of ours
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Detect { scenario: path, out_dir } => {
            let s = scenario::load(&path)?;
            let out = run_detect(&s, &out_dir)?;
            say!("{}: {} backflow interval(s)", s.name(), out.intervals_us.len());
            for [lo, hi] in &out.intervals_us {
                say!("  [{lo:.3}, {hi:.3}] us");
            }
            for f in &out.files {
                say!("wrote {}", f.display());
            }
        }
        Command::Transport { x_csv, p_csv, a, dt, mass, split_cells, out_dir } => {
            let rule = if split_cells { CellRule::Split } else { CellRule::Center };
            let args = TransportArgs { x_csv: &x_csv, p_csv: &p_csv, a_m: a, dt_s: dt, mass_kg: mass, rule };
            let report = run_transport(&args, out_dir.as_deref())?;
            say!("{}", serde_json::to_string_pretty(&report).map_err(Failure::usage)?);
        }
        Command::Optimize { scenario: path, budget, seed, out_dir } => {
            if budget < MIN_BUDGET {
                return Err(Failure::usage(anyhow::anyhow!("--budget must be at least {MIN_BUDGET}, got {budget}")));
            }
            let s = scenario::load(&path)?;
            let r = run_optimize(&s, budget, seed, &out_dir)?;
            say!(
                "{}: best objective {:e} (scenario state {:e}) after {} evaluations",
                s.name(),
                r.best_objective_per_s,
                r.scenario_objective_per_s,
                r.evaluations
            );
            if !r.qb_found {
                say!("no backflow found in the family");
            }
            for (name, v) in r.parameter_names.iter().zip(&r.best_params) {
                say!("  {name} = {v:e}");
            }
        }
        Command::ExportMarginals { scenario: path, t, cells, out_dir } => {
            let s = scenario::load(&path)?;
            for f in run_export_marginals(&s, t, cells, &out_dir)? {
                say!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = std::env::var("BACKFLOW_THREADS").ok();
    match configure_threads(threads.as_deref()).and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
