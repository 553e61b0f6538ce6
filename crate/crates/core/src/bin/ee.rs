use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mimo_ee::bench::{
    db_to_watts, default_scenario, reproduce_figures, run_sweep, run_validation, sweep_csv,
    write_file, FixedPoint, SweepMode, SweepRange, SweepSpec, SweepVariable, DINKELBACH_MAX_ITER,
    SOLVER_TOL,
};
use mimo_ee::optimizer::{joint_optimize, write_trace_csv, EeProblem};
use mimo_ee::scenario::{load_scenario, Scenario};
use mimo_ee::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ee",
    version,
    about = "Energy-efficiency sweeps, validation and optimisation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Var {
    Antennas,
    Pdbm,
    Pilots,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cf,
    Mc,
    Opt,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one variable and write a CSV.
    Sweep {
        /// Scenario file; the bundled default when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        var: Var,
        /// start:stop:step, inclusive.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long, value_enum, default_value = "cf")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Antenna count held fixed when not swept (default: 64 clamped to [K, M]).
        #[arg(long)]
        antennas: Option<usize>,
        /// Transmit power held fixed, in dB relative to the noise power.
        #[arg(long, default_value_t = 10.0, conflicts_with = "power_w")]
        pdb: f64,
        /// Transmit power held fixed, in watts.
        #[arg(long)]
        power_w: Option<f64>,
    },
    /// Run the oracle validation suite.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the two figure CSVs and a summary for the bundled default scenario.
    Figures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Jointly optimise antennas and transmit power.
    Optimize {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Write the solver trace to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn scenario_arg(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => load_scenario(p),
        None => Ok(default_scenario()),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("EE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::invalid(
                "EE_THREADS",
                format!("expected a positive integer, got {value:?}"),
            )
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::invalid("EE_THREADS", e.to_string()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Sweep {
            scenario,
            var,
            range,
            mode,
            out,
            trials,
            seed,
            antennas,
            pdb,
            power_w,
        } => {
            let s = scenario_arg(scenario.as_deref())?;
            let n = antennas
                .unwrap_or_else(|| 64.clamp(s.config.users_per_cell, s.config.max_antennas));
            let p_d = power_w.unwrap_or_else(|| db_to_watts(pdb, s.config.noise_power_w));
            let spec = SweepSpec {
                variable: match var {
                    Var::Antennas => SweepVariable::Antennas,
                    Var::Pdbm => SweepVariable::TransmitPowerDb,
                    Var::Pilots => SweepVariable::PilotLength,
                },
                range: SweepRange::parse(&range)?,
                fixed: FixedPoint {
                    n_antennas: n,
                    transmit_power_w: p_d,
                },
                mode: match mode {
                    Mode::Cf => SweepMode::ClosedForm,
                    Mode::Mc => SweepMode::MonteCarlo { trials, seed },
                    Mode::Opt => SweepMode::Optimize,
                },
            };
            let rows = run_sweep(&spec, &s)?;
            write_file(&out, &sweep_csv(&rows))?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Validate {
            scenario,
            trials,
            seed,
        } => {
            let s = scenario_arg(scenario.as_deref())?;
            let report = run_validation(&s, trials, seed)?;
            print!("{}", report.table());
            if !report.passed() {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                eprintln!("validation failed: {}", failed.join(", "));
                return Ok(ExitCode::from(1));
            }
        }
        Command::Figures { out } => {
            let summary = reproduce_figures(&out)?;
            print!(
                "{}",
                std::fs::read_to_string(&summary.summary_txt).unwrap_or_default()
            );
        }
        Command::Optimize { scenario, trace } => {
            let s = scenario_arg(scenario.as_deref())?;
            let problem = EeProblem::from_scenario(&s);
            let result = joint_optimize(&problem, SOLVER_TOL, DINKELBACH_MAX_ITER)?;
            let p = result.point;
            println!("n_antennas      {}", p.n_antennas);
            println!("transmit_power  {} W", p.transmit_power_w);
            println!("pilot_power     {} W", p.pilot_power_w);
            println!("rate            {} bit/s", p.rate_bps);
            println!("total_power     {} W", p.total_power_w);
            println!("ee              {} bit/J", p.ee_bpj);
            println!("feasible        {}", p.feasible);
            println!("outer_passes    {}", result.outer_iterations);
            if let Some(path) = trace {
                write_trace_csv(&result.trace, &path)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
