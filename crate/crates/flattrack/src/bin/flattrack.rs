//! Command-line front end: scenario simulation, verification, and parameter
//! sweeps. All logic lives in the library; this binary parses arguments and
//! maps results to exit codes. Set RUST_LOG to control verbosity.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flattrack::cli::{self, CliError, SweepParam};

#[derive(Parser)]
#[command(
    name = "flattrack",
    about = "Analytic optimal trajectory tracking for driftless flat systems",
    after_help = "SCENARIO is a TOML file path or a built-in name \
                  (fig1_ic1, fig1_ic2, fig1_ic3, fig2).\n\
                  Scenario schema: see the repository README; unknown keys are rejected.\n\
                  Defaults: [tuning] eps_switch_scale 1e-6, hysteresis 10, eps_u1_scale 1e-8;\n\
                  [oracle] transcription false, grid 200, horizon 1.0, max_iterations 5000,\n\
                  perturbation_trials 100, perturbation_magnitude 0.01, seed 7,\n\
                  pmp_tolerance 1e-3; [reference] lissajous period defaults to the horizon.\n\
                  Exit codes: 0 success, 1 configuration error, 2 runtime error, \
                  3 verification gate failed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop simulation and export trajectory.csv / summary.json
    Simulate {
        /// Scenario file or built-in name
        scenario: String,
        /// Output directory
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the verification gates and export verification.json
    Verify {
        /// Scenario file or built-in name
        scenario: String,
        /// Output directory
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one simulation per value of a parameter, in parallel
    Sweep {
        /// Scenario file or built-in name
        scenario: String,
        /// Parameter to sweep: x0, u_max, dt, qbar_scale
        #[arg(long)]
        param: String,
        /// Values (x0 values as "x,y,theta" triples)
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
        /// Output directory
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn report(err: &CliError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { scenario, output } => {
            match cli::cmd_simulate(&scenario, output.as_deref()) {
                Ok(summary) => {
                    println!(
                        "{} rows, final |e| = {:.6e}, total cost = {:.6}",
                        summary.rows, summary.final_error_norm, summary.total_cost
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            }
        }
        Command::Verify { scenario, output } => {
            match cli::cmd_verify(&scenario, output.as_deref()) {
                Ok(result) => {
                    for g in &result.gates {
                        println!("{} {}: {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
                    }
                    if result.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(cli::EXIT_VERIFICATION_FAILED as u8)
                    }
                }
                Err(e) => report(&e),
            }
        }
        Command::Sweep { scenario, param, values, output } => {
            let param = match SweepParam::parse(&param) {
                Ok(p) => p,
                Err(e) => return report(&e),
            };
            match cli::cmd_sweep(&scenario, param, &values, output.as_deref()) {
                Ok(rows) => {
                    let mut any_failed = false;
                    for r in &rows {
                        println!(
                            "[{}] {} -> {}",
                            r.index,
                            r.value,
                            if r.status == "ok" {
                                format!(
                                    "|e(T)| = {:.3e}, J = {:.4}",
                                    r.final_error_norm.unwrap_or(f64::NAN),
                                    r.total_cost.unwrap_or(f64::NAN)
                                )
                            } else {
                                any_failed = true;
                                r.status.clone()
                            }
                        );
                    }
                    if any_failed {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => report(&e),
            }
        }
    }
}
