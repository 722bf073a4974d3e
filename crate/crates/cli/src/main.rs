use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdetect::sweep;
use qdetect_cli::commands::{
    self, parse_vector, CertifyArgs, ClosedFormArgs, ClosedFormKind, DesignArgs, Family, GenArgs,
    Mode, OsrArgs, Output, SweepArgs,
};
use qdetect_cli::CliError;

#[derive(Parser)]
#[command(
    name = "qdetect",
    version,
    about = "Detector design for quantum state ensembles"
)]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal POVM for a scenario.
    Design {
        scenario: PathBuf,
        /// Defaults to wc-posterior, or wc-posterior-inconclusive when the
        /// scenario sets `inconclusive`.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        eps: Option<f64>,
        /// Significant digits in the summary block.
        #[arg(long, default_value_t = 2)]
        digits: u32,
        /// Noise matrix (rows, JSON) replacing the scenario's.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Check a POVM (or a design report) against its optimality conditions.
    Certify {
        scenario: PathBuf,
        povm: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        /// Bisection level to certify; defaults to the POVM's own worst error.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// CSV of deterministic and randomized designs over noise levels.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "inconclusive")]
        family: Family,
        /// Explicit comma-separated noise levels.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["start", "stop", "step"])]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        start: f64,
        #[arg(long, default_value_t = 0.2)]
        stop: f64,
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        /// Evaluate these POVMs instead of re-optimizing.
        #[arg(long)]
        fixed_povm: Option<PathBuf>,
        /// Hold the noise-free designs fixed.
        #[arg(long)]
        robust: bool,
        #[arg(long)]
        eps: Option<f64>,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Analytic designs for special ensembles.
    ClosedForm {
        #[arg(long, value_enum)]
        kind: ClosedFormKind,
        /// Pure state (or `φ` for pure-residual), e.g. `0.6,0.8i`.
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<String>,
        /// Residual state matrix (JSON); defaults to I/n.
        #[arg(long)]
        residual: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        nu0: Option<f64>,
        /// Scenario for `--kind gamma`.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 2)]
        digits: u32,
    },
    /// Channel (operator-sum) design before a fixed measurement.
    OsrDesign {
        scenario: PathBuf,
        #[arg(long)]
        fixed_povm: Option<PathBuf>,
        /// Bound on Tr X.
        #[arg(long)]
        eta: Option<f64>,
        /// Solve for a grid of trace bounds (or just `--eta`).
        #[arg(long)]
        eta_sweep: bool,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        digits: u32,
    },
    /// Random scenario file.
    GenScenario {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        pure: bool,
    },
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Design {
            scenario,
            mode,
            eps,
            digits,
            noise,
        } => commands::run_design(&DesignArgs {
            scenario,
            mode: *mode,
            eps: *eps,
            digits: *digits,
            noise: noise.as_deref(),
        }),
        Command::Certify {
            scenario,
            povm,
            mode,
            noise,
            tol,
            delta,
        } => commands::run_certify(&CertifyArgs {
            scenario,
            povm,
            mode: *mode,
            noise: noise.as_deref(),
            tol: *tol,
            delta: *delta,
        }),
        Command::Sweep {
            scenario,
            family,
            grid,
            start,
            stop,
            step,
            fixed_povm,
            robust,
            eps,
            jobs,
        } => {
            let grid = match grid {
                Some(g) => g.clone(),
                None => sweep::nu0_grid(*start, *stop, *step)?,
            };
            commands::run_sweep(&SweepArgs {
                scenario,
                grid,
                family: *family,
                fixed_povm: fixed_povm.as_deref(),
                robust: *robust,
                eps: *eps,
                jobs: jobs.unwrap_or_else(commands::default_jobs),
            })
        }
        Command::ClosedForm {
            kind,
            psi,
            residual,
            beta,
            nu0,
            scenario,
            tol,
            digits,
        } => commands::run_closed_form(&ClosedFormArgs {
            kind: *kind,
            psi: psi.as_deref().map(parse_vector).transpose()?,
            residual: residual.as_deref(),
            beta: *beta,
            nu0: *nu0,
            scenario: scenario.as_deref(),
            tol: *tol,
            digits: *digits,
        }),
        Command::OsrDesign {
            scenario,
            fixed_povm,
            eta,
            eta_sweep,
            eps,
            seed,
            digits,
        } => commands::run_osr_design(&OsrArgs {
            scenario,
            fixed_povm: fixed_povm.as_deref(),
            eta: *eta,
            eta_sweep: *eta_sweep,
            eps: *eps,
            seed: *seed,
            digits: *digits,
        }),
        Command::GenScenario {
            dim,
            states,
            seed,
            pure,
        } => commands::run_gen_scenario(&GenArgs {
            dim: *dim,
            states: *states,
            seed: *seed,
            pure: *pure,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        commands::write_output(&out, cli.out.as_ref())?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("qdetect: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
