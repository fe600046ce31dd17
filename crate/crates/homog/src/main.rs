use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use homog::commands::{self, EnergyOptions, StudyOptions};
use homog::CliError;

/// Oscillating fractional energies and their homogenized limits.
#[derive(Parser)]
#[command(name = "homog", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct StudyArgs {
    /// Study config (JSON).
    config: PathBuf,
    /// CSV output path; overrides the config's `output`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write 0 in the wall-time column so reruns give identical files.
    #[arg(long)]
    no_timing: bool,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    plot_script: bool,
}

impl StudyArgs {
    fn options(&self) -> StudyOptions {
        StudyOptions {
            output: self.output.clone(),
            timing: !self.no_timing,
            plot_script: self.plot_script,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problems and print the effective tensor.
    CellSolve {
        config: PathBuf,
        /// Write nodal correctors as CSV.
        #[arg(long)]
        correctors: Option<PathBuf>,
    },
    /// Evaluate the truncated energy of one field.
    Energy {
        config: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the field on a regular grid as CSV.
        #[arg(long)]
        export_grid: Option<PathBuf>,
        #[arg(long, default_value_t = 65)]
        grid_nodes: usize,
    },
    /// Ratio study along the epsilon ladder.
    GammaStudy(StudyArgs),
    /// The study for several coupling exponents.
    RegimeCompare {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        gammas: Vec<f64>,
    },
    /// Kuhn partition and discrete Jensen checks.
    KuhnCheck {
        #[arg(long)]
        d: Option<usize>,
        /// Write a cube-average interpolant as a CSV grid.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Run the property suite.
    Verify {
        #[arg(long)]
        full: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    homog::init_threads()?;
    match cli.command {
        Command::CellSolve { config, correctors } => commands::cell_solve(&config, correctors.as_deref()),
        Command::Energy {
            config,
            report,
            export_grid,
            grid_nodes,
        } => commands::energy_cmd(
            &config,
            &EnergyOptions {
                report,
                export_grid,
                grid_nodes,
            },
        ),
        Command::GammaStudy(args) => commands::gamma_study(&args.config, &args.options()).map(|_| ()),
        Command::RegimeCompare { study, gammas } => {
            commands::regime_compare(&study.config, &gammas, &study.options()).map(|_| ())
        }
        Command::KuhnCheck { d, export } => commands::kuhn_check(d, export.as_deref()),
        Command::Verify { full } => commands::verify_cmd(full),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("homog: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
