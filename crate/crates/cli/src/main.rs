use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nomamec::baselines::{Scheme, DEFAULT_CIRCUIT_POWER};
use nomamec::solver::SolverOptions;
use nomamec_cli::config::ConfigFile;
use nomamec_cli::solve::{self, Method};
use nomamec_cli::sweep::{self, Axis, ChannelMode, SweepSpec};
use nomamec_cli::verify;
use nomamec_cli::{out_dir, CliError};

/// Delay-optimal partial offloading for NOMA uplink edge computing.
#[derive(Parser)]
#[command(name = "nomamec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Tolerances {
    /// Final bisection bracket width in seconds.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Largest accepted normalized constraint residual.
    #[arg(long, default_value_t = 1e-8)]
    eps_feas: f64,
    /// Newton steps per feasibility test.
    #[arg(long, default_value_t = 1000)]
    inner_budget: usize,
}

impl Tolerances {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            eps: self.eps,
            eps_feas: self.eps_feas,
            inner_budget: self.inner_budget,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimum delay and allocation for one scenario.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        #[command(flatten)]
        tol: Tolerances,
        /// Directory for solve.csv and its manifest; defaults to $NOMAMEC_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over several schemes and channel draws.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated scheme labels.
        #[arg(long, value_delimiter = ',', default_value = "noma-partial,noma-full,ofdma-partial-1rb,ofdma-partial-mrb,local")]
        schemes: Vec<String>,
        /// Channel draws per axis value.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long, value_enum, default_value_t = ChannelMode::Fixed)]
        channels: ChannelMode,
        /// Circuit power added in the energy efficiency, watts.
        #[arg(long, default_value_t = DEFAULT_CIRCUIT_POWER)]
        p_circuit: f64,
        /// Solver for the NOMA partial scheme.
        #[arg(long, value_enum, default_value_t = Method::Bss)]
        method: Method,
        #[command(flatten)]
        tol: Tolerances,
        /// Output directory; defaults to $NOMAMEC_OUT, then ./nomamec-out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant checks; exit 1 if any fails.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, method, tol, out } => {
            let file = ConfigFile::load(&config)?;
            let opts = tol.options();
            let draw = file.draw()?;
            let scenario = draw.apply(&file.scenario);
            let report = solve::solve(&draw.channel, &scenario, method, &opts)?;
            print!("{}", solve::render(&report, &draw.order));
            if let Some(dir) = out_dir(out, None) {
                solve::write(&dir, &file, &report, method, &opts)?;
                println!("wrote {}", dir.join("solve.csv").display());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            schemes,
            seeds,
            channels,
            p_circuit,
            method,
            tol,
            out,
        } => {
            let file = ConfigFile::load(&config)?;
            let schemes = schemes
                .iter()
                .map(|s| s.parse::<Scheme>().map_err(|e| CliError::Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = SweepSpec {
                axis,
                values,
                schemes,
                seeds,
                channels,
                p_circuit,
                method,
            };
            let opts = tol.options();
            let rows = sweep::run(&file, &spec, &opts)?;
            let dir = out_dir(out, Some("nomamec-out")).expect("fallback given");
            for name in sweep::write(&dir, &file, &spec, &opts, &rows)? {
                println!("wrote {}", dir.join(name).display());
            }
            Ok(())
        }
        Command::Verify { config, tol } => {
            let file = ConfigFile::load(&config)?;
            let checks = verify::run(&file, &tol.options())?;
            for c in &checks {
                println!("{c}");
            }
            match verify::failures(&checks) {
                0 => Ok(()),
                n => Err(CliError::ChecksFailed(n)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nomamec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
