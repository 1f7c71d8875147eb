mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{MatrixSource, Settings};
use crate::error::{CliError, CliResult};

/// Interior eigenpairs of Anderson matrices.
#[derive(Parser)]
#[command(name = "anderson", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an Anderson matrix in Matrix Market format.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output file (default: a name derived from the parameters in the output directory).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute the eigenpairs nearest the target with one solver.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Print one line per outer iteration.
        #[arg(long)]
        trace: bool,
        /// Write |x|² per site for each pair to eigvec_<k>.tsv in the output directory.
        #[arg(long)]
        dump: bool,
        /// Append a comparison with the dense eigensolver.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Sweep a parameter grid and write a CSV table.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated lattice edges.
        #[arg(long, value_name = "LIST")]
        m_list: Option<String>,
        /// Comma-separated disorder strengths.
        #[arg(long, value_name = "LIST")]
        w_list: Option<String>,
        /// Comma-separated inverse-norm bounds.
        #[arg(long, value_name = "LIST")]
        kappa_list: Option<String>,
        /// Comma-separated drop tolerances; `default` means 1/sqrt(N).
        #[arg(long, value_name = "LIST")]
        epsilon_list: Option<String>,
        /// Comma-separated solvers or `all`.
        #[arg(long, value_name = "LIST")]
        solvers: Option<String>,
        /// Realizations per grid point, with consecutive seeds.
        #[arg(long)]
        repetitions: Option<usize>,
        /// CSV file (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the symmetric matching, its cycles, blocks and scaling.
    Match {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check solver output against the dense eigensolver.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        oracle: OracleArgs,
    },
}

#[derive(Args)]
struct OracleArgs {
    /// Eigenvalue tolerance relative to |A|_1.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Largest order handed to the dense eigensolver.
    #[arg(long, default_value_t = 5000)]
    dense_cap: usize,
}

#[derive(Args)]
struct CommonArgs {
    /// INI file with [matrix], [preconditioner], [solver], [output] and [bench] sections.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any config entry as section.key=value.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Read the matrix from a Matrix Market file instead of generating it.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(short, long)]
    m: Option<usize>,
    #[arg(short, long)]
    w: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// periodic or hard-wall.
    #[arg(long)]
    boundary: Option<String>,
    /// diagonal or off-diagonal.
    #[arg(long)]
    disorder: Option<String>,
    /// Constant diagonal of the off-diagonal model.
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<f64>,
    /// cwi, silanczos or jd (verify also accepts lists and `all`).
    #[arg(short, long)]
    solver: Option<String>,
    #[arg(long)]
    n_wanted: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    target: Option<f64>,
    #[arg(long)]
    max_basis: Option<usize>,
    #[arg(long)]
    restart_size: Option<usize>,
    #[arg(long)]
    outer_tol: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    inner_maxit: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Seed of the solver start vectors.
    #[arg(long)]
    solver_seed: Option<u64>,
    #[arg(long)]
    cwi_factor: Option<usize>,
    #[arg(long)]
    cwi_max_steps: Option<usize>,
    #[arg(long)]
    cwi_tol: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Drop tolerance (default 1/sqrt(N)).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_levels: Option<usize>,
    #[arg(long)]
    small_block_cutoff: Option<usize>,
    #[arg(long)]
    no_matching: bool,
    #[arg(long)]
    no_aggressive_drop: bool,
    /// File with a 0-based elimination order replacing the first-level ordering.
    #[arg(long)]
    ordering: Option<PathBuf>,
    /// Output directory (default: config, then $ANDERSON_OUT_DIR, then `.`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> CliResult<Settings> {
        let mut s = Settings::load(self.config.as_deref())?;
        s.set_opt("matrix", "file", self.matrix.as_ref().map(|p| p.display()))?;
        s.set_opt("matrix", "m", self.m)?;
        s.set_opt("matrix", "w", self.w)?;
        s.set_opt("matrix", "seed", self.seed)?;
        s.set_opt("matrix", "boundary", self.boundary.as_ref())?;
        s.set_opt("matrix", "disorder", self.disorder.as_ref())?;
        s.set_opt("matrix", "shift", self.shift)?;
        s.set_opt("solver", "name", self.solver.as_ref())?;
        s.set_opt("solver", "n_wanted", self.n_wanted)?;
        s.set_opt("solver", "target", self.target)?;
        s.set_opt("solver", "max_basis", self.max_basis)?;
        s.set_opt("solver", "restart_size", self.restart_size)?;
        s.set_opt("solver", "outer_tol", self.outer_tol)?;
        s.set_opt("solver", "inner_tol", self.inner_tol)?;
        s.set_opt("solver", "inner_maxit", self.inner_maxit)?;
        s.set_opt("solver", "max_outer", self.max_outer)?;
        s.set_opt("solver", "seed", self.solver_seed)?;
        s.set_opt("solver", "cwi_factor", self.cwi_factor)?;
        s.set_opt("solver", "cwi_max_steps", self.cwi_max_steps)?;
        s.set_opt("solver", "cwi_tol", self.cwi_tol)?;
        s.set_opt("preconditioner", "kappa", self.kappa)?;
        s.set_opt("preconditioner", "epsilon", self.epsilon)?;
        s.set_opt("preconditioner", "tau", self.tau)?;
        s.set_opt("preconditioner", "max_levels", self.max_levels)?;
        s.set_opt("preconditioner", "small_block_cutoff", self.small_block_cutoff)?;
        s.set_opt("preconditioner", "matching", self.no_matching.then_some(false))?;
        s.set_opt("preconditioner", "aggressive_drop", self.no_aggressive_drop.then_some(false))?;
        s.set_opt("preconditioner", "ordering", self.ordering.as_ref().map(|p| p.display()))?;
        s.set_opt("output", "dir", self.out_dir.as_ref().map(|p| p.display()))?;
        for o in &self.overrides {
            s.set_assignment(o)?;
        }
        Ok(s)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { common, output } => {
            let s = common.settings()?;
            let rc = s.run_config()?;
            let MatrixSource::Anderson(cfg) = rc.source else {
                return Err(CliError::Usage("generate builds Anderson matrices; drop --matrix".into()));
            };
            print!("{}", commands::generate(&cfg, &rc.out_dir, output)?);
            Ok(())
        }
        Command::Solve { common, trace, dump, verify, oracle } => {
            let rc = common.settings()?.run_config()?;
            let opts =
                commands::SolveOptions { trace, dump, verify, verify_tol: oracle.tol, dense_cap: oracle.dense_cap };
            commands::solve(&rc, &opts).map(|_| ())
        }
        Command::Bench { common, m_list, w_list, kappa_list, epsilon_list, solvers, repetitions, output } => {
            let mut s = common.settings()?;
            s.set_opt("bench", "m", m_list)?;
            s.set_opt("bench", "w", w_list)?;
            s.set_opt("bench", "kappa", kappa_list)?;
            s.set_opt("bench", "epsilon", epsilon_list)?;
            s.set_opt("bench", "solvers", solvers)?;
            s.set_opt("bench", "repetitions", repetitions)?;
            let grid = s.bench_grid()?;
            let rc = s.run_config()?;
            let MatrixSource::Anderson(base) = rc.source else {
                return Err(CliError::Usage("bench sweeps Anderson matrices; drop --matrix".into()));
            };
            rc.solver.validate(usize::MAX)?;
            commands::write_bench(&base, &grid, &rc.factor, &rc.solver, output.as_deref())
        }
        Command::Match { common, output } => {
            let rc = common.settings()?.run_config()?;
            commands::write_matching(&rc, output.as_deref())
        }
        Command::Verify { common, oracle } => {
            let rc = common.settings()?.run_config()?;
            commands::verify(&rc, oracle.tol, oracle.dense_cap).map(|_| ())
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("anderson: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
