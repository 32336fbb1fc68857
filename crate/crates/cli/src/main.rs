use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chebspec_core::diagnostics::{
    convergence_study, hamiltonian_drift, long_run_study, spectral_decay, stability_scan, tableau_report,
    trajectory_report, StabilityGrid,
};
use chebspec_core::problems::by_name;
use chebspec_core::{ButcherPath, ButcherTableau, RunReport, StudyOptions};
use clap::{Args, Parser, Subcommand};

/// Spectral Chebyshev-collocation ODE integrator.
#[derive(Debug, Parser)]
#[command(name = "chebspec", version)]
struct Cli {
    /// Worker threads for studies.
    #[arg(long, global = true, env = "CHEBSPEC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the Butcher tableau of CCM(s) with k nodes.
    Tableau {
        #[arg(long)]
        s: usize,
        /// Number of nodes; defaults to s.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Integrate a problem and print the step-by-step solution.
    Solve {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        t_end: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: Output,
    },
    /// One-period errors and observed rates over a grid of s and n (h = T/n).
    Convergence {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, value_delimiter = ',', required = true)]
        s_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Period-end errors over many periods with h = T/n.
    Longrun {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = 50)]
        s: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        periods: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: Output,
    },
    /// First-step coefficient magnitudes and fitted decay bases.
    Decay {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = 30)]
        s: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        h_list: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Hamiltonian error along a trajectory.
    Drift {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        t_end: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Spectral-factor eigenvalues and stability function checks for s = 1..s_max.
    Stability {
        #[arg(long)]
        s_max: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
struct ProblemArg {
    /// kepler, linear[:RE[,IM]] or harmonic[:OMEGA].
    #[arg(long, default_value = "kepler")]
    problem: String,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Apply the Butcher matrix through the cosine transform (default).
    #[arg(long, conflicts_with = "dense")]
    fast: bool,
    /// Apply the dense Butcher matrix.
    #[arg(long)]
    dense: bool,
    /// Relative fixed-point tolerance.
    #[arg(long, default_value_t = 1e-14)]
    fp_tol: f64,
    /// Fixed-point iteration cap per step.
    #[arg(long, default_value_t = 100)]
    fp_max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> StudyOptions {
        StudyOptions {
            fp_tol: self.fp_tol,
            fp_max_iter: self.fp_max_iter,
            path: if self.dense {
                ButcherPath::Dense
            } else {
                ButcherPath::Fast
            },
        }
    }
}

#[derive(Debug, Args)]
struct Output {
    /// Single JSON document instead of CSV.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// CSV with `#` metadata lines (default).
    #[arg(long)]
    csv: bool,
    /// Write to FILE instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn report(&self, report: &RunReport) -> anyhow::Result<()> {
        self.emit(&if self.json {
            report.to_json() + "\n"
        } else {
            report.to_csv()
        })
    }
}

/// Why a command did not succeed.
enum Failure {
    Usage(anyhow::Error),
    Diverged(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let diverged = e
            .downcast_ref::<chebspec_core::Error>()
            .is_some_and(chebspec_core::Error::is_divergence);
        if diverged {
            Failure::Diverged(e)
        } else {
            Failure::Usage(e)
        }
    }
}

impl From<chebspec_core::Error> for Failure {
    fn from(e: chebspec_core::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage(anyhow::anyhow!("CHEBSPEC_THREADS must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Tableau { s, k, output } => {
            let t = ButcherTableau::new(s, k.unwrap_or(s))?;
            if output.json {
                output.emit(&(t.to_json() + "\n"))?;
            } else {
                output.report(&tableau_report(&t))?;
            }
        }
        Command::Solve {
            problem,
            s,
            h,
            t_end,
            solver,
            output,
        } => {
            let p = by_name(&problem.problem)?;
            output.report(&trajectory_report(&p, s, h, t_end, &solver.options())?)?;
        }
        Command::Convergence {
            problem,
            s_list,
            n_list,
            solver,
            output,
        } => {
            let p = by_name(&problem.problem)?;
            let report = convergence_study(&p, &s_list, &n_list, &solver.options())?;
            output.report(&report)?;
            if let Some(cells) = report.meta("failed_cells") {
                return Err(Failure::Diverged(anyhow::anyhow!(
                    "solver failed for s:n cells {cells}"
                )));
            }
        }
        Command::Longrun {
            problem,
            s,
            n,
            periods,
            solver,
            output,
        } => {
            let p = by_name(&problem.problem)?;
            let report = long_run_study(&p, s, n, periods, &solver.options())?;
            output.report(&report)?;
            if let Some(e) = report.meta("error") {
                return Err(Failure::Diverged(anyhow::anyhow!("{e}")));
            }
        }
        Command::Decay {
            problem,
            s,
            h_list,
            solver,
            output,
        } => {
            let p = by_name(&problem.problem)?;
            let report = spectral_decay(&p, s, &h_list, &solver.options())?;
            output.report(&report)?;
            let failed: Vec<&str> = (0..h_list.len())
                .filter_map(|i| report.meta(&format!("error.{i}")))
                .collect();
            if !failed.is_empty() {
                return Err(Failure::Diverged(anyhow::anyhow!("{}", failed.join("; "))));
            }
        }
        Command::Drift {
            problem,
            s,
            h,
            t_end,
            solver,
            output,
        } => {
            let p = by_name(&problem.problem)?;
            output.report(&hamiltonian_drift(&p, s, h, t_end, &solver.options())?)?;
        }
        Command::Stability { s_max, output } => {
            if s_max == 0 {
                return Err(Failure::Usage(anyhow::anyhow!("--s-max must be positive")));
            }
            let s_list: Vec<usize> = (1..=s_max).collect();
            output.report(&stability_scan(&s_list, &StabilityGrid::default())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Diverged(e)) => {
            eprintln!("diverged: {e:#}");
            ExitCode::from(2)
        }
    }
}
