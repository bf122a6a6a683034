use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gyrolim::commands::{cmd_run, cmd_selftest, cmd_sweep, render_report, CommandError};
use gyrolim::config::{ConfigError, ConfigIssue, ProblemKind, RunConfig};
use gyrolim::harness::{Method, TableKind};
use gyrolim::selftest::SelftestOptions;
use gyrolim_core::SolverKind;

/// Energy-conserving line integral methods for gyrocenter dynamics.
#[derive(Parser)]
#[command(name = "gyrolim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Run {
        #[command(flatten)]
        common: Common,
        /// Keep every n-th step in the trajectory file.
        #[arg(long)]
        sample_every: Option<usize>,
    },
    /// Regenerate one of the result tables.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Table to compute.
        #[arg(long, value_enum)]
        table: Option<TableArg>,
    },
    /// Run the fast invariant checks.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_xi: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Fp,
    Newton,
    Blended,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Energy,
    Convergence,
    Spectral,
    Robustness,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
    /// Polynomial degree (comma-separated list for sweeps).
    #[arg(long, value_delimiter = ',')]
    s: Vec<usize>,
    /// Nodes for the structure matrix.
    #[arg(long)]
    k1: Option<usize>,
    /// Nodes for the gradient (comma-separated list for energy sweeps).
    #[arg(long, value_delimiter = ',')]
    k2: Vec<usize>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn single(name: &str, v: &[usize]) -> Result<Option<usize>, ConfigError> {
    match v {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ => Err(ConfigError {
            issues: vec![ConfigIssue {
                field: name.into(),
                message: "expects a single value".into(),
            }],
        }),
    }
}

impl Common {
    fn load(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        if self.problem.is_some() {
            cfg.problem = self.problem;
        }
        cfg.h = self.h.or(cfg.h);
        cfg.t_end = self.t_end.or(cfg.t_end);
        if let Some(k) = self.solver {
            cfg.solver.kind = Some(match k {
                SolverArg::Fp => SolverKind::FixedPoint,
                SolverArg::Newton => SolverKind::SimplifiedNewton,
                SolverArg::Blended => SolverKind::Blended,
            });
        }
        cfg.solver.tol = self.tol.or(cfg.solver.tol);
        cfg.solver.max_iters = self.max_iters.or(cfg.solver.max_iters);
        if self.out.is_some() {
            cfg.output.dir = self.out.clone();
        }
        Ok(cfg)
    }

    fn run_config(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = self.load()?;
        cfg.method.s = single("s", &self.s)?.or(cfg.method.s);
        cfg.method.k1 = self.k1.or(cfg.method.k1);
        cfg.method.k2 = single("k2", &self.k2)?.or(cfg.method.k2);
        Ok(cfg)
    }

    fn sweep_config(&self, table: Option<TableKind>) -> Result<RunConfig, CommandError> {
        let mut cfg = self.load()?;
        match table.or(cfg.sweep.table) {
            Some(TableKind::Energy) => {
                if !self.s.is_empty() {
                    cfg.sweep.s_list = Some(self.s.clone());
                }
                if !self.k2.is_empty() {
                    cfg.sweep.k_list = Some(self.k2.clone());
                }
            }
            Some(TableKind::Spectral) => {
                if !self.s.is_empty() {
                    cfg.sweep.s_list = Some(self.s.clone());
                }
                cfg.sweep.k = single("k2", &self.k2)?.or(cfg.sweep.k);
            }
            Some(TableKind::Convergence | TableKind::Robustness) if !self.s.is_empty() => {
                let k2 = single("k2", &self.k2)?;
                let methods = self
                    .s
                    .iter()
                    .map(|&s| Method {
                        s,
                        k1: self.k1.unwrap_or(s),
                        k2: k2.unwrap_or(s + 6),
                    })
                    .collect();
                cfg.sweep.methods = Some(methods);
            }
            _ => {}
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Run { common, sample_every } => {
            let mut cfg = common.run_config()?;
            cfg.sample_every = sample_every.or(cfg.sample_every);
            let s = cmd_run(&cfg)?;
            println!(
                "ok: {} steps, max |H - H0| = {:.3e}, {:.2} iterations/step, {:.2}s",
                s.steps, s.max_abs_drift, s.iterations_per_step, s.wall_time
            );
        }
        Command::Sweep { common, table } => {
            let table = table.map(|t| match t {
                TableArg::Energy => TableKind::Energy,
                TableArg::Convergence => TableKind::Convergence,
                TableArg::Spectral => TableKind::Spectral,
                TableArg::Robustness => TableKind::Robustness,
            });
            let cfg = common.sweep_config(table)?;
            let report = cmd_sweep(&cfg, table)?;
            print!("{}", render_report(&report));
        }
        Command::Selftest { corrupt_xi } => {
            cmd_selftest(SelftestOptions { corrupt_xi }, std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
