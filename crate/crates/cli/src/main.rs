//! `maxmin`: batch front end for the maxmin-robust planners.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "maxmin", version, about = "Maxmin-robust policies for tabular MDPs with uncertain rewards")]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for numeric tolerances; defaults match the library.
#[derive(Args, Debug, Clone)]
pub struct TolArgs {
    /// Value accuracy of the exact MDP solver.
    #[arg(long, global = true)]
    pub mdp_tol: Option<f64>,
    /// Objective accuracy of minimizations over the reward polytope.
    #[arg(long, global = true)]
    pub reward_eps: Option<f64>,
    /// Tolerance of the dense simplex solver.
    #[arg(long, global = true)]
    pub lp_tol: Option<f64>,
    /// Iteration cap of one ellipsoid feasibility run.
    #[arg(long, global = true)]
    pub ellipsoid_max_iters: Option<usize>,
    /// Iteration cap of one analytic-center cutting-plane solve.
    #[arg(long, global = true)]
    pub accpm_max_iters: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact maxmin policy via the ellipsoid method.
    SolveExact(commands::SolveExactArgs),
    /// Approximate maxmin mixture via follow-the-perturbed-leader.
    SolveFpl(commands::SolveFplArgs),
    /// Unknown-terrain gridworld experiment.
    Gridworld(commands::GridworldArgs),
    /// Worst-case value of a given policy.
    Eval(commands::EvalArgs),
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let tol = cli.tol.resolve();
    let result = match &cli.command {
        Command::SolveExact(a) => commands::solve_exact(a, &tol, &argv),
        Command::SolveFpl(a) => commands::solve_fpl(a, &tol, &argv),
        Command::Gridworld(a) => commands::gridworld(a, &argv),
        Command::Eval(a) => commands::eval(a, &tol, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl TolArgs {
    fn resolve(&self) -> maxmin_core::config::Tolerances {
        let mut t = maxmin_core::config::Tolerances::default();
        if let Some(v) = self.mdp_tol {
            t.mdp_tol = v;
        }
        if let Some(v) = self.reward_eps {
            t.reward_eps = v;
        }
        if let Some(v) = self.lp_tol {
            t.lp_tol = v;
        }
        if let Some(v) = self.ellipsoid_max_iters {
            t.ellipsoid_max_iters = v;
        }
        if let Some(v) = self.accpm_max_iters {
            t.accpm_max_iters = v;
        }
        t
    }
}
