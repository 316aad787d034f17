use std::path::PathBuf;
use std::process::ExitCode;

use bulkvac::Policy;
use bulkvac_cli::commands::{self, CompareArgs, SimulateArgs, SolveArgs, SweepArgs};
use bulkvac_cli::CliError;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bulkvac", version, about = "Steady-state solver and simulator for MAP bulk-service queues with queue-size-dependent vacations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Sv,
    Mv,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::Sv => Policy::Sv,
            PolicyArg::Mv => Policy::Mv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model and write its tables, measures and diagnostics.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the vacation policy in the config.
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Fixed truncation level instead of the adaptive one.
        #[arg(long)]
        trunc: Option<usize>,
    },
    /// Simulate a model and write empirical tables with standard errors.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Events per replication.
        #[arg(long)]
        events: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
    },
    /// Compare solver output with simulation; exits 5 if any |z| > 4.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long)]
        trunc: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        events: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve a grid of arrival scalings and vacation schedules.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, out, policy, trunc } => {
            let sol = commands::solve(&config, &out, &SolveArgs { policy: policy.map(Into::into), trunc })?;
            let m = &sol.measures;
            println!("rho = {:.6}  L_q = {:.6}  L_s = {:.6}  W_q = {:.6}  W_s = {:.6}", sol.diagnostics.rho, m.l_q, m.l_s, m.w_q, m.w_s);
        }
        Command::Simulate { config, out, seed, events, replications, jobs, policy } => {
            let args = SimulateArgs { seed, events, replications, jobs, policy: policy.map(Into::into) };
            let est = commands::simulate(&config, &out, &args)?;
            let l_q = est.measures.l_q;
            println!("L_q = {:.6} +- {:.6}  ({} events)", l_q.mean, l_q.se, est.events);
        }
        Command::Compare { config, policy, trunc, seed, events, replications, jobs, report } => {
            let args = CompareArgs {
                solve: SolveArgs { policy: policy.map(Into::into), trunc },
                seed,
                events,
                replications,
                jobs,
            };
            let rep = commands::compare(&config, &args)?;
            println!("{rep}");
            if let Some(path) = report {
                bulkvac_cli::output::write_json(&path, &rep)?;
            }
            rep.check()?;
        }
        Command::Sweep { config, out, jobs, policy } => {
            let rows = commands::sweep(&config, &out, &SweepArgs { jobs, policy: policy.map(Into::into) })?;
            let flagged = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} points, {flagged} flagged; wrote {}", rows.len(), out.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BULKVAC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
