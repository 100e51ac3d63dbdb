use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use schedrl::error::Result;
use schedrl_cli::{
    cmd_compare, cmd_sweep_class, cmd_sweep_load, cmd_train, parse_seeds, CompareSpec,
    PolicyChoice, SweepSpec, TrainSpec, WorkloadSource, DEFAULT_EPISODES, DEFAULT_SEEDS,
};

#[derive(Parser)]
#[command(
    name = "schedrl",
    version,
    about = "Scheduling-simulator benchmark harness: DDQN training, baseline comparison, and load/class sweeps"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the DDQN agent and write training_log.csv plus a checkpoint
    Train(TrainCli),
    /// Evaluate FCFS, SJF, RR, and greedy DDQN on identical seeded workloads
    Compare(CompareCli),
    /// Evaluate one policy across light/medium/heavy load levels
    SweepLoad(SweepCli),
    /// Evaluate one policy on single-class (cpu/mem/io) workloads
    SweepClass(SweepCli),
}

#[derive(Args)]
struct CommonOpts {
    /// Environment config file (defaults apply when omitted)
    #[arg(long)]
    env: Option<PathBuf>,
    /// Agent config file (defaults apply when omitted)
    #[arg(long)]
    agent: Option<PathBuf>,
    /// Output directory for CSV files and checkpoints
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint path (default: <out>/agent.ckpt)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Tasks per generated training episode
    #[arg(long)]
    n_tasks: Option<usize>,
    /// Training episode budget
    #[arg(long, default_value_t = DEFAULT_EPISODES)]
    episodes: usize,
}

#[derive(Args)]
struct TrainCli {
    #[command(flatten)]
    common: CommonOpts,
    /// Workload source: "generated" or a workload CSV replayed each episode
    #[arg(long, default_value = "generated")]
    workload: WorkloadSource,
}

#[derive(Args)]
struct CompareCli {
    #[command(flatten)]
    common: CommonOpts,
    /// Workload source: "generated" (medium load) or a fixed workload CSV
    #[arg(long, default_value = "generated")]
    workload: WorkloadSource,
    /// Held-out evaluation seeds: inclusive range "a..b" or comma list
    #[arg(long, default_value = DEFAULT_SEEDS)]
    seeds: String,
    /// Train a fresh agent first instead of loading the checkpoint
    #[arg(long)]
    train: bool,
}

#[derive(Args)]
struct SweepCli {
    #[command(flatten)]
    common: CommonOpts,
    /// Held-out evaluation seeds: inclusive range "a..b" or comma list
    #[arg(long, default_value = DEFAULT_SEEDS)]
    seeds: String,
    /// Policy to sweep
    #[arg(long, default_value = "ddqn")]
    policy: PolicyChoice,
    /// Train a fresh agent first instead of loading the checkpoint
    #[arg(long)]
    train: bool,
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(a) => {
            let spec = TrainSpec {
                env: a.common.env,
                agent: a.common.agent,
                workload: a.workload,
                episodes: a.common.episodes,
                out: a.common.out,
                checkpoint: a.common.checkpoint,
                n_tasks: a.common.n_tasks,
            };
            let out = cmd_train(&spec)?;
            println!("trained {} episodes", out.episodes);
            println!("wrote {}", out.log.display());
            println!("wrote {}", out.checkpoint.display());
        }
        Cmd::Compare(a) => {
            let spec = CompareSpec {
                env: a.common.env,
                agent: a.common.agent,
                workload: a.workload,
                seeds: parse_seeds(&a.seeds)?,
                out: a.common.out,
                checkpoint: a.common.checkpoint,
                train_first: a.train,
                episodes: a.common.episodes,
                n_tasks: a.common.n_tasks,
            };
            let out = cmd_compare(&spec)?;
            println!("wrote {}", out.per_seed.display());
            println!("wrote {}", out.means.display());
        }
        Cmd::SweepLoad(a) => {
            let spec = sweep_spec(a)?;
            let out = cmd_sweep_load(&spec)?;
            println!("wrote {}", out.sweep.display());
            println!("wrote {}", out.scatter.display());
        }
        Cmd::SweepClass(a) => {
            let spec = sweep_spec(a)?;
            let path = cmd_sweep_class(&spec)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn sweep_spec(a: SweepCli) -> Result<SweepSpec> {
    Ok(SweepSpec {
        env: a.common.env,
        agent: a.common.agent,
        seeds: parse_seeds(&a.seeds)?,
        out: a.common.out,
        checkpoint: a.common.checkpoint,
        policy: a.policy,
        train_first: a.train,
        episodes: a.common.episodes,
        n_tasks: a.common.n_tasks,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
