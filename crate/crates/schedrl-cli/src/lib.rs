//! Experiment harness behind the `schedrl` binary: trains the DDQN agent,
//! compares it against the classical baselines on held-out workloads, and
//! runs the load and task-class sweeps. Every command is deterministic per
//! (configs, seeds) and emits plot-ready CSV files.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use schedrl::agent::{train, AgentConfig, DdqnAgent};
use schedrl::baselines::{decide, BaselinePolicy};
use schedrl::error::{Error, Result};
use schedrl::sim::{EnvConfig, MetricsReport, SchedEnv};
use schedrl::workload::{
    generate, read_workload, LoadLevel, TaskClass, Workload, WorkloadConfig,
};

/// Training workloads are seeded from this base + episode index, keeping
/// them disjoint from the held-out evaluation seeds (small integers).
pub const TRAIN_SEED_BASE: u64 = 10_000;

/// Task count per generated training episode. Training episodes are kept
/// smaller than the evaluation workloads so a full default run stays within
/// a few minutes on one core; the arrival intensity (and therefore queue
/// competition) still matches the Medium evaluation load.
pub const DEFAULT_TRAIN_TASKS: usize = 48;

pub const DEFAULT_EPISODES: usize = 2000;
pub const DEFAULT_SEEDS: &str = "0..9";

/// Where the evaluation workloads come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadSource {
    /// Seeded synthetic workloads from the generator.
    Generated,
    /// A fixed workload CSV used as-is for every seed.
    File(PathBuf),
}

impl FromStr for WorkloadSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "generated" {
            Ok(WorkloadSource::Generated)
        } else {
            Ok(WorkloadSource::File(PathBuf::from(s)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyChoice {
    Fcfs,
    Sjf,
    Rr,
    Ddqn,
}

impl PolicyChoice {
    /// Comparison-table order; also the order rows are emitted in.
    pub fn all() -> [PolicyChoice; 4] {
        [PolicyChoice::Fcfs, PolicyChoice::Sjf, PolicyChoice::Rr, PolicyChoice::Ddqn]
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyChoice::Fcfs => "fcfs",
            PolicyChoice::Sjf => "sjf",
            PolicyChoice::Rr => "rr",
            PolicyChoice::Ddqn => "ddqn",
        }
    }

    fn baseline(self) -> Option<BaselinePolicy> {
        match self {
            PolicyChoice::Fcfs => Some(BaselinePolicy::Fcfs),
            PolicyChoice::Sjf => Some(BaselinePolicy::Sjf),
            PolicyChoice::Rr => Some(BaselinePolicy::round_robin()),
            PolicyChoice::Ddqn => None,
        }
    }
}

impl fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fcfs" => Ok(PolicyChoice::Fcfs),
            "sjf" => Ok(PolicyChoice::Sjf),
            "rr" => Ok(PolicyChoice::Rr),
            "ddqn" => Ok(PolicyChoice::Ddqn),
            other => Err(format!("unknown policy {other:?} (expected fcfs|sjf|rr|ddqn)")),
        }
    }
}

/// Parses a seed list: either an inclusive range `a..b` or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    let bad = |msg: String| Error::Config(format!("seeds {s:?}: {msg}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| bad(format!("{e}")))?;
        let b: u64 = b.trim().parse().map_err(|e| bad(format!("{e}")))?;
        if b < a {
            return Err(bad("range is empty (end < start; the range is inclusive)".into()));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|e| bad(format!("{e}"))))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad("need at least one seed".into()));
    }
    Ok(seeds)
}

fn load_env_config(path: &Option<PathBuf>) -> Result<EnvConfig> {
    match path {
        Some(p) => EnvConfig::from_file(p),
        None => Ok(EnvConfig::default()),
    }
}

fn load_agent_config(path: &Option<PathBuf>) -> Result<AgentConfig> {
    match path {
        Some(p) => AgentConfig::from_file(p),
        None => Ok(AgentConfig::default()),
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

fn medium_workload(seed: u64, n_tasks: Option<usize>) -> Result<Workload> {
    let mut cfg = WorkloadConfig::new(LoadLevel::Medium, seed);
    cfg.n_tasks = n_tasks;
    generate(&cfg)
}

// ---- rollouts ----------------------------------------------------------

/// Runs one episode under a baseline policy or the greedy agent and returns
/// the final metrics plus the number of completed io bursts.
pub fn rollout(
    policy: PolicyChoice,
    agent: Option<&mut DdqnAgent>,
    workload: &Workload,
    env_cfg: &EnvConfig,
) -> Result<(MetricsReport, u64)> {
    let mut env = SchedEnv::new(workload, env_cfg)?;
    match policy.baseline() {
        Some(b) => {
            while !env.is_done() {
                let a = decide(b, &env)?;
                env.advance(a)?;
            }
        }
        None => {
            let agent = agent.ok_or_else(|| {
                Error::State("ddqn rollout requested without a loaded agent".into())
            })?;
            if env.obs_len() != agent.d_in() || env.n_actions() != agent.n_actions() {
                return Err(Error::Config(format!(
                    "checkpoint shape ({}, {}) does not match the environment ({}, {})",
                    agent.d_in(),
                    agent.n_actions(),
                    env.obs_len(),
                    env.n_actions()
                )));
            }
            let mut mask = vec![false; env.n_actions()];
            let mut obs = env.observe();
            while !env.is_done() {
                env.fill_action_mask(&mut mask);
                let a = agent.greedy_action(&obs, &mask)?;
                let out = env.step(a)?;
                obs = out.observation;
            }
        }
    }
    let metrics = env.finalize_metrics()?;
    Ok((metrics, env.io_ops_completed()))
}

// ---- train -------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub env: Option<PathBuf>,
    pub agent: Option<PathBuf>,
    pub workload: WorkloadSource,
    pub episodes: usize,
    pub out: PathBuf,
    /// Checkpoint destination; defaults to `<out>/agent.ckpt`.
    pub checkpoint: Option<PathBuf>,
    /// Tasks per generated training episode; defaults to DEFAULT_TRAIN_TASKS.
    pub n_tasks: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub log: PathBuf,
    pub checkpoint: PathBuf,
    pub episodes: usize,
}

pub const TRAINING_LOG_HEADER: &str =
    "episode,loss_mean,reward_sum,epsilon,mean_completion_ms,throughput_tps,mean_response_ms";

pub fn cmd_train(spec: &TrainSpec) -> Result<TrainOutput> {
    let env_cfg = load_env_config(&spec.env)?;
    let agent_cfg = load_agent_config(&spec.agent)?;
    ensure_out_dir(&spec.out)?;
    let log_path = spec.out.join("training_log.csv");
    let ckpt_path = spec
        .checkpoint
        .clone()
        .unwrap_or_else(|| spec.out.join("agent.ckpt"));
    // Fail on an unwritable output location before spending time training.
    std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;

    let (mut agent, records) = train_agent(
        &env_cfg,
        &agent_cfg,
        &spec.workload,
        spec.episodes,
        spec.n_tasks,
    )?;

    let mut csv = String::from(TRAINING_LOG_HEADER);
    csv.push('\n');
    for r in &records {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.episode,
            r.loss_mean,
            r.reward_sum,
            r.epsilon,
            r.metrics.mean_completion_ms,
            r.metrics.throughput_tps,
            r.metrics.mean_response_ms,
        ));
    }
    write_file(&log_path, &csv)?;
    agent.save(&ckpt_path)?;
    // silence "unused mut" paranoia: save takes &self but train needed &mut
    let _ = &mut agent;
    Ok(TrainOutput {
        log: log_path,
        checkpoint: ckpt_path,
        episodes: records.len(),
    })
}

/// Shared training driver: generated workloads use Medium arrival intensity
/// with `n_tasks` tasks and per-episode seeds `TRAIN_SEED_BASE + episode`;
/// a workload file is replayed identically every episode.
fn train_agent(
    env_cfg: &EnvConfig,
    agent_cfg: &AgentConfig,
    source: &WorkloadSource,
    episodes: usize,
    n_tasks: Option<usize>,
) -> Result<(DdqnAgent, Vec<schedrl::agent::EpisodeRecord>)> {
    let n_tasks = n_tasks.or(Some(DEFAULT_TRAIN_TASKS));
    let fixed = match source {
        WorkloadSource::File(p) => Some(read_workload(p)?),
        WorkloadSource::Generated => None,
    };
    let first = match &fixed {
        Some(w) => SchedEnv::new(w, env_cfg)?,
        None => SchedEnv::new(&medium_workload(TRAIN_SEED_BASE, n_tasks)?, env_cfg)?,
    };
    let mut agent = DdqnAgent::new(first.obs_len(), first.n_actions(), agent_cfg.clone())?;
    let records = train(&mut agent, episodes, |e| match &fixed {
        Some(w) => SchedEnv::new(w, env_cfg),
        None => SchedEnv::new(&medium_workload(TRAIN_SEED_BASE + e as u64, n_tasks)?, env_cfg),
    })?;
    Ok((agent, records))
}

// ---- shared evaluation plumbing -----------------------------------------

/// Loads the checkpoint, or trains one first when `train_first` is set.
#[allow(clippy::too_many_arguments)]
fn resolve_agent(
    env_cfg: &EnvConfig,
    agent_cfg: &AgentConfig,
    checkpoint: &Path,
    train_first: bool,
    episodes: usize,
    n_tasks: Option<usize>,
) -> Result<DdqnAgent> {
    if train_first {
        let (agent, _) = train_agent(
            env_cfg,
            agent_cfg,
            &WorkloadSource::Generated,
            episodes,
            n_tasks,
        )?;
        agent.save(checkpoint)?;
        Ok(agent)
    } else if checkpoint.exists() {
        DdqnAgent::load(checkpoint)
    } else {
        Err(Error::Config(format!(
            "checkpoint {} not found; pass --train to train one first",
            checkpoint.display()
        )))
    }
}

/// Full metrics row minus the leading key columns.
fn metrics_cells(m: &MetricsReport) -> String {
    format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
        m.mean_completion_ms,
        m.throughput_tps,
        m.mean_response_ms,
        m.cpu_util,
        m.mem_util,
        m.io_util,
        m.n_completed,
        m.n_total,
    )
}

/// Column-wise mean of full metrics rows; counts are averaged as floats.
fn mean_metrics_cells(rows: &[MetricsReport]) -> String {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| rows.iter().map(f).sum::<f64>() / n;
    format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        mean(&|m| m.mean_completion_ms),
        mean(&|m| m.throughput_tps),
        mean(&|m| m.mean_response_ms),
        mean(&|m| m.cpu_util),
        mean(&|m| m.mem_util),
        mean(&|m| m.io_util),
        mean(&|m| m.n_completed as f64),
        mean(&|m| m.n_total as f64),
    )
}

// ---- compare -------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompareSpec {
    pub env: Option<PathBuf>,
    pub agent: Option<PathBuf>,
    pub workload: WorkloadSource,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub train_first: bool,
    pub episodes: usize,
    pub n_tasks: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub per_seed: PathBuf,
    pub means: PathBuf,
}

pub const METRICS_HEADER: &str = "policy,load,mean_completion_ms,throughput_tps,\
mean_response_ms,cpu_util,mem_util,io_util,n_completed,n_total";

/// Evaluates FCFS, SJF, RR, and the greedy agent on identical seeded
/// workloads: `compare.csv` holds one row per (policy, seed) and
/// `compare_mean.csv` one mean row per policy, in fixed policy order.
pub fn cmd_compare(spec: &CompareSpec) -> Result<CompareOutput> {
    let env_cfg = load_env_config(&spec.env)?;
    let agent_cfg = load_agent_config(&spec.agent)?;
    ensure_out_dir(&spec.out)?;
    let ckpt = spec
        .checkpoint
        .clone()
        .unwrap_or_else(|| spec.out.join("agent.ckpt"));
    let agent = resolve_agent(
        &env_cfg,
        &agent_cfg,
        &ckpt,
        spec.train_first,
        spec.episodes,
        spec.n_tasks,
    )?;

    let (load_label, fixed) = match &spec.workload {
        WorkloadSource::Generated => ("medium".to_string(), None),
        WorkloadSource::File(p) => ("file".to_string(), Some(read_workload(p)?)),
    };

    // all (policy, seed) episodes are independent; order is restored by
    // collecting in job order
    let jobs: Vec<(PolicyChoice, u64)> = PolicyChoice::all()
        .into_iter()
        .flat_map(|p| spec.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<Result<MetricsReport>> = jobs
        .par_iter()
        .map(|&(policy, seed)| {
            let generated;
            let workload = match &fixed {
                Some(w) => w,
                None => {
                    generated = medium_workload(seed, None)?;
                    &generated
                }
            };
            let mut local_agent = (policy == PolicyChoice::Ddqn).then(|| agent.clone());
            let (m, _) = rollout(policy, local_agent.as_mut(), workload, &env_cfg)?;
            Ok(m)
        })
        .collect();

    let mut per_seed = format!("policy,seed,load,{}\n", &METRICS_HEADER[12..]);
    let mut means = String::from(METRICS_HEADER);
    means.push('\n');
    let mut result_iter = results.into_iter();
    for policy in PolicyChoice::all() {
        let mut rows = Vec::with_capacity(spec.seeds.len());
        for seed in spec.seeds.iter() {
            let m = result_iter.next().expect("one result per job")?;
            per_seed.push_str(&format!(
                "{},{},{},{}\n",
                policy,
                seed,
                load_label,
                metrics_cells(&m)
            ));
            rows.push(m);
        }
        means.push_str(&format!("{},{},{}\n", policy, load_label, mean_metrics_cells(&rows)));
    }

    let per_seed_path = spec.out.join("compare.csv");
    let means_path = spec.out.join("compare_mean.csv");
    write_file(&per_seed_path, &per_seed)?;
    write_file(&means_path, &means)?;
    Ok(CompareOutput {
        per_seed: per_seed_path,
        means: means_path,
    })
}

// ---- sweeps --------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub env: Option<PathBuf>,
    pub agent: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub policy: PolicyChoice,
    pub train_first: bool,
    pub episodes: usize,
    pub n_tasks: Option<usize>,
}

impl SweepSpec {
    /// The agent is only needed (and only trained/loaded) for ddqn sweeps.
    fn agent_for_policy(&self, env_cfg: &EnvConfig, agent_cfg: &AgentConfig) -> Result<Option<DdqnAgent>> {
        if self.policy != PolicyChoice::Ddqn {
            return Ok(None);
        }
        let ckpt = self
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("agent.ckpt"));
        resolve_agent(
            env_cfg,
            agent_cfg,
            &ckpt,
            self.train_first,
            self.episodes,
            self.n_tasks,
        )
        .map(Some)
    }
}

#[derive(Debug, Clone)]
pub struct SweepLoadOutput {
    pub sweep: PathBuf,
    pub scatter: PathBuf,
}

/// Evaluates one policy across Light/Medium/Heavy over all seeds.
/// `sweep_load.csv` holds full metrics keyed by (load, seed);
/// `scatter.csv` holds the (completion, cpu_util) pair table.
pub fn cmd_sweep_load(spec: &SweepSpec) -> Result<SweepLoadOutput> {
    let env_cfg = load_env_config(&spec.env)?;
    let agent_cfg = load_agent_config(&spec.agent)?;
    ensure_out_dir(&spec.out)?;
    let agent = spec.agent_for_policy(&env_cfg, &agent_cfg)?;

    let loads = [LoadLevel::Light, LoadLevel::Medium, LoadLevel::Heavy];
    let jobs: Vec<(LoadLevel, u64)> = loads
        .into_iter()
        .flat_map(|l| spec.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let results: Vec<Result<MetricsReport>> = jobs
        .par_iter()
        .map(|&(load, seed)| {
            let workload = generate(&WorkloadConfig::new(load, seed))?;
            let mut local_agent = agent.clone();
            let (m, _) = rollout(spec.policy, local_agent.as_mut(), &workload, &env_cfg)?;
            Ok(m)
        })
        .collect();

    let mut sweep = format!("policy,load,seed,{}\n", &METRICS_HEADER[12..]);
    let mut scatter = String::from("policy,load,seed,mean_completion_ms,cpu_util\n");
    for ((load, seed), res) in jobs.iter().zip(results) {
        let m = res?;
        sweep.push_str(&format!("{},{},{},{}\n", spec.policy, load, seed, metrics_cells(&m)));
        scatter.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            spec.policy, load, seed, m.mean_completion_ms, m.cpu_util
        ));
    }

    let sweep_path = spec.out.join("sweep_load.csv");
    let scatter_path = spec.out.join("scatter.csv");
    write_file(&sweep_path, &sweep)?;
    write_file(&scatter_path, &scatter)?;
    Ok(SweepLoadOutput {
        sweep: sweep_path,
        scatter: scatter_path,
    })
}

pub const SWEEP_CLASS_HEADER: &str = "policy,class,seed,mean_completion_ms,\
cpu_util,mem_util,io_util,io_ops_completed,n_completed,n_total";

/// Evaluates one policy on three single-class workloads (all-CPU,
/// all-memory, all-IO) at Medium arrival intensity.
pub fn cmd_sweep_class(spec: &SweepSpec) -> Result<PathBuf> {
    let env_cfg = load_env_config(&spec.env)?;
    let agent_cfg = load_agent_config(&spec.agent)?;
    ensure_out_dir(&spec.out)?;
    let agent = spec.agent_for_policy(&env_cfg, &agent_cfg)?;

    let classes = [TaskClass::CpuBound, TaskClass::MemoryBound, TaskClass::IoBound];
    let jobs: Vec<(TaskClass, u64)> = classes
        .into_iter()
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<(MetricsReport, u64)>> = jobs
        .par_iter()
        .map(|&(class, seed)| {
            let workload = generate(&WorkloadConfig::single_class(class, seed))?;
            let mut local_agent = agent.clone();
            rollout(spec.policy, local_agent.as_mut(), &workload, &env_cfg)
        })
        .collect();

    let mut csv = String::from(SWEEP_CLASS_HEADER);
    csv.push('\n');
    for ((class, seed), res) in jobs.iter().zip(results) {
        let (m, io_ops) = res?;
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
            spec.policy,
            class,
            seed,
            m.mean_completion_ms,
            m.cpu_util,
            m.mem_util,
            m.io_util,
            io_ops,
            m.n_completed,
            m.n_total,
        ));
    }

    let path = spec.out.join("sweep_class.csv");
    write_file(&path, &csv)?;
    Ok(path)
}
