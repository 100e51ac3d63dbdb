//! Double DQN learner: ε-greedy acting over a legality mask, experience
//! replay, decoupled target computation (argmax by the behavior network,
//! evaluation by the target network), periodic hard target sync, and an
//! episodic training loop.

mod replay;

pub use replay::{ReplayBuffer, Transition};

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::nn::{apply_update, huber, Gradients, Mlp, OptimizerState, Scratch};
use crate::sim::{MetricsReport, SchedEnv};

/// Knee of the Huber loss applied to TD errors.
pub const HUBER_DELTA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Discount γ ∈ [0, 1]; 1 is allowed for finite-horizon experiments.
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Hard target sync every this many gradient updates.
    pub target_sync_period: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Environment steps over which ε decays linearly start → end.
    pub eps_decay_steps: u64,
    /// Minimum buffer fill before gradient updates begin.
    pub train_start_size: usize,
    /// Gradient update frequency: one update per this many env steps.
    pub train_every: u64,
    pub seed: u64,
    /// Hidden layer widths; the full net is [d_in, hidden.., n_actions].
    pub hidden: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            lr: 1e-3,
            batch_size: 64,
            buffer_capacity: 50_000,
            target_sync_period: 500,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 20_000,
            train_start_size: 1000,
            train_every: 1,
            seed: 0,
            hidden: vec![128, 64],
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma: must be in [0, 1], got {}", self.gamma)));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr: must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size: must be >= 1".into()));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::Config(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.target_sync_period == 0 {
            return Err(Error::Config("target_sync_period: must be >= 1".into()));
        }
        let eps_ok = (0.0..=1.0).contains(&self.eps_end)
            && (0.0..=1.0).contains(&self.eps_start)
            && self.eps_end <= self.eps_start;
        if !eps_ok {
            return Err(Error::Config(format!(
                "epsilon schedule: need 0 <= eps_end <= eps_start <= 1, got {} -> {}",
                self.eps_start, self.eps_end
            )));
        }
        if self.eps_decay_steps == 0 {
            return Err(Error::Config("eps_decay_steps: must be >= 1".into()));
        }
        if self.train_every == 0 {
            return Err(Error::Config("train_every: must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<AgentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Same `key = value` format as the environment config.
    pub fn parse(text: &str, path: &Path) -> Result<AgentConfig> {
        let mut cfg = AgentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "gamma" => cfg.gamma = parse_num(key, value).map_err(err)?,
                "lr" => cfg.lr = parse_num(key, value).map_err(err)?,
                "batch_size" => cfg.batch_size = parse_num(key, value).map_err(err)?,
                "buffer_capacity" => cfg.buffer_capacity = parse_num(key, value).map_err(err)?,
                "target_sync_period" => cfg.target_sync_period = parse_num(key, value).map_err(err)?,
                "eps_start" => cfg.eps_start = parse_num(key, value).map_err(err)?,
                "eps_end" => cfg.eps_end = parse_num(key, value).map_err(err)?,
                "eps_decay_steps" => cfg.eps_decay_steps = parse_num(key, value).map_err(err)?,
                "train_start_size" => cfg.train_start_size = parse_num(key, value).map_err(err)?,
                "train_every" => cfg.train_every = parse_num(key, value).map_err(err)?,
                "seed" => cfg.seed = parse_num(key, value).map_err(err)?,
                "hidden" => {
                    cfg.hidden = value
                        .split(',')
                        .map(|s| parse_num::<usize>(key, s.trim()))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(err)?;
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
}

/// Linear ε decay over environment steps, clamped at exactly `eps_end`.
pub fn epsilon_schedule(cfg: &AgentConfig, env_steps: u64) -> f64 {
    if env_steps >= cfg.eps_decay_steps {
        return cfg.eps_end;
    }
    let frac = env_steps as f64 / cfg.eps_decay_steps as f64;
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

#[derive(Debug, Clone)]
pub struct DdqnAgent {
    cfg: AgentConfig,
    behavior: Mlp,
    target: Mlp,
    buffer: ReplayBuffer,
    opt: OptimizerState,
    /// Gradient updates taken; drives target syncs.
    update_count: u64,
    /// Environment steps observed; drives the ε schedule.
    env_steps: u64,
    /// Symmetric bound applied to TD targets when set. Not persisted in
    /// checkpoints: the training loop re-derives it from the environment's
    /// reward-rate bound, and evaluation never computes targets.
    value_clip: Option<f64>,
    rng: ChaCha12Rng,
    // reusable work buffers
    scratch: Scratch,
    grads: Gradients,
    upstream: Vec<f64>,
    targets_buf: Vec<f64>,
    batch_buf: Vec<Transition>,
    idx_buf: Vec<usize>,
}

impl DdqnAgent {
    pub fn new(d_in: usize, n_actions: usize, cfg: AgentConfig) -> Result<DdqnAgent> {
        cfg.validate()?;
        let mut sizes = Vec::with_capacity(cfg.hidden.len() + 2);
        sizes.push(d_in);
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(n_actions);
        let behavior = Mlp::init(&sizes, cfg.seed)?;
        let target = behavior.clone();
        let opt = OptimizerState::adam(cfg.lr, &behavior)?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
        let rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x5eed_ac7e_d5e1_u64);
        let scratch = Scratch::for_net(&behavior);
        let grads = Gradients::zeros_like(&behavior);
        Ok(DdqnAgent {
            upstream: vec![0.0; n_actions],
            targets_buf: Vec::new(),
            batch_buf: Vec::new(),
            idx_buf: Vec::new(),
            cfg,
            behavior,
            target,
            buffer,
            opt,
            update_count: 0,
            env_steps: 0,
            value_clip: None,
            rng,
            scratch,
            grads,
        })
    }

    /// Clamps every TD target to [-bound, bound]. The true discounted return
    /// is bounded by (max |reward per tick|) / (1 - γ), so a clip at or above
    /// that level never biases a correct target — it only rejects runaway
    /// bootstrap values, which otherwise self-amplify through the argmax on
    /// long chains of near-identical states. `None` (the default) disables
    /// clipping. Non-finite or non-positive bounds are rejected.
    pub fn set_value_clip(&mut self, bound: Option<f64>) -> Result<()> {
        if let Some(b) = bound {
            if !b.is_finite() || b <= 0.0 {
                return Err(Error::Config(format!("value clip must be finite and positive, got {b}")));
            }
        }
        self.value_clip = bound;
        Ok(())
    }

    pub fn value_clip(&self) -> Option<f64> {
        self.value_clip
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn d_in(&self) -> usize {
        self.behavior.in_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.behavior.out_dim()
    }

    pub fn behavior(&self) -> &Mlp {
        &self.behavior
    }

    /// Mutable access for diagnostics and tests that construct networks with
    /// known parameters. Shapes are fixed at construction, so edits through
    /// this handle cannot invalidate the optimizer or scratch buffers.
    pub fn behavior_mut(&mut self) -> &mut Mlp {
        &mut self.behavior
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut Mlp {
        &mut self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Current ε under the linear schedule.
    pub fn epsilon(&self) -> f64 {
        epsilon_schedule(&self.cfg, self.env_steps)
    }

    pub fn note_env_step(&mut self) {
        self.env_steps += 1;
    }

    /// Behavior-network Q-values for one observation.
    pub fn q_values(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.behavior.forward_scratch(obs, &mut self.scratch)?;
        Ok(self.scratch.output().to_vec())
    }

    /// ε-greedy action over the legal set: a uniformly random legal action
    /// with probability ε, otherwise the greedy choice.
    pub fn select_action(&mut self, obs: &[f64], eps: f64, mask: &[bool]) -> Result<usize> {
        let n_legal = mask.iter().filter(|m| **m).count();
        if n_legal == 0 {
            return Err(Error::State("select_action: no legal action in mask".into()));
        }
        if self.rng.random::<f64>() < eps {
            let pick = self.rng.random_range(0..n_legal);
            let a = mask
                .iter()
                .enumerate()
                .filter(|(_, m)| **m)
                .nth(pick)
                .map(|(i, _)| i)
                .expect("legal count verified above");
            return Ok(a);
        }
        self.greedy_action(obs, mask)
    }

    /// Argmax of behavior-network Q over legal actions; ties break to the
    /// lowest index. Pure in the parameters and inputs.
    pub fn greedy_action(&mut self, obs: &[f64], mask: &[bool]) -> Result<usize> {
        if mask.len() != self.n_actions() {
            return Err(Error::State(format!(
                "greedy_action: mask length {} vs {} actions",
                mask.len(),
                self.n_actions()
            )));
        }
        self.behavior.forward_scratch(obs, &mut self.scratch)?;
        let q = self.scratch.output();
        let mut best: Option<(usize, f64)> = None;
        for (i, (qi, legal)) in q.iter().zip(mask).enumerate() {
            if *legal && best.map(|(_, bq)| *qi > bq).unwrap_or(true) {
                best = Some((i, *qi));
            }
        }
        best.map(|(i, _)| i)
            .ok_or_else(|| Error::State("greedy_action: no legal action in mask".into()))
    }

    fn validate_transition(&self, t: &Transition) -> Result<()> {
        if t.s.len() != self.d_in() || t.s_next.len() != self.d_in() {
            return Err(Error::State(format!(
                "transition: observation lengths {}/{} vs d_in {}",
                t.s.len(),
                t.s_next.len(),
                self.d_in()
            )));
        }
        if t.a >= self.n_actions() {
            return Err(Error::State(format!(
                "transition: action {} out of range (n={})",
                t.a,
                self.n_actions()
            )));
        }
        if !t.r.is_finite() {
            return Err(Error::State(format!("transition: non-finite reward {}", t.r)));
        }
        Ok(())
    }

    pub fn store(&mut self, t: Transition) -> Result<()> {
        self.validate_transition(&t)?;
        self.buffer.push(t);
        Ok(())
    }

    /// Double-DQN targets: y = r̃ for terminals, else
    /// y = r̃ + γ^dt · Q_target(s', argmax_a Q_behavior(s', a)).
    /// The argmax runs over all actions (no mask; illegal actions are no-ops
    /// whose values are themselves learnable). Steps are event-compressed and
    /// span unequal tick counts, so the backup discounts by elapsed time:
    /// γ^dt on the bootstrap, and the reward — an undiscounted integral at a
    /// constant rate over the step — re-weighted to its discounted integral
    /// r̃ = r·(1−γ^dt)/(dt·(1−γ)). Both are identities at dt = 1. Together
    /// they make the target exactly invariant to how many decision points
    /// subdivide a span of simulated time; with either missing, a policy
    /// could shrink a net penalty just by re-slicing the same interval.
    pub fn compute_targets(&mut self, batch: &[Transition]) -> Result<Vec<f64>> {
        self.fill_targets(batch, false)?;
        Ok(self.targets_buf.clone())
    }

    /// Single-estimator targets y = r̃ + γ^dt·max_a Q_target(s', a); kept as a
    /// comparison oracle for the overestimation property and ablations.
    pub fn vanilla_targets(&mut self, batch: &[Transition]) -> Result<Vec<f64>> {
        self.fill_targets(batch, true)?;
        Ok(self.targets_buf.clone())
    }

    fn fill_targets(&mut self, batch: &[Transition], vanilla: bool) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::State("target computation on an empty batch".into()));
        }
        self.targets_buf.clear();
        for t in batch {
            self.validate_transition(t)?;
            let discount = self.cfg.gamma.powi(t.dt.min(i32::MAX as u64) as i32);
            let r = if t.dt > 1 && self.cfg.gamma < 1.0 {
                // Discounted-integral re-weighting (see compute_targets doc):
                // Σ_{i<dt} γ^i·(r/dt) = r·(1−γ^dt)/(dt·(1−γ)).
                t.r * (1.0 - discount) / (t.dt as f64 * (1.0 - self.cfg.gamma))
            } else {
                t.r
            };
            let y = if t.done {
                r
            } else {
                let chosen = if vanilla {
                    self.target.forward_scratch(&t.s_next, &mut self.scratch)?;
                    argmax(self.scratch.output())
                } else {
                    self.behavior.forward_scratch(&t.s_next, &mut self.scratch)?;
                    let a_star = argmax(self.scratch.output());
                    self.target.forward_scratch(&t.s_next, &mut self.scratch)?;
                    a_star
                };
                r + discount * self.scratch.output()[chosen]
            };
            let y = match self.value_clip {
                Some(b) => y.clamp(-b, b),
                None => y,
            };
            self.targets_buf.push(y);
        }
        Ok(())
    }

    /// One gradient step of mean Huber TD loss on `batch` against the
    /// behavior network. Returns the pre-update loss; syncs the target every
    /// `target_sync_period` updates. A non-finite loss changes nothing.
    pub fn td_update(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::State("td_update on an empty batch".into()));
        }
        self.fill_targets(batch, false)?;
        self.grads.zero();
        let inv = 1.0 / batch.len() as f64;
        let mut loss_sum = 0.0;
        for (i, t) in batch.iter().enumerate() {
            let y = self.targets_buf[i];
            self.behavior.forward_scratch(&t.s, &mut self.scratch)?;
            let q_sa = self.scratch.output()[t.a];
            let (loss, dloss) = huber(HUBER_DELTA, q_sa - y);
            loss_sum += loss;
            self.upstream.iter_mut().for_each(|v| *v = 0.0);
            self.upstream[t.a] = dloss * inv;
            self.behavior.backward_into(&mut self.scratch, &self.upstream, &mut self.grads)?;
        }
        let loss_mean = loss_sum * inv;
        if !loss_mean.is_finite() {
            return Err(Error::Numeric(format!("td_update: non-finite loss {loss_mean}")));
        }
        apply_update(&mut self.behavior, &self.grads, &mut self.opt)?;
        self.update_count += 1;
        if self.update_count.is_multiple_of(self.cfg.target_sync_period) {
            self.sync_target();
        }
        Ok(loss_mean)
    }

    /// Hard sync: target parameters become exactly the behavior parameters.
    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.behavior).expect("behavior/target shapes always match");
    }

    /// True when the training cadence calls for a gradient step now.
    pub fn ready_to_train(&self) -> bool {
        self.buffer.len() >= self.cfg.train_start_size.max(self.cfg.batch_size)
            && self.env_steps.is_multiple_of(self.cfg.train_every)
    }

    /// Samples a batch from the replay buffer and applies one td_update.
    pub fn train_step(&mut self) -> Result<f64> {
        let mut idxs = std::mem::take(&mut self.idx_buf);
        let mut batch = std::mem::take(&mut self.batch_buf);
        let result = (|| {
            self.buffer.sample_indices(self.cfg.batch_size, &mut self.rng, &mut idxs)?;
            batch.resize_with(idxs.len(), || Transition {
                s: Vec::new(),
                a: 0,
                r: 0.0,
                s_next: Vec::new(),
                done: false,
                dt: 1,
            });
            for (slot, &i) in batch.iter_mut().zip(&idxs) {
                slot.clone_from(self.buffer.get(i));
            }
            self.td_update(&batch)
        })();
        self.idx_buf = idxs;
        self.batch_buf = batch;
        result
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based episode number.
    pub episode: usize,
    /// Mean TD loss over this episode's gradient updates; 0 if none ran.
    pub loss_mean: f64,
    pub reward_sum: f64,
    /// ε at the end of the episode.
    pub epsilon: f64,
    pub n_updates: u64,
    pub metrics: MetricsReport,
}

fn with_episode(episode_1based: usize, err: Error) -> Error {
    match err {
        Error::State(m) => Error::State(format!("episode {episode_1based}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("episode {episode_1based}: {m}")),
        Error::Config(m) => Error::Config(format!("episode {episode_1based}: {m}")),
        other => other,
    }
}

/// Runs the interaction loop for `episodes` episodes: act ε-greedily, store
/// every transition, and take one gradient step per `train_every` env steps
/// once the buffer holds `train_start_size` transitions. `make_env` is
/// called with the 0-based episode index and must be deterministic for the
/// whole run to be reproducible.
pub fn train(
    agent: &mut DdqnAgent,
    episodes: usize,
    mut make_env: impl FnMut(usize) -> Result<SchedEnv>,
) -> Result<Vec<EpisodeRecord>> {
    let mut records = Vec::with_capacity(episodes);
    let mut mask: Vec<bool> = Vec::new();
    for e in 0..episodes {
        let ep = e + 1;
        let mut env = make_env(e).map_err(|err| with_episode(ep, err))?;
        if env.obs_len() != agent.d_in() || env.n_actions() != agent.n_actions() {
            return Err(Error::Config(format!(
                "episode {ep}: environment shape ({}, {}) does not match agent ({}, {})",
                env.obs_len(),
                env.n_actions(),
                agent.d_in(),
                agent.n_actions()
            )));
        }
        mask.resize(env.n_actions(), false);
        // Targets may never exceed the discounted-return bound implied by the
        // environment's own reward rates; widen (never shrink) across episodes
        // so every workload seen so far stays within the clip.
        if agent.cfg.gamma < 1.0 {
            let bound = env.reward_rate_bound() / (1.0 - agent.cfg.gamma);
            if bound.is_finite() && bound > 0.0 {
                let widened = agent.value_clip().map_or(bound, |b| b.max(bound));
                agent.set_value_clip(Some(widened)).map_err(|err| with_episode(ep, err))?;
            }
        }
        let mut obs = env.observe();
        let mut reward_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut n_updates = 0u64;
        while !env.is_done() {
            env.fill_action_mask(&mut mask);
            let eps = agent.epsilon();
            let a = agent.select_action(&obs, eps, &mask).map_err(|err| with_episode(ep, err))?;
            let t_before = env.clock();
            let out = env.step(a).map_err(|err| with_episode(ep, err))?;
            reward_sum += out.reward;
            // A tick-limit cut-off is not a real terminal state: the workload
            // still has value (and pending penalties) beyond the horizon, so
            // the stored transition keeps bootstrapping through it. Only a
            // fully completed workload anchors the target at y = r.
            let terminal = out.done && !env.is_truncated();
            agent
                .store(Transition {
                    s: std::mem::take(&mut obs),
                    a,
                    r: out.reward,
                    s_next: out.observation.clone(),
                    done: terminal,
                    dt: env.clock() - t_before,
                })
                .map_err(|err| with_episode(ep, err))?;
            obs = out.observation;
            agent.note_env_step();
            if agent.ready_to_train() {
                let loss = agent.train_step().map_err(|err| with_episode(ep, err))?;
                loss_sum += loss;
                n_updates += 1;
            }
        }
        let metrics = env.finalize_metrics().map_err(|err| with_episode(ep, err))?;
        records.push(EpisodeRecord {
            episode: ep,
            loss_mean: if n_updates > 0 { loss_sum / n_updates as f64 } else { 0.0 },
            reward_sum,
            epsilon: agent.epsilon(),
            n_updates,
            metrics,
        });
    }
    Ok(records)
}

// ---- checkpointing ----------------------------------------------------

const AGENT_MAGIC: &[u8; 8] = b"SRLAGT01";

impl DdqnAgent {
    /// Saves config, both networks, optimizer state, counters, and the
    /// action-RNG position. The replay buffer is not persisted: a loaded
    /// agent evaluates identically but refills its buffer when trained
    /// further.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let inner = || -> io::Result<()> {
            let mut w = BufWriter::new(std::fs::File::create(path)?);
            w.write_all(AGENT_MAGIC)?;
            let c = &self.cfg;
            crate::nn::checkpoint::w_f64(&mut w, c.gamma)?;
            crate::nn::checkpoint::w_f64(&mut w, c.lr)?;
            crate::nn::checkpoint::w_u64(&mut w, c.batch_size as u64)?;
            crate::nn::checkpoint::w_u64(&mut w, c.buffer_capacity as u64)?;
            crate::nn::checkpoint::w_u64(&mut w, c.target_sync_period)?;
            crate::nn::checkpoint::w_f64(&mut w, c.eps_start)?;
            crate::nn::checkpoint::w_f64(&mut w, c.eps_end)?;
            crate::nn::checkpoint::w_u64(&mut w, c.eps_decay_steps)?;
            crate::nn::checkpoint::w_u64(&mut w, c.train_start_size as u64)?;
            crate::nn::checkpoint::w_u64(&mut w, c.train_every)?;
            crate::nn::checkpoint::w_u64(&mut w, c.seed)?;
            crate::nn::checkpoint::w_u32(&mut w, c.hidden.len() as u32)?;
            for &h in &c.hidden {
                crate::nn::checkpoint::w_u32(&mut w, h as u32)?;
            }
            crate::nn::checkpoint::w_u64(&mut w, self.update_count)?;
            crate::nn::checkpoint::w_u64(&mut w, self.env_steps)?;
            let pos = self.rng.get_word_pos();
            crate::nn::checkpoint::w_u64(&mut w, pos as u64)?;
            crate::nn::checkpoint::w_u64(&mut w, (pos >> 64) as u64)?;
            crate::nn::checkpoint::write_mlp(&mut w, &self.behavior)?;
            crate::nn::checkpoint::write_mlp(&mut w, &self.target)?;
            crate::nn::checkpoint::write_opt(&mut w, &self.opt)?;
            w.flush()
        };
        inner().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DdqnAgent> {
        let path = path.as_ref();
        let mut r = BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        let inner = |r: &mut BufReader<std::fs::File>| -> io::Result<DdqnAgent> {
            use crate::nn::checkpoint::*;
            let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
            let mut magic = [0u8; 8];
            r.read_exact(&mut magic)?;
            if &magic != AGENT_MAGIC {
                return Err(bad("not an agent checkpoint (bad magic)"));
            }
            let gamma = r_f64(r)?;
            let lr = r_f64(r)?;
            let batch_size = r_u64(r)? as usize;
            let buffer_capacity = r_u64(r)? as usize;
            let target_sync_period = r_u64(r)?;
            let eps_start = r_f64(r)?;
            let eps_end = r_f64(r)?;
            let eps_decay_steps = r_u64(r)?;
            let train_start_size = r_u64(r)? as usize;
            let train_every = r_u64(r)?;
            let seed = r_u64(r)?;
            let n_hidden = r_u32(r)?;
            if n_hidden > 62 {
                return Err(bad("implausible hidden layer count"));
            }
            let mut hidden = Vec::with_capacity(n_hidden as usize);
            for _ in 0..n_hidden {
                hidden.push(r_u32(r)? as usize);
            }
            let cfg = AgentConfig {
                gamma,
                lr,
                batch_size,
                buffer_capacity,
                target_sync_period,
                eps_start,
                eps_end,
                eps_decay_steps,
                train_start_size,
                train_every,
                seed,
                hidden,
            };
            cfg.validate().map_err(|e| bad(&format!("config: {e}")))?;
            let update_count = r_u64(r)?;
            let env_steps = r_u64(r)?;
            let pos_lo = r_u64(r)?;
            let pos_hi = r_u64(r)?;
            let behavior = read_mlp(r)?;
            let target = read_mlp(r)?;
            if behavior.layer_sizes() != target.layer_sizes() {
                return Err(bad("behavior/target layer sizes differ"));
            }
            let expected: Vec<usize> = std::iter::once(behavior.in_dim())
                .chain(cfg.hidden.iter().copied())
                .chain(std::iter::once(behavior.out_dim()))
                .collect();
            if behavior.layer_sizes() != expected.as_slice() {
                return Err(bad("hidden sizes do not match the stored networks"));
            }
            let opt = read_opt(r, &behavior)?;
            let mut rest = [0u8; 1];
            if r.read(&mut rest)? != 0 {
                return Err(bad("trailing bytes after checkpoint"));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x5eed_ac7e_d5e1_u64);
            rng.set_word_pos((pos_lo as u128) | ((pos_hi as u128) << 64));
            let scratch = Scratch::for_net(&behavior);
            let grads = Gradients::zeros_like(&behavior);
            let buffer = ReplayBuffer::new(cfg.buffer_capacity)
                .map_err(|e| bad(&format!("buffer: {e}")))?;
            Ok(DdqnAgent {
                upstream: vec![0.0; behavior.out_dim()],
                targets_buf: Vec::new(),
                batch_buf: Vec::new(),
                idx_buf: Vec::new(),
                cfg,
                behavior,
                target,
                buffer,
                opt,
                update_count,
                env_steps,
                rng,
                scratch,
                grads,
            })
        };
        inner(&mut r).map_err(|e| match e.kind() {
            io::ErrorKind::InvalidData => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("checkpoint: {e}"),
            },
            io::ErrorKind::UnexpectedEof => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "checkpoint: truncated file".into(),
            },
            _ => Error::io(path, e),
        })
    }
}
