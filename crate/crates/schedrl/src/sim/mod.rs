//! Tick-based scheduling environment with event-compressed stepping.
//!
//! One `step` applies a single scheduling action at the current clock, then
//! jumps straight to the next decision point: the earliest of quantum
//! expiry, task completion, IO block/unblock, next arrival, or (when a free
//! core and an admissible ready task remain) the very next tick. The clock
//! therefore strictly increases across steps until the episode is done.
//!
//! Tasks alternate CPU and IO bursts: total cpu_work is split evenly across
//! io_ops+1 CPU bursts (remainder to the earliest bursts) and each IO burst
//! holds one IO channel for io_burst_len ticks. Memory is committed at first
//! dispatch and held until completion, including while preempted or blocked.

mod config;

pub use config::EnvConfig;

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::workload::{TaskClass, TaskSpec, Workload, P_MAX};

/// Fallback mean inter-arrival for norm derivation on degenerate workloads.
const FALLBACK_MEAN_INTERARRIVAL: f64 = 20.0;
/// Fallback mean cpu_work for norm derivation on empty workloads.
const FALLBACK_MEAN_CPU_WORK: f64 = 20.0;

/// Flat action space: `slot * |quanta| + quantum_index` dispatches the ready
/// task in `slot` with that time slice; the final index is the boost/no-op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    k: usize,
    quanta: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Dispatch { slot: usize, quantum: u64 },
    Boost,
}

impl ActionSpace {
    pub fn new(k: usize, quanta: &[u64]) -> Self {
        ActionSpace { k, quanta: quanta.to_vec() }
    }

    pub fn n_actions(&self) -> usize {
        self.k * self.quanta.len() + 1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn quanta(&self) -> &[u64] {
        &self.quanta
    }

    pub fn boost_index(&self) -> usize {
        self.k * self.quanta.len()
    }

    pub fn dispatch_index(&self, slot: usize, quantum_idx: usize) -> usize {
        debug_assert!(slot < self.k && quantum_idx < self.quanta.len());
        slot * self.quanta.len() + quantum_idx
    }

    pub fn decode(&self, action: usize) -> Option<Action> {
        let n = self.n_actions();
        if action >= n {
            return None;
        }
        if action == n - 1 {
            return Some(Action::Boost);
        }
        Some(Action::Dispatch {
            slot: action / self.quanta.len(),
            quantum: self.quanta[action % self.quanta.len()],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LifeState {
    NotArrived,
    Ready,
    Running,
    IoWait,
    InIo,
    Finished,
}

#[derive(Debug, Clone)]
struct TaskBook {
    spec: TaskSpec,
    /// CPU burst sizes, `io_ops + 1` entries summing to cpu_work. Zero-length
    /// bursts (cpu_work < io_ops + 1) only occur in the tail and transition
    /// instantly at dispatch time.
    bursts: Vec<u64>,
    burst_idx: usize,
    burst_rem: u64,
    total_rem: u64,
    eff_priority: u8,
    admitted: bool,
    first_dispatch: Option<u64>,
    finish: Option<u64>,
    /// Tick the task last entered the ready queue.
    enq_time: u64,
    /// Ready-queue ticks accumulated before the current stint.
    waited: u64,
    io_done: u64,
    state: LifeState,
}

impl TaskBook {
    fn new(spec: TaskSpec) -> Self {
        let n_bursts = spec.io_ops as usize + 1;
        let base = spec.cpu_work / n_bursts as u64;
        let extra = (spec.cpu_work % n_bursts as u64) as usize;
        let bursts: Vec<u64> = (0..n_bursts)
            .map(|i| if i < extra { base + 1 } else { base })
            .collect();
        debug_assert_eq!(bursts.iter().sum::<u64>(), spec.cpu_work);
        let burst_rem = bursts[0];
        TaskBook {
            total_rem: spec.cpu_work,
            bursts,
            burst_idx: 0,
            burst_rem,
            eff_priority: spec.priority,
            admitted: false,
            first_dispatch: None,
            finish: None,
            enq_time: 0,
            waited: 0,
            io_done: 0,
            state: LifeState::NotArrived,
            spec,
        }
    }

    fn wait_so_far(&self, clock: u64) -> u64 {
        debug_assert_eq!(self.state, LifeState::Ready);
        self.waited + (clock - self.enq_time)
    }
}

#[derive(Debug, Clone, Copy)]
struct RunSlot {
    task: usize,
    started: u64,
    quantum_end: u64,
    burst_end: u64,
}

impl RunSlot {
    fn run_until(&self) -> u64 {
        self.quantum_end.min(self.burst_end)
    }
}

#[derive(Debug, Clone, Copy)]
struct IoSlot {
    task: usize,
    until: u64,
}

/// Raw reward components before weighting, each credited incrementally as
/// the time-integral it accrued over the step interval so that the per-step
/// credits sum to the episode metrics regardless of how many decision points
/// the interval is split into (a per-step constant would let a policy farm
/// reward by manufacturing extra decision points):
///
/// * `utilization`: busy core-ticks this interval / (cores × max quantum).
///   Whenever any core is busy the next core event is at most one full
///   quantum away, so this stays in [0, 1].
/// * `turnaround`: ticks spent by arrived-but-unfinished tasks this interval
///   / `t_norm` — episode sum equals the total turnaround / `t_norm`.
/// * `response`: ticks spent by arrived-but-never-dispatched tasks this
///   interval / `r_norm` — episode sum equals the total response / `r_norm`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardTerms {
    pub utilization: f64,
    pub turnaround: f64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    Dispatched {
        task: u64,
        quantum: u64,
        /// Remaining total CPU work at the moment of dispatch.
        remaining: u64,
        first: bool,
    },
    Preempted {
        task: u64,
    },
    Completed {
        task: u64,
        finish: u64,
        turnaround: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terms: RewardTerms,
    pub done: bool,
    pub events: Vec<SimEvent>,
}

/// Read-only view of one candidate-window slot, for policies that inspect
/// true bookkeeping (e.g. exact remaining work) rather than the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateView {
    pub slot: usize,
    pub id: u64,
    pub arrival: u64,
    pub remaining_work: u64,
    /// True when a free core exists and memory admits this task.
    pub dispatchable: bool,
}

#[derive(Debug, Clone)]
pub struct SchedEnv {
    cfg: EnvConfig,
    space: ActionSpace,
    books: Vec<TaskBook>,
    ready: VecDeque<usize>,
    cores: Vec<Option<RunSlot>>,
    io_chan: Vec<Option<IoSlot>>,
    io_wait: VecDeque<usize>,
    next_arrival: usize,
    free_mem: u64,
    clock: u64,
    done: bool,
    finished: usize,
    /// Arrived tasks that have never been dispatched (response still accruing).
    awaiting_first: usize,
    work_norm: f64,
    t_norm: f64,
    r_norm: f64,
    max_quantum: f64,
    // time-weighted accumulators for the final report
    busy_core_ticks: u64,
    mem_unit_ticks: u64,
    io_busy_ticks: u64,
    sum_turnaround: u64,
    sum_response: u64,
    completed: usize,
    io_ops_done: u64,
    events_buf: Vec<SimEvent>,
}

impl SchedEnv {
    /// Builds the environment at tick 0 with arrivals at t=0 already queued.
    pub fn new(workload: &Workload, cfg: &EnvConfig) -> Result<SchedEnv> {
        cfg.validate()?;
        for t in workload.tasks() {
            if t.mem_demand > cfg.mem_capacity {
                return Err(Error::Config(format!(
                    "task {}: mem_demand {} exceeds mem_capacity {}",
                    t.id, t.mem_demand, cfg.mem_capacity
                )));
            }
        }

        let mean_cpu = workload.mean_cpu_work().unwrap_or(FALLBACK_MEAN_CPU_WORK);
        let mean_ia = workload
            .mean_interarrival()
            .filter(|g| *g > 0.0)
            .unwrap_or(FALLBACK_MEAN_INTERARRIVAL);
        let n = workload.tasks().len() as f64;

        let mut env = SchedEnv {
            space: ActionSpace::new(cfg.k, &cfg.quanta),
            books: workload.tasks().iter().cloned().map(TaskBook::new).collect(),
            ready: VecDeque::new(),
            cores: vec![None; cfg.cores],
            io_chan: vec![None; cfg.io_channels],
            io_wait: VecDeque::new(),
            next_arrival: 0,
            free_mem: cfg.mem_capacity,
            clock: 0,
            done: false,
            finished: 0,
            awaiting_first: 0,
            work_norm: cfg.work_norm.unwrap_or(4.0 * mean_cpu),
            // Default scales chosen so the episode-summed turnaround and
            // response terms land near O(1): total turnaround is roughly
            // n_tasks x mean turnaround (itself a few multiples of the mean
            // service time), total response roughly n_tasks x a few
            // inter-arrival gaps.
            t_norm: cfg.t_norm.unwrap_or((n * mean_cpu).max(1.0)),
            r_norm: cfg.r_norm.unwrap_or((n * 2.0 * mean_ia).max(1.0)),
            max_quantum: cfg.quanta.iter().copied().max().unwrap_or(1) as f64,
            busy_core_ticks: 0,
            mem_unit_ticks: 0,
            io_busy_ticks: 0,
            sum_turnaround: 0,
            sum_response: 0,
            completed: 0,
            io_ops_done: 0,
            events_buf: Vec::new(),
            cfg: cfg.clone(),
        };
        env.admit_arrivals(0);
        env.check_invariants();
        Ok(env)
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn n_actions(&self) -> usize {
        self.space.n_actions()
    }

    pub fn obs_len(&self) -> usize {
        self.space.k() * 8 + 5
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// True when the episode ended by hitting the tick limit with tasks still
    /// unfinished, as opposed to running the whole workload to completion.
    /// Value bootstrapping should treat such a cut-off as a continuing state.
    pub fn is_truncated(&self) -> bool {
        self.done && self.finished < self.books.len()
    }

    /// Upper bound on |reward| per simulated tick, from the weighted term
    /// bounds: utilization rate is at most 1/max_quantum, and the turnaround
    /// and response rates are at most n/t_norm and n/r_norm (every task alive
    /// or undispatched at once). Dividing by (1 − γ) turns this into a bound
    /// on any discounted return, which value learning can use to reject
    /// runaway bootstrap targets.
    pub fn reward_rate_bound(&self) -> f64 {
        let n = self.books.len() as f64;
        self.cfg.w_util.abs() / self.max_quantum
            + self.cfg.w_turnaround.abs() * n / self.t_norm
            + self.cfg.w_response.abs() * n / self.r_norm
    }

    pub fn io_ops_completed(&self) -> u64 {
        self.io_ops_done
    }

    /// Applies one action and advances to the next decision point, returning
    /// the full outcome including the fresh observation.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let (reward, terms, done) = self.step_inner(action)?;
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            terms,
            done,
            events: std::mem::take(&mut self.events_buf),
        })
    }

    /// `step` without building the observation; for policies that never read
    /// it. Returns (reward, done).
    pub fn advance(&mut self, action: usize) -> Result<(f64, bool)> {
        let (reward, _, done) = self.step_inner(action)?;
        Ok((reward, done))
    }

    /// Events recorded by the most recent `advance` call.
    pub fn last_events(&self) -> &[SimEvent] {
        &self.events_buf
    }

    fn step_inner(&mut self, action: usize) -> Result<(f64, RewardTerms, bool)> {
        if self.done {
            return Err(Error::State("step called on a finished episode".into()));
        }
        let decoded = self
            .space
            .decode(action)
            .ok_or_else(|| Error::State(format!("action {action} out of range (n={})", self.n_actions())))?;

        self.events_buf.clear();
        let t0 = self.clock;

        match decoded {
            Action::Dispatch { slot, quantum } => self.try_dispatch(slot, quantum),
            Action::Boost => self.apply_boost(),
        }

        // Interval accounting uses the post-action state: core occupancy,
        // alive-task and undispatched-task counts all stay constant until
        // the events at the far end of the interval.
        let busy_cores = self.cores.iter().filter(|c| c.is_some()).count();
        let busy_io = self.io_chan.iter().filter(|c| c.is_some()).count();
        let used_mem = self.cfg.mem_capacity - self.free_mem;
        let alive = self.next_arrival - self.finished;
        let undispatched = self.awaiting_first;

        let mut terms = RewardTerms::default();
        match self.next_event_time() {
            None => {
                debug_assert_eq!(self.finished, self.books.len(), "stalled with unfinished tasks");
                self.done = true;
            }
            Some(t1) => {
                let capped = t1.min(self.cfg.tick_limit);
                let dt = capped - t0;
                if dt > 0 {
                    self.busy_core_ticks += busy_cores as u64 * dt;
                    self.io_busy_ticks += busy_io as u64 * dt;
                    self.mem_unit_ticks += used_mem * dt;
                    let dt = dt as f64;
                    terms.utilization =
                        busy_cores as f64 * dt / (self.cores.len() as f64 * self.max_quantum);
                    terms.turnaround = alive as f64 * dt / self.t_norm;
                    terms.response = undispatched as f64 * dt / self.r_norm;
                    // A busy core guarantees a core event within one quantum.
                    debug_assert!(terms.utilization <= 1.0 + 1e-12);
                }
                self.clock = capped;
                if t1 <= self.cfg.tick_limit {
                    self.process_events_at(t1);
                }
                if self.finished == self.books.len() || self.clock >= self.cfg.tick_limit {
                    self.done = true;
                }
            }
        }

        self.check_invariants();
        let reward = self.cfg.w_util * terms.utilization - self.cfg.w_turnaround * terms.turnaround
            + self.cfg.w_response * terms.response;
        Ok((reward, terms, self.done))
    }

    fn try_dispatch(&mut self, slot: usize, quantum: u64) {
        // Illegal dispatches (empty slot, no core, memory refusal) are no-ops;
        // the clock still advances afterwards.
        if slot >= self.space.k() || slot >= self.ready.len() {
            return;
        }
        let Some(core) = self.cores.iter().position(|c| c.is_none()) else {
            return;
        };
        let ti = self.ready[slot];
        if !self.books[ti].admitted && self.books[ti].spec.mem_demand > self.free_mem {
            return;
        }

        let now = self.clock;
        self.ready.remove(slot);
        let book = &mut self.books[ti];
        debug_assert_eq!(book.state, LifeState::Ready);
        book.waited += now - book.enq_time;
        if !book.admitted {
            book.admitted = true;
            self.free_mem -= book.spec.mem_demand;
        }
        let first = book.first_dispatch.is_none();
        if first {
            book.first_dispatch = Some(now);
            self.awaiting_first -= 1;
        }
        self.events_buf.push(SimEvent::Dispatched {
            task: book.spec.id,
            quantum,
            remaining: book.total_rem,
            first,
        });

        if book.burst_rem == 0 {
            // Tail zero-length burst: the task transitions without using CPU.
            if book.burst_idx + 1 == book.bursts.len() {
                self.complete(ti, now);
            } else {
                let b = &mut self.books[ti];
                b.burst_idx += 1;
                b.burst_rem = b.bursts[b.burst_idx];
                self.start_io(ti, now);
            }
            return;
        }

        let book = &mut self.books[ti];
        book.state = LifeState::Running;
        self.cores[core] = Some(RunSlot {
            task: ti,
            started: now,
            quantum_end: now + quantum,
            burst_end: now + book.burst_rem,
        });
    }

    /// Bumps the effective priority of the longest-waiting ready task and
    /// moves it one position toward the queue head. No-op on an empty queue.
    fn apply_boost(&mut self) {
        let clock = self.clock;
        let mut best: Option<(usize, u64)> = None;
        for (pos, &ti) in self.ready.iter().enumerate() {
            let book = &self.books[ti];
            let wait = book.wait_so_far(clock);
            let better = match best {
                None => true,
                Some((bpos, bwait)) => {
                    let bbook = &self.books[self.ready[bpos]];
                    wait > bwait
                        || (wait == bwait
                            && (book.spec.arrival, book.spec.id) < (bbook.spec.arrival, bbook.spec.id))
                }
            };
            if better {
                best = Some((pos, wait));
            }
        }
        if let Some((pos, _)) = best {
            let ti = self.ready[pos];
            let book = &mut self.books[ti];
            book.eff_priority = (book.eff_priority + 1).min(P_MAX);
            if pos > 0 {
                self.ready.swap(pos, pos - 1);
            }
        }
    }

    fn start_io(&mut self, ti: usize, now: u64) {
        let len = self.books[ti].spec.io_burst_len;
        debug_assert!(len >= 1);
        if let Some(chan) = self.io_chan.iter().position(|c| c.is_none()) {
            self.io_chan[chan] = Some(IoSlot { task: ti, until: now + len });
            self.books[ti].state = LifeState::InIo;
        } else {
            self.io_wait.push_back(ti);
            self.books[ti].state = LifeState::IoWait;
        }
    }

    fn complete(&mut self, ti: usize, now: u64) {
        let book = &mut self.books[ti];
        debug_assert_eq!(book.total_rem, 0);
        debug_assert!(book.admitted);
        book.state = LifeState::Finished;
        book.finish = Some(now);
        self.free_mem += book.spec.mem_demand;
        self.finished += 1;
        self.completed += 1;
        let turnaround = now - book.spec.arrival;
        self.sum_turnaround += turnaround;
        self.sum_response += book.first_dispatch.expect("completed without dispatch") - book.spec.arrival;
        self.events_buf.push(SimEvent::Completed {
            task: book.spec.id,
            finish: now,
            turnaround,
        });
    }

    fn enqueue_ready(&mut self, ti: usize, now: u64) {
        let book = &mut self.books[ti];
        book.state = LifeState::Ready;
        book.enq_time = now;
        self.ready.push_back(ti);
    }

    fn admit_arrivals(&mut self, now: u64) {
        while self.next_arrival < self.books.len() && self.books[self.next_arrival].spec.arrival <= now {
            debug_assert_eq!(self.books[self.next_arrival].spec.arrival, now);
            let ti = self.next_arrival;
            self.next_arrival += 1;
            self.awaiting_first += 1;
            self.enqueue_ready(ti, now);
        }
    }

    /// Earliest upcoming decision point, or None when nothing can ever
    /// happen again (all tasks finished).
    fn next_event_time(&self) -> Option<u64> {
        let mut t: Option<u64> = None;
        let mut fold = |cand: u64| t = Some(t.map_or(cand, |v| v.min(cand)));

        for slot in self.cores.iter().flatten() {
            fold(slot.run_until());
        }
        for slot in self.io_chan.iter().flatten() {
            fold(slot.until);
        }
        if self.next_arrival < self.books.len() {
            fold(self.books[self.next_arrival].spec.arrival);
        }
        if self.dispatch_pending() {
            fold(self.clock + 1);
        }
        t
    }

    /// True when a free core exists and some ready task could be admitted.
    /// Tasks beyond the candidate window count too: the clock must keep
    /// moving even when the window is memory-blocked, so such episodes end
    /// at the tick limit instead of stalling.
    fn dispatch_pending(&self) -> bool {
        if self.cores.iter().all(|c| c.is_some()) {
            return false;
        }
        self.ready
            .iter()
            .any(|&ti| self.books[ti].admitted || self.books[ti].spec.mem_demand <= self.free_mem)
    }

    /// Same-tick enqueue order: arrivals first, then tasks returning from
    /// IO, then preempted tasks — a preempted task goes behind work that
    /// became ready at the same instant, the usual round-robin convention.
    fn process_events_at(&mut self, t1: u64) {
        self.admit_arrivals(t1);

        // IO completions free their channels and re-enter the ready queue.
        for c in 0..self.io_chan.len() {
            let fires = self.io_chan[c].map(|s| s.until == t1).unwrap_or(false);
            if !fires {
                continue;
            }
            let slot = self.io_chan[c].take().unwrap();
            self.books[slot.task].io_done += 1;
            self.io_ops_done += 1;
            self.enqueue_ready(slot.task, t1);
        }

        // Freed channels go to earlier IO waiters before any task blocking
        // at this same tick (FIFO fairness).
        while !self.io_wait.is_empty() {
            let Some(chan) = self.io_chan.iter().position(|c| c.is_none()) else {
                break;
            };
            let ti = self.io_wait.pop_front().unwrap();
            let len = self.books[ti].spec.io_burst_len;
            self.io_chan[chan] = Some(IoSlot { task: ti, until: t1 + len });
            self.books[ti].state = LifeState::InIo;
        }

        // Core events, in core order: a task leaves its core by completing,
        // blocking on IO, or being preempted at quantum expiry.
        for c in 0..self.cores.len() {
            let fires = self.cores[c].map(|s| s.run_until() == t1).unwrap_or(false);
            if !fires {
                continue;
            }
            let slot = self.cores[c].take().unwrap();
            let ti = slot.task;
            let consumed = t1 - slot.started;
            let book = &mut self.books[ti];
            debug_assert!(consumed >= 1 && consumed <= book.burst_rem);
            book.burst_rem -= consumed;
            book.total_rem -= consumed;

            if book.burst_rem == 0 {
                if book.burst_idx + 1 == book.bursts.len() {
                    self.complete(ti, t1);
                } else {
                    book.burst_idx += 1;
                    book.burst_rem = book.bursts[book.burst_idx];
                    self.start_io(ti, t1);
                }
            } else {
                debug_assert_eq!(slot.quantum_end, t1);
                self.events_buf.push(SimEvent::Preempted { task: book.spec.id });
                self.enqueue_ready(ti, t1);
            }
        }
    }

    /// Flat observation: 8 features per candidate slot, then 5 globals.
    /// Everything is clipped to [0, 1].
    pub fn observe(&self) -> Vec<f64> {
        let k = self.space.k();
        let mut obs = vec![0.0; self.obs_len()];
        let cap = self.cfg.mem_capacity as f64;
        for slot in 0..k.min(self.ready.len()) {
            let book = &self.books[self.ready[slot]];
            let f = &mut obs[slot * 8..slot * 8 + 8];
            f[0] = 1.0;
            f[1] = clip(book.total_rem as f64 / self.work_norm);
            f[2] = if cap > 0.0 { clip(book.spec.mem_demand as f64 / cap) } else { 0.0 };
            f[3] = clip((book.spec.io_ops - book.io_done) as f64 / self.cfg.io_norm);
            f[4] = clip(book.eff_priority as f64 / P_MAX as f64);
            f[5] = clip(book.wait_so_far(self.clock) as f64 / self.cfg.wait_norm);
            f[6] = if book.spec.class == TaskClass::CpuBound { 1.0 } else { 0.0 };
            f[7] = if book.spec.class == TaskClass::IoBound { 1.0 } else { 0.0 };
        }
        let busy_cores = self.cores.iter().filter(|c| c.is_some()).count();
        let busy_io = self.io_chan.iter().filter(|c| c.is_some()).count();
        let g = &mut obs[k * 8..];
        g[0] = clip(self.ready.len() as f64 / self.cfg.qlen_norm);
        g[1] = clip(busy_cores as f64 / self.cores.len() as f64);
        g[2] = if cap > 0.0 {
            clip((self.cfg.mem_capacity - self.free_mem) as f64 / cap)
        } else {
            0.0
        };
        g[3] = if self.io_chan.is_empty() {
            0.0
        } else {
            clip(busy_io as f64 / self.io_chan.len() as f64)
        };
        g[4] = clip((self.ready.len() + busy_cores) as f64 / self.cfg.load_norm);
        obs
    }

    /// Per-action legality. Dispatch actions need an occupied slot, a free
    /// core, and admissible memory; the boost/no-op is always legal.
    pub fn legal_action_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_actions()];
        self.fill_action_mask(&mut mask);
        mask
    }

    pub fn fill_action_mask(&self, mask: &mut [bool]) {
        debug_assert_eq!(mask.len(), self.n_actions());
        mask.iter_mut().for_each(|m| *m = false);
        let nq = self.space.quanta().len();
        let free_core = self.cores.iter().any(|c| c.is_none());
        if free_core {
            for slot in 0..self.space.k().min(self.ready.len()) {
                let book = &self.books[self.ready[slot]];
                if book.admitted || book.spec.mem_demand <= self.free_mem {
                    for qi in 0..nq {
                        mask[slot * nq + qi] = true;
                    }
                }
            }
        }
        mask[self.space.boost_index()] = true;
    }

    pub fn has_free_core(&self) -> bool {
        self.cores.iter().any(|c| c.is_none())
    }

    /// Candidate-window slot view for baseline policies.
    pub fn candidate(&self, slot: usize) -> Option<CandidateView> {
        if slot >= self.space.k() || slot >= self.ready.len() {
            return None;
        }
        let book = &self.books[self.ready[slot]];
        let free_core = self.cores.iter().any(|c| c.is_none());
        Some(CandidateView {
            slot,
            id: book.spec.id,
            arrival: book.spec.arrival,
            remaining_work: book.total_rem,
            dispatchable: free_core && (book.admitted || book.spec.mem_demand <= self.free_mem),
        })
    }

    /// Final report; only valid once the episode is done. Completion and
    /// response means cover completed tasks only.
    pub fn finalize_metrics(&self) -> Result<MetricsReport> {
        if !self.done {
            return Err(Error::State("finalize_metrics before the episode is done".into()));
        }
        let elapsed = self.clock as f64;
        let n = self.completed;
        let (mean_completion, mean_response) = if n > 0 {
            (self.sum_turnaround as f64 / n as f64, self.sum_response as f64 / n as f64)
        } else {
            (0.0, 0.0)
        };
        let (cpu_util, mem_util, io_util, throughput) = if elapsed > 0.0 {
            (
                self.busy_core_ticks as f64 / (self.cores.len() as f64 * elapsed),
                if self.cfg.mem_capacity > 0 {
                    self.mem_unit_ticks as f64 / (self.cfg.mem_capacity as f64 * elapsed)
                } else {
                    0.0
                },
                if self.io_chan.is_empty() {
                    0.0
                } else {
                    self.io_busy_ticks as f64 / (self.io_chan.len() as f64 * elapsed)
                },
                n as f64 * 1000.0 / elapsed,
            )
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        Ok(MetricsReport {
            mean_completion_ms: mean_completion,
            throughput_tps: throughput,
            mean_response_ms: mean_response,
            cpu_util,
            mem_util,
            io_util,
            n_completed: n,
            n_total: self.books.len(),
        })
    }

    /// Completion time of each task by id, None while unfinished.
    pub fn finish_times(&self) -> Vec<(u64, Option<u64>)> {
        self.books.iter().map(|b| (b.spec.id, b.finish)).collect()
    }

    /// First-dispatch time of each task by id, None if never dispatched.
    pub fn dispatch_times(&self) -> Vec<(u64, Option<u64>)> {
        self.books.iter().map(|b| (b.spec.id, b.first_dispatch)).collect()
    }

    #[cfg(debug_assertions)]
    fn check_invariants(&self) {
        let n = self.books.len();
        let mut seen = vec![false; n];
        let mut mark = |ti: usize, expect: LifeState, books: &[TaskBook]| {
            assert!(!seen[ti], "task {ti} present in two lifecycle sets");
            seen[ti] = true;
            assert_eq!(books[ti].state, expect, "task {ti} in wrong container");
        };
        for &ti in &self.ready {
            mark(ti, LifeState::Ready, &self.books);
        }
        for slot in self.cores.iter().flatten() {
            mark(slot.task, LifeState::Running, &self.books);
        }
        for slot in self.io_chan.iter().flatten() {
            mark(slot.task, LifeState::InIo, &self.books);
        }
        for &ti in &self.io_wait {
            mark(ti, LifeState::IoWait, &self.books);
        }
        let mut admitted_mem = 0u64;
        let mut finished = 0usize;
        let mut awaiting_first = 0usize;
        for (ti, book) in self.books.iter().enumerate() {
            match book.state {
                LifeState::NotArrived => {
                    assert!(ti >= self.next_arrival, "task {ti} skipped by arrival pointer");
                    assert!(!seen[ti]);
                }
                LifeState::Finished => {
                    finished += 1;
                    assert!(!seen[ti]);
                    assert_eq!(book.total_rem, 0);
                }
                _ => assert!(seen[ti], "task {ti} in state {:?} but in no container", book.state),
            }
            if book.admitted && book.state != LifeState::Finished {
                admitted_mem += book.spec.mem_demand;
            }
            if ti < self.next_arrival && book.first_dispatch.is_none() {
                awaiting_first += 1;
            }
        }
        assert_eq!(finished, self.finished);
        assert_eq!(awaiting_first, self.awaiting_first, "response accrual counter drifted");
        assert_eq!(
            admitted_mem + self.free_mem,
            self.cfg.mem_capacity,
            "memory conservation violated"
        );
        assert!(self.clock <= self.cfg.tick_limit);
    }

    #[cfg(not(debug_assertions))]
    fn check_invariants(&self) {}
}

fn clip(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Aggregate episode metrics. Ticks are milliseconds, so throughput in
/// tasks/second is completions per 1000 ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mean_completion_ms: f64,
    pub throughput_tps: f64,
    pub mean_response_ms: f64,
    pub cpu_util: f64,
    pub mem_util: f64,
    pub io_util: f64,
    pub n_completed: usize,
    pub n_total: usize,
}
