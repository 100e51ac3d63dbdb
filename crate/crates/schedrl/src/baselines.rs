//! Classical scheduling policies expressed over the simulator's action
//! interface: first-come-first-serve, shortest-job-first (non-preemptive,
//! using true remaining work), and round robin.
//!
//! All three choose among dispatchable candidate-window slots only; when no
//! dispatch is legal they fall back to the no-op action and let the clock
//! advance. Ties break on (primary key, arrival, id).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::{EnvConfig, MetricsReport, SchedEnv};
use crate::workload::Workload;

pub const RR_DEFAULT_QUANTUM: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselinePolicy {
    Fcfs,
    Sjf,
    RoundRobin { quantum: u64 },
}

impl BaselinePolicy {
    pub fn round_robin() -> Self {
        BaselinePolicy::RoundRobin { quantum: RR_DEFAULT_QUANTUM }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselinePolicy::Fcfs => "fcfs",
            BaselinePolicy::Sjf => "sjf",
            BaselinePolicy::RoundRobin { .. } => "rr",
        }
    }

    /// The comparison set in its canonical reporting order.
    pub fn all() -> [BaselinePolicy; 3] {
        [BaselinePolicy::Fcfs, BaselinePolicy::Sjf, BaselinePolicy::round_robin()]
    }
}

impl fmt::Display for BaselinePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselinePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcfs" => Ok(BaselinePolicy::Fcfs),
            "sjf" => Ok(BaselinePolicy::Sjf),
            "rr" => Ok(BaselinePolicy::round_robin()),
            other => Err(Error::Config(format!("unknown baseline policy '{other}'"))),
        }
    }
}

/// Picks the next action for `policy` in the current state. Total over valid
/// states; the only error is a round-robin quantum outside the action
/// space's quanta set.
pub fn decide(policy: BaselinePolicy, env: &SchedEnv) -> Result<usize> {
    let space = env.action_space();
    let max_q = space.quanta().len() - 1;
    match policy {
        BaselinePolicy::Fcfs => Ok(pick_min(env, |_, a, id| (0, a, id))
            .map(|slot| space.dispatch_index(slot, max_q))
            .unwrap_or_else(|| space.boost_index())),
        BaselinePolicy::Sjf => Ok(pick_min(env, |r, a, id| (r, a, id))
            .map(|slot| space.dispatch_index(slot, max_q))
            .unwrap_or_else(|| space.boost_index())),
        BaselinePolicy::RoundRobin { quantum } => {
            let qi = space
                .quanta()
                .iter()
                .position(|&q| q == quantum)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "round-robin quantum {quantum} is not in the quanta set {:?}",
                        space.quanta()
                    ))
                })?;
            for slot in 0..space.k() {
                match env.candidate(slot) {
                    None => break,
                    Some(c) if c.dispatchable => return Ok(space.dispatch_index(slot, qi)),
                    Some(_) => {}
                }
            }
            Ok(space.boost_index())
        }
    }
}

fn pick_min(
    env: &SchedEnv,
    key: impl Fn(u64, u64, u64) -> (u64, u64, u64),
) -> Option<usize> {
    let mut best: Option<((u64, u64, u64), usize)> = None;
    for slot in 0..env.action_space().k() {
        let Some(c) = env.candidate(slot) else { break };
        if !c.dispatchable {
            continue;
        }
        let k = key(c.remaining_work, c.arrival, c.id);
        if best.as_ref().map(|(bk, _)| k < *bk).unwrap_or(true) {
            best = Some((k, slot));
        }
    }
    best.map(|(_, slot)| slot)
}

/// Runs `policy` on `workload` to completion and returns the final report.
pub fn run_policy(
    policy: BaselinePolicy,
    workload: &Workload,
    cfg: &EnvConfig,
) -> Result<MetricsReport> {
    let mut env = SchedEnv::new(workload, cfg)?;
    while !env.is_done() {
        let action = decide(policy, &env)?;
        env.advance(action)?;
    }
    env.finalize_metrics()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimEvent;
    use crate::workload::{TaskClass, TaskSpec, Workload};

    fn task(id: u64, arrival: u64, cpu_work: u64) -> TaskSpec {
        TaskSpec {
            id,
            class: TaskClass::CpuBound,
            arrival,
            cpu_work,
            mem_demand: 0,
            io_ops: 0,
            io_burst_len: 0,
            priority: 0,
        }
    }

    /// A(arr 0, work 5), B(arr 1, work 3), C(arr 2, work 1) on one core.
    fn abc() -> Workload {
        Workload::new(vec![task(0, 0, 5), task(1, 1, 3), task(2, 2, 1)]).unwrap()
    }

    fn one_core() -> EnvConfig {
        EnvConfig { cores: 1, ..EnvConfig::default() }
    }

    fn finish_of(env: &SchedEnv, id: u64) -> u64 {
        env.finish_times()
            .into_iter()
            .find(|(i, _)| *i == id)
            .unwrap()
            .1
            .unwrap()
    }

    fn run_traced(policy: BaselinePolicy, w: &Workload, cfg: &EnvConfig) -> SchedEnv {
        let mut env = SchedEnv::new(w, cfg).unwrap();
        while !env.is_done() {
            let a = decide(policy, &env).unwrap();
            env.advance(a).unwrap();
        }
        env
    }

    #[test]
    fn fcfs_hand_trace() {
        let env = run_traced(BaselinePolicy::Fcfs, &abc(), &one_core());
        assert_eq!(finish_of(&env, 0), 5);
        assert_eq!(finish_of(&env, 1), 8);
        assert_eq!(finish_of(&env, 2), 9);
        let m = env.finalize_metrics().unwrap();
        assert_eq!(m.mean_completion_ms, 19.0 / 3.0);
        assert_eq!(m.mean_response_ms, 10.0 / 3.0);
        assert_eq!(m.n_completed, 3);
    }

    #[test]
    fn sjf_hand_trace() {
        let env = run_traced(BaselinePolicy::Sjf, &abc(), &one_core());
        assert_eq!(finish_of(&env, 0), 5);
        assert_eq!(finish_of(&env, 2), 6);
        assert_eq!(finish_of(&env, 1), 9);
        let m = env.finalize_metrics().unwrap();
        assert_eq!(m.mean_completion_ms, 17.0 / 3.0);
    }

    #[test]
    fn rr_quantum_2_hand_trace() {
        let env = run_traced(BaselinePolicy::RoundRobin { quantum: 2 }, &abc(), &one_core());
        assert_eq!(finish_of(&env, 2), 5);
        assert_eq!(finish_of(&env, 1), 8);
        assert_eq!(finish_of(&env, 0), 9);
        let m = env.finalize_metrics().unwrap();
        assert_eq!(m.mean_completion_ms, 19.0 / 3.0);
        assert_eq!(m.mean_response_ms, 1.0);
    }

    #[test]
    fn rr_quantum_outside_set_is_config_error() {
        let w = abc();
        let err = run_policy(BaselinePolicy::RoundRobin { quantum: 5 }, &w, &one_core());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn empty_workload_reports_zero() {
        let w = Workload::new(vec![]).unwrap();
        let m = run_policy(BaselinePolicy::Fcfs, &w, &EnvConfig::default()).unwrap();
        assert_eq!(m.n_total, 0);
        assert_eq!(m.throughput_tps, 0.0);
    }

    #[test]
    fn same_inputs_same_report() {
        let cfg = crate::workload::WorkloadConfig::new(crate::workload::LoadLevel::Medium, 11);
        let mut wcfg = cfg;
        wcfg.n_tasks = Some(60);
        let w = crate::workload::generate(&wcfg).unwrap();
        for p in BaselinePolicy::all() {
            let a = run_policy(p, &w, &EnvConfig::default()).unwrap();
            let b = run_policy(p, &w, &EnvConfig::default()).unwrap();
            assert_eq!(a, b, "{p} not deterministic");
        }
    }

    #[test]
    fn fcfs_dispatches_in_arrival_order_on_one_core() {
        let tasks: Vec<TaskSpec> = (0..8).map(|i| task(i, 3 * i, 4 + (i % 3))).collect();
        let w = Workload::new(tasks).unwrap();
        let mut env = SchedEnv::new(&w, &one_core()).unwrap();
        let mut dispatch_order = Vec::new();
        while !env.is_done() {
            let a = decide(BaselinePolicy::Fcfs, &env).unwrap();
            env.advance(a).unwrap();
            for e in env.last_events() {
                if let SimEvent::Dispatched { task, first: true, .. } = e {
                    dispatch_order.push(*task);
                }
            }
        }
        let sorted: Vec<u64> = (0..8).collect();
        assert_eq!(dispatch_order, sorted);
    }

    #[test]
    fn sjf_always_picks_minimal_remaining_work() {
        let mut wcfg = crate::workload::WorkloadConfig::new(crate::workload::LoadLevel::Heavy, 3);
        wcfg.n_tasks = Some(80);
        let w = crate::workload::generate(&wcfg).unwrap();
        let mut env = SchedEnv::new(&w, &EnvConfig::default()).unwrap();
        while !env.is_done() {
            let a = decide(BaselinePolicy::Sjf, &env).unwrap();
            if let Some(crate::sim::Action::Dispatch { slot, .. }) = env.action_space().decode(a) {
                let chosen = env.candidate(slot).unwrap();
                for s in 0..env.action_space().k() {
                    let Some(c) = env.candidate(s) else { break };
                    if c.dispatchable {
                        assert!(
                            chosen.remaining_work <= c.remaining_work,
                            "slot {slot} rem {} beaten by slot {s} rem {}",
                            chosen.remaining_work,
                            c.remaining_work
                        );
                    }
                }
            }
            env.advance(a).unwrap();
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for p in BaselinePolicy::all() {
            assert_eq!(p.name().parse::<BaselinePolicy>().unwrap(), p);
        }
        assert!("lifo".parse::<BaselinePolicy>().is_err());
    }
}
