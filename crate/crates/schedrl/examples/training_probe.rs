// scratch probe, not committed
use schedrl::agent::{train, AgentConfig, DdqnAgent};
use schedrl::baselines::{run_policy, BaselinePolicy};
use schedrl::sim::{EnvConfig, MetricsReport, SchedEnv, SimEvent};
use schedrl::workload::{generate, LoadLevel, WorkloadConfig};
use std::time::Instant;

fn make_env(n_tasks: Option<usize>, seed: u64) -> SchedEnv {
    let mut w = WorkloadConfig::new(LoadLevel::Medium, seed);
    w.n_tasks = n_tasks;
    SchedEnv::new(&generate(&w).unwrap(), &EnvConfig::default()).unwrap()
}

fn eval_greedy(agent: &mut DdqnAgent, seed: u64) -> MetricsReport {
    let mut env = make_env(None, seed);
    let mut mask = vec![false; env.n_actions()];
    while !env.is_done() {
        env.fill_action_mask(&mut mask);
        let obs = env.observe();
        let a = agent.greedy_action(&obs, &mask).unwrap();
        env.step(a).unwrap();
    }
    env.finalize_metrics().unwrap()
}

/// Greedy rollout on a training-size env with action-effect accounting.
fn diagnose(agent: &mut DdqnAgent, n_tasks: usize, seed: u64) {
    let mut env = make_env(Some(n_tasks), seed);
    let n_actions = env.n_actions();
    let mut mask = vec![false; n_actions];
    let (mut disp, mut noop, mut boost) = (0u64, 0u64, 0u64);
    let mut steps = 0u64;
    let mut shown = 0;
    while !env.is_done() && steps < 200_000 {
        env.fill_action_mask(&mut mask);
        let obs = env.observe();
        let a = agent.greedy_action(&obs, &mask).unwrap();
        let q = agent.q_values(&obs).unwrap();
        let out = env.step(a).unwrap();
        let dispatched = out.events.iter().any(|e| matches!(e, SimEvent::Dispatched { .. }));
        if a == n_actions - 1 {
            boost += 1;
        } else if dispatched {
            disp += 1;
        } else {
            noop += 1;
        }
        if shown < 14 && steps % 3 == 0 {
            let qmax = q.iter().cloned().fold(f64::MIN, f64::max);
            let qmin = q.iter().cloned().fold(f64::MAX, f64::min);
            println!(
                "  t={:<5} a={:<2} q[a]={:+.3} q:[{:+.3},{:+.3}] r={:+.4} dt={}",
                env.clock(), a, q[a], qmin, qmax, out.reward,
                if dispatched { "D" } else if a == n_actions - 1 { "B" } else { "N" },
            );
            shown += 1;
        }
        steps += 1;
    }
    println!(
        "  greedy diag: {} steps, dispatch {} noop {} boost {}, clock {}, finished {}",
        steps, disp, noop, boost, env.clock(),
        if env.is_truncated() { "TRUNCATED" } else { "yes" }
    );
}

fn probe(train_tasks: usize, episodes: usize, gamma: f64) {
    println!("=== config: {train_tasks} tasks/episode, {episodes} episodes, gamma={gamma} ===");
    let env0 = make_env(Some(train_tasks), 10_000);
    let cfg = AgentConfig { gamma, ..AgentConfig::default() };
    let mut agent = DdqnAgent::new(env0.obs_len(), env0.n_actions(), cfg).unwrap();
    let t0 = Instant::now();
    let mut recs = Vec::new();
    let mut last_steps = 0u64;
    let mut ep_steps: Vec<u64> = Vec::new();
    for e in 0..episodes {
        let before = agent.env_steps();
        let mut part = train(&mut agent, 1, |_| Ok(make_env(Some(train_tasks), 10_000 + e as u64))).unwrap();
        recs.append(&mut part);
        ep_steps.push(agent.env_steps() - before);
        if (e + 1) % 50 == 0 {
            let steps = agent.env_steps();
            let block = &ep_steps[e + 1 - 50..];
            eprintln!(
                "[{train_tasks}] ep {} steps {} (avg/ep {:.0}, max/ep {}) updates {} loss {:.4} elapsed {:?}",
                e + 1,
                steps,
                (steps - last_steps) as f64 / 50.0,
                block.iter().max().unwrap(),
                agent.update_count(),
                recs.last().unwrap().loss_mean,
                t0.elapsed()
            );
            last_steps = steps;
        }
    }
    let train_time = t0.elapsed();
    println!("training: {train_time:?}, {} steps, {} updates", agent.env_steps(), agent.update_count());

    let win = |hi: usize| -> f64 {
        let lo = hi.saturating_sub(20);
        recs[lo..hi].iter().map(|r| r.loss_mean).sum::<f64>() / (hi - lo) as f64
    };
    let marks: Vec<usize> = (20..=episodes).step_by(20).collect();
    let curve: Vec<String> = marks.iter().map(|&m| format!("{m}:{:.4}", win(m))).collect();
    println!("win20 curve: {}", curve.join("  "));
    println!("C6 shape: win20(200)={:.4} < win20(20)={:.4} ? {}", win(200.min(episodes)), win(20),
        win(200.min(episodes)) < win(20));

    diagnose(&mut agent, train_tasks, 77);

    // quick held-out eval on 3 seeds, full Medium workloads
    let t1 = Instant::now();
    let mut sums = [[0.0f64; 3]; 2]; // fcfs, ddqn
    for seed in 0..3u64 {
        let mut w = WorkloadConfig::new(LoadLevel::Medium, seed);
        w.n_tasks = None;
        let wl = generate(&w).unwrap();
        let m = run_policy(BaselinePolicy::Fcfs, &wl, &EnvConfig::default()).unwrap();
        sums[0][0] += m.mean_completion_ms;
        sums[0][1] += m.throughput_tps;
        sums[0][2] += m.mean_response_ms;
        let m = eval_greedy(&mut agent, seed);
        sums[1][0] += m.mean_completion_ms;
        sums[1][1] += m.throughput_tps;
        sums[1][2] += m.mean_response_ms;
    }
    println!(
        "eval(3 seeds, {:?}): fcfs completion {:.2} thr {:.4} resp {:.2} | ddqn completion {:.2} thr {:.4} resp {:.2} | improvement {:.1}%",
        t1.elapsed(),
        sums[0][0] / 3.0, sums[0][1] / 3.0, sums[0][2] / 3.0,
        sums[1][0] / 3.0, sums[1][1] / 3.0, sums[1][2] / 3.0,
        (1.0 - sums[1][0] / sums[0][0]) * 100.0
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tasks: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let episodes: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let gamma: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    probe(tasks, episodes, gamma);
}
