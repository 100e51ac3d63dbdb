// scratch probe, not committed
use schedrl::agent::{train, AgentConfig, DdqnAgent, Transition};
use schedrl::sim::{EnvConfig, SchedEnv};
use schedrl::workload::{generate, LoadLevel, WorkloadConfig};
use std::time::Instant;

fn env_with(n_tasks: usize, seed: u64) -> SchedEnv {
    let mut w = WorkloadConfig::new(LoadLevel::Medium, seed);
    w.n_tasks = Some(n_tasks);
    SchedEnv::new(&generate(&w).unwrap(), &EnvConfig::default()).unwrap()
}

fn main() {
    // 1. steps per episode under random actions, Medium 400 and 24 tasks
    for n in [400usize, 100, 24] {
        let mut env = env_with(n, 0);
        let mut rng_i = 0usize;
        let mut steps = 0u64;
        let t0 = Instant::now();
        let na = env.n_actions();
        while !env.is_done() {
            env.step((rng_i * 7 + 3) % na).unwrap();
            rng_i += 1;
            steps += 1;
        }
        println!("random policy n_tasks={n}: {steps} steps, {:?}", t0.elapsed());
    }

    // 2. td_update timing, default net 69 -> 128 -> 64 -> 25, batch 64
    let cfg = AgentConfig::default();
    let mut agent = DdqnAgent::new(69, 25, cfg).unwrap();
    let t: Vec<Transition> = (0..64)
        .map(|i| Transition {
            s: (0..69).map(|j| ((i * 69 + j) as f64 * 0.01).sin() * 0.5 + 0.5).collect(),
            a: i % 25,
            r: 0.1,
            s_next: (0..69).map(|j| ((i * 69 + j + 1) as f64 * 0.01).sin() * 0.5 + 0.5).collect(),
            done: false,
            dt: 1,
        })
        .collect();
    let t0 = Instant::now();
    let n_up = 200;
    for _ in 0..n_up {
        agent.td_update(&t).unwrap();
    }
    let per = t0.elapsed() / n_up;
    println!("td_update batch=64: {per:?} per update");

    // 3. short actual training run to extrapolate
    for (n_tasks, episodes) in [(24usize, 30usize), (48, 15)] {
        let env0 = env_with(n_tasks, 0);
        let acfg = AgentConfig { train_start_size: 500, ..AgentConfig::default() };
        let mut agent = DdqnAgent::new(env0.obs_len(), env0.n_actions(), acfg).unwrap();
        let t0 = Instant::now();
        let recs = train(&mut agent, episodes, |e| Ok(env_with(n_tasks, 10_000 + e as u64))).unwrap();
        let dt = t0.elapsed();
        let steps: u64 = agent.env_steps();
        let ups = agent.update_count();
        println!(
            "train n_tasks={n_tasks} episodes={episodes}: {dt:?} total, {:?}/episode, {steps} steps, {ups} updates, last loss {:.4}",
            dt / episodes as u32,
            recs.last().unwrap().loss_mean
        );
    }

    // 4. greedy eval episode on a full Medium 400-task workload
    let mut env = env_with(400, 1);
    let acfg = AgentConfig::default();
    let mut agent = DdqnAgent::new(env.obs_len(), env.n_actions(), acfg).unwrap();
    let mut mask = vec![false; env.n_actions()];
    let t0 = Instant::now();
    let mut steps = 0u64;
    while !env.is_done() {
        env.fill_action_mask(&mut mask);
        let obs = env.observe();
        let a = agent.greedy_action(&obs, &mask).unwrap();
        env.step(a).unwrap();
        steps += 1;
    }
    println!("greedy eval 400 tasks: {steps} steps, {:?}", t0.elapsed());
}
