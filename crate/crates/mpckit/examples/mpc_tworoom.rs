//! Receding-horizon CEM against a uniform-random baseline on the default
//! two-room task, evaluated over seeded episode batches.

use mpckit::core::make_rng;
use mpckit::eval::{evaluate_episodic, EvalConfig};
use mpckit::policy::{MpcConfig, MpcPolicy, RandomPolicy};
use mpckit::solvers::{CemConfig, SolverSpec};
use mpckit::worlds::make_world;

fn main() {
    let world = make_world("tworoom").unwrap();
    let cfg = EvalConfig::new(50, 7, 50).num_envs(8);

    let spec = SolverSpec::Cem(CemConfig {
        num_candidates: 200,
        iterations: 8,
        num_elites: 20,
        scale: 0.6,
    });
    let mpc = MpcConfig {
        horizon: 10,
        replan_every: 5,
        warm_start: true,
    };
    let mut policy = MpcPolicy::new(world.as_ref(), spec, mpc).unwrap();
    let planned = evaluate_episodic(world.as_ref(), &mut policy, &cfg).unwrap();

    let mut random = RandomPolicy::new(make_rng(8), world.action_space());
    let baseline = evaluate_episodic(world.as_ref(), &mut random, &cfg).unwrap();

    let mean_ttg = |ttg: &[u32]| {
        if ttg.is_empty() {
            f64::NAN
        } else {
            ttg.iter().map(|&t| t as f64).sum::<f64>() / ttg.len() as f64
        }
    };
    println!(
        "cem mpc : success {:>5.2}  mean time-to-goal {:>5.1}  latency {:.2} ms/step (p95 {:.2})",
        planned.success_rate,
        mean_ttg(&planned.time_to_goal),
        planned.mean_latency_s * 1e3,
        planned.p95_latency_s * 1e3
    );
    println!(
        "random  : success {:>5.2}  mean time-to-goal {:>5.1}",
        baseline.success_rate,
        mean_ttg(&baseline.time_to_goal)
    );
}
