//! iCEM MPC drives the pendulum to upright. One episode is traced step by
//! step, then a batch with sampled start angles reports the success rate.

use mpckit::core::make_rng;
use mpckit::eval::{evaluate_episodic, EvalConfig};
use mpckit::policy::{MpcConfig, MpcPolicy, Policy, StepInfo};
use mpckit::solvers::{IcemConfig, SolverSpec};
use mpckit::worlds::{make_world, ResetOptions};

fn main() {
    let world = make_world("pendulum").unwrap();
    let spec = SolverSpec::Icem(IcemConfig {
        num_candidates: 128,
        iterations: 6,
        num_elites: 16,
        elites_kept: 4,
        beta: 2.0,
        momentum: 0.1,
        scale: 1.0,
    });
    let mpc = MpcConfig {
        horizon: 20,
        replan_every: 4,
        warm_start: true,
    };

    // one traced episode from the hanging position
    let mut policy = MpcPolicy::new(world.as_ref(), spec.clone(), mpc.clone()).unwrap();
    let mut world_one = world.clone_world();
    let root = make_rng(40);
    let (mut state, variation) = world_one.reset(&root.split(0), &ResetOptions::default()).unwrap();
    let goal = world_one.goal().clone();
    policy.on_reset(0, 0, root.split(1), &variation, &goal).unwrap();
    println!("step   theta     omega");
    for step in 0..world_one.max_steps() {
        if step % 20 == 0 {
            println!("{step:>4}  {:>7.3}  {:>7.3}", state.0[0], state.0[1]);
        }
        let info = StepInfo {
            state: &state,
            goal: &goal,
            variation: &variation,
            step,
            env_index: 0,
        };
        let actions = policy.get_actions(std::slice::from_ref(&info)).unwrap();
        let (next, done) = world_one.step(&actions[0]).unwrap();
        state = next;
        if done {
            println!("upright and slow at step {step}");
            break;
        }
    }

    // batch evaluation with the start angle sampled across its full range
    let cfg = EvalConfig::new(20, 41, 200)
        .options(ResetOptions::sample_keys(&["agent.start_angle"]))
        .num_envs(8);
    let mut policy = MpcPolicy::new(world.as_ref(), spec, mpc).unwrap();
    let report = evaluate_episodic(world.as_ref(), &mut policy, &cfg).unwrap();
    println!(
        "sampled starts: success {:.2} over {} episodes",
        report.success_rate, report.episodes
    );
}
