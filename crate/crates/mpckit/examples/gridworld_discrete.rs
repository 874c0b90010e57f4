//! Categorical CEM plans over one-hot action rows in a walled gridworld.
//! The episode trace prints the decoded moves.

use mpckit::core::make_rng;
use mpckit::policy::{MpcConfig, MpcPolicy, Policy, StepInfo};
use mpckit::solvers::{CategoricalCemConfig, SolverSpec};
use mpckit::worlds::{make_world, Action, ResetOptions};

const NAMES: [&str; 5] = ["up", "down", "left", "right", "stay"];

fn main() {
    let mut world = make_world("gridworld").unwrap();
    let spec = SolverSpec::CategoricalCem(CategoricalCemConfig {
        num_candidates: 128,
        iterations: 10,
        num_elites: 16,
        momentum: 0.1,
        smoothing: 0.01,
    });
    let mpc = MpcConfig {
        horizon: 8,
        replan_every: 4,
        warm_start: true,
    };
    let mut policy = MpcPolicy::new(world.as_ref(), spec, mpc).unwrap();

    // layout seed 3 has interior walls, so the shortest path bends
    let options = ResetOptions::default().pin("layout.seed", vec![3.0]);
    let root = make_rng(17);
    let (mut state, variation) = world.reset(&root.split(0), &options).unwrap();
    let goal = world.goal().clone();
    policy.on_reset(0, 0, root.split(1), &variation, &goal).unwrap();

    println!(
        "start ({}, {})  goal ({}, {})",
        state.0[0], state.0[1], goal.0[0], goal.0[1]
    );
    let mut path = Vec::new();
    for step in 0..world.max_steps() {
        let info = StepInfo {
            state: &state,
            goal: &goal,
            variation: &variation,
            step,
            env_index: 0,
        };
        let actions = policy.get_actions(std::slice::from_ref(&info)).unwrap();
        let Action::Discrete(a) = actions[0] else {
            unreachable!("gridworld is discrete")
        };
        path.push(NAMES[a]);
        let (next, done) = world.step(&actions[0]).unwrap();
        state = next;
        if done {
            println!("reached the goal in {} moves: {}", path.len(), path.join(" "));
            return;
        }
    }
    println!("budget exhausted after {} moves: {}", path.len(), path.join(" "));
}
