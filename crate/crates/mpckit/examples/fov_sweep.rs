//! Factor-of-variation sweep: score the same planner with no variation, then
//! with one factor sampled at a time, under paired episode seeds. Factors a
//! policy is robust to leave their row at the baseline; the ones it must
//! adapt to show up in time-to-goal.

use mpckit::eval::{fov_sweep, sweep_to_csv, EvalConfig};
use mpckit::policy::{MpcConfig, MpcPolicy};
use mpckit::solvers::{CemConfig, SolverSpec};
use mpckit::worlds::make_world;

fn main() {
    let world = make_world("tworoom").unwrap();
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
    let mut planner = MpcPolicy::new(world.as_ref(), spec, mpc).unwrap();

    let keys: Vec<String> = world
        .variation_space()
        .factors()
        .iter()
        .map(|spec| spec.key.clone())
        .collect();
    let cfg = EvalConfig::new(60, 11, 100).num_envs(8);
    let rows = fov_sweep(world.as_ref(), &mut planner, &cfg, &keys).unwrap();

    // the "none" row is the shared baseline every factor row pairs against
    print!("{}", sweep_to_csv(&rows));
}
