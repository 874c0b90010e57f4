//! Dataset-anchored evaluation: restore the world at stored steps and ask a
//! policy to reach the state recorded 25 steps later. Replaying the stored
//! actions is the sanity check; a planner is the actual measurement.

use mpckit::data::{collect, TrajectoryReader};
use mpckit::eval::{evaluate_from_dataset, DatasetEvalConfig, ReplayPolicy};
use mpckit::policy::{ExpertPolicy, MpcConfig, MpcPolicy};
use mpckit::solvers::{CemConfig, SolverSpec};
use mpckit::worlds::{make_world, ResetOptions};

const OFFSET: u32 = 25;

fn main() {
    let world = make_world("tworoom").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expert.swmt");

    // slow the dynamics down so episodes are long enough to cut windows from
    let options = ResetOptions::sample_keys(&["agent.start"]).pin("physics.dt", vec![0.05]);
    let mut expert = ExpertPolicy::for_world(world.as_ref());
    collect(world.as_ref(), &mut expert, 120, 8, 99, &options, &path).unwrap();

    let reader = TrajectoryReader::open(&path).unwrap();
    let mut pairs = Vec::new();
    'outer: for e in 0..reader.inspect().episodes {
        let steps = reader.episode_len(e).unwrap();
        let mut start = 0;
        while start + OFFSET < steps {
            pairs.push((e, start));
            if pairs.len() == 40 {
                break 'outer;
            }
            start += OFFSET;
        }
    }
    println!("cut {} restore points with a {}-step window", pairs.len(), OFFSET);

    let cfg = DatasetEvalConfig {
        num_envs: 8,
        record_timing: false,
        ..DatasetEvalConfig::new(pairs.clone(), OFFSET, 7, 50)
    };

    let mut replay = ReplayPolicy::from_dataset(&reader, &pairs, OFFSET).unwrap();
    let report = evaluate_from_dataset(world.as_ref(), &mut replay, &reader, &cfg).unwrap();
    println!("replayed actions   success rate {:.2}", report.success_rate);

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
    let report = evaluate_from_dataset(world.as_ref(), &mut planner, &reader, &cfg).unwrap();
    println!("receding horizon   success rate {:.2}", report.success_rate);
}
