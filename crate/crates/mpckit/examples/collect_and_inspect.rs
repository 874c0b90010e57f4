//! Collects expert episodes into a trajectory file, then reads parts of it
//! back: the file report, one window of states, and one variation block.

use mpckit::data::{collect, episode_variation, window_states, TrajectoryReader};
use mpckit::policy::ExpertPolicy;
use mpckit::worlds::{make_world, ResetOptions};

fn main() {
    let world = make_world("tworoom").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tworoom.swmt");

    let mut expert = ExpertPolicy::for_world(world.as_ref());
    let options = ResetOptions::sample_keys(&["agent.start", "wall.door_center"]);
    let summary = collect(world.as_ref(), &mut expert, 40, 8, 99, &options, &path).unwrap();
    println!(
        "wrote {} episodes, {} steps, {} bytes, success rate {:.2}",
        summary.episodes, summary.total_steps, summary.bytes, summary.success_rate
    );

    let reader = TrajectoryReader::open(&path).unwrap();
    println!("\n{}", reader.inspect());

    // a window read touches only the bytes it asks for
    let states = window_states(&reader, 0, 0, 5).unwrap();
    println!("first five states of episode 0:");
    for (t, s) in states.iter().enumerate() {
        println!(
            "  t={t}  pos ({:+.3}, {:+.3})  vel ({:+.3}, {:+.3})",
            s.0[0], s.0[1], s.0[2], s.0[3]
        );
    }

    let variation = episode_variation(&reader, 0).unwrap();
    println!("episode 0 was drawn with:");
    for (key, value) in &variation {
        println!("  {key} = {value:?}");
    }
}
