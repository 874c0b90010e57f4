//! Command line front end. One subcommand per harness operation; every
//! randomized command takes an explicit `--seed`, reports go to stdout as
//! JSON lines or CSV, and runtime failures name the stage that failed and
//! exit with status 1 (usage problems exit with 2).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::core::make_rng;
use crate::data::{self, TrajectoryReader};
use crate::eval::{
    evaluate_episodic, evaluate_from_dataset, fov_sweep, reports_to_jsonl, sweep_to_csv,
    DatasetEvalConfig, EvalConfig, EvalReport,
};
use crate::policy::{ExpertPolicy, MpcConfig, MpcPolicy, Policy, RandomPolicy};
use crate::solvers::SolverSpec;
use crate::worlds::{
    make_world, ActionSpaceKind, FactorKind, ResetOptions, WorldInstance, WORLD_NAMES,
};

const POLICY_IDS: &str = "random, expert, predictive_sampling, cem, mppi, icem, \
                          categorical_cem, gd, pgd, lagrangian, grasp";

#[derive(Parser)]
#[command(
    name = "mpckit",
    version,
    about = "Sampling and gradient planners on small variation-rich worlds"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available worlds.
    Envs,
    /// List a world's factors of variation.
    Fovs {
        #[arg(long)]
        env: String,
    },
    /// Roll out a policy and write the episodes to a trajectory file.
    Collect {
        #[arg(long)]
        env: String,
        /// random, expert, or a solver id.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        replan_every: usize,
        #[command(flatten)]
        variation: VariationArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a policy over fresh episodes, or over dataset-anchored resumes.
    Evaluate {
        #[arg(long)]
        env: String,
        /// random, expert, or a solver id.
        #[arg(long)]
        solver: String,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        replan_every: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        /// Resume episodes from stored steps of this trajectory file.
        #[arg(long, requires = "goal_offset", conflicts_with_all = ["variation", "set"])]
        dataset: Option<PathBuf>,
        /// Steps ahead of each start whose stored state becomes the goal.
        #[arg(long, requires = "dataset")]
        goal_offset: Option<u32>,
        #[command(flatten)]
        variation: VariationArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate per-factor variation against a no-variation baseline.
    Sweep {
        #[arg(long)]
        env: String,
        /// random, expert, or a solver id.
        #[arg(long)]
        solver: String,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        replan_every: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        /// Factor keys to sweep, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        factors: Vec<String>,
        /// Also write the rows as JSON lines to this path.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several solvers over identical episodes and tabulate them.
    CompareSolvers {
        #[arg(long)]
        env: String,
        /// Solver ids, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        solvers: Vec<String>,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        replan_every: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        variation: VariationArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Summarize a trajectory file.
    Inspect { file: PathBuf },
}

#[derive(Args, Clone, Default)]
struct VariationArgs {
    /// Factor keys to sample each episode, comma separated, or "all".
    #[arg(long, value_delimiter = ',')]
    variation: Option<Vec<String>>,
    /// Pin a factor, e.g. --set physics.drag=0.2 (repeatable).
    #[arg(long = "set", value_parser = parse_pin)]
    set: Vec<(String, Vec<f64>)>,
}

impl VariationArgs {
    fn options(&self) -> ResetOptions {
        let mut options = match self.variation.as_deref() {
            None => ResetOptions::default(),
            Some([key]) if key == "all" => ResetOptions::sample_all(),
            Some(keys) => {
                let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
                ResetOptions::sample_keys(&refs)
            }
        };
        for (key, values) in &self.set {
            options = options.pin(key, values.clone());
        }
        options
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Pool width; results never depend on it.
    #[arg(long, default_value_t = 1)]
    num_envs: usize,
    /// Report every latency as zero so repeated runs emit identical bytes.
    #[arg(long)]
    no_timing: bool,
}

fn parse_pin(s: &str) -> Result<(String, Vec<f64>), String> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=v1,v2 but got {s:?}"))?;
    if key.is_empty() {
        return Err("empty factor key".into());
    }
    let values = raw
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err("no values given".into());
    }
    Ok((key.to_string(), values))
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct CliError {
    stage: &'static str,
    message: String,
}

fn fail(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> CliError {
    move |err| CliError {
        stage,
        message: err.to_string(),
    }
}

macro_rules! stage {
    ($stage:literal, $expr:expr) => {
        $expr.map_err(|e| fail($stage)(&e))
    };
}

fn parse_solver(id: &str) -> Option<SolverSpec> {
    Some(match id {
        "predictive_sampling" => SolverSpec::PredictiveSampling(Default::default()),
        "cem" => SolverSpec::Cem(Default::default()),
        "mppi" => SolverSpec::Mppi(Default::default()),
        "icem" => SolverSpec::Icem(Default::default()),
        "categorical_cem" => SolverSpec::CategoricalCem(Default::default()),
        "gd" => SolverSpec::Gd(Default::default()),
        "pgd" => SolverSpec::Pgd(Default::default()),
        "lagrangian" => SolverSpec::Lagrangian(Default::default()),
        "grasp" => SolverSpec::Grasp(Default::default()),
        _ => return None,
    })
}

fn build_policy(
    world: &dyn WorldInstance,
    name: &str,
    horizon: usize,
    replan_every: usize,
    seed: u64,
) -> Result<Box<dyn Policy>, CliError> {
    match name {
        "random" => Ok(Box::new(RandomPolicy::new(
            make_rng(seed),
            world.action_space(),
        ))),
        "expert" => Ok(Box::new(ExpertPolicy::for_world(world))),
        id => {
            let spec = parse_solver(id).ok_or_else(|| CliError {
                stage: "building policy",
                message: format!("unknown policy {id:?}; expected one of {POLICY_IDS}"),
            })?;
            let cfg = MpcConfig {
                horizon,
                replan_every,
                warm_start: true,
            };
            let policy = stage!("building policy", MpcPolicy::new(world, spec, cfg))?;
            Ok(Box::new(policy))
        }
    }
}

fn load_world(name: &str) -> Result<Box<dyn WorldInstance>, CliError> {
    stage!("loading world", make_world(name))
}

fn csv_float(x: f64) -> String {
    format!("{x:.6}")
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Envs => {
            for name in WORLD_NAMES {
                let world = load_world(name)?;
                let actions = match world.action_space() {
                    ActionSpaceKind::Continuous(space) => format!("continuous[{}]", space.dims()),
                    ActionSpaceKind::Discrete(n) => format!("discrete[{n}]"),
                };
                println!(
                    "{name}  state_dim={}  actions={actions}  max_steps={}",
                    world.state_dim(),
                    world.max_steps()
                );
            }
            Ok(())
        }
        Command::Fovs { env } => {
            let world = load_world(&env)?;
            let space = world.variation_space();
            for factor in space.factors() {
                let kind = match &factor.kind {
                    FactorKind::Box { low, high } => format!("box low={low:?} high={high:?}"),
                    FactorKind::Discrete { choices } => {
                        format!("discrete choices={}", choices.len())
                    }
                    FactorKind::Fixed => "fixed".to_string(),
                };
                println!("{}  {kind}  default={:?}", factor.key, factor.default);
            }
            if let Some(constraint) = space.constraint() {
                println!("constraint: {}", constraint.name);
            }
            Ok(())
        }
        Command::Collect {
            env,
            policy,
            episodes,
            seed,
            out,
            horizon,
            replan_every,
            variation,
            run,
        } => {
            let world = load_world(&env)?;
            let mut policy = build_policy(world.as_ref(), &policy, horizon, replan_every, seed)?;
            let summary = stage!(
                "collecting episodes",
                data::collect(
                    world.as_ref(),
                    policy.as_mut(),
                    episodes,
                    run.num_envs,
                    seed,
                    &variation.options(),
                    &out,
                )
            )?;
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            Ok(())
        }
        Command::Evaluate {
            env,
            solver,
            horizon,
            replan_every,
            budget,
            episodes,
            seed,
            dataset,
            goal_offset,
            variation,
            run,
        } => {
            let world = load_world(&env)?;
            let mut policy = build_policy(world.as_ref(), &solver, horizon, replan_every, seed)?;
            let report = match dataset {
                Some(path) => {
                    let reader = stage!("opening dataset", TrajectoryReader::open(&path))?;
                    let offset = goal_offset.expect("clap enforces goal_offset");
                    let pairs =
                        stage!("selecting pairs", dataset_pairs(&reader, episodes, offset))?;
                    let cfg = DatasetEvalConfig {
                        pairs,
                        goal_offset: offset,
                        seed,
                        budget,
                        num_envs: run.num_envs,
                        record_timing: !run.no_timing,
                    };
                    stage!(
                        "evaluating",
                        evaluate_from_dataset(world.as_ref(), policy.as_mut(), &reader, &cfg)
                    )?
                }
                None => {
                    let cfg = EvalConfig {
                        episodes,
                        seed,
                        budget,
                        options: variation.options(),
                        num_envs: run.num_envs,
                        record_timing: !run.no_timing,
                    };
                    stage!(
                        "evaluating",
                        evaluate_episodic(world.as_ref(), policy.as_mut(), &cfg)
                    )?
                }
            };
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(())
        }
        Command::Sweep {
            env,
            solver,
            horizon,
            replan_every,
            budget,
            episodes,
            seed,
            factors,
            jsonl,
            run,
        } => {
            let world = load_world(&env)?;
            let mut policy = build_policy(world.as_ref(), &solver, horizon, replan_every, seed)?;
            let cfg = EvalConfig {
                episodes,
                seed,
                budget,
                options: ResetOptions::default(),
                num_envs: run.num_envs,
                record_timing: !run.no_timing,
            };
            let rows = stage!(
                "sweeping",
                fov_sweep(world.as_ref(), policy.as_mut(), &cfg, &factors)
            )?;
            print!("{}", sweep_to_csv(&rows));
            if let Some(path) = jsonl {
                let lines = reports_to_jsonl(rows.iter().map(|r| &r.report));
                stage!("writing output", std::fs::write(&path, lines))?;
            }
            Ok(())
        }
        Command::CompareSolvers {
            env,
            solvers,
            horizon,
            replan_every,
            budget,
            episodes,
            seed,
            variation,
            run,
        } => {
            let world = load_world(&env)?;
            let cfg = EvalConfig {
                episodes,
                seed,
                budget,
                options: variation.options(),
                num_envs: run.num_envs,
                record_timing: !run.no_timing,
            };
            let mut reports: Vec<(String, EvalReport)> = Vec::with_capacity(solvers.len());
            for solver in &solvers {
                let mut policy =
                    build_policy(world.as_ref(), solver, horizon, replan_every, seed)?;
                let report = stage!(
                    "comparing solvers",
                    evaluate_episodic(world.as_ref(), policy.as_mut(), &cfg)
                )?;
                reports.push((solver.clone(), report));
            }
            println!("solver,success_rate,mean_latency_s");
            for (solver, report) in &reports {
                println!(
                    "{solver},{},{}",
                    csv_float(report.success_rate),
                    csv_float(report.mean_latency_s)
                );
            }
            Ok(())
        }
        Command::Inspect { file } => {
            let reader = stage!("inspecting file", TrajectoryReader::open(&file))?;
            let report = reader.inspect();
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(())
        }
    }
}

/// Walks episodes in order, taking starts every `offset` steps while the
/// goal step stays stored, until `wanted` pairs are found.
fn dataset_pairs(
    reader: &TrajectoryReader,
    wanted: u64,
    offset: u32,
) -> Result<Vec<(u64, u32)>, CliError> {
    if offset == 0 {
        return Err(CliError {
            stage: "selecting pairs",
            message: "goal offset must be at least 1".into(),
        });
    }
    let mut pairs = Vec::new();
    for episode in 0..reader.episode_count() {
        let steps = stage!("selecting pairs", reader.episode_len(episode))?;
        let mut start = 0u32;
        while (start as u64 + offset as u64) < steps as u64 {
            pairs.push((episode, start));
            if pairs.len() as u64 == wanted {
                return Ok(pairs);
            }
            start += offset;
        }
    }
    Err(CliError {
        stage: "selecting pairs",
        message: format!(
            "dataset provides only {} pairs at offset {offset}, need {wanted}",
            pairs.len()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pins_parse_keys_and_value_lists() {
        let (key, values) = parse_pin("agent.start=0.2,0.3").unwrap();
        assert_eq!(key, "agent.start");
        assert_eq!(values, vec![0.2, 0.3]);
        assert!(parse_pin("no-equals").is_err());
        assert!(parse_pin("k=not-a-number").is_err());
        assert!(parse_pin("=1.0").is_err());
    }

    #[test]
    fn variation_args_build_the_right_options() {
        let args = VariationArgs {
            variation: Some(vec!["all".into()]),
            set: vec![("physics.drag".into(), vec![0.0])],
        };
        let options = args.options();
        assert!(matches!(
            options.variation,
            crate::worlds::VariationRequest::All
        ));
        assert_eq!(options.values["physics.drag"], vec![0.0]);

        let keyed = VariationArgs {
            variation: Some(vec!["physics.dt".into(), "physics.drag".into()]),
            set: Vec::new(),
        };
        match keyed.options().variation {
            crate::worlds::VariationRequest::Keys(keys) => {
                assert_eq!(keys, vec!["physics.dt", "physics.drag"])
            }
            other => panic!("expected keys, got {other:?}"),
        }
    }

    #[test]
    fn every_solver_id_parses_and_junk_does_not() {
        for id in [
            "predictive_sampling",
            "cem",
            "mppi",
            "icem",
            "categorical_cem",
            "gd",
            "pgd",
            "lagrangian",
            "grasp",
        ] {
            let spec = parse_solver(id).unwrap();
            assert_eq!(spec.name(), id);
        }
        assert!(parse_solver("newton").is_none());
    }

    #[test]
    fn the_clap_tree_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
