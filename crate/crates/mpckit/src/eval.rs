//! Evaluation harness: episodic success rates under controlled variation,
//! resumes anchored at stored dataset steps, single-factor sweeps with a
//! shared-seed baseline, and reports that serialize to stable JSON lines
//! and a fixed-column CSV table.

use serde::{Deserialize, Serialize};

use crate::core::make_rng;
use crate::data::{self, DataError, TrajectoryReader};
use crate::policy::{Policy, PolicyError};
use crate::pool::{EnvPool, EpisodeRecord, PoolError, RestorePoint};
use crate::worlds::{
    Action, FactorValues, ResetOptions, VariationRequest, WorldError, WorldInstance,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("{0}")]
    BadConfig(String),
    #[error(
        "dataset episode {episode}: start {start} + offset {offset} needs step \
         {want} but only {steps} are stored"
    )]
    PairOutOfRange {
        episode: u64,
        start: u32,
        offset: u32,
        want: u64,
        steps: u32,
    },
}

/// How one evaluation run samples, seeds, and caps its episodes.
#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub episodes: u64,
    pub seed: u64,
    /// Per-episode step cap; success must fire within it.
    pub budget: usize,
    pub options: ResetOptions,
    pub num_envs: usize,
    /// When false, every latency field is reported as zero so repeated runs
    /// serialize to identical bytes.
    pub record_timing: bool,
}

impl EvalConfig {
    pub fn new(episodes: u64, seed: u64, budget: usize) -> Self {
        Self {
            episodes,
            seed,
            budget,
            options: ResetOptions::default(),
            num_envs: 1,
            record_timing: true,
        }
    }

    pub fn options(mut self, options: ResetOptions) -> Self {
        self.options = options;
        self
    }

    pub fn num_envs(mut self, num_envs: usize) -> Self {
        self.num_envs = num_envs;
        self
    }

    pub fn record_timing(mut self, on: bool) -> Self {
        self.record_timing = on;
        self
    }
}

/// One evaluation's outcome plus an echo of what produced it. Serializes
/// with a stable field order, so emit, parse, emit is byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub world: String,
    pub episodes: u64,
    pub seed: u64,
    pub budget: usize,
    /// Factor keys sampled per episode; `["*"]` means all of them.
    pub sampled: Vec<String>,
    /// Factor keys pinned to explicit values.
    pub pinned: Vec<String>,
    pub success_rate: f64,
    pub successes: Vec<bool>,
    /// Steps to success for the successful episodes, in episode order.
    pub time_to_goal: Vec<u32>,
    pub mean_latency_s: f64,
    pub p95_latency_s: f64,
    /// Global episode ordinals; identical seeds and ordinals mean paired
    /// resets across policies.
    pub episode_seeds: Vec<u64>,
}

fn sampled_echo(options: &ResetOptions) -> Vec<String> {
    match &options.variation {
        VariationRequest::None => Vec::new(),
        VariationRequest::Keys(keys) => keys.clone(),
        VariationRequest::All => vec!["*".to_string()],
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(
    world: &dyn WorldInstance,
    records: &[EpisodeRecord],
    seed: u64,
    budget: usize,
    sampled: Vec<String>,
    pinned: Vec<String>,
    record_timing: bool,
) -> EvalReport {
    let successes: Vec<bool> = records.iter().map(|r| r.success).collect();
    let time_to_goal: Vec<u32> = records
        .iter()
        .filter(|r| r.success)
        .map(|r| r.steps as u32)
        .collect();
    let mut latencies: Vec<f64> = if record_timing {
        records.iter().flat_map(|r| r.latencies.clone()).collect()
    } else {
        Vec::new()
    };
    latencies.sort_by(f64::total_cmp);
    let mean_latency_s = if latencies.is_empty() {
        0.0
    } else {
        latencies.iter().sum::<f64>() / latencies.len() as f64
    };
    EvalReport {
        world: world.id().to_string(),
        episodes: records.len() as u64,
        seed,
        budget,
        sampled,
        pinned,
        success_rate: if records.is_empty() {
            0.0
        } else {
            successes.iter().filter(|&&s| s).count() as f64 / records.len() as f64
        },
        successes,
        time_to_goal,
        mean_latency_s,
        p95_latency_s: percentile(&latencies, 0.95),
        episode_seeds: (0..records.len() as u64).collect(),
    }
}

/// Runs exactly `cfg.episodes` fresh episodes and scores them. Episode `e`
/// uses the pool's ordinal streams, so the report depends on the seed and
/// config alone, never on `num_envs`.
pub fn evaluate_episodic(
    world: &dyn WorldInstance,
    policy: &mut dyn Policy,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if cfg.budget == 0 {
        return Err(EvalError::BadConfig("budget must be at least 1".into()));
    }
    let pool = EnvPool::new(world, cfg.num_envs)?;
    let root = make_rng(cfg.seed);
    let records = pool.run(policy, cfg.episodes, cfg.budget, &root, &cfg.options)?;
    Ok(summarize(
        world,
        &records,
        cfg.seed,
        cfg.budget,
        sampled_echo(&cfg.options),
        cfg.options.values.keys().cloned().collect(),
        cfg.record_timing,
    ))
}

/// A dataset-anchored evaluation: each pair resumes the world at a stored
/// step and asks the policy to reach the state recorded `goal_offset` steps
/// later, within `budget` steps.
#[derive(Clone, Debug)]
pub struct DatasetEvalConfig {
    /// (episode index, start step) pairs into the dataset.
    pub pairs: Vec<(u64, u32)>,
    pub goal_offset: u32,
    pub seed: u64,
    pub budget: usize,
    pub num_envs: usize,
    pub record_timing: bool,
}

impl DatasetEvalConfig {
    pub fn new(pairs: Vec<(u64, u32)>, goal_offset: u32, seed: u64, budget: usize) -> Self {
        Self {
            pairs,
            goal_offset,
            seed,
            budget,
            num_envs: 1,
            record_timing: true,
        }
    }
}

/// Builds the restore points for `cfg`, validating every pair against the
/// stored episode lengths.
pub fn dataset_restore_points(
    reader: &TrajectoryReader,
    cfg: &DatasetEvalConfig,
) -> Result<Vec<RestorePoint>, EvalError> {
    if cfg.goal_offset == 0 {
        return Err(EvalError::BadConfig("goal offset must be at least 1".into()));
    }
    let mut points = Vec::with_capacity(cfg.pairs.len());
    for &(episode, start) in &cfg.pairs {
        let steps = reader.episode_len(episode)?;
        let want = start as u64 + cfg.goal_offset as u64;
        if want >= steps as u64 {
            return Err(EvalError::PairOutOfRange {
                episode,
                start,
                offset: cfg.goal_offset,
                want,
                steps,
            });
        }
        let state = data::window_states(reader, episode, start, 1)?.remove(0);
        let goal = data::window_states(reader, episode, want as u32, 1)?.remove(0);
        let variation = data::episode_variation(reader, episode)?;
        points.push(RestorePoint {
            state,
            variation,
            goal,
        });
    }
    Ok(points)
}

pub fn evaluate_from_dataset(
    world: &dyn WorldInstance,
    policy: &mut dyn Policy,
    reader: &TrajectoryReader,
    cfg: &DatasetEvalConfig,
) -> Result<EvalReport, EvalError> {
    if cfg.budget == 0 {
        return Err(EvalError::BadConfig("budget must be at least 1".into()));
    }
    if (cfg.goal_offset as usize) > cfg.budget {
        return Err(EvalError::BadConfig(format!(
            "goal offset {} exceeds the step budget {}",
            cfg.goal_offset, cfg.budget
        )));
    }
    let points = dataset_restore_points(reader, cfg)?;
    let pool = EnvPool::new(world, cfg.num_envs)?;
    let root = make_rng(cfg.seed);
    let records = pool.run_restored(policy, &points, cfg.budget, &root)?;
    Ok(summarize(
        world,
        &records,
        cfg.seed,
        cfg.budget,
        vec!["dataset".to_string()],
        Vec::new(),
        cfg.record_timing,
    ))
}

/// Replays a dataset's own recorded actions: pair `e` plays back the stored
/// actions from its start step, then holds the last one if stepped further.
pub struct ReplayPolicy {
    plans: Vec<Vec<Action>>,
    slots: Vec<Option<usize>>,
}

impl ReplayPolicy {
    pub fn from_dataset(
        reader: &TrajectoryReader,
        pairs: &[(u64, u32)],
        len: u32,
    ) -> Result<Self, EvalError> {
        if len == 0 {
            return Err(EvalError::BadConfig("replay length must be at least 1".into()));
        }
        let mut plans = Vec::with_capacity(pairs.len());
        for &(episode, start) in pairs {
            let steps = reader.episode_len(episode)?;
            if start as u64 + len as u64 > steps as u64 {
                return Err(EvalError::PairOutOfRange {
                    episode,
                    start,
                    offset: len,
                    want: start as u64 + len as u64,
                    steps,
                });
            }
            plans.push(data::window_actions(reader, episode, start, len)?);
        }
        Ok(Self {
            plans,
            slots: Vec::new(),
        })
    }
}

impl Policy for ReplayPolicy {
    fn on_reset(
        &mut self,
        slot: usize,
        episode: u64,
        _stream: crate::core::RandomStream,
        _variation: &FactorValues,
        _goal: &crate::core::StateVec,
    ) -> Result<(), PolicyError> {
        if slot >= self.slots.len() {
            self.slots.resize(slot + 1, None);
        }
        self.slots[slot] = Some(episode as usize);
        Ok(())
    }

    fn get_actions(
        &mut self,
        infos: &[crate::policy::StepInfo],
    ) -> Result<Vec<Action>, PolicyError> {
        infos
            .iter()
            .map(|info| {
                let pair = self
                    .slots
                    .get(info.env_index)
                    .copied()
                    .flatten()
                    .ok_or(PolicyError::NotReset(info.env_index))?;
                let plan = &self.plans[pair];
                Ok(plan[info.step.min(plan.len() - 1)].clone())
            })
            .collect()
    }
}

/// One sweep row: the factor that was sampled (or `"none"` for the shared
/// baseline) and the evaluation it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub factor: String,
    pub report: EvalReport,
}

/// Evaluates the policy once with no variation, then once per factor key
/// with only that factor sampled, all under the same seed so episodes pair
/// up across rows. The baseline row is exactly what `evaluate_episodic`
/// returns for the same config with default options.
pub fn fov_sweep(
    world: &dyn WorldInstance,
    policy: &mut dyn Policy,
    cfg: &EvalConfig,
    keys: &[String],
) -> Result<Vec<SweepRow>, EvalError> {
    let space = world.variation_space();
    for key in keys {
        if space.get(key).is_none() {
            return Err(EvalError::World(WorldError::UnknownFactor {
                key: key.clone(),
            }));
        }
    }
    let mut rows = Vec::with_capacity(keys.len() + 1);
    let baseline = EvalConfig {
        options: ResetOptions::default(),
        ..cfg.clone()
    };
    rows.push(SweepRow {
        factor: "none".to_string(),
        report: evaluate_episodic(world, policy, &baseline)?,
    });
    for key in keys {
        let row_cfg = EvalConfig {
            options: ResetOptions::sample_keys(&[key.as_str()]),
            ..cfg.clone()
        };
        rows.push(SweepRow {
            factor: key.clone(),
            report: evaluate_episodic(world, policy, &row_cfg)?,
        });
    }
    Ok(rows)
}

/// Serializes reports as one JSON object per line.
pub fn reports_to_jsonl<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut out = String::new();
    for report in reports {
        out.push_str(&serde_json::to_string(report).expect("report serializes"));
        out.push('\n');
    }
    out
}

fn csv_float(x: f64) -> String {
    format!("{x:.6}")
}

/// The sweep table with its fixed column set.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("factor,n,success_rate,mean_time_to_goal,mean_latency_s\n");
    for row in rows {
        let r = &row.report;
        let mean_tts = if r.time_to_goal.is_empty() {
            f64::NAN
        } else {
            r.time_to_goal.iter().map(|&t| t as f64).sum::<f64>() / r.time_to_goal.len() as f64
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.factor,
            r.episodes,
            csv_float(r.success_rate),
            csv_float(mean_tts),
            csv_float(r.mean_latency_s)
        ));
    }
    out
}
