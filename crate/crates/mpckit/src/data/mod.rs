//! Trajectory datasets: collecting episodes from a pool into the columnar
//! container and decoding them back into world types. Rows hold the state
//! before the action, the action, the done flag after it, and the episode
//! goal; the variation block is written once per episode.

mod format;

pub use format::{
    ColumnBlock, ColumnData, ColumnReport, ColumnSpec, DataError, Dtype, EpisodeData, FileReport,
    FileSummary, TrajectoryReader, TrajectorySchema, TrajectoryWriter, MAGIC, VERSION,
};

use std::path::{Path, PathBuf};

use crate::core::{make_rng, StateVec};
use crate::policy::Policy;
use crate::pool::{EnvPool, EpisodeRecord, PoolError};
use crate::worlds::{Action, ActionSpaceKind, FactorValues, ResetOptions, WorldInstance};

pub const STATE_COLUMN: &str = "state";
pub const ACTION_COLUMN: &str = "action";
pub const TERMINATED_COLUMN: &str = "terminated";
pub const GOAL_COLUMN: &str = "goal";

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CollectSummary {
    pub path: PathBuf,
    pub episodes: u64,
    pub total_steps: u64,
    pub bytes: u64,
    pub success_rate: f64,
}

/// The column schema a world's episodes are stored under.
pub fn schema_for(world: &dyn WorldInstance) -> TrajectorySchema {
    let d_s = world.state_dim() as u32;
    let action = match world.action_space() {
        ActionSpaceKind::Continuous(space) => {
            ColumnSpec::new(ACTION_COLUMN, Dtype::F32, &[space.dims() as u32])
        }
        ActionSpaceKind::Discrete(_) => ColumnSpec::new(ACTION_COLUMN, Dtype::I32, &[1]),
    };
    let variation_layout = world
        .variation_space()
        .defaults()
        .iter()
        .map(|(k, v)| (k.clone(), v.len() as u16))
        .collect();
    TrajectorySchema {
        columns: vec![
            ColumnSpec::new(STATE_COLUMN, Dtype::F32, &[d_s]),
            action,
            ColumnSpec::new(TERMINATED_COLUMN, Dtype::U8, &[1]),
            ColumnSpec::new(GOAL_COLUMN, Dtype::F32, &[d_s]),
        ],
        variation_layout,
    }
}

fn encode(record: &EpisodeRecord, schema: &TrajectorySchema) -> Result<EpisodeData, DataError> {
    let steps = record.steps;
    let mut state = Vec::with_capacity(steps * record.goal.dim());
    for s in record.states.iter().take(steps) {
        state.extend(s.as_slice().iter().map(|&x| x as f32));
    }
    let action = match record.actions.first() {
        Some(Action::Discrete(_)) | None
            if matches!(schema.column(ACTION_COLUMN), Some((_, c)) if c.dtype == Dtype::I32) =>
        {
            let mut out = Vec::with_capacity(steps);
            for a in &record.actions {
                match a {
                    Action::Discrete(i) => out.push(*i as i32),
                    Action::Continuous(_) => {
                        return Err(DataError::Schema(
                            "continuous action in a discrete episode".into(),
                        ))
                    }
                }
            }
            ColumnData::I32(out)
        }
        _ => {
            let mut out = Vec::new();
            for a in &record.actions {
                match a {
                    Action::Continuous(v) => out.extend(v.iter().map(|&x| x as f32)),
                    Action::Discrete(_) => {
                        return Err(DataError::Schema(
                            "discrete action in a continuous episode".into(),
                        ))
                    }
                }
            }
            ColumnData::F32(out)
        }
    };
    let terminated = ColumnData::U8(record.terminated.iter().map(|&d| d as u8).collect());
    let mut goal = Vec::with_capacity(steps * record.goal.dim());
    for _ in 0..steps {
        goal.extend(record.goal.as_slice().iter().map(|&x| x as f32));
    }
    let mut variation = Vec::with_capacity(schema.variation_len());
    for (key, n) in &schema.variation_layout {
        let values = record.variation.get(key).ok_or_else(|| {
            DataError::Schema(format!("episode variation is missing factor {key:?}"))
        })?;
        if values.len() != *n as usize {
            return Err(DataError::Schema(format!(
                "factor {key:?} has {} values, layout wants {n}",
                values.len()
            )));
        }
        variation.extend_from_slice(values);
    }
    Ok(EpisodeData {
        variation,
        columns: vec![ColumnData::F32(state), action, terminated, ColumnData::F32(goal)],
    })
}

/// Runs `episodes` episodes of `policy` through a pool and writes them to
/// `out`. The file depends only on the world, policy, seed, and options,
/// never on `num_envs`.
pub fn collect(
    world: &dyn WorldInstance,
    policy: &mut dyn Policy,
    episodes: u64,
    num_envs: usize,
    seed: u64,
    options: &ResetOptions,
    out: impl AsRef<Path>,
) -> Result<CollectSummary, CollectError> {
    let pool = EnvPool::new(world, num_envs)?;
    let root = make_rng(seed);
    let records = pool.run(policy, episodes, usize::MAX, &root, options)?;
    let mut writer = TrajectoryWriter::create(out.as_ref(), schema_for(world))?;
    let mut successes = 0u64;
    for record in &records {
        if record.success {
            successes += 1;
        }
        let episode = encode(record, writer.schema())?;
        writer.append(&episode)?;
    }
    let summary = writer.finish()?;
    Ok(CollectSummary {
        success_rate: if records.is_empty() {
            0.0
        } else {
            successes as f64 / records.len() as f64
        },
        path: summary.path,
        episodes: summary.episodes,
        total_steps: summary.total_steps,
        bytes: summary.bytes,
    })
}

/// Decodes the state column of a window back into state vectors.
pub fn window_states(
    reader: &TrajectoryReader,
    episode: u64,
    start: u32,
    len: u32,
) -> Result<Vec<StateVec>, DataError> {
    let blocks = reader.read_window(episode, start, len, Some(&[STATE_COLUMN]))?;
    let block = &blocks[0];
    let dim = block.dims.iter().map(|&d| d as usize).product::<usize>();
    let values = block
        .data
        .as_f32()
        .ok_or_else(|| DataError::Schema("state column is not f32".into()))?;
    Ok(values
        .chunks_exact(dim)
        .map(|c| StateVec(c.iter().map(|&x| x as f64).collect()))
        .collect())
}

/// Decodes the action column of a window back into actions.
pub fn window_actions(
    reader: &TrajectoryReader,
    episode: u64,
    start: u32,
    len: u32,
) -> Result<Vec<Action>, DataError> {
    let blocks = reader.read_window(episode, start, len, Some(&[ACTION_COLUMN]))?;
    let block = &blocks[0];
    match &block.data {
        ColumnData::F32(values) => {
            let dim = block.dims.iter().map(|&d| d as usize).product::<usize>();
            Ok(values
                .chunks_exact(dim)
                .map(|c| Action::Continuous(c.iter().map(|&x| x as f64).collect()))
                .collect())
        }
        ColumnData::I32(values) => values
            .iter()
            .map(|&i| {
                usize::try_from(i)
                    .map(Action::Discrete)
                    .map_err(|_| DataError::Schema(format!("negative action index {i}")))
            })
            .collect(),
        ColumnData::U8(_) => Err(DataError::Schema("action column is u8".into())),
    }
}

/// The episode's variation block as a factor map.
pub fn episode_variation(
    reader: &TrajectoryReader,
    episode: u64,
) -> Result<FactorValues, DataError> {
    Ok(reader.read_variation(episode)?.into_iter().collect())
}
