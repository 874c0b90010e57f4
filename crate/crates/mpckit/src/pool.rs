//! Lockstep environment pool: N world instances stepped together under one
//! policy, with auto-reset and per-episode RNG streams keyed by the global
//! episode ordinal. Episode `e` always consumes `root.split(2e)` for its
//! reset and `root.split(2e + 1)` for its policy, so records are bit-exact
//! regardless of pool width, and results are gathered by ordinal.

use std::time::Instant;

use crate::core::{RandomStream, StateVec};
use crate::policy::{Policy, PolicyError, StepInfo};
use crate::worlds::{Action, FactorValues, ResetOptions, WorldError, WorldInstance};

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("episode {episode}: {source}")]
    World {
        episode: u64,
        #[source]
        source: WorldError,
    },
    #[error("episode {episode}: {source}")]
    Policy {
        episode: u64,
        #[source]
        source: PolicyError,
    },
    #[error("{0}")]
    BadRequest(String),
}

/// A stored situation to resume from instead of sampling a fresh reset.
#[derive(Clone, Debug)]
pub struct RestorePoint {
    pub state: StateVec,
    pub variation: FactorValues,
    pub goal: StateVec,
}

/// Everything one episode produced. `states` holds the initial state plus
/// one entry per step, so `states.len() == steps + 1`.
#[derive(Clone, Debug)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub states: Vec<StateVec>,
    pub actions: Vec<Action>,
    pub terminated: Vec<bool>,
    pub goal: StateVec,
    pub variation: FactorValues,
    pub success: bool,
    pub steps: usize,
    pub latencies: Vec<f64>,
}

struct Slot {
    world: Box<dyn WorldInstance>,
    episode: u64,
    state: StateVec,
    goal: StateVec,
    variation: FactorValues,
    states: Vec<StateVec>,
    actions: Vec<Action>,
    terminated: Vec<bool>,
    latencies: Vec<f64>,
    done: bool,
}

impl Slot {
    fn finish(self) -> EpisodeRecord {
        let success = self.terminated.last().copied().unwrap_or(false);
        EpisodeRecord {
            episode: self.episode,
            steps: self.actions.len(),
            success,
            states: self.states,
            actions: self.actions,
            terminated: self.terminated,
            goal: self.goal,
            variation: self.variation,
            latencies: self.latencies,
        }
    }
}

enum Source<'a> {
    Sampled(&'a ResetOptions),
    Restored(&'a [RestorePoint]),
}

pub struct EnvPool {
    prototype: Box<dyn WorldInstance>,
    num_envs: usize,
}

impl EnvPool {
    pub fn new(world: &dyn WorldInstance, num_envs: usize) -> Result<Self, PoolError> {
        if num_envs == 0 {
            return Err(PoolError::BadRequest("pool needs at least one env".into()));
        }
        Ok(Self {
            prototype: world.clone_world(),
            num_envs,
        })
    }

    pub fn num_envs(&self) -> usize {
        self.num_envs
    }

    /// Runs exactly `episodes` freshly sampled episodes, each capped at
    /// `step_cap` steps (and at the world's own step limit). Slots auto-reset
    /// onto the next unstarted ordinal as they finish.
    pub fn run(
        &self,
        policy: &mut dyn Policy,
        episodes: u64,
        step_cap: usize,
        root: &RandomStream,
        options: &ResetOptions,
    ) -> Result<Vec<EpisodeRecord>, PoolError> {
        self.drive(policy, episodes, step_cap, root, Source::Sampled(options))
    }

    /// Like [`run`](Self::run) but episode `e` resumes from `points[e]` via
    /// `restore` instead of sampling a reset.
    pub fn run_restored(
        &self,
        policy: &mut dyn Policy,
        points: &[RestorePoint],
        step_cap: usize,
        root: &RandomStream,
    ) -> Result<Vec<EpisodeRecord>, PoolError> {
        self.drive(
            policy,
            points.len() as u64,
            step_cap,
            root,
            Source::Restored(points),
        )
    }

    fn drive(
        &self,
        policy: &mut dyn Policy,
        episodes: u64,
        step_cap: usize,
        root: &RandomStream,
        source: Source<'_>,
    ) -> Result<Vec<EpisodeRecord>, PoolError> {
        if step_cap == 0 {
            return Err(PoolError::BadRequest("step cap must be at least 1".into()));
        }
        let mut results: Vec<Option<EpisodeRecord>> = (0..episodes).map(|_| None).collect();
        let mut slots: Vec<Option<Slot>> = (0..self.num_envs).map(|_| None).collect();
        let mut next_episode = 0u64;
        for i in 0..self.num_envs {
            if next_episode < episodes {
                slots[i] = Some(self.start(i, next_episode, policy, root, &source)?);
                next_episode += 1;
            }
        }

        while results.iter().any(|r| r.is_none()) {
            let idxs: Vec<usize> = slots
                .iter()
                .enumerate()
                .filter(|(_, s)| s.is_some())
                .map(|(i, _)| i)
                .collect();
            let (actions, per_env) = {
                let infos: Vec<StepInfo> = idxs
                    .iter()
                    .map(|&i| {
                        let s = slots[i].as_ref().unwrap();
                        StepInfo {
                            state: &s.state,
                            goal: &s.goal,
                            variation: &s.variation,
                            step: s.actions.len(),
                            env_index: i,
                        }
                    })
                    .collect();
                let start = Instant::now();
                let actions = policy.get_actions(&infos).map_err(|e| {
                    let episode = match &e {
                        PolicyError::Solver { env_index, .. } => slots
                            .get(*env_index)
                            .and_then(|s| s.as_ref())
                            .map_or(0, |s| s.episode),
                        _ => slots[idxs[0]].as_ref().unwrap().episode,
                    };
                    PoolError::Policy { episode, source: e }
                })?;
                let per_env = start.elapsed().as_secs_f64() / idxs.len() as f64;
                (actions, per_env)
            };
            if actions.len() != idxs.len() {
                return Err(PoolError::BadRequest(format!(
                    "policy returned {} actions for {} envs",
                    actions.len(),
                    idxs.len()
                )));
            }

            for (action, &i) in actions.iter().zip(&idxs) {
                let slot = slots[i].as_mut().unwrap();
                let (state, done) = slot.world.step(action).map_err(|e| PoolError::World {
                    episode: slot.episode,
                    source: e,
                })?;
                slot.actions.push(action.clone());
                slot.terminated.push(done);
                slot.states.push(state.clone());
                slot.state = state;
                slot.latencies.push(per_env);
                let cap = step_cap.min(slot.world.max_steps());
                if done || slot.actions.len() >= cap {
                    slot.done = true;
                }
            }

            for i in 0..self.num_envs {
                if slots[i].as_ref().is_some_and(|s| s.done) {
                    let slot = slots[i].take().unwrap();
                    let episode = slot.episode as usize;
                    results[episode] = Some(slot.finish());
                    if next_episode < episodes {
                        slots[i] = Some(self.start(i, next_episode, policy, root, &source)?);
                        next_episode += 1;
                    }
                }
            }
        }
        Ok(results.into_iter().map(|r| r.unwrap()).collect())
    }

    fn start(
        &self,
        slot: usize,
        episode: u64,
        policy: &mut dyn Policy,
        root: &RandomStream,
        source: &Source<'_>,
    ) -> Result<Slot, PoolError> {
        let mut world = self.prototype.clone_world();
        let (state, variation) = match source {
            Source::Sampled(options) => world
                .reset(&root.split(2 * episode), options)
                .map_err(|e| PoolError::World { episode, source: e })?,
            Source::Restored(points) => {
                let p = &points[episode as usize];
                world
                    .restore(p.state.clone(), p.variation.clone(), p.goal.clone())
                    .map_err(|e| PoolError::World { episode, source: e })?;
                (p.state.clone(), p.variation.clone())
            }
        };
        let goal = world.goal().clone();
        policy
            .on_reset(slot, episode, root.split(2 * episode + 1), &variation, &goal)
            .map_err(|e| PoolError::Policy { episode, source: e })?;
        Ok(Slot {
            world,
            episode,
            states: vec![state.clone()],
            state,
            goal,
            variation,
            actions: Vec::new(),
            terminated: Vec::new(),
            latencies: Vec::new(),
            done: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::make_rng;
    use crate::policy::{ExpertPolicy, MpcConfig, MpcPolicy, RandomPolicy};
    use crate::solvers::{CemConfig, SolverSpec};
    use crate::worlds::make_world;

    fn records_match(a: &[EpisodeRecord], b: &[EpisodeRecord]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.episode == y.episode
                    && x.states == y.states
                    && x.actions == y.actions
                    && x.terminated == y.terminated
                    && x.goal == y.goal
                    && x.variation == y.variation
                    && x.success == y.success
                    && x.steps == y.steps
            })
    }

    #[test]
    fn pool_width_never_changes_what_an_episode_contains() {
        let world = make_world("tworoom").unwrap();
        let root = make_rng(91);
        let options = ResetOptions::sample_all();
        let mut runs = Vec::new();
        for width in [1usize, 3, 8] {
            let pool = EnvPool::new(world.as_ref(), width).unwrap();
            let mut policy = RandomPolicy::new(make_rng(7), world.action_space());
            let records = pool
                .run(&mut policy, 12, 40, &root, &options)
                .unwrap();
            runs.push(records);
        }
        assert!(records_match(&runs[0], &runs[1]));
        assert!(records_match(&runs[0], &runs[2]));
    }

    #[test]
    fn mpc_episodes_are_width_independent_too() {
        let world = make_world("tworoom").unwrap();
        let root = make_rng(33);
        let spec = SolverSpec::Cem(CemConfig {
            num_candidates: 60,
            iterations: 4,
            num_elites: 8,
            scale: 0.6,
        });
        let cfg = MpcConfig {
            horizon: 8,
            replan_every: 4,
            warm_start: true,
        };
        let mut runs = Vec::new();
        for width in [1usize, 2] {
            let pool = EnvPool::new(world.as_ref(), width).unwrap();
            let mut policy = MpcPolicy::new(world.as_ref(), spec.clone(), cfg.clone()).unwrap();
            let records = pool
                .run(&mut policy, 4, 30, &root, &ResetOptions::default())
                .unwrap();
            runs.push(records);
        }
        assert!(records_match(&runs[0], &runs[1]));
    }

    #[test]
    fn auto_reset_serves_every_ordinal_exactly_once() {
        let world = make_world("gridworld").unwrap();
        let pool = EnvPool::new(world.as_ref(), 3).unwrap();
        let mut policy = ExpertPolicy::for_world(world.as_ref());
        let records = pool
            .run(
                &mut policy,
                7,
                200,
                &make_rng(5),
                &ResetOptions::sample_all(),
            )
            .unwrap();
        assert_eq!(records.len(), 7);
        for (e, r) in records.iter().enumerate() {
            assert_eq!(r.episode, e as u64);
            assert_eq!(r.states.len(), r.steps + 1);
            assert_eq!(r.terminated.len(), r.steps);
            assert_eq!(r.latencies.len(), r.steps);
            assert!(r.success, "gridworld expert should finish episode {e}");
        }
    }

    #[test]
    fn the_step_cap_truncates_and_reports_failure() {
        let world = make_world("tworoom").unwrap();
        let pool = EnvPool::new(world.as_ref(), 2).unwrap();
        let mut policy = RandomPolicy::new(make_rng(3), world.action_space());
        let records = pool
            .run(
                &mut policy,
                4,
                5,
                &make_rng(11),
                &ResetOptions::default(),
            )
            .unwrap();
        for r in &records {
            assert_eq!(r.steps, 5);
            assert!(!r.success);
        }
    }

    #[test]
    fn restored_episodes_resume_from_the_stored_situation() {
        let world = make_world("tworoom").unwrap();
        let pool = EnvPool::new(world.as_ref(), 2).unwrap();
        let mut expert = ExpertPolicy::for_world(world.as_ref());
        let records = pool
            .run(
                &mut expert,
                3,
                100,
                &make_rng(21),
                &ResetOptions::sample_all(),
            )
            .unwrap();
        let points: Vec<RestorePoint> = records
            .iter()
            .filter(|r| r.success)
            .map(|r| RestorePoint {
                state: r.states[1].clone(),
                variation: r.variation.clone(),
                goal: r.goal.clone(),
            })
            .collect();
        assert!(!points.is_empty());
        let resumed = pool
            .run_restored(&mut expert, &points, 100, &make_rng(22))
            .unwrap();
        for (r, p) in resumed.iter().zip(&points) {
            assert_eq!(r.states[0], p.state);
            assert_eq!(r.goal, p.goal);
            assert_eq!(r.variation, p.variation);
            assert!(r.success, "expert should still finish after a resume");
        }
    }

    #[test]
    fn zero_width_pools_are_rejected() {
        let world = make_world("pendulum").unwrap();
        assert!(matches!(
            EnvPool::new(world.as_ref(), 0),
            Err(PoolError::BadRequest(_))
        ));
    }
}
