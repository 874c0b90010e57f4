//! Action-selection policies: uniform random, scripted experts for dataset
//! generation, and the receding-horizon wrapper that turns any solver into a
//! controller. One policy instance serves a whole environment pool; slots are
//! keyed by env index and re-armed through `on_reset` with that episode's
//! stream, which keeps behavior independent of pool width.

use rayon::prelude::*;
use thiserror::Error;

use crate::core::{
    ActionSequence, ContinuousActionSpace, CostModel, DiscreteActionSpace, DynamicsModel,
    RandomStream, StateVec,
};
use crate::solvers::{self, SolverError, SolverSpec};
use crate::worlds::{
    gridworld, pendulum, tworoom, Action, ActionSpaceKind, FactorValues, WorldError, WorldInstance,
};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no policy support for world {0:?}")]
    UnsupportedWorld(String),
    #[error("solver failed at env {env_index}, step {step}: {source}")]
    Solver {
        env_index: usize,
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error("{0} needs a dynamics model this world does not provide")]
    NoDynamics(&'static str),
    #[error("env {0} was asked for an action before its first reset")]
    NotReset(usize),
    #[error("could not build planning models: {0}")]
    Model(#[from] WorldError),
    #[error("bad policy config: {0}")]
    BadConfig(String),
}

/// Per-environment view handed to a policy each step.
pub struct StepInfo<'a> {
    pub state: &'a StateVec,
    pub goal: &'a StateVec,
    pub variation: &'a FactorValues,
    pub step: usize,
    pub env_index: usize,
}

pub trait Policy: Send {
    /// Arms `slot` for a fresh episode; `episode` is the global episode
    /// ordinal and `stream` the episode's policy stream, which must be the
    /// only randomness the slot consumes.
    fn on_reset(
        &mut self,
        slot: usize,
        episode: u64,
        stream: RandomStream,
        variation: &FactorValues,
        goal: &StateVec,
    ) -> Result<(), PolicyError> {
        let _ = (slot, episode, stream, variation, goal);
        Ok(())
    }

    /// One action per entry of `infos`, in the same order.
    fn get_actions(&mut self, infos: &[StepInfo]) -> Result<Vec<Action>, PolicyError>;
}

/// Uniform over the action space, one independent draw per step.
pub struct RandomPolicy {
    space: ActionSpaceKind,
    root: RandomStream,
    slots: Vec<Option<RandomStream>>,
}

impl RandomPolicy {
    pub fn new(root: RandomStream, space: ActionSpaceKind) -> Self {
        Self {
            space,
            root,
            slots: Vec::new(),
        }
    }

    fn stream_for(&mut self, slot: usize) -> &RandomStream {
        if slot >= self.slots.len() {
            self.slots.resize_with(slot + 1, || None);
        }
        let root = &self.root;
        self.slots[slot].get_or_insert_with(|| root.split(slot as u64))
    }
}

impl Policy for RandomPolicy {
    fn on_reset(
        &mut self,
        slot: usize,
        _episode: u64,
        stream: RandomStream,
        _variation: &FactorValues,
        _goal: &StateVec,
    ) -> Result<(), PolicyError> {
        if slot >= self.slots.len() {
            self.slots.resize_with(slot + 1, || None);
        }
        self.slots[slot] = Some(stream);
        Ok(())
    }

    fn get_actions(&mut self, infos: &[StepInfo]) -> Result<Vec<Action>, PolicyError> {
        let mut actions = Vec::with_capacity(infos.len());
        for info in infos {
            let mut draw = self.stream_for(info.env_index).split(info.step as u64);
            let action = match &self.space {
                ActionSpaceKind::Continuous(space) => Action::Continuous(
                    (0..space.dims())
                        .map(|d| draw.uniform_in(space.low()[d], space.high()[d]))
                        .collect(),
                ),
                ActionSpaceKind::Discrete(n) => Action::Discrete(draw.choice(*n)),
            };
            actions.push(action);
        }
        Ok(actions)
    }
}

/// Scripted controllers, one per shipped world, dispatched by world id.
pub struct ExpertPolicy {
    world_id: String,
}

impl ExpertPolicy {
    pub fn new(world_id: &str) -> Result<Self, PolicyError> {
        if !crate::worlds::WORLD_NAMES.contains(&world_id) {
            return Err(PolicyError::UnsupportedWorld(world_id.to_string()));
        }
        Ok(Self {
            world_id: world_id.to_string(),
        })
    }

    pub fn for_world(world: &dyn WorldInstance) -> Self {
        Self {
            world_id: world.id().to_string(),
        }
    }
}

impl Policy for ExpertPolicy {
    fn get_actions(&mut self, infos: &[StepInfo]) -> Result<Vec<Action>, PolicyError> {
        infos
            .iter()
            .map(|info| match self.world_id.as_str() {
                "tworoom" => Ok(Action::Continuous(
                    tworoom::expert_action(info.variation, info.state, info.goal).to_vec(),
                )),
                "pendulum" => Ok(Action::Continuous(vec![pendulum::expert_action(
                    info.variation,
                    info.state,
                    info.goal,
                )])),
                "gridworld" => Ok(Action::Discrete(gridworld::expert_action(
                    info.variation,
                    info.state,
                    info.goal,
                ))),
                other => Err(PolicyError::UnsupportedWorld(other.to_string())),
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Actions executed from each solve before replanning.
    pub replan_every: usize,
    pub warm_start: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            replan_every: 1,
            warm_start: true,
        }
    }
}

/// Shifts a finished plan left by `executed` steps and pads the tail with
/// mid-range actions: zeros for a continuous space, uniform rows for
/// probability rows over a discrete space.
pub fn warm_start_shift(
    plan: &ActionSequence,
    executed: usize,
    space: &ActionSpaceKind,
) -> ActionSequence {
    let horizon = plan.horizon();
    let keep = horizon.saturating_sub(executed);
    let mut next = match space {
        ActionSpaceKind::Continuous(_) => ActionSequence::zeros(horizon, plan.dims()),
        ActionSpaceKind::Discrete(n) => ActionSequence::uniform_rows(horizon, *n),
    };
    for t in 0..keep {
        for d in 0..plan.dims() {
            next.values_mut()[[t, d]] = plan.values()[[t + executed, d]];
        }
    }
    next
}

struct MpcSlot {
    stream: RandomStream,
    space: ActionSpaceKind,
    cost: Box<dyn CostModel + Send + Sync>,
    dynamics: Option<Box<dyn DynamicsModel + Send + Sync>>,
    goal: StateVec,
    plan: Option<ActionSequence>,
    executed_from_plan: usize,
    solves: u64,
}

/// Receding-horizon control: solve, execute `replan_every` actions, repeat.
pub struct MpcPolicy {
    prototype: Box<dyn WorldInstance>,
    spec: SolverSpec,
    cfg: MpcConfig,
    slots: Vec<Option<MpcSlot>>,
}

impl MpcPolicy {
    pub fn new(
        world: &dyn WorldInstance,
        spec: SolverSpec,
        cfg: MpcConfig,
    ) -> Result<Self, PolicyError> {
        if cfg.horizon == 0 {
            return Err(PolicyError::BadConfig("horizon must be >= 1".into()));
        }
        if cfg.replan_every == 0 || cfg.replan_every > cfg.horizon {
            return Err(PolicyError::BadConfig(format!(
                "replan_every must lie in 1..={}, got {}",
                cfg.horizon, cfg.replan_every
            )));
        }
        let discrete_world = world.action_space().is_discrete();
        if spec.is_discrete() != discrete_world {
            return Err(PolicyError::BadConfig(format!(
                "solver {} does not fit this world's action space",
                spec.name()
            )));
        }
        Ok(Self {
            prototype: world.clone_world(),
            spec,
            cfg,
            slots: Vec::new(),
        })
    }

    /// Solver calls issued so far in each slot's current episode.
    pub fn solve_counts(&self) -> Vec<u64> {
        self.slots
            .iter()
            .map(|s| s.as_ref().map_or(0, |s| s.solves))
            .collect()
    }
}

impl Policy for MpcPolicy {
    fn on_reset(
        &mut self,
        slot: usize,
        _episode: u64,
        stream: RandomStream,
        variation: &FactorValues,
        goal: &StateVec,
    ) -> Result<(), PolicyError> {
        let mut proto = self.prototype.clone_world();
        proto.restore(goal.clone(), variation.clone(), goal.clone())?;
        let dynamics = proto.dynamics_model(goal);
        if matches!(self.spec, SolverSpec::Grasp(_)) && dynamics.is_none() {
            return Err(PolicyError::NoDynamics("grasp"));
        }
        if slot >= self.slots.len() {
            self.slots.resize_with(slot + 1, || None);
        }
        self.slots[slot] = Some(MpcSlot {
            stream,
            space: proto.action_space(),
            cost: proto.cost_model(goal),
            dynamics,
            goal: goal.clone(),
            plan: None,
            executed_from_plan: 0,
            solves: 0,
        });
        Ok(())
    }

    fn get_actions(&mut self, infos: &[StepInfo]) -> Result<Vec<Action>, PolicyError> {
        for info in infos {
            if self
                .slots
                .get(info.env_index)
                .map_or(true, |s| s.is_none())
            {
                return Err(PolicyError::NotReset(info.env_index));
            }
        }
        let spec = &self.spec;
        let cfg = &self.cfg;
        let slots = &mut self.slots;
        let mut by_slot: Vec<Option<&StepInfo>> = vec![None; slots.len()];
        for info in infos {
            by_slot[info.env_index] = Some(info);
        }
        let results: Vec<(usize, Result<Action, PolicyError>)> = slots
            .par_iter_mut()
            .enumerate()
            .filter_map(|(i, slot)| {
                by_slot[i].map(|info| (i, slot.as_mut().expect("checked above"), info))
            })
            .map(|(i, slot, info)| (i, step_slot(slot, info, spec, cfg)))
            .collect();

        let mut by_env: Vec<Option<Action>> = vec![None; slots.len()];
        for (i, result) in results {
            by_env[i] = Some(result?);
        }
        Ok(infos
            .iter()
            .map(|info| by_env[info.env_index].take().expect("one result per env"))
            .collect())
    }
}

fn step_slot(
    slot: &mut MpcSlot,
    info: &StepInfo,
    spec: &SolverSpec,
    cfg: &MpcConfig,
) -> Result<Action, PolicyError> {
    if slot.plan.is_none() || slot.executed_from_plan == cfg.replan_every {
        let init = if cfg.warm_start {
            slot.plan
                .take()
                .map(|plan| warm_start_shift(&plan, cfg.replan_every, &slot.space))
        } else {
            None
        };
        let mut rng = slot.stream.split(slot.solves);
        let plan = solve(slot, info.state, init.as_ref(), spec, cfg.horizon, &mut rng).map_err(
            |source| PolicyError::Solver {
                env_index: info.env_index,
                step: info.step,
                source,
            },
        )?;
        slot.plan = Some(plan);
        slot.executed_from_plan = 0;
        slot.solves += 1;
    }
    let plan = slot.plan.as_ref().expect("solved above");
    let t = slot.executed_from_plan;
    slot.executed_from_plan += 1;
    Ok(match &slot.space {
        ActionSpaceKind::Continuous(_) => {
            Action::Continuous(plan.values().row(t).iter().copied().collect())
        }
        ActionSpaceKind::Discrete(_) => Action::Discrete(plan.decode_rows()[t]),
    })
}

fn solve(
    slot: &MpcSlot,
    state: &StateVec,
    init: Option<&ActionSequence>,
    spec: &SolverSpec,
    horizon: usize,
    rng: &mut RandomStream,
) -> Result<ActionSequence, SolverError> {
    let model = slot.cost.as_ref();
    match (&slot.space, spec) {
        (ActionSpaceKind::Continuous(space), _) => {
            continuous_solve(slot, model, state, space, init, spec, horizon, rng)
        }
        (ActionSpaceKind::Discrete(n), SolverSpec::CategoricalCem(c)) => {
            let space = DiscreteActionSpace::new(*n);
            solvers::categorical_cem(model, state, &space, horizon, c, init, rng)
                .map(|r| r.best_sequence)
        }
        (ActionSpaceKind::Discrete(n), SolverSpec::Pgd(c)) => {
            let space = DiscreteActionSpace::new(*n);
            solvers::projected_gradient(model, state, &space, horizon, c, init, rng)
                .map(|(_, relaxed)| relaxed)
        }
        (ActionSpaceKind::Discrete(_), other) => Err(SolverError::BadConfig(format!(
            "solver {} cannot plan over a discrete space",
            other.name()
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn continuous_solve(
    slot: &MpcSlot,
    model: &dyn CostModel,
    state: &StateVec,
    space: &ContinuousActionSpace,
    init: Option<&ActionSequence>,
    spec: &SolverSpec,
    horizon: usize,
    rng: &mut RandomStream,
) -> Result<ActionSequence, SolverError> {
    match spec {
        SolverSpec::PredictiveSampling(c) => {
            solvers::predictive_sampling(model, state, space, horizon, c, init, rng)
                .map(|r| r.best_sequence)
        }
        SolverSpec::Cem(c) => {
            solvers::cem(model, state, space, horizon, c, init, rng).map(|r| r.best_sequence)
        }
        SolverSpec::Mppi(c) => {
            solvers::mppi(model, state, space, horizon, c, init, rng).map(|r| r.best_sequence)
        }
        SolverSpec::Icem(c) => {
            solvers::icem(model, state, space, horizon, c, init, rng).map(|r| r.best_sequence)
        }
        SolverSpec::Gd(c) => {
            solvers::gd(model, state, space, horizon, c, init, rng).map(|r| r.best_sequence)
        }
        SolverSpec::Lagrangian(c) => {
            solvers::lagrangian(model, state, space, horizon, c, init, rng)
                .map(|(r, _)| r.best_sequence)
        }
        SolverSpec::Grasp(c) => {
            let dynamics = slot
                .dynamics
                .as_ref()
                .ok_or(SolverError::MissingModelPiece("dynamics model"))?;
            solvers::grasp(
                dynamics.as_ref(),
                state,
                &slot.goal,
                space,
                horizon,
                c,
                init,
                rng,
            )
            .map(|(r, _)| r.best_sequence)
        }
        SolverSpec::CategoricalCem(_) | SolverSpec::Pgd(_) => Err(SolverError::BadConfig(format!(
            "solver {} cannot plan over a continuous space",
            spec.name()
        ))),
    }
}
