//! Analytic control worlds: a walled two-room navigator, a torque-limited
//! pendulum, and a discrete gridworld. Each exposes a success predicate, a
//! differentiable cost model for its goal, and named factors of variation
//! sampled at reset and held fixed per episode.

pub mod gridworld;
pub mod pendulum;
pub mod point_mass;
pub mod tworoom;
pub mod variation;

use thiserror::Error;

use crate::core::{ContinuousActionSpace, CostModel, DynamicsModel, RandomStream, StateVec};

pub use gridworld::Gridworld;
pub use pendulum::Pendulum;
pub use point_mass::PointMassModel;
pub use tworoom::TwoRoom;
pub use variation::{
    sample_variation, Constraint, FactorKind, FactorSpec, FactorValues, ResetOptions,
    VariationRequest, VariationSpace,
};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("unknown factor key {key:?}")]
    UnknownFactor { key: String },
    #[error("factor {key:?} expects {expected} value(s), got {found}")]
    FactorDimMismatch {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("pinned value for {key:?} is outside the factor's bounds")]
    ValueOutOfBounds { key: String },
    #[error("could not satisfy constraint {name:?} after {retries} attempts")]
    ConstraintExhausted { name: &'static str, retries: usize },
    #[error("unknown world {name:?}")]
    UnknownWorld { name: String },
    #[error("bad action: {0}")]
    BadAction(String),
    #[error("bad state: {0}")]
    BadState(String),
}

/// A single action for either action-space family.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

#[derive(Clone, Debug)]
pub enum ActionSpaceKind {
    Continuous(ContinuousActionSpace),
    Discrete(usize),
}

impl ActionSpaceKind {
    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpaceKind::Discrete(_))
    }
}

/// One interactive environment. Transitions are deterministic given the
/// state, the action, and the episode's factor values; all randomness enters
/// through `reset`.
pub trait WorldInstance: Send {
    fn id(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpaceKind;
    /// Episode length cap used by the evaluation harness.
    fn max_steps(&self) -> usize;
    fn variation_space(&self) -> VariationSpace;

    /// Sample factor values, reset the internal state, and return the initial
    /// state together with the applied factors.
    fn reset(
        &mut self,
        rng: &RandomStream,
        options: &ResetOptions,
    ) -> Result<(StateVec, FactorValues), WorldError>;

    /// Restore an exact (state, variation, goal) snapshot, e.g. one read back
    /// from a dataset.
    fn restore(
        &mut self,
        state: StateVec,
        variation: FactorValues,
        goal: StateVec,
    ) -> Result<(), WorldError>;

    /// Advance one step. Returns the new state and whether the episode
    /// terminated (success).
    fn step(&mut self, action: &Action) -> Result<(StateVec, bool), WorldError>;

    fn state(&self) -> &StateVec;
    fn goal(&self) -> &StateVec;
    fn success(&self, state: &StateVec, goal: &StateVec) -> bool;

    /// Planning model for the current episode's factors: batched rollout
    /// costs on the true dynamics plus whatever gradient structure the world
    /// supports.
    fn cost_model(&self, goal: &StateVec) -> Box<dyn CostModel + Send + Sync>;

    /// Single-step predictor for solvers that need one, on the world's
    /// differentiable (surrogate) dynamics. None for discrete worlds.
    fn dynamics_model(&self, goal: &StateVec) -> Option<Box<dyn DynamicsModel + Send + Sync>>;

    fn clone_world(&self) -> Box<dyn WorldInstance>;
}

pub const WORLD_NAMES: [&str; 3] = ["tworoom", "pendulum", "gridworld"];

pub fn make_world(name: &str) -> Result<Box<dyn WorldInstance>, WorldError> {
    match name {
        "tworoom" => Ok(Box::new(TwoRoom::new())),
        "pendulum" => Ok(Box::new(Pendulum::new())),
        "gridworld" => Ok(Box::new(Gridworld::new())),
        other => Err(WorldError::UnknownWorld {
            name: other.to_string(),
        }),
    }
}
