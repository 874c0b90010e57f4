//! Shared planning primitives: action spaces, plans, cost-model traits, and
//! deterministic random streams.

pub mod cost;
pub mod rng;
pub mod seq;
pub mod space;

pub use cost::{
    finite_difference_gradient, parallel_costs, CostModel, DynamicsModel, FiniteDifference,
    SolverResult, DEFAULT_FD_STEP,
};
pub use rng::{make_rng, RandomStream};
pub use seq::{ActionSequence, StateVec};
pub use space::{ContinuousActionSpace, DiscreteActionSpace, SpaceError};
