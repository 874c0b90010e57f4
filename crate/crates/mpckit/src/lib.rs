//! Sampling- and gradient-based trajectory optimizers, a small set of toy
//! control worlds with controlled variation, and a reproducible evaluation
//! harness around them.
//!
//! The crate is organized around a few traits: [`core::CostModel`] scores
//! batches of action sequences, [`core::DynamicsModel`] adds single-step
//! prediction and action Jacobians for gradient-based planners. Solvers in
//! [`solvers`] consume those plus an action space and a splittable random
//! stream, so identical seeds give identical plans regardless of thread
//! count.

pub mod cli;
pub mod core;
pub mod data;
pub mod eval;
pub mod noise;
pub mod policy;
pub mod pool;
pub mod solvers;
pub mod worlds;
