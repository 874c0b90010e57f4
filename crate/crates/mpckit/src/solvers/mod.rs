//! Trajectory optimizers. All of them share the same contract: candidates
//! are sampled (or stepped) on the caller's random stream before any batched
//! cost evaluation, evaluated candidates always lie inside the action bounds,
//! cost ties resolve to the lowest candidate index, and identical
//! (seed, config, model) inputs give bit-identical results regardless of how
//! the cost batch is parallelized.

pub mod categorical;
pub mod gradient;
pub mod grasp;
pub mod sampling;
pub mod simplex;

use ndarray::Array2;
use thiserror::Error;

use crate::core::SpaceError;

pub use categorical::{categorical_cem, CategoricalCemConfig};
pub use gradient::{gd, lagrangian, projected_gradient, GradientConfig, LagrangianConfig};
pub use grasp::{grasp, GraspConfig, GraspTrace, Schedule};
pub use sampling::{
    cem, icem, mppi, predictive_sampling, CemConfig, IcemConfig, MppiConfig,
    PredictiveSamplingConfig,
};
pub use simplex::project_simplex;

/// Refit standard deviations never collapse below this once sampling noise
/// was nonzero; an explicitly zero sigma stays zero (degenerate runs must
/// return their init bit-exactly).
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("every candidate cost was non-finite")]
    AllCostsNonFinite,
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
    #[error("model has no cost_and_grad; wrap it in a FiniteDifference adapter")]
    NotDifferentiable,
    #[error("model exposes no {0}")]
    MissingModelPiece(&'static str),
    #[error("bad solver config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Replace non-finite costs with +inf so ordering stays total; error only
/// when nothing finite survives.
pub(crate) fn sanitize_costs(costs: &mut [f64]) -> Result<(), SolverError> {
    let mut any_finite = false;
    for c in costs.iter_mut() {
        if c.is_finite() {
            any_finite = true;
        } else {
            *c = f64::INFINITY;
        }
    }
    if any_finite || costs.is_empty() {
        Ok(())
    } else {
        Err(SolverError::AllCostsNonFinite)
    }
}

/// First index attaining the minimum (lowest index wins ties).
pub(crate) fn argmin(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = i;
        }
    }
    best
}

/// Indices of the `count` lowest costs, ordered by increasing cost with
/// index as the tiebreaker.
pub(crate) fn elite_indices(costs: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        costs[a]
            .partial_cmp(&costs[b])
            .expect("costs are sanitized")
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

/// Exponential softmin weights exp(-(C_i - C_min)/temperature), normalized.
pub fn softmin_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = costs
        .iter()
        .map(|&c| (-(c - min) / temperature).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Elite refit in incremental form: mean = around + avg(elite - around),
/// std = population standard deviation about the new mean (divide by E).
/// The incremental mean preserves `around` bit-exactly when every elite
/// equals it.
pub fn refit_gaussian(elites: &[&Array2<f64>], around: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let e = elites.len() as f64;
    let mut delta = Array2::zeros(around.raw_dim());
    for elite in elites {
        delta += &(*elite - around);
    }
    delta /= e;
    let mean = around + &delta;
    let mut var = Array2::zeros(around.raw_dim());
    for elite in elites {
        let d = *elite - &mean;
        var += &(&d * &d);
    }
    var /= e;
    (mean, var.mapv(f64::sqrt))
}

/// Apply the sigma floor: dimensions that sampled with nonzero sigma are
/// floored, explicitly-zero dimensions stay zero.
pub(crate) fn floor_sigma(refit: &mut Array2<f64>, sampling: &Array2<f64>) {
    for (r, &s) in refit.iter_mut().zip(sampling.iter()) {
        if s != 0.0 {
            *r = r.max(SIGMA_FLOOR);
        }
    }
}

/// Which solver to run, with its configuration. This is what policies and
/// the CLI carry around.
#[derive(Clone, Debug)]
pub enum SolverSpec {
    PredictiveSampling(PredictiveSamplingConfig),
    Cem(CemConfig),
    Mppi(MppiConfig),
    Icem(IcemConfig),
    CategoricalCem(CategoricalCemConfig),
    Gd(GradientConfig),
    Pgd(GradientConfig),
    Lagrangian(LagrangianConfig),
    Grasp(GraspConfig),
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::PredictiveSampling(_) => "predictive_sampling",
            SolverSpec::Cem(_) => "cem",
            SolverSpec::Mppi(_) => "mppi",
            SolverSpec::Icem(_) => "icem",
            SolverSpec::CategoricalCem(_) => "categorical_cem",
            SolverSpec::Gd(_) => "gd",
            SolverSpec::Pgd(_) => "pgd",
            SolverSpec::Lagrangian(_) => "lagrangian",
            SolverSpec::Grasp(_) => "grasp",
        }
    }

    /// True for solvers that plan over probability rows of a discrete space.
    pub fn is_discrete(&self) -> bool {
        matches!(self, SolverSpec::CategoricalCem(_) | SolverSpec::Pgd(_))
    }
}
